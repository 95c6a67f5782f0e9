#include "d2v/num/tensor.h"

#include <cmath>
#include <numeric>
#include <sstream>

#include "d2v/error.h"

namespace d2v::num {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_) D2V_REQUIRE(d > 0, "tensor dimensions must be positive");
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) D2V_REQUIRE(d > 0, "tensor dimensions must be positive");
  D2V_REQUIRE(shape_size(shape_) == data_.size(),
              "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                  shape_str(shape_));
}

Tensor Tensor::row(std::vector<double> values) {
  const auto n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::column(std::vector<double> values) {
  const auto n = values.size();
  return Tensor({n, 1}, std::move(values));
}

std::size_t Tensor::rows() const {
  D2V_REQUIRE(shape_.size() == 2, "rows() on non-matrix tensor " + shape_str(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  D2V_REQUIRE(shape_.size() == 2, "cols() on non-matrix tensor " + shape_str(shape_));
  return shape_[1];
}

std::span<const double> Tensor::row_span(std::size_t r) const {
  const auto c = cols();
  return {data_.data() + r * c, c};
}

std::span<double> Tensor::row_span(std::size_t r) {
  const auto c = cols();
  return {data_.data() + r * c, c};
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor xavier_uniform(std::size_t fan_out, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t = Tensor::matrix(fan_out, fan_in);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

Parameter& ParameterStore::add(const std::string& name, Tensor init) {
  D2V_REQUIRE(!contains(name), "duplicate parameter name: " + name);
  D2V_REQUIRE(init.size() > 0, "empty parameter: " + name);
  index_.emplace(name, params_.size());
  params_.push_back(std::make_unique<Parameter>(Parameter{name, std::move(init), {}}));
  return *params_.back();
}

Parameter& ParameterStore::add_xavier(const std::string& name, std::size_t fan_out,
                                      std::size_t fan_in, std::mt19937_64& rng) {
  return add(name, xavier_uniform(fan_out, fan_in, rng));
}

Parameter& ParameterStore::add_zeros(const std::string& name, Shape shape) {
  return add(name, Tensor(std::move(shape), 0.0));
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return *params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return *params_[it->second];
}

std::size_t ParameterStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) p->zero_grad();
}

void ParameterStore::clear_grads() {
  for (auto& p : params_) p->clear_grad();
}

std::vector<Tensor> ParameterStore::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterStore::restore(const std::vector<Tensor>& values) {
  D2V_REQUIRE(values.size() == params_.size(), "snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    D2V_REQUIRE(values[i].shape() == params_[i]->value.shape(),
                "snapshot shape mismatch for " + params_[i]->name);
    params_[i]->value = values[i];
  }
}

}  // namespace d2v::num
