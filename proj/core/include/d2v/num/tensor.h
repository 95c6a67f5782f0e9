#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace d2v::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array of doubles. Most of the library works with rank-2
// tensors; a vector is stored as [1, n] or [n, 1] as the op requires.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor row(std::vector<double> values);
  static Tensor column(std::vector<double> values);
  static Tensor scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }
  std::span<const double> row_span(std::size_t r) const;
  std::span<double> row_span(std::size_t r);

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// A trainable tensor. `grad` is empty until a backward pass populates it.
struct Parameter {
  std::string name;
  Tensor value;
  std::vector<double> grad;

  bool has_grad() const { return grad.size() == value.size(); }
  void zero_grad() { grad.assign(value.size(), 0.0); }
  void clear_grad() { grad.clear(); }
};

// Owns a model's parameters in insertion order, addressable by name.
// Parameter addresses are stable for the lifetime of the store.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Tensor init);
  // Xavier-uniform init for a [fan_out, fan_in] weight matrix.
  Parameter& add_xavier(const std::string& name, std::size_t fan_out, std::size_t fan_in,
                        std::mt19937_64& rng);
  Parameter& add_zeros(const std::string& name, Shape shape);

  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grads();
  void clear_grads();

  // Copies values only; shapes and names must match.
  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

Tensor xavier_uniform(std::size_t fan_out, std::size_t fan_in, std::mt19937_64& rng);

}  // namespace d2v::num
