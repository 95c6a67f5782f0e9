#include "d2v/enc/layers.h"

#include <algorithm>
#include <numeric>

#include "d2v/error.h"

namespace d2v::enc {

using num::Tape;
using num::Var;

Linear::Linear(num::ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
               std::mt19937_64& rng, bool bias)
    : in_(in), out_(out) {
  w_ = &store.add_xavier(name + ".w", out, in, rng);
  if (bias) b_ = &store.add_zeros(name + ".b", {1, out});
}

Var Linear::operator()(Tape& tape, Var x) const {
  D2V_REQUIRE(x.cols() == in_, "Linear " + w_->name + ": expected input width " + std::to_string(in_) + ", got " +
                                   std::to_string(x.cols()));
  Var y = num::matmul_nt(x, tape.param(*w_));
  return b_ ? num::add_row(y, tape.param(*b_)) : y;
}

Mlp::Mlp(num::ParameterStore& store, const std::string& name, std::size_t in, std::span<const std::size_t> widths,
         std::mt19937_64& rng, bool relu_last)
    : relu_last_(relu_last) {
  D2V_REQUIRE(!widths.empty(), "Mlp needs at least one layer");
  std::size_t prev = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    layers_.emplace_back(store, name + "." + std::to_string(i), prev, widths[i], rng);
    prev = widths[i];
  }
}

Var Mlp::operator()(Tape& tape, Var x) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i](tape, x);
    if (i + 1 < layers_.size() || relu_last_) x = num::relu(x);
  }
  return x;
}

Lstm::Lstm(num::ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden,
           std::mt19937_64& rng)
    : in_(in), hidden_(hidden) {
  w_x_ = &store.add_xavier(name + ".w_x", 4 * hidden, in, rng);
  w_h_ = &store.add_xavier(name + ".w_h", 4 * hidden, hidden, rng);
  b_ = &store.add_zeros(name + ".b", {1, 4 * hidden});
}

Var Lstm::run(Tape& tape, Var inputs, std::span<const std::size_t> offsets, bool reverse) const {
  D2V_REQUIRE(inputs.cols() == in_, "Lstm: expected input width " + std::to_string(in_));
  D2V_REQUIRE(offsets.size() >= 2 && offsets.front() == 0 && offsets.back() == inputs.rows(),
              "Lstm: offsets must cover the input rows");
  const std::size_t n_seq = offsets.size() - 1;
  std::vector<std::size_t> len(n_seq);
  for (std::size_t s = 0; s < n_seq; ++s) {
    D2V_REQUIRE(offsets[s + 1] > offsets[s], "Lstm: empty sequence");
    len[s] = offsets[s + 1] - offsets[s];
  }
  std::vector<std::size_t> order(n_seq);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return len[a] > len[b]; });
  const std::size_t max_len = len[order.front()];

  // Packed layout: for each step, rows of the active sequences (a prefix of
  // `order`, since it is sorted by decreasing length).
  std::vector<std::size_t> packed;
  std::vector<std::size_t> step_offset{0}, step_count;
  packed.reserve(inputs.rows());
  for (std::size_t t = 0; t < max_len; ++t) {
    std::size_t active = 0;
    for (auto s : order) {
      if (len[s] <= t) break;
      packed.push_back(reverse ? offsets[s] + len[s] - 1 - t : offsets[s] + t);
      ++active;
    }
    step_count.push_back(active);
    step_offset.push_back(step_offset.back() + active);
  }

  const std::size_t d = hidden_;
  Var gx = num::add_row(num::matmul_nt(num::gather_rows(inputs, packed), tape.param(*w_x_)), tape.param(*b_));
  Var w_h = tape.param(*w_h_);
  std::vector<Var> hs;
  Var h, c;
  for (std::size_t t = 0; t < max_len; ++t) {
    const std::size_t n = step_count[t];
    Var gates = num::slice_rows(gx, step_offset[t], n);
    if (t > 0) gates = num::add(gates, num::matmul_nt(num::slice_rows(h, 0, n), w_h));
    Var i = num::sigmoid(num::slice_cols(gates, 0, d));
    Var f = num::sigmoid(num::slice_cols(gates, d, d));
    Var g = num::tanh(num::slice_cols(gates, 2 * d, d));
    Var o = num::sigmoid(num::slice_cols(gates, 3 * d, d));
    Var cn = num::mul(i, g);
    if (t > 0) cn = num::add(cn, num::mul(f, num::slice_rows(c, 0, n)));
    c = cn;
    h = num::mul(o, num::tanh(c));
    hs.push_back(h);
  }
  Var packed_h = hs.size() == 1 ? hs.front() : num::concat_rows(hs);
  std::vector<std::size_t> unpack(packed.size());
  for (std::size_t p = 0; p < packed.size(); ++p) unpack[packed[p]] = p;
  return num::gather_rows(packed_h, unpack);
}

BiLstm::BiLstm(num::ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden,
               std::mt19937_64& rng)
    : forward_(store, name + ".fwd", in, hidden, rng), backward_(store, name + ".bwd", in, hidden, rng) {}

Var BiLstm::run(Tape& tape, Var inputs, std::span<const std::size_t> offsets) const {
  const Var parts[] = {forward_.run(tape, inputs, offsets, false), backward_.run(tape, inputs, offsets, true)};
  return num::concat_cols(parts);
}

std::vector<std::size_t> last_rows(std::span<const std::size_t> offsets) {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) out.push_back(offsets[s + 1] - 1);
  return out;
}

}  // namespace d2v::enc
