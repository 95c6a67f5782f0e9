#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "d2v/num/tape.h"
#include "d2v/num/tensor.h"

namespace d2v::enc {

// Affine map y = x W^T + b with W stored [out, in].
class Linear {
 public:
  Linear() = default;
  Linear(num::ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng,
         bool bias = true);

  num::Var operator()(num::Tape& tape, num::Var x) const;
  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }
  num::Parameter& weight() const { return *w_; }
  num::Parameter* bias() const { return b_; }

 private:
  num::Parameter* w_ = nullptr;
  num::Parameter* b_ = nullptr;
  std::size_t in_ = 0, out_ = 0;
};

// Stack of Linear layers with ReLU between them; the last layer is linear.
class Mlp {
 public:
  Mlp() = default;
  Mlp(num::ParameterStore& store, const std::string& name, std::size_t in, std::span<const std::size_t> widths,
      std::mt19937_64& rng, bool relu_last = false);

  num::Var operator()(num::Tape& tape, num::Var x) const;
  std::size_t out_dim() const { return layers_.back().out_dim(); }
  std::size_t depth() const { return layers_.size(); }

 private:
  std::vector<Linear> layers_;
  bool relu_last_ = false;
};

// Single-layer LSTM (gate order i, f, g, o; sigmoid gates, tanh cell).
class Lstm {
 public:
  Lstm() = default;
  Lstm(num::ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::mt19937_64& rng);

  // Runs over variable-length sequences stored back to back in the rows of
  // `inputs`; offsets delimit the sequences. Returns the hidden state for
  // every input row, in input row order. With reverse=true each sequence is
  // consumed from its last row to its first. Sequences are batched across
  // time steps, longest first.
  num::Var run(num::Tape& tape, num::Var inputs, std::span<const std::size_t> offsets, bool reverse = false) const;

  std::size_t hidden() const { return hidden_; }
  std::size_t in_dim() const { return in_; }

 private:
  num::Parameter* w_x_ = nullptr;
  num::Parameter* w_h_ = nullptr;
  num::Parameter* b_ = nullptr;
  std::size_t in_ = 0, hidden_ = 0;
};

// Forward and backward LSTMs whose per-step outputs are concatenated.
class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(num::ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::mt19937_64& rng);

  num::Var run(num::Tape& tape, num::Var inputs, std::span<const std::size_t> offsets) const;
  std::size_t out_dim() const { return 2 * forward_.hidden(); }

 private:
  Lstm forward_;
  Lstm backward_;
};

// Offsets of the final row of each sequence, i.e. offsets[s+1]-1.
std::vector<std::size_t> last_rows(std::span<const std::size_t> offsets);

}  // namespace d2v::enc
