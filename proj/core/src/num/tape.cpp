#include "d2v/num/tape.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "d2v/error.h"

namespace d2v::num {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

CMap cmap(const Tensor& t) { return CMap(t.data(), t.rows(), t.cols()); }
CMap cmap(const double* p, std::size_t r, std::size_t c) {
  return CMap(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
MMap mmap(double* p, std::size_t r, std::size_t c) {
  return MMap(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

Tape& tape_of(Var a) {
  D2V_REQUIRE(a.tape != nullptr, "variable is not bound to a tape");
  return *a.tape;
}

Tape& same_tape(Var a, Var b) {
  D2V_REQUIRE(a.tape != nullptr && a.tape == b.tape, "variables live on different tapes");
  return *a.tape;
}

void require_matrix(const Tensor& t, const char* op) {
  D2V_REQUIRE(t.rank() == 2, std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  D2V_REQUIRE(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                          " vs " + shape_str(b.shape()));
}

// Applies f elementwise and records df(x, y) for the backward pass.
template <typename F, typename DF>
Var unary(Var a, F f, DF df) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const Var in[] = {a};
  return t.record(std::move(y), in, [ia = a.id, df](Tape& tp, std::size_t self) {
    double* ga = tp.input_grad(ia);
    if (!ga) return;
    const auto& g = tp.grad_buffer(self);
    const Tensor& xv = tp.value(ia);
    const Tensor& yv = tp.value(self);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(xv[i], yv[i]);
  });
}

}  // namespace

const Tensor& Var::value() const {
  D2V_REQUIRE(tape != nullptr, "variable is not bound to a tape");
  return tape->value(id);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  for (const auto& [ptr, id] : param_nodes_)
    if (ptr == &p) return Var{this, id};
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  param_nodes_.emplace_back(&p, nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (const auto& v : inputs) {
    D2V_REQUIRE(v.tape == this, "input variable recorded on a different tape");
    needs = needs || nodes_[v.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(fn) : BackwardFn{}, nullptr, needs});
  return Var{this, nodes_.size() - 1};
}

std::vector<double>& Tape::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

double* Tape::input_grad(std::size_t id) {
  if (!nodes_[id].requires_grad) return nullptr;
  return grad_buffer(id).data();
}

std::vector<double> Tape::grad(Var v) const {
  D2V_REQUIRE(v.tape == this, "variable from a different tape");
  const auto& n = nodes_[v.id];
  if (n.grad.size() == n.value.size()) return n.grad;
  return std::vector<double>(n.value.size(), 0.0);
}

void Tape::backward(Var loss) {
  D2V_REQUIRE(loss.tape == this, "loss recorded on a different tape");
  D2V_REQUIRE(!backward_done_, "backward() already ran on this tape");
  D2V_REQUIRE(nodes_[loss.id].value.size() == 1, "backward() requires a scalar loss, got shape " +
                                                      shape_str(nodes_[loss.id].value.shape()));
  backward_done_ = true;
  if (nodes_[loss.id].requires_grad) {
    grad_buffer(loss.id)[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.backward && n.grad.size() == n.value.size()) n.backward(*this, i);
    }
  }
  for (auto& [p, id] : param_nodes_) {
    if (!p->has_grad()) p->zero_grad();
    const auto& g = nodes_[id].grad;
    if (g.size() == p->grad.size())
      for (std::size_t k = 0; k < g.size(); ++k) p->grad[k] += g[k];
  }
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_matrix(x, "matmul");
  require_matrix(y, "matmul");
  D2V_REQUIRE(x.cols() == y.rows(), "matmul: inner dimension mismatch " + shape_str(x.shape()) +
                                        " x " + shape_str(y.shape()));
  Tensor out = Tensor::matrix(x.rows(), y.cols());
  mmap(out.data(), x.rows(), y.cols()).noalias() = cmap(x) * cmap(y);
  const Var in[] = {a, b};
  return t.record(std::move(out), in, [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
    const Tensor& xv = tp.value(ia);
    const Tensor& yv = tp.value(ib);
    auto g = cmap(tp.grad_buffer(self).data(), xv.rows(), yv.cols());
    if (double* ga = tp.input_grad(ia)) mmap(ga, xv.rows(), xv.cols()).noalias() += g * cmap(yv).transpose();
    if (double* gb = tp.input_grad(ib)) mmap(gb, yv.rows(), yv.cols()).noalias() += cmap(xv).transpose() * g;
  });
}

Var matmul_nt(Var a, Var w) {
  Tape& t = same_tape(a, w);
  const Tensor& x = a.value();
  const Tensor& y = w.value();
  require_matrix(x, "matmul_nt");
  require_matrix(y, "matmul_nt");
  D2V_REQUIRE(x.cols() == y.cols(), "matmul_nt: inner dimension mismatch " + shape_str(x.shape()) +
                                        " x " + shape_str(y.shape()) + "^T");
  Tensor out = Tensor::matrix(x.rows(), y.rows());
  mmap(out.data(), x.rows(), y.rows()).noalias() = cmap(x) * cmap(y).transpose();
  const Var in[] = {a, w};
  return t.record(std::move(out), in, [ia = a.id, iw = w.id](Tape& tp, std::size_t self) {
    const Tensor& xv = tp.value(ia);
    const Tensor& wv = tp.value(iw);
    auto g = cmap(tp.grad_buffer(self).data(), xv.rows(), wv.rows());
    if (double* ga = tp.input_grad(ia)) mmap(ga, xv.rows(), xv.cols()).noalias() += g * cmap(wv);
    if (double* gw = tp.input_grad(iw)) mmap(gw, wv.rows(), wv.cols()).noalias() += g.transpose() * cmap(xv);
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  const Var in[] = {a, b};
  return t.record(std::move(out), in, [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_buffer(self);
    if (double* ga = tp.input_grad(ia))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (double* gb = tp.input_grad(ib))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

Var add_row(Var a, Var bias) {
  Tape& t = same_tape(a, bias);
  const Tensor& x = a.value();
  const Tensor& b = bias.value();
  require_matrix(x, "add_row");
  D2V_REQUIRE(b.rank() == 2 && b.rows() == 1 && b.cols() == x.cols(),
              "add_row: bias shape " + shape_str(b.shape()) + " incompatible with " + shape_str(x.shape()));
  Tensor out = x;
  const std::size_t n = x.rows(), m = x.cols();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] += b[c];
  const Var in[] = {a, bias};
  return t.record(std::move(out), in, [ia = a.id, ib = bias.id, n, m](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_buffer(self);
    if (double* ga = tp.input_grad(ia))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (double* gb = tp.input_grad(ib))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m; ++c) gb[c] += g[r * m + c];
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  const Var in[] = {a, b};
  return t.record(std::move(out), in, [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_buffer(self);
    if (double* ga = tp.input_grad(ia))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (double* gb = tp.input_grad(ib))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  const Var in[] = {a, b};
  return t.record(std::move(out), in, [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_buffer(self);
    const Tensor& xv = tp.value(ia);
    const Tensor& yv = tp.value(ib);
    if (double* ga = tp.input_grad(ia))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yv[i];
    if (double* gb = tp.input_grad(ib))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xv[i];
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var one_minus(Var a) {
  return unary(a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "softmax_rows");
  const std::size_t n = x.rows(), m = x.cols();
  Tensor out(x.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = x.data() + r * m;
    double* yr = out.data() + r * m;
    const double mx = *std::max_element(xr, xr + m);
    double z = 0.0;
    for (std::size_t c = 0; c < m; ++c) z += (yr[c] = std::exp(xr[c] - mx));
    for (std::size_t c = 0; c < m; ++c) yr[c] /= z;
  }
  const Var in[] = {a};
  return t.record(std::move(out), in, [ia = a.id, n, m](Tape& tp, std::size_t self) {
    double* ga = tp.input_grad(ia);
    if (!ga) return;
    const auto& g = tp.grad_buffer(self);
    const Tensor& y = tp.value(self);
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < m; ++c) dot += g[r * m + c] * y[r * m + c];
      for (std::size_t c = 0; c < m; ++c) ga[r * m + c] += y[r * m + c] * (g[r * m + c] - dot);
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  D2V_REQUIRE(!parts.empty(), "concat_cols: no inputs");
  Tape& t = tape_of(parts[0]);
  const std::size_t n = parts[0].value().rows();
  std::vector<std::size_t> ids, widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix(p.value(), "concat_cols");
    D2V_REQUIRE(p.value().rows() == n, "concat_cols: row count mismatch");
    ids.push_back(p.id);
    widths.push_back(p.value().cols());
    total += p.value().cols();
  }
  Tensor out = Tensor::matrix(n, total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t r = 0; r < n; ++r)
      std::copy_n(v.data() + r * widths[k], widths[k], out.data() + r * total + off);
    off += widths[k];
  }
  return t.record(std::move(out), parts, [ids, widths, n, total](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_buffer(self);
    std::size_t o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (double* gk = tp.input_grad(ids[k]))
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c) gk[r * widths[k] + c] += g[r * total + o + c];
      o += widths[k];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  D2V_REQUIRE(!parts.empty(), "concat_rows: no inputs");
  Tape& t = tape_of(parts[0]);
  const std::size_t m = parts[0].value().cols();
  std::vector<std::size_t> ids, sizes;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_matrix(p.value(), "concat_rows");
    D2V_REQUIRE(p.value().cols() == m, "concat_rows: column count mismatch");
    ids.push_back(p.id);
    sizes.push_back(p.value().size());
    rows += p.value().rows();
  }
  Tensor out = Tensor::matrix(rows, m);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + off);
    off += p.value().size();
  }
  return t.record(std::move(out), parts, [ids, sizes](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_buffer(self);
    std::size_t o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (double* gk = tp.input_grad(ids[k]))
        for (std::size_t i = 0; i < sizes[k]; ++i) gk[i] += g[o + i];
      o += sizes[k];
    }
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t len) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "slice_cols");
  D2V_REQUIRE(len > 0 && start + len <= x.cols(), "slice_cols: range out of bounds");
  const std::size_t n = x.rows(), m = x.cols();
  Tensor out = Tensor::matrix(n, len);
  for (std::size_t r = 0; r < n; ++r) std::copy_n(x.data() + r * m + start, len, out.data() + r * len);
  const Var in[] = {a};
  return t.record(std::move(out), in, [ia = a.id, n, m, start, len](Tape& tp, std::size_t self) {
    double* ga = tp.input_grad(ia);
    if (!ga) return;
    const auto& g = tp.grad_buffer(self);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < len; ++c) ga[r * m + start + c] += g[r * len + c];
  });
}

Var slice_rows(Var a, std::size_t start, std::size_t len) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "slice_rows");
  D2V_REQUIRE(len > 0 && start + len <= x.rows(), "slice_rows: range out of bounds");
  const std::size_t m = x.cols();
  Tensor out = Tensor::matrix(len, m);
  std::copy_n(x.data() + start * m, len * m, out.data());
  const Var in[] = {a};
  return t.record(std::move(out), in, [ia = a.id, m, start](Tape& tp, std::size_t self) {
    double* ga = tp.input_grad(ia);
    if (!ga) return;
    const auto& g = tp.grad_buffer(self);
    for (std::size_t i = 0; i < g.size(); ++i) ga[start * m + i] += g[i];
  });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "gather_rows");
  D2V_REQUIRE(!index.empty(), "gather_rows: empty index");
  const std::size_t m = x.cols();
  Tensor out = Tensor::matrix(index.size(), m);
  for (std::size_t i = 0; i < index.size(); ++i) {
    D2V_REQUIRE(index[i] < x.rows(), "gather_rows: index out of range");
    std::copy_n(x.data() + index[i] * m, m, out.data() + i * m);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  const Var in[] = {a};
  return t.record(std::move(out), in, [ia = a.id, m, idx = std::move(idx)](Tape& tp, std::size_t self) {
    double* ga = tp.input_grad(ia);
    if (!ga) return;
    const auto& g = tp.grad_buffer(self);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < m; ++c) ga[idx[i] * m + c] += g[i * m + c];
  });
}

Var embedding_bag(Var table, std::span<const std::vector<std::uint32_t>> bags) {
  Tape& t = tape_of(table);
  const Tensor& e = table.value();
  require_matrix(e, "embedding_bag");
  D2V_REQUIRE(!bags.empty(), "embedding_bag: no bags");
  const std::size_t d = e.cols();
  Tensor out = Tensor::matrix(bags.size(), d);
  for (std::size_t i = 0; i < bags.size(); ++i) {
    double* o = out.data() + i * d;
    for (auto k : bags[i]) {
      D2V_REQUIRE(k < e.rows(), "embedding_bag: code index " + std::to_string(k) + " out of range");
      const double* row = e.data() + static_cast<std::size_t>(k) * d;
      for (std::size_t c = 0; c < d; ++c) o[c] += row[c];
    }
  }
  std::vector<std::vector<std::uint32_t>> copy(bags.begin(), bags.end());
  const Var in[] = {table};
  return t.record(std::move(out), in, [it = table.id, d, bags = std::move(copy)](Tape& tp, std::size_t self) {
    double* ge = tp.input_grad(it);
    if (!ge) return;
    const auto& g = tp.grad_buffer(self);
    for (std::size_t i = 0; i < bags.size(); ++i)
      for (auto k : bags[i])
        for (std::size_t c = 0; c < d; ++c) ge[static_cast<std::size_t>(k) * d + c] += g[i * d + c];
  });
}

Var row_sum(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "row_sum");
  const std::size_t n = x.rows(), m = x.cols();
  Tensor out = Tensor::matrix(n, 1);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += x[r * m + c];
    out[r] = s;
  }
  const Var in[] = {a};
  return t.record(std::move(out), in, [ia = a.id, n, m](Tape& tp, std::size_t self) {
    double* ga = tp.input_grad(ia);
    if (!ga) return;
    const auto& g = tp.grad_buffer(self);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < m; ++c) ga[r * m + c] += g[r];
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
  const Var in[] = {a};
  return t.record(Tensor::scalar(s), in, [ia = a.id](Tape& tp, std::size_t self) {
    double* ga = tp.input_grad(ia);
    if (!ga) return;
    const double g = tp.grad_buffer(self)[0];
    const std::size_t n = tp.value(ia).size();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var square_sum(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * x[i];
  const Var in[] = {a};
  return t.record(Tensor::scalar(s), in, [ia = a.id](Tape& tp, std::size_t self) {
    double* ga = tp.input_grad(ia);
    if (!ga) return;
    const double g = tp.grad_buffer(self)[0];
    const Tensor& xv = tp.value(ia);
    for (std::size_t i = 0; i < xv.size(); ++i) ga[i] += 2.0 * g * xv[i];
  });
}

namespace {
void check_offsets(std::span<const std::size_t> offsets, std::size_t n, const char* op) {
  D2V_REQUIRE(offsets.size() >= 2 && offsets.front() == 0 && offsets.back() == n,
              std::string(op) + ": offsets must start at 0 and end at the row count");
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s)
    D2V_REQUIRE(offsets[s] < offsets[s + 1], std::string(op) + ": empty segment");
}
}  // namespace

Var segment_softmax(Var scores, std::span<const std::size_t> offsets) {
  Tape& t = tape_of(scores);
  const Tensor& x = scores.value();
  require_matrix(x, "segment_softmax");
  D2V_REQUIRE(x.cols() == 1, "segment_softmax: scores must be a column");
  check_offsets(offsets, x.rows(), "segment_softmax");
  Tensor out(x.shape());
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t b = offsets[s], e = offsets[s + 1];
    const double mx = *std::max_element(x.data() + b, x.data() + e);
    double z = 0.0;
    for (std::size_t i = b; i < e; ++i) z += (out[i] = std::exp(x[i] - mx));
    for (std::size_t i = b; i < e; ++i) out[i] /= z;
  }
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  const Var in[] = {scores};
  return t.record(std::move(out), in, [ia = scores.id, off = std::move(off)](Tape& tp, std::size_t self) {
    double* ga = tp.input_grad(ia);
    if (!ga) return;
    const auto& g = tp.grad_buffer(self);
    const Tensor& y = tp.value(self);
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      double dot = 0.0;
      for (std::size_t i = off[s]; i < off[s + 1]; ++i) dot += g[i] * y[i];
      for (std::size_t i = off[s]; i < off[s + 1]; ++i) ga[i] += y[i] * (g[i] - dot);
    }
  });
}

Var segment_weighted_sum(Var values, Var weights, std::span<const std::size_t> offsets) {
  Tape& t = same_tape(values, weights);
  const Tensor& v = values.value();
  const Tensor& w = weights.value();
  require_matrix(v, "segment_weighted_sum");
  D2V_REQUIRE(w.rank() == 2 && w.cols() == 1 && w.rows() == v.rows(),
              "segment_weighted_sum: weights must be a column matching the value rows");
  check_offsets(offsets, v.rows(), "segment_weighted_sum");
  const std::size_t d = v.cols(), segs = offsets.size() - 1;
  Tensor out = Tensor::matrix(segs, d);
  for (std::size_t s = 0; s < segs; ++s)
    for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i)
      for (std::size_t c = 0; c < d; ++c) out[s * d + c] += w[i] * v[i * d + c];
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  const Var in[] = {values, weights};
  return t.record(std::move(out), in,
                  [iv = values.id, iw = weights.id, d, off = std::move(off)](Tape& tp, std::size_t self) {
                    const auto& g = tp.grad_buffer(self);
                    const Tensor& vv = tp.value(iv);
                    const Tensor& wv = tp.value(iw);
                    double* gv = tp.input_grad(iv);
                    double* gw = tp.input_grad(iw);
                    for (std::size_t s = 0; s + 1 < off.size(); ++s)
                      for (std::size_t i = off[s]; i < off[s + 1]; ++i) {
                        double dw = 0.0;
                        for (std::size_t c = 0; c < d; ++c) {
                          if (gv) gv[i * d + c] += wv[i] * g[s * d + c];
                          dw += vv[i * d + c] * g[s * d + c];
                        }
                        if (gw) gw[i] += dw;
                      }
                  });
}

Var cross_entropy(Var probs, std::span<const int> targets) {
  Tape& t = tape_of(probs);
  const Tensor& p = probs.value();
  require_matrix(p, "cross_entropy");
  const std::size_t n = p.rows(), c = p.cols();
  D2V_REQUIRE(targets.size() == n, "cross_entropy: " + std::to_string(targets.size()) +
                                       " targets for " + std::to_string(n) + " prediction rows");
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    D2V_REQUIRE(targets[r] >= 0 && static_cast<std::size_t>(targets[r]) < c,
                "cross_entropy: target class out of range");
    loss -= std::log(std::max(p[r * c + targets[r]], kProbabilityFloor));
  }
  loss /= static_cast<double>(n);
  std::vector<int> tg(targets.begin(), targets.end());
  const Var in[] = {probs};
  return t.record(Tensor::scalar(loss), in, [ip = probs.id, n, c, tg = std::move(tg)](Tape& tp, std::size_t self) {
    double* gp = tp.input_grad(ip);
    if (!gp) return;
    const double g = tp.grad_buffer(self)[0] / static_cast<double>(n);
    const Tensor& pv = tp.value(ip);
    for (std::size_t r = 0; r < n; ++r) {
      const double pr = pv[r * c + tg[r]];
      if (pr > kProbabilityFloor) gp[r * c + tg[r]] -= g / pr;
    }
  });
}

Var mse(Var pred, std::span<const double> target) {
  Tape& t = tape_of(pred);
  const Tensor& p = pred.value();
  D2V_REQUIRE(p.size() == target.size() && !target.empty(), "mse: prediction/target length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) loss += (p[i] - target[i]) * (p[i] - target[i]);
  loss /= static_cast<double>(p.size());
  std::vector<double> tg(target.begin(), target.end());
  const Var in[] = {pred};
  return t.record(Tensor::scalar(loss), in, [ip = pred.id, tg = std::move(tg)](Tape& tp, std::size_t self) {
    double* gp = tp.input_grad(ip);
    if (!gp) return;
    const double g = tp.grad_buffer(self)[0] * 2.0 / static_cast<double>(tg.size());
    const Tensor& pv = tp.value(ip);
    for (std::size_t i = 0; i < tg.size(); ++i) gp[i] += g * (pv[i] - tg[i]);
  });
}

std::vector<double> softmax(std::span<const double> x) {
  D2V_REQUIRE(!x.empty(), "softmax: empty input");
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> y(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    D2V_REQUIRE(std::isfinite(x[i]), "softmax: non-finite input");
    z += (y[i] = std::exp(x[i] - mx));
  }
  for (auto& v : y) v /= z;
  return y;
}

}  // namespace d2v::num
