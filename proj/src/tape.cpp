#include "ntm/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "ntm/errors.hpp"
#include "ntm/kernels.hpp"

namespace ntm {

namespace {

Tape& tape_of(const Var& v, const char* op) {
  if (!v.defined())
    throw ContractError(std::string(op) + ": operand is not bound to a tape");
  return *v.tape();
}

void require_same_tape(const Var& a, const Var& b, const char* op) {
  if (a.tape() != b.tape())
    throw ContractError(std::string(op) + ": operands live on different tapes");
}

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---- Var ----

const Tensor& Var::value() const {
  if (!defined()) throw ContractError("Var::value: unbound handle");
  return tape_->value_of(id_);
}

const Tensor& Var::grad() const {
  if (!defined()) throw ContractError("Var::grad: unbound handle");
  return tape_->grad_of(id_);
}

// ---- Tape ----

Var Tape::leaf(Tensor value, bool trainable) {
  if (value.empty()) throw ContractError("Tape::leaf: empty tensor");
  Node n;
  n.value = std::move(value);
  n.trainable = trainable;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::emit(Tensor value, BackFn back) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buf(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

const Tensor& Tape::grad_of(std::size_t id) {
  if (!backward_run_)
    throw StateError("Tape::grad_of: backward() has not run on this tape");
  return grad_buf(id);
}

void Tape::backward(Var loss) {
  if (loss.tape() != this)
    throw ContractError("Tape::backward: loss lives on a different tape");
  if (backward_run_)
    throw StateError("Tape::backward: already run; reset() before reuse");
  if (loss.value().numel() != 1)
    throw ContractError("Tape::backward: loss must be scalar, got shape " +
                        loss.value().shape_str());

  grad_buf(loss.id()).data()[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.back && grad_touched(i)) n.back(*this);
  }
  // Trainable leaves the loss never reached still expose a gradient (an
  // all-zero one), so optimizers can treat the parameter set uniformly.
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].trainable) grad_buf(i);
  backward_run_ = true;
}

void Tape::reset() {
  nodes_.clear();
  backward_run_ = false;
}

// ---- matrix ops ----

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, "matmul");
  require_same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k)
    throw DimensionError("matmul: inner dimensions disagree, " +
                         av.shape_str() + " vs " + bv.shape_str());
  Tensor out({m, n});
  kern::gemm(false, false, m, n, k, av.data(), bv.data(), out.data(), false);
  const std::size_t ia = a.id(), ib = b.id(), io = t.size();
  return t.emit(std::move(out), [ia, ib, io, m, n, k](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    // dA += gC · Bᵀ and dB += Aᵀ · gC
    kern::gemm(false, true, m, k, n, g, tp.value_of(ib).data(),
               tp.grad_buf(ia).data(), true);
    kern::gemm(true, false, k, n, m, tp.value_of(ia).data(), g,
               tp.grad_buf(ib).data(), true);
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a, "transpose");
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.data()[j * m + i] = av.data()[i * n + j];
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, m, n](Tape& tp) {
    const double* g = tp.grad_buf(io).data();  // n×m
    double* ga = tp.grad_buf(ia).data();       // m×n
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < m; ++i) ga[i * n + j] += g[j * m + i];
  });
}

// ---- binary elementwise ----

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw DimensionError(std::string(op) + ": shape mismatch, " +
                         a.value().shape_str() + " vs " +
                         b.value().shape_str());
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = tape_of(a, "add");
  require_same_tape(a, b, "add");
  require_same_shape(a, b, "add");
  Tensor out(a.value().shape());
  const std::size_t n = out.numel();
  kern::zip(out.data(), a.value().data(), b.value().data(), n,
            [](double x, double y) { return x + y; });
  const std::size_t ia = a.id(), ib = b.id(), io = t.size();
  return t.emit(std::move(out), [ia, ib, io, n](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    double* ga = tp.grad_buf(ia).data();
    double* gb = tp.grad_buf(ib).data();
    for (std::size_t i = 0; i < n; ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, "sub");
  require_same_tape(a, b, "sub");
  require_same_shape(a, b, "sub");
  Tensor out(a.value().shape());
  const std::size_t n = out.numel();
  kern::zip(out.data(), a.value().data(), b.value().data(), n,
            [](double x, double y) { return x - y; });
  const std::size_t ia = a.id(), ib = b.id(), io = t.size();
  return t.emit(std::move(out), [ia, ib, io, n](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    double* ga = tp.grad_buf(ia).data();
    double* gb = tp.grad_buf(ib).data();
    for (std::size_t i = 0; i < n; ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, "mul");
  require_same_tape(a, b, "mul");
  require_same_shape(a, b, "mul");
  Tensor out(a.value().shape());
  const std::size_t n = out.numel();
  kern::zip(out.data(), a.value().data(), b.value().data(), n,
            [](double x, double y) { return x * y; });
  const std::size_t ia = a.id(), ib = b.id(), io = t.size();
  return t.emit(std::move(out), [ia, ib, io, n](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    const double* xa = tp.value_of(ia).data();
    const double* xb = tp.value_of(ib).data();
    double* ga = tp.grad_buf(ia).data();
    double* gb = tp.grad_buf(ib).data();
    for (std::size_t i = 0; i < n; ++i) {
      ga[i] += g[i] * xb[i];
      gb[i] += g[i] * xa[i];
    }
  });
}

Var add_rowvec(Var a, Var bias) {
  Tape& t = tape_of(a, "add_rowvec");
  require_same_tape(a, bias, "add_rowvec");
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  if (bias.value().numel() != n || bias.value().rows() != 1)
    throw DimensionError("add_rowvec: bias " + bias.value().shape_str() +
                         " does not broadcast over " + av.shape_str());
  Tensor out(av.shape());
  const double* x = av.data();
  const double* bv = bias.value().data();
  double* y = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = x[i * n + j] + bv[j];
  const std::size_t ia = a.id(), ib = bias.id(), io = t.size();
  return t.emit(std::move(out), [ia, ib, io, m, n](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    double* ga = tp.grad_buf(ia).data();
    double* gb = tp.grad_buf(ib).data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        ga[i * n + j] += g[i * n + j];
        gb[j] += g[i * n + j];
      }
  });
}

// ---- scalar-argument elementwise ----

Var scale(Var a, double c) {
  Tape& t = tape_of(a, "scale");
  Tensor out(a.value().shape());
  const std::size_t n = out.numel();
  kern::map(out.data(), a.value().data(), n, [c](double x) { return c * x; });
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, n, c](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    double* ga = tp.grad_buf(ia).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += c * g[i];
  });
}

Var add_const(Var a, double c) {
  Tape& t = tape_of(a, "add_const");
  Tensor out(a.value().shape());
  const std::size_t n = out.numel();
  kern::map(out.data(), a.value().data(), n, [c](double x) { return x + c; });
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, n](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    double* ga = tp.grad_buf(ia).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
  });
}

// ---- unary elementwise ----

Var exp(Var a) {
  Tape& t = tape_of(a, "exp");
  Tensor out(a.value().shape());
  const std::size_t n = out.numel();
  kern::map(out.data(), a.value().data(), n,
            [](double x) { return std::exp(x); });
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, n](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    const double* y = tp.value_of(io).data();
    double* ga = tp.grad_buf(ia).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * y[i];
  });
}

Var log(Var a) {
  Tape& t = tape_of(a, "log");
  Tensor out(a.value().shape());
  const std::size_t n = out.numel();
  kern::map(out.data(), a.value().data(), n,
            [](double x) { return std::log(x); });
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, n](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    const double* x = tp.value_of(ia).data();
    double* ga = tp.grad_buf(ia).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] / x[i];
  });
}

Var tanh(Var a) {
  Tape& t = tape_of(a, "tanh");
  Tensor out(a.value().shape());
  const std::size_t n = out.numel();
  kern::map(out.data(), a.value().data(), n,
            [](double x) { return std::tanh(x); });
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, n](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    const double* y = tp.value_of(io).data();
    double* ga = tp.grad_buf(ia).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a, "sigmoid");
  Tensor out(a.value().shape());
  const std::size_t n = out.numel();
  kern::map(out.data(), a.value().data(), n, stable_sigmoid);
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, n](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    const double* y = tp.value_of(io).data();
    double* ga = tp.grad_buf(ia).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var relu(Var a) {
  Tape& t = tape_of(a, "relu");
  Tensor out(a.value().shape());
  const std::size_t n = out.numel();
  kern::map(out.data(), a.value().data(), n,
            [](double x) { return x > 0.0 ? x : 0.0; });
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, n](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    const double* x = tp.value_of(ia).data();
    double* ga = tp.grad_buf(ia).data();
    for (std::size_t i = 0; i < n; ++i)
      if (x[i] > 0.0) ga[i] += g[i];
  });
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi))
    throw ContractError("clamp: lower bound exceeds upper bound");
  Tape& t = tape_of(a, "clamp");
  Tensor out(a.value().shape());
  const std::size_t n = out.numel();
  kern::map(out.data(), a.value().data(), n,
            [lo, hi](double x) { return std::min(std::max(x, lo), hi); });
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, n, lo, hi](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    const double* x = tp.value_of(ia).data();
    double* ga = tp.grad_buf(ia).data();
    // gradient passes only through the unclamped interior
    for (std::size_t i = 0; i < n; ++i)
      if (x[i] > lo && x[i] < hi) ga[i] += g[i];
  });
}

// ---- row-structured ops ----

Var softmax_rows(Var a) {
  Tape& t = tape_of(a, "softmax_rows");
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out(av.shape());
  kern::softmax_rows(m, n, av.data(), out.data());
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, m, n](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    const double* y = tp.value_of(io).data();
    double* ga = tp.grad_buf(ia).data();
    for (std::size_t i = 0; i < m; ++i) {
      const double* gr = g + i * n;
      const double* yr = y + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += gr[j] * yr[j];
      for (std::size_t j = 0; j < n; ++j)
        ga[i * n + j] += yr[j] * (gr[j] - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  Tape& t = tape_of(a, "log_softmax_rows");
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out(av.shape());
  kern::log_softmax_rows(m, n, av.data(), out.data());
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, m, n](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    const double* y = tp.value_of(io).data();  // log-probabilities
    double* ga = tp.grad_buf(ia).data();
    for (std::size_t i = 0; i < m; ++i) {
      const double* gr = g + i * n;
      const double* yr = y + i * n;
      double gsum = 0.0;
      for (std::size_t j = 0; j < n; ++j) gsum += gr[j];
      for (std::size_t j = 0; j < n; ++j)
        ga[i * n + j] += gr[j] - std::exp(yr[j]) * gsum;
    }
  });
}

// ---- reductions ----

Var sum_rows(Var a) {
  Tape& t = tape_of(a, "sum_rows");
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out({m, 1});
  kern::row_sums(m, n, av.data(), out.data());
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, m, n](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    double* ga = tp.grad_buf(ia).data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i];
  });
}

Var sum_all(Var a) {
  Tape& t = tape_of(a, "sum_all");
  const std::size_t n = a.value().numel();
  Tensor out = Tensor::scalar(kern::sum_all(n, a.value().data()));
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, n](Tape& tp) {
    const double g = tp.grad_buf(io).data()[0];
    double* ga = tp.grad_buf(ia).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g;
  });
}

Var mean_all(Var a) {
  Tape& t = tape_of(a, "mean_all");
  const std::size_t n = a.value().numel();
  Tensor out =
      Tensor::scalar(kern::sum_all(n, a.value().data()) / double(n));
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, n](Tape& tp) {
    const double g = tp.grad_buf(io).data()[0] / double(n);
    double* ga = tp.grad_buf(ia).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g;
  });
}

// ---- layout ops ----

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  Tape& t = tape_of(parts[0], "concat_cols");
  const std::size_t m = parts[0].value().rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p, "concat_cols");
    if (p.value().rows() != m)
      throw DimensionError("concat_cols: row counts disagree, " +
                           parts[0].value().shape_str() + " vs " +
                           p.value().shape_str());
    total += p.value().cols();
  }
  Tensor out({m, total});
  std::vector<std::size_t> ids, widths;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const std::size_t w = p.value().cols();
    const double* x = p.value().data();
    for (std::size_t i = 0; i < m; ++i)
      std::copy(x + i * w, x + (i + 1) * w, out.data() + i * total + off);
    ids.push_back(p.id());
    widths.push_back(w);
    off += w;
  }
  const std::size_t io = t.size();
  return t.emit(std::move(out), [ids, widths, io, m, total](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    std::size_t off = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      double* ga = tp.grad_buf(ids[p]).data();
      const std::size_t w = widths[p];
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j)
          ga[i * w + j] += g[i * total + off + j];
      off += w;
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a, "slice_cols");
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  if (begin >= end || end > n)
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") out of bounds for " +
                         av.shape_str());
  const std::size_t w = end - begin;
  Tensor out({m, w});
  for (std::size_t i = 0; i < m; ++i)
    std::copy(av.data() + i * n + begin, av.data() + i * n + end,
              out.data() + i * w);
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, m, n, w, begin](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    double* ga = tp.grad_buf(ia).data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j)
        ga[i * n + begin + j] += g[i * w + j];
  });
}

// ---- stochastic ops ----

Var dropout(Var a, double keep, Rng& rng) {
  if (!(keep > 0.0 && keep <= 1.0))
    throw ContractError("dropout: keep probability must lie in (0,1]");
  if (keep == 1.0) return a;
  Tape& t = tape_of(a, "dropout");
  const std::size_t n = a.value().numel();
  Tensor mask(a.value().shape());
  const double inv = 1.0 / keep;
  for (std::size_t i = 0; i < n; ++i)
    mask.data()[i] = rng.uniform() < keep ? inv : 0.0;
  Tensor out(a.value().shape());
  kern::zip(out.data(), a.value().data(), mask.data(), n,
            [](double x, double m) { return x * m; });
  const std::size_t ia = a.id(), io = t.size();
  return t.emit(std::move(out), [ia, io, n, mask](Tape& tp) {
    const double* g = tp.grad_buf(io).data();
    double* ga = tp.grad_buf(ia).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * mask.data()[i];
  });
}

// ---- pairwise-angle statistics ----

Var angle_stats(Var t_var) {
  Tape& t = tape_of(t_var, "angle_stats");
  const Tensor& tv = t_var.value();
  const std::size_t K = tv.rows(), H = tv.cols();

  Tensor gram({K, K});
  kern::gemm(false, true, K, K, H, tv.data(), tv.data(), gram.data(), false);
  std::vector<double> norm(K);
  for (std::size_t i = 0; i < K; ++i) {
    norm[i] = std::sqrt(gram.data()[i * K + i]);
    if (norm[i] == 0.0)
      throw DegenerateError("angle_stats: row " + std::to_string(i) +
                            " has zero norm");
  }

  // a_ij = arccos(|t_i·t_j| / (‖t_i‖‖t_j‖)); the diagonal is exactly zero.
  Tensor ang({K, K});
  double sum = 0.0;
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) {
      if (i == j) continue;
      const double u = std::min(
          std::abs(gram.data()[i * K + j]) / (norm[i] * norm[j]), 1.0);
      const double a = std::acos(u);
      ang.data()[i * K + j] = a;
      sum += a;
    }
  const double kk = double(K) * double(K);
  const double zeta = sum / kk;
  double var = 0.0;
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) {
      const double d = ang.data()[i * K + j] - zeta;
      var += d * d;
    }
  var /= kk;

  Tensor out({2});
  out.data()[0] = zeta;
  out.data()[1] = var;

  const std::size_t it = t_var.id(), io = t.size();
  return t.emit(
      std::move(out), [it, io, K, H, gram, norm, ang, zeta, kk](Tape& tp) {
        const double gz = tp.grad_buf(io).data()[0];
        const double gn = tp.grad_buf(io).data()[1];
        const double* x = tp.value_of(it).data();
        double* gx = tp.grad_buf(it).data();
        for (std::size_t i = 0; i < K; ++i)
          for (std::size_t j = 0; j < K; ++j) {
            if (i == j) continue;  // constant zero angle, no gradient path
            const double dot = gram.data()[i * K + j];
            const double u = std::min(std::abs(dot) / (norm[i] * norm[j]), 1.0);
            const double abar =
                gz / kk + gn * 2.0 * (ang.data()[i * K + j] - zeta) / kk;
            const double under = 1.0 - u * u;
            if (under <= 1e-24) continue;  // parallel rows: angle at a kink
            const double du = -abar / std::sqrt(under);
            const double sgn = sign_of(dot);
            const double cij = du * sgn / (norm[i] * norm[j]);
            const double cii = -du * u / (norm[i] * norm[i]);
            const double cjj = -du * u / (norm[j] * norm[j]);
            for (std::size_t h = 0; h < H; ++h) {
              gx[i * H + h] += cij * x[j * H + h] + cii * x[i * H + h];
              gx[j * H + h] += cij * x[i * H + h] + cjj * x[j * H + h];
            }
          }
      });
}

}  // namespace ntm
