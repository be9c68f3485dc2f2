#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ntm/errors.hpp"
#include "ntm/tape.hpp"
#include "ntm/tensor.hpp"

namespace ntm {

// Builds a scalar loss from leaves handed to it in the order of `point`.
using GradCheckFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Compares the tape's analytic gradient against central differences at
// every coordinate of `point` and returns the worst relative error
//     |analytic - fd| / max(1, |analytic|).
// The step must satisfy 0 < h <= 1e-2. A non-finite loss at any perturbed
// point aborts the check.
inline double grad_check(const GradCheckFn& f, const std::vector<Tensor>& point,
                         double h) {
  if (!(h > 0.0 && h <= 1e-2))
    throw ContractError("grad_check: step must lie in (0, 1e-2]");
  if (point.empty()) throw ContractError("grad_check: empty point");

  const auto eval = [&](const std::vector<Tensor>& at) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(at.size());
    for (const Tensor& p : at) leaves.push_back(tape.leaf(p));
    const Var out = f(tape, leaves);
    if (out.value().numel() != 1)
      throw ContractError("grad_check: function is not scalar-valued");
    const double v = out.value().data()[0];
    if (!std::isfinite(v))
      throw DegenerateError("grad_check: non-finite value at perturbed point");
    return v;
  };

  // analytic gradients
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const Tensor& p : point) leaves.push_back(tape.leaf(p, true));
  const Var out = f(tape, leaves);
  if (out.value().numel() != 1)
    throw ContractError("grad_check: function is not scalar-valued");
  tape.backward(out);
  std::vector<Tensor> analytic;
  analytic.reserve(point.size());
  for (const Var& l : leaves) analytic.push_back(l.grad());

  double worst = 0.0;
  std::vector<Tensor> at = point;
  for (std::size_t p = 0; p < point.size(); ++p)
    for (std::size_t c = 0; c < point[p].numel(); ++c) {
      const double orig = at[p].data()[c];
      at[p].data()[c] = orig + h;
      const double up = eval(at);
      at[p].data()[c] = orig - h;
      const double down = eval(at);
      at[p].data()[c] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[p].data()[c];
      const double rel = std::abs(an - fd) / std::max(1.0, std::abs(an));
      worst = std::max(worst, rel);
    }
  return worst;
}

inline double grad_check(const GradCheckFn& f, const Tensor& point, double h) {
  return grad_check(f, std::vector<Tensor>{point}, h);
}

}  // namespace ntm
