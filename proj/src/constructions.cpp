#include "ntm/constructions.hpp"

#include <string>
#include <vector>

#include "ntm/errors.hpp"

namespace ntm {

Var reparameterize(const GaussianParams& params, Var epsilon) {
  if (!params.mu.value().same_shape(params.log_sigma.value()) ||
      !params.mu.value().same_shape(epsilon.value()))
    throw DimensionError("reparameterize: mu " + params.mu.value().shape_str() +
                         ", log-sigma " + params.log_sigma.value().shape_str() +
                         ", epsilon " + epsilon.value().shape_str() +
                         " must agree");
  return add(params.mu, mul(epsilon, exp(params.log_sigma)));
}

Var gaussian_kl(const GaussianParams& params) {
  if (!params.mu.value().same_shape(params.log_sigma.value()))
    throw DimensionError("gaussian_kl: mu " + params.mu.value().shape_str() +
                         " vs log-sigma " +
                         params.log_sigma.value().shape_str());
  const Var two_log_sigma = scale(params.log_sigma, 2.0);
  const Var inner = sub(add(mul(params.mu, params.mu), exp(two_log_sigma)),
                        add_const(two_log_sigma, 1.0));
  return scale(sum_rows(inner), 0.5);
}

Var stick_break(Var eta, std::size_t K) {
  if (K < 2)
    throw ContractError("stick_break: need at least two topics, got K=" +
                        std::to_string(K));
  const Tensor& ev = eta.value();
  const std::size_t B = ev.rows(), breaks = ev.cols();
  if (breaks != K - 1)
    throw DimensionError("stick_break: expected " + std::to_string(K - 1) +
                         " breaking proportions per row, got " +
                         ev.shape_str());
  for (std::size_t i = 0; i < ev.numel(); ++i)
    if (!(ev[i] > 0.0 && ev[i] < 1.0))
      throw ContractError(
          "stick_break: breaking proportions must lie strictly inside (0,1)");

  Tape& t = *eta.tape();
  // log of the surviving stick before each break; shifted cumulative sums
  // come from one matmul with a strictly upper-triangular ones matrix.
  const Var s = log(sub(t.constant(Tensor::full({B, breaks}, 1.0)), eta));
  Tensor upper({breaks, breaks});
  for (std::size_t i = 0; i < breaks; ++i)
    for (std::size_t j = i + 1; j < breaks; ++j) upper.at(i, j) = 1.0;
  const Var head = mul(eta, exp(matmul(s, t.constant(upper))));
  const Var tail = exp(matmul(s, t.constant(Tensor::full({breaks, 1}, 1.0))));
  return concat_cols({head, tail});
}

Var gsm_theta(Var x, Var w1) { return softmax_rows(matmul(x, w1)); }

Var gsb_theta(Var x, Var w2) {
  const Var eta =
      clamp(sigmoid(matmul(x, w2)), kEtaMargin, 1.0 - kEtaMargin);
  return stick_break(eta, w2.value().cols() + 1);
}

Var rsb_logits(Var x, const LstmCellVars& cell, const RecurrentState& start,
               std::size_t K) {
  if (K < 2)
    throw ContractError("rsb_logits: need at least two topics, got K=" +
                        std::to_string(K));
  Tape& t = *x.tape();
  const std::size_t I = cell.wx_i.value().rows();
  const Var zero_input = t.constant(Tensor({1, I}));
  RecurrentState state = start;
  std::vector<Var> cols;
  cols.reserve(K - 1);
  for (std::size_t k = 1; k < K; ++k) {
    state = lstm_step(cell, state, zero_input);
    cols.push_back(matmul(x, transpose(state.h)));
  }
  return concat_cols(cols);
}

Var rsb_theta(Var x, const LstmCellVars& cell, const RecurrentState& start,
              std::size_t K) {
  const Var eta = clamp(sigmoid(rsb_logits(x, cell, start, K)), kEtaMargin,
                        1.0 - kEtaMargin);
  return stick_break(eta, K);
}

}  // namespace ntm
