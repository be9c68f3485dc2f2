#pragma once

#include <cstddef>

#include "ntm/recurrent.hpp"
#include "ntm/tape.hpp"

namespace ntm {

// Breaking proportions are clamped to this margin inside (0,1) before
// stick-breaking so the log terms and their gradients stay finite.
inline constexpr double kEtaMargin = 1e-7;

// Per-document Gaussian posterior, sigma stored as log-sigma so the
// optimisation stays unconstrained while sigma stays positive.
struct GaussianParams {
  Var mu;         // [B×H]
  Var log_sigma;  // [B×H]
};

// x = mu + epsilon ⊙ exp(log_sigma). Differentiable through mu and
// log_sigma; epsilon is a caller-supplied (seeded) draw.
Var reparameterize(const GaussianParams& params, Var epsilon);

// Per-row KL divergence to the standard-normal prior, in nats:
// 0.5·Σ_h (μ² + σ² − 1 − ln σ²)  →  [B×1].
Var gaussian_kl(const GaussianParams& params);

// θ_k = η_k·∏_{i<k}(1−η_i) for k < K, remainder θ_K = ∏_{i<K}(1−η_i).
// eta is [B×(K−1)] with entries strictly inside (0,1).
Var stick_break(Var eta, std::size_t K);

// θ = softmax(x·W1).
Var gsm_theta(Var x, Var w1);

// θ = stick_break(sigmoid(x·W2)).
Var gsb_theta(Var x, Var w2);

// Unrolls the break cell K−1 steps from the learned start state with a zero
// input; break k's logit is x·h_kᵀ against the state just produced. θ is
// the stick-break of the clamped sigmoids.
Var rsb_theta(Var x, const LstmCellVars& cell, const RecurrentState& start,
              std::size_t K);

// The break logits behind rsb_theta, exposed for the document model head:
// [B×(K−1)] raw logits, before sigmoid and clamping.
Var rsb_logits(Var x, const LstmCellVars& cell, const RecurrentState& start,
               std::size_t K);

}  // namespace ntm
