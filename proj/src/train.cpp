#include "ntm/train.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "ntm/errors.hpp"
#include "ntm/kernels.hpp"

namespace ntm {

namespace {

void validate(const TrainConfig& c) {
  if (c.lr < 0.0) throw ContractError("train: learning rate must be >= 0");
  if (c.gamma < 0.0) throw ContractError("train: gamma must be >= 0");
  if (c.lambda < 0.0) throw ContractError("train: lambda must be >= 0");
  if (c.clip_norm < 0.0) throw ContractError("train: clip norm must be >= 0");
}

UpdateGroup group_for(const TrainConfig& c, std::size_t epoch,
                      std::size_t batch) {
  if (!c.alternating) return UpdateGroup::all;
  const std::size_t tick = c.alternate_per_epoch ? epoch : batch;
  return tick % 2 == 0 ? UpdateGroup::generative : UpdateGroup::inference;
}

Tensor draw_epsilon(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();
  return t;
}

bool in_group(const Param& p, UpdateGroup group) {
  switch (group) {
    case UpdateGroup::all:
      return true;
    case UpdateGroup::generative:
      return p.generative;
    case UpdateGroup::inference:
      return !p.generative;
  }
  return false;
}

// Accumulates one batch into the epoch totals and emits the per-batch row.
struct EpochAccumulator {
  double sum_elbo = 0.0;
  double sum_kl = 0.0;
  double sum_rate = 0.0;  // Σ_d L̂_d / N_d, the per-word bound
  std::size_t docs = 0;

  MetricsRow add_batch(std::size_t epoch, std::size_t batch,
                       const Tensor& counts, const Forward& fw,
                       std::size_t active) {
    const Tensor& per_doc = fw.per_doc.value();
    const Tensor& kl = fw.kl.value();
    const std::size_t B = per_doc.numel();
    double b_elbo = 0.0;
    double b_kl = 0.0;
    double b_rate = 0.0;
    for (std::size_t d = 0; d < B; ++d) {
      double n = 0.0;
      for (std::size_t w = 0; w < counts.cols(); ++w) n += counts.at(d, w);
      if (n < 1.0) n = 1.0;
      b_elbo += per_doc[d];
      b_kl += kl[d];
      b_rate += per_doc[d] / n;
    }
    sum_elbo += b_elbo;
    sum_kl += b_kl;
    sum_rate += b_rate;
    docs += B;
    MetricsRow row;
    row.epoch = epoch;
    row.batch = static_cast<long long>(batch);
    row.elbo = b_elbo / static_cast<double>(B);
    row.kl = b_kl / static_cast<double>(B);
    row.perplexity = std::exp(-b_rate / static_cast<double>(B));
    row.active_topics = active;
    return row;
  }

  MetricsRow summary(std::size_t epoch, std::size_t active) const {
    const double d = static_cast<double>(docs);
    MetricsRow row;
    row.epoch = epoch;
    row.batch = -1;
    row.elbo = sum_elbo / d;
    row.kl = sum_kl / d;
    row.perplexity = std::exp(-sum_rate / d);
    row.active_topics = active;
    return row;
  }
};

void emit(MetricsLog* log, EpochMetrics& out, const MetricsRow& row) {
  out.rows.push_back(row);
  if (log != nullptr) log->append(row);
}

// The bound for the same draw with the last stick break folded away: the
// dropped segment's mass joins the remainder and the last topic's word row
// is discarded. Plain value arithmetic — this bound is never trained on.
std::vector<double> shrunk_bound(const Forward& fw, const Tensor& counts,
                                 Decoder decoder) {
  const Tensor& theta = fw.theta.value();
  const Tensor& beta = fw.beta.value();
  const Tensor& kl = fw.kl.value();
  const std::size_t B = theta.rows();
  const std::size_t i = theta.cols();
  const std::size_t V = beta.cols();

  Tensor shrunk({B, i - 1});
  for (std::size_t d = 0; d < B; ++d) {
    for (std::size_t k = 0; k + 1 < i; ++k) shrunk.at(d, k) = theta.at(d, k);
    shrunk.at(d, i - 2) += theta.at(d, i - 1);
  }
  Tensor scores({B, V});
  kern::gemm(false, false, B, V, i - 1, shrunk.data(), beta.data(),
             scores.data(), false);

  std::vector<double> bound(B, 0.0);
  if (decoder == Decoder::mixture) {
    for (std::size_t d = 0; d < B; ++d) {
      double recon = 0.0;
      for (std::size_t w = 0; w < V; ++w) {
        const double c = counts.at(d, w);
        if (c == 0.0) continue;
        recon += c * std::log(std::max(scores.at(d, w), kProbFloor));
      }
      bound[d] = recon - kl[d];
    }
  } else {
    Tensor ls({B, V});
    kern::log_softmax_rows(B, V, scores.data(), ls.data());
    for (std::size_t d = 0; d < B; ++d) {
      double recon = 0.0;
      for (std::size_t w = 0; w < V; ++w) recon += counts.at(d, w) * ls.at(d, w);
      bound[d] = recon - kl[d];
    }
  }
  return bound;
}

}  // namespace

std::string MetricsLog::format(const MetricsRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu,%lld,%.10g,%.10g,%.10g,%zu", row.epoch,
                row.batch, row.elbo, row.kl, row.perplexity,
                row.active_topics);
  return buf;
}

void adam_step(Param& p, const Tensor& grad, double lr) {
  if (!grad.same_shape(p.value)) {
    throw DimensionError("gradient " + grad.shape_str() + " for parameter '" +
                         p.name + "' shaped " + p.value.shape_str());
  }
  if (!grad.all_finite()) {
    throw DegenerateError("non-finite gradient for parameter '" + p.name +
                          "'");
  }
  p.steps += 1;
  const double t = static_cast<double>(p.steps);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t i = 0; i < grad.numel(); ++i) {
    const double g = grad[i];
    p.m[i] = kAdamBeta1 * p.m[i] + (1.0 - kAdamBeta1) * g;
    p.v[i] = kAdamBeta2 * p.v[i] + (1.0 - kAdamBeta2) * g * g;
    p.value[i] -= lr * (p.m[i] / c1) / (std::sqrt(p.v[i] / c2) + kAdamEps);
  }
}

void apply_gradients(ParamStore& store, const std::vector<Var>& leaves,
                     UpdateGroup group, double lr, double clip_norm) {
  if (leaves.size() != store.size()) {
    throw ContractError("bound leaves do not match the parameter store");
  }
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!in_group(store[i], group)) continue;
    const Tensor& g = leaves[i].grad();
    if (!g.all_finite()) {
      throw DegenerateError("non-finite gradient for parameter '" +
                            store[i].name + "'");
    }
    for (std::size_t c = 0; c < g.numel(); ++c) norm_sq += g[c] * g[c];
  }
  double factor = 1.0;
  if (clip_norm > 0.0) {
    const double norm = std::sqrt(norm_sq);
    if (norm > clip_norm) factor = clip_norm / norm;
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!in_group(store[i], group)) continue;
    if (factor == 1.0) {
      adam_step(store[i], leaves[i].grad(), lr);
    } else {
      Tensor g = leaves[i].grad();
      for (std::size_t c = 0; c < g.numel(); ++c) g[c] *= factor;
      adam_step(store[i], g, lr);
    }
  }
}

Diversity diversity_penalty(const Tensor& topic_vecs, double lambda) {
  Tape tape;
  const Var stats = angle_stats(tape.leaf(topic_vecs));
  Diversity d;
  d.zeta = stats.value()[0];
  d.nu = stats.value()[1];
  d.penalty = lambda * (d.zeta - d.nu);
  return d;
}

EpochMetrics train_epoch(const Corpus& corpus, NeuralTopicModel& model,
                         const TrainConfig& config, TrainState& state,
                         MetricsLog* log) {
  validate(config);
  if (model.config().construction == Construction::rsb_tf) {
    throw ContractError(
        "the unbounded construction needs the unbounded training loop");
  }
  const Minibatcher batcher(corpus, config.batch, config.seed);
  const std::size_t epoch = state.epochs_done;
  const std::size_t K = model.config().topics;
  const bool diversity =
      config.lambda > 0.0 && model.params().has("dec.topic_vecs");

  EpochMetrics out;
  EpochAccumulator acc;
  for (std::size_t b = 0; b < batcher.count(); ++b) {
    const Tensor counts = batcher.dense_batch(epoch, b);
    const Tensor eps =
        draw_epsilon(counts.rows(), model.config().hidden, state.epsilon_rng);
    Tape tape;
    const Forward fw = model.forward(tape, counts, eps, /*train_mode=*/true,
                                     &state.dropout_rng);
    Var loss = scale(fw.mean_elbo, -1.0);
    if (diversity) {
      const Var stats = angle_stats(fw.topic_vecs);
      const Var zeta = sum_all(slice_cols(stats, 0, 1));
      const Var nu = sum_all(slice_cols(stats, 1, 2));
      loss = sub(loss, scale(sub(zeta, nu), config.lambda));
    }
    if (!std::isfinite(loss.value()[0])) {
      throw DegenerateError("non-finite loss at epoch " +
                            std::to_string(epoch) + " batch " +
                            std::to_string(b));
    }
    tape.backward(loss);
    apply_gradients(model.params(), fw.leaves, group_for(config, epoch, b),
                    config.lr, config.clip_norm);
    emit(log, out, acc.add_batch(epoch, b, counts, fw, K));
  }
  const MetricsRow total = acc.summary(epoch, K);
  emit(log, out, total);
  out.mean_elbo = total.elbo;
  out.mean_kl = total.kl;
  out.perplexity = total.perplexity;
  out.active_topics = K;
  state.epochs_done += 1;
  return out;
}

double likelihood_increase(const std::vector<double>& l_i,
                           const std::vector<double>& l_im1) {
  if (l_i.size() != l_im1.size() || l_i.empty()) {
    throw ContractError(
        "likelihood increase needs matching nonempty bound sets");
  }
  double diff = 0.0;
  double total = 0.0;
  for (std::size_t d = 0; d < l_i.size(); ++d) {
    diff += l_i[d] - l_im1[d];
    total += l_i[d];
  }
  if (total == 0.0) {
    throw DegenerateError("likelihood increase: zero total bound");
  }
  return diff / std::abs(total);
}

EpochMetrics train_unbounded(const Corpus& corpus, NeuralTopicModel& model,
                             const TrainConfig& config, TrainState& state,
                             MetricsLog* log) {
  validate(config);
  if (model.config().construction != Construction::rsb_tf) {
    throw ContractError(
        "unbounded training needs the unbounded construction");
  }
  if (state.active_topics == 0) state.active_topics = model.config().topics;
  if (state.active_topics < 2) {
    throw ContractError(
        "unbounded training starts from at least two active topics");
  }
  const Minibatcher batcher(corpus, config.batch, config.seed);
  const std::size_t epoch = state.epochs_done;

  EpochMetrics out;
  EpochAccumulator acc;
  for (std::size_t b = 0; b < batcher.count(); ++b) {
    const Tensor counts = batcher.dense_batch(epoch, b);
    const Tensor eps =
        draw_epsilon(counts.rows(), model.config().hidden, state.epsilon_rng);
    Tape tape;
    const Forward fw =
        model.forward(tape, counts, eps, /*train_mode=*/true,
                      &state.dropout_rng, state.active_topics);
    const Var loss = scale(fw.mean_elbo, -1.0);
    if (!std::isfinite(loss.value()[0])) {
      throw DegenerateError("non-finite loss at epoch " +
                            std::to_string(epoch) + " batch " +
                            std::to_string(b));
    }
    tape.backward(loss);
    apply_gradients(model.params(), fw.leaves, group_for(config, epoch, b),
                    config.lr, config.clip_norm);

    emit(log, out, acc.add_batch(epoch, b, counts, fw, state.active_topics));

    const Tensor& per_doc = fw.per_doc.value();
    const std::vector<double> l_i(per_doc.data(),
                                  per_doc.data() + per_doc.numel());
    const std::vector<double> l_im1 =
        shrunk_bound(fw, counts, model.config().decoder);
    const double increase = likelihood_increase(l_i, l_im1);
    out.increases.push_back(increase);
    if (increase > config.gamma &&
        (config.max_active == 0 || state.active_topics < config.max_active)) {
      state.active_topics += 1;
    }
  }
  const MetricsRow total = acc.summary(epoch, state.active_topics);
  emit(log, out, total);
  out.mean_elbo = total.elbo;
  out.mean_kl = total.kl;
  out.perplexity = total.perplexity;
  out.active_topics = state.active_topics;
  state.epochs_done += 1;
  return out;
}

std::vector<EpochMetrics> fit(const Corpus& corpus, NeuralTopicModel& model,
                              const TrainConfig& config, TrainState& state,
                              MetricsLog* log) {
  std::vector<EpochMetrics> all;
  all.reserve(config.epochs);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    all.push_back(model.config().construction == Construction::rsb_tf
                      ? train_unbounded(corpus, model, config, state, log)
                      : train_epoch(corpus, model, config, state, log));
  }
  return all;
}

}  // namespace ntm
