#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ntm/corpus.hpp"
#include "ntm/model.hpp"

namespace ntm {

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch = 64;
  std::size_t epochs = 1;
  std::uint64_t seed = 1;
  double gamma = 5e-5;  // topic-acceptance threshold, unbounded mode
  double lambda = 0.1;  // diversity weight; 0 disables the penalty
  bool alternating = false;
  // Alternation cadence: per batch by default, per epoch when set.
  bool alternate_per_epoch = false;
  double clip_norm = 5.0;      // global gradient-norm ceiling; 0 disables
  std::size_t max_active = 0;  // growth cap in unbounded mode; 0 = none
};

// Mutable run state outside the parameter store: the seeded random streams
// (reparameterisation draws and dropout masks), the epoch cursor, and the
// active topic count for the unbounded construction.
struct TrainState {
  explicit TrainState(std::uint64_t seed = 0)
      : epsilon_rng(Rng::derive(seed, 1)), dropout_rng(Rng::derive(seed, 2)) {}
  Rng epsilon_rng;
  Rng dropout_rng;
  std::size_t epochs_done = 0;
  std::size_t active_topics = 0;  // 0 = take the model config's count
};

struct MetricsRow {
  std::size_t epoch = 0;
  long long batch = -1;  // -1 marks the epoch summary row
  double elbo = 0.0;
  double kl = 0.0;
  double perplexity = 0.0;
  std::size_t active_topics = 0;
};

// In-memory metric trace, optionally mirrored to an append-only file of
// "epoch,batch,elbo,kl,perplexity,active_topics" lines.
class MetricsLog {
 public:
  MetricsLog() = default;
  explicit MetricsLog(const std::string& path) : out_(path, std::ios::app) {
    if (!out_) throw IoError("cannot open metrics log '" + path + "'");
  }

  void append(const MetricsRow& row) {
    rows_.push_back(row);
    if (out_.is_open()) {
      out_ << format(row) << '\n';
      out_.flush();
    }
  }

  const std::vector<MetricsRow>& rows() const { return rows_; }
  static std::string format(const MetricsRow& row);

 private:
  std::vector<MetricsRow> rows_;
  std::ofstream out_;
};

struct EpochMetrics {
  double mean_elbo = 0.0;
  double mean_kl = 0.0;
  double perplexity = 0.0;
  std::size_t active_topics = 0;  // count at epoch end
  std::vector<MetricsRow> rows;   // per-batch rows plus the summary row
  // Unbounded mode only: the relative bound improvement I measured on each
  // batch, aligned with the per-batch rows. Growth happens iff I > gamma.
  std::vector<double> increases;
};

// One bias-corrected Adam update. Non-finite gradients abort the step with
// the parameter named; a zero gradient on fresh moments leaves the value
// unchanged while the step counter still advances.
void adam_step(Param& param, const Tensor& grad, double lr);

enum class UpdateGroup { all, generative, inference };

// Reads the gradient off every bound leaf and Adam-updates the selected
// parameter group, rescaling first if the group's global gradient norm
// exceeds `clip_norm` (0 disables). Unselected parameters are untouched:
// no value change, no moment decay, no step advance.
void apply_gradients(ParamStore& store, const std::vector<Var>& leaves,
                     UpdateGroup group, double lr, double clip_norm);

// Pairwise-angle statistics of the topic vectors with the additive
// objective term λ(ζ−ν): ζ is the mean angle over all ordered pairs
// (diagonal included), ν the variance. Large mean and small spread mean
// diverse topics.
struct Diversity {
  double zeta = 0.0;
  double nu = 0.0;
  double penalty = 0.0;
};
Diversity diversity_penalty(const Tensor& topic_vecs, double lambda);

// One pass over the corpus for the finite constructions: per batch the
// loss −mean(L̂) − λ(ζ−ν) is backpropagated and the selected group updated
// (alternating runs flip between the generative and inference groups).
EpochMetrics train_epoch(const Corpus& corpus, NeuralTopicModel& model,
                         const TrainConfig& config, TrainState& state,
                         MetricsLog* log = nullptr);

// Relative bound improvement I = Σ_d(L^i_d − L^{i−1}_d) / |Σ_d L^i_d|.
// The denominator is taken in absolute value so that an improved (less
// negative) bound always yields I > 0 for the acceptance test.
double likelihood_increase(const std::vector<double>& l_i,
                           const std::vector<double>& l_im1);

// One pass for the unbounded construction: per batch the current i topics
// are generated and trained as usual, the same draw is re-scored with the
// last stick break folded away, and i grows by one whenever the relative
// improvement exceeds gamma. i never shrinks.
EpochMetrics train_unbounded(const Corpus& corpus, NeuralTopicModel& model,
                             const TrainConfig& config, TrainState& state,
                             MetricsLog* log = nullptr);

// Runs config.epochs epochs with the loop matching the construction.
std::vector<EpochMetrics> fit(const Corpus& corpus, NeuralTopicModel& model,
                              const TrainConfig& config, TrainState& state,
                              MetricsLog* log = nullptr);

// ---- checkpointing ----
// Single binary file, versioned; layout documented in README.md. A load
// restores parameters, optimiser moments, step counters, the random
// streams, and the active topic count bit-exactly.

void save_checkpoint(const NeuralTopicModel& model, const TrainState& state,
                     const std::string& path);

struct Checkpoint {
  NeuralTopicModel model;
  TrainState state;
};
Checkpoint load_checkpoint(const std::string& path);

// Guards a loaded model against a run configured for different shapes;
// 0 means "no expectation". Mismatches throw with both sides named.
void require_compatible(const ModelConfig& loaded, std::size_t topics,
                        std::size_t vocab);

}  // namespace ntm
