#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ntm/constructions.hpp"
#include "ntm/recurrent.hpp"
#include "ntm/tape.hpp"

namespace ntm {

// How the per-document topic weights are built from the Gaussian draw.
// rsb_tf is the unbounded variant: same break network as rsb, but topic
// vectors are generated by a second recurrence so the active count can grow.
enum class Construction { gsm, gsb, rsb, rsb_tf };

// mixture: per-word probability (θ·β)[w] with simplex θ and β rows — a
// topic model. softmax: log-softmax over unnormalised scores θ̂·β — a
// document model.
enum class Decoder { mixture, softmax };

const char* to_string(Construction c);
const char* to_string(Decoder d);
Construction construction_from(const std::string& name);  // ParseError
Decoder decoder_from(const std::string& name);            // ParseError

struct ModelConfig {
  Construction construction = Construction::gsm;
  Decoder decoder = Decoder::mixture;
  std::size_t topics = 50;       // initial active count in unbounded mode
  std::size_t vocab = 0;         // V, fixed by the corpus
  std::size_t hidden = 200;      // H: width of the draw and of topic/word vectors
  std::size_t mlp_hidden = 256;  // inference-net hidden layer width
  double dropout_keep = 0.8;     // keep-probability on the hidden layer
};

// One trainable tensor with its optimiser state. `generative` splits the
// parameters into the decoder/construction group and the inference-net
// group, which alternating training updates on different batches.
struct Param {
  std::string name;
  Tensor value;
  Tensor m;  // first-moment accumulator
  Tensor v;  // second-moment accumulator
  std::uint64_t steps = 0;
  bool generative = true;
};

// Ordered, name-indexed parameter set. Insertion order is the binding and
// serialisation order, so it must stay stable across runs.
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor value, bool generative);

  bool has(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;  // ContractError if absent
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }

  // Bind every parameter value onto `tape` as a trainable leaf, in
  // insertion order.
  std::vector<Var> bind(Tape& tape) const;

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Bound inference-network weights: one rectified hidden layer feeding the
// mu and log-sigma heads.
struct InferenceVars {
  Var w_hidden, b_hidden;
  Var w_mu, b_mu;
  Var w_logsig, b_logsig;
};

// Observed-word probabilities below this are clamped before the log in the
// mixture decoder; hits are counted as a diagnostics signal.
inline constexpr double kProbFloor = 1e-12;

// β = softmax over the vocabulary of v·t_kᵀ, one row per topic vector.
Var beta_from_vectors(Var t, Var v);

// The same inner products left unnormalised, for the softmax decoder.
Var decoder_scores(Var t, Var v);

// Variational posterior from a batch of raw counts. Counts are normalised
// to within-document frequencies before the MLP so document length does not
// rescale the input. Dropout is applied to the hidden layer only in
// training mode (rng required iff it actually draws).
GaussianParams infer_q(const InferenceVars& net, const Tensor& counts,
                       bool train_mode, double dropout_keep, Rng* rng);

struct MixtureLikelihood {
  Var per_doc;  // [B×1] Σ_w counts·ln((θ·β)[w]) in nats
  std::size_t clamp_hits = 0;  // observed words whose probability hit the floor
};

// Topic-model likelihood: the topic assignment is summed out analytically,
// never sampled.
MixtureLikelihood mixture_log_likelihood(const Tensor& counts, Var theta,
                                         Var beta);

// Document-model likelihood: log-softmax over the vocabulary of the
// unnormalised scores θ̂·β, weighted by counts. Invariant under adding a
// per-document constant to the scores.
Var softmax_log_likelihood(const Tensor& counts, Var theta_unnorm,
                           Var beta_unnorm);

// One assembled pass: variational bound and the pieces the trainer and
// evaluator need to inspect.
struct Forward {
  Var per_doc;    // [B×1] L̂_d = reconstruction − KL
  Var recon;      // [B×1]
  Var kl;         // [B×1]
  Var mean_elbo;  // scalar mean of per_doc over the batch
  Var theta;      // [B×K] decoder mixing weights (simplex in mixture mode)
  Var beta;       // [K×V] word distributions (rows simplex in mixture mode)
  Var topic_vecs;  // [K×H] matrix behind beta, for the diversity penalty
  GaussianParams q;
  std::vector<Var> leaves;  // bound parameters, store order
  std::size_t clamp_hits = 0;
  std::size_t active_topics = 0;
};

class NeuralTopicModel {
 public:
  // Fresh model: weights drawn N(0, 0.02²), biases zero except the LSTM
  // forget gates (1.0), start states zero.
  NeuralTopicModel(ModelConfig cfg, Rng& rng);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  // Builds the graph for one batch on `tape` and returns the bound with
  // its parts. `epsilon` is the caller's standard-normal draw, [B×H];
  // zeros give the posterior-mean pass used for evaluation.
  // `active_topics` (unbounded construction only) overrides the config
  // count; 0 means "use the config". `bound` substitutes externally bound
  // parameter leaves for the store's values (used by gradient checking and
  // by the grown/shrunk bound comparison).
  Forward forward(Tape& tape, const Tensor& counts, const Tensor& epsilon,
                  bool train_mode = false, Rng* dropout_rng = nullptr,
                  std::size_t active_topics = 0,
                  const std::vector<Var>* bound = nullptr) const;

  // Current [K×H] topic-vector matrix as plain values: the stored
  // parameter for finite constructions, the generated stream for the
  // unbounded one. Same `active_topics` convention as forward().
  Tensor topic_matrix(std::size_t active_topics = 0) const;

 private:
  ModelConfig cfg_;
  ParamStore store_;
};

}  // namespace ntm
