#include "ntm/model.hpp"

#include <limits>
#include <utility>

#include "ntm/errors.hpp"

namespace ntm {

namespace {

// Canonical gate-block order shared with lstm_init; parameter names are
// "<prefix><suffix>".
constexpr const char* kLstmSuffixes[12] = {"wx_i", "wh_i", "b_i",  "wx_f",
                                           "wh_f", "b_f",  "wx_o", "wh_o",
                                           "b_o",  "wx_g", "wh_g", "b_g"};

LstmCellVars cell_from(const ParamStore& store, const std::vector<Var>& leaves,
                       const std::string& prefix) {
  std::vector<Var> vars;
  vars.reserve(12);
  for (const char* suffix : kLstmSuffixes) {
    vars.push_back(leaves[store.index_of(prefix + suffix)]);
  }
  return lstm_from_vars(vars);
}

// Counts arrive rank-1 for single documents; the elementwise ops want the
// exact matrix shape.
Tensor as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  Tensor out({rows, cols});
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = t[i];
  return out;
}

}  // namespace

const char* to_string(Construction c) {
  switch (c) {
    case Construction::gsm:
      return "gsm";
    case Construction::gsb:
      return "gsb";
    case Construction::rsb:
      return "rsb";
    case Construction::rsb_tf:
      return "rsb-tf";
  }
  return "?";
}

const char* to_string(Decoder d) {
  return d == Decoder::mixture ? "mixture" : "softmax";
}

Construction construction_from(const std::string& name) {
  if (name == "gsm") return Construction::gsm;
  if (name == "gsb") return Construction::gsb;
  if (name == "rsb") return Construction::rsb;
  if (name == "rsb-tf" || name == "rsb_tf") return Construction::rsb_tf;
  throw ParseError("unknown construction '" + name +
                   "' (expected gsm|gsb|rsb|rsb-tf)");
}

Decoder decoder_from(const std::string& name) {
  if (name == "mixture") return Decoder::mixture;
  if (name == "softmax") return Decoder::softmax;
  throw ParseError("unknown decoder '" + name +
                   "' (expected mixture|softmax)");
}

std::size_t ParamStore::add(std::string name, Tensor value, bool generative) {
  if (index_.count(name) != 0) {
    throw ContractError("parameter '" + name + "' registered twice");
  }
  Param p;
  p.name = name;
  p.m = Tensor(value.shape());
  p.v = Tensor(value.shape());
  p.value = std::move(value);
  p.generative = generative;
  const std::size_t idx = params_.size();
  index_.emplace(std::move(name), idx);
  params_.push_back(std::move(p));
  return idx;
}

bool ParamStore::has(const std::string& name) const {
  return index_.count(name) != 0;
}

std::size_t ParamStore::index_of(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) {
    throw ContractError("unknown parameter '" + name + "'");
  }
  return it->second;
}

Param& ParamStore::at(const std::string& name) {
  return params_[index_of(name)];
}

const Param& ParamStore::at(const std::string& name) const {
  return params_[index_of(name)];
}

std::vector<Var> ParamStore::bind(Tape& tape) const {
  std::vector<Var> vars;
  vars.reserve(params_.size());
  for (const Param& p : params_) {
    vars.push_back(tape.leaf(p.value, /*trainable=*/true));
  }
  return vars;
}

Var decoder_scores(Var t, Var v) { return matmul(t, transpose(v)); }

Var beta_from_vectors(Var t, Var v) {
  return softmax_rows(decoder_scores(t, v));
}

GaussianParams infer_q(const InferenceVars& net, const Tensor& counts,
                       bool train_mode, double dropout_keep, Rng* rng) {
  Tape& tape = *net.w_hidden.tape();
  const std::size_t B = counts.rows();
  const std::size_t V = counts.cols();
  if (net.w_hidden.value().rows() != V) {
    throw DimensionError(
        "inference net expects " +
        std::to_string(net.w_hidden.value().rows()) +
        " vocabulary columns, got counts " + counts.shape_str());
  }
  Tensor freq({B, V});
  for (std::size_t b = 0; b < B; ++b) {
    double total = 0.0;
    for (std::size_t w = 0; w < V; ++w) {
      const double c = counts[b * V + w];
      if (c < 0.0) {
        throw ContractError("negative count in inference-network input");
      }
      total += c;
    }
    if (total > 0.0) {
      for (std::size_t w = 0; w < V; ++w) {
        freq.at(b, w) = counts[b * V + w] / total;
      }
    }
  }
  Var h = relu(add_rowvec(matmul(tape.constant(std::move(freq)), net.w_hidden),
                          net.b_hidden));
  if (train_mode && dropout_keep < 1.0) {
    if (rng == nullptr) {
      throw ContractError("training-mode dropout needs a random stream");
    }
    h = dropout(h, dropout_keep, *rng);
  }
  GaussianParams q;
  q.mu = add_rowvec(matmul(h, net.w_mu), net.b_mu);
  q.log_sigma = add_rowvec(matmul(h, net.w_logsig), net.b_logsig);
  return q;
}

MixtureLikelihood mixture_log_likelihood(const Tensor& counts, Var theta,
                                         Var beta) {
  Tape& tape = *theta.tape();
  Var p = matmul(theta, beta);
  const Tensor& pv = p.value();
  if (pv.rows() != counts.rows() || pv.cols() != counts.cols()) {
    throw DimensionError("mixture likelihood: counts " + counts.shape_str() +
                         " vs word probabilities " + pv.shape_str());
  }
  MixtureLikelihood out;
  for (std::size_t i = 0; i < pv.numel(); ++i) {
    if (counts[i] > 0.0 && pv[i] < kProbFloor) ++out.clamp_hits;
  }
  const double inf = std::numeric_limits<double>::infinity();
  out.per_doc =
      sum_rows(mul(tape.constant(as_matrix(counts, pv.rows(), pv.cols())),
                   log(clamp(p, kProbFloor, inf))));
  return out;
}

Var softmax_log_likelihood(const Tensor& counts, Var theta_unnorm,
                           Var beta_unnorm) {
  Tape& tape = *theta_unnorm.tape();
  Var scores = matmul(theta_unnorm, beta_unnorm);
  const Tensor& sv = scores.value();
  if (sv.rows() != counts.rows() || sv.cols() != counts.cols()) {
    throw DimensionError("softmax likelihood: counts " + counts.shape_str() +
                         " vs scores " + sv.shape_str());
  }
  return sum_rows(mul(tape.constant(as_matrix(counts, sv.rows(), sv.cols())),
                      log_softmax_rows(scores)));
}

NeuralTopicModel::NeuralTopicModel(ModelConfig cfg, Rng& rng) : cfg_(cfg) {
  const std::size_t V = cfg.vocab;
  const std::size_t H = cfg.hidden;
  const std::size_t M = cfg.mlp_hidden;
  const std::size_t K = cfg.topics;
  if (V == 0) throw ContractError("model: vocabulary size must be positive");
  if (H == 0 || M == 0) throw ContractError("model: zero-width layer");
  const std::size_t min_topics =
      cfg.construction == Construction::gsm ? 1 : 2;
  if (K < min_topics) {
    throw ContractError("model: " + std::string(to_string(cfg.construction)) +
                        " needs at least " + std::to_string(min_topics) +
                        " topics");
  }
  if (!(cfg.dropout_keep > 0.0 && cfg.dropout_keep <= 1.0)) {
    throw ContractError("model: dropout keep-probability must be in (0,1]");
  }

  auto weight = [&rng](std::vector<std::size_t> shape) {
    return Tensor::random_normal(std::move(shape), rng, 0.02);
  };

  store_.add("inf.w_hidden", weight({V, M}), false);
  store_.add("inf.b_hidden", Tensor({1, M}), false);
  store_.add("inf.w_mu", weight({M, H}), false);
  store_.add("inf.b_mu", Tensor({1, H}), false);
  store_.add("inf.w_logsig", weight({M, H}), false);
  store_.add("inf.b_logsig", Tensor({1, H}), false);

  store_.add("dec.word_vecs", weight({V, H}), true);

  if (cfg.construction == Construction::gsm) {
    store_.add("con.w1", weight({H, K}), true);
  } else if (cfg.construction == Construction::gsb) {
    store_.add("con.w2", weight({H, K - 1}), true);
  } else {
    for (auto& init : lstm_init(H, H, rng)) {
      store_.add("rnn_sb." + init.suffix, std::move(init.value), true);
    }
    store_.add("rnn_sb.h0", Tensor({1, H}), true);
    store_.add("rnn_sb.c0", Tensor({1, H}), true);
  }
  if (cfg.construction == Construction::rsb_tf) {
    for (auto& init : lstm_init(H, H, rng)) {
      store_.add("rnn_topic." + init.suffix, std::move(init.value), true);
    }
    store_.add("rnn_topic.t0", weight({1, H}), true);
  } else {
    store_.add("dec.topic_vecs", weight({K, H}), true);
  }
}

Forward NeuralTopicModel::forward(Tape& tape, const Tensor& counts,
                                  const Tensor& epsilon, bool train_mode,
                                  Rng* dropout_rng, std::size_t active_topics,
                                  const std::vector<Var>* bound) const {
  const std::size_t B = counts.rows();
  if (counts.cols() != cfg_.vocab) {
    throw DimensionError("batch has " + std::to_string(counts.cols()) +
                         " vocabulary columns, model expects " +
                         std::to_string(cfg_.vocab));
  }
  if (epsilon.rows() != B || epsilon.cols() != cfg_.hidden) {
    throw DimensionError("epsilon " + epsilon.shape_str() +
                         " does not match [" + std::to_string(B) + "x" +
                         std::to_string(cfg_.hidden) + "]");
  }
  const std::size_t K = active_topics == 0 ? cfg_.topics : active_topics;
  if (cfg_.construction != Construction::rsb_tf && K != cfg_.topics) {
    throw ContractError("topic count is fixed for this construction");
  }
  if (cfg_.construction == Construction::rsb_tf && K < 2) {
    throw ContractError(
        "unbounded construction needs at least two active topics");
  }

  Forward fw;
  fw.active_topics = K;
  if (bound != nullptr) {
    if (bound->size() != store_.size()) {
      throw ContractError("bound parameter list does not match the store");
    }
    fw.leaves = *bound;
  } else {
    fw.leaves = store_.bind(tape);
  }
  const auto lv = [&](const char* name) {
    return fw.leaves[store_.index_of(name)];
  };

  const InferenceVars net{lv("inf.w_hidden"), lv("inf.b_hidden"),
                          lv("inf.w_mu"),     lv("inf.b_mu"),
                          lv("inf.w_logsig"), lv("inf.b_logsig")};
  fw.q = infer_q(net, counts, train_mode, cfg_.dropout_keep, dropout_rng);
  const Var x = reparameterize(fw.q, tape.constant(epsilon));

  switch (cfg_.construction) {
    case Construction::gsm: {
      const Var logits = matmul(x, lv("con.w1"));
      // The document-model head feeds the decoder unnormalised weights;
      // the topic model normalises them onto the simplex.
      fw.theta = cfg_.decoder == Decoder::softmax ? logits
                                                  : softmax_rows(logits);
      break;
    }
    case Construction::gsb:
      fw.theta = gsb_theta(x, lv("con.w2"));
      break;
    case Construction::rsb:
    case Construction::rsb_tf: {
      const LstmCellVars cell = cell_from(store_, fw.leaves, "rnn_sb.");
      const RecurrentState start{lv("rnn_sb.h0"), lv("rnn_sb.c0")};
      fw.theta = rsb_theta(x, cell, start, K);
      break;
    }
  }

  if (cfg_.construction == Construction::rsb_tf) {
    const LstmCellVars cell = cell_from(store_, fw.leaves, "rnn_topic.");
    Var t_prev = lv("rnn_topic.t0");
    std::vector<Var> cols;
    cols.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
      t_prev = rnn_topic_step(cell, t_prev);
      cols.push_back(transpose(t_prev));
    }
    fw.topic_vecs = transpose(concat_cols(cols));
  } else {
    fw.topic_vecs = lv("dec.topic_vecs");
  }

  const Var v = lv("dec.word_vecs");
  if (cfg_.decoder == Decoder::mixture) {
    fw.beta = beta_from_vectors(fw.topic_vecs, v);
    MixtureLikelihood ml = mixture_log_likelihood(counts, fw.theta, fw.beta);
    fw.recon = ml.per_doc;
    fw.clamp_hits = ml.clamp_hits;
  } else {
    fw.beta = decoder_scores(fw.topic_vecs, v);
    fw.recon = softmax_log_likelihood(counts, fw.theta, fw.beta);
  }
  fw.kl = gaussian_kl(fw.q);
  fw.per_doc = sub(fw.recon, fw.kl);
  fw.mean_elbo = mean_all(fw.per_doc);
  return fw;
}

Tensor NeuralTopicModel::topic_matrix(std::size_t active_topics) const {
  const std::size_t K = active_topics == 0 ? cfg_.topics : active_topics;
  if (cfg_.construction != Construction::rsb_tf) {
    if (K != cfg_.topics) {
      throw ContractError("topic count is fixed for this construction");
    }
    return store_.at("dec.topic_vecs").value;
  }
  if (K < 2) {
    throw ContractError(
        "unbounded construction needs at least two active topics");
  }
  Tape tape;
  const std::vector<Var> leaves = store_.bind(tape);
  const LstmCellVars cell = cell_from(store_, leaves, "rnn_topic.");
  Var t_prev = leaves[store_.index_of("rnn_topic.t0")];
  std::vector<Var> cols;
  cols.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    t_prev = rnn_topic_step(cell, t_prev);
    cols.push_back(transpose(t_prev));
  }
  return transpose(concat_cols(cols)).value();
}

}  // namespace ntm
