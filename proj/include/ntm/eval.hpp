#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ntm/corpus.hpp"
#include "ntm/model.hpp"

namespace ntm {

// Corpus-level perplexity exp(−(1/D) Σ_d L̂_d/N_d), the exp of the negative
// mean per-word bound. The default pass scores the posterior mean (ε = 0);
// `sample` draws one seeded ε per document instead. `active_topics`
// follows the forward-pass convention (0 = model config).
double perplexity(const Corpus& corpus, const NeuralTopicModel& model,
                  std::size_t active_topics = 0, bool sample = false,
                  std::uint64_t seed = 0, std::size_t batch = 64);

struct TopicSummary {
  std::size_t topic = 0;
  std::vector<std::size_t> word_ids;  // descending score, ties by term
  std::vector<double> scores;  // β probability (topic models) or raw
                               // decoder connection weight (document models)
};

// Top-n words per topic. Ties break by score descending, then term
// lexicographically ascending. n larger than the vocabulary clips to V and
// reports it through `clipped`.
std::vector<TopicSummary> top_words(const NeuralTopicModel& model,
                                    const Vocabulary& vocab, std::size_t n,
                                    std::size_t active_topics = 0,
                                    bool* clipped = nullptr);

// Whole-document co-occurrence table of a reference corpus: p(w) and
// p(w_a, w_b) are document frequencies, not token frequencies.
class CooccurrenceIndex {
 public:
  explicit CooccurrenceIndex(const Corpus& reference);

  std::size_t docs() const { return docs_; }
  bool present(std::size_t word) const;
  double doc_prob(std::size_t word) const;
  double joint_prob(std::size_t a, std::size_t b) const;

 private:
  std::size_t docs_ = 0;
  std::size_t words_ = 0;
  std::size_t stride_ = 0;             // 64-bit lanes per word
  std::vector<std::uint64_t> bits_;    // words_ × stride_ document masks
};

// Smoothing added to the joint probability before the logs.
inline constexpr double kNpmiEps = 1e-12;

// Normalised pointwise mutual information of two present words:
// [ln p(a,b) − ln p(a)p(b)] / (−ln p(a,b)), in [−1, 1]. A pair sharing
// every document is maximally informative: 1 by convention (the formula
// degenerates to 0/0 at p(a,b) = 1).
double npmi_pair(const CooccurrenceIndex& ref, std::size_t a, std::size_t b);

struct NpmiDiagnostics {
  std::size_t skipped_pairs = 0;   // pairs with a word absent from the reference
  std::size_t missing_words = 0;   // distinct absent words encountered
};

// Mean NPMI over the unordered pairs of a word list. Pairs touching a word
// absent from the reference corpus are skipped and tallied; a list with no
// scorable pair reports 0.
double topic_npmi(const CooccurrenceIndex& ref,
                  const std::vector<std::size_t>& words,
                  NpmiDiagnostics* diag = nullptr);

struct TopicCoherence {
  std::size_t topic = 0;
  double npmi5 = 0.0;
  double npmi10 = 0.0;
};

struct CoherenceReport {
  std::vector<TopicCoherence> topics;
  double mean5 = 0.0;   // model score, mean over topics, top-5 protocol
  double mean10 = 0.0;  // top-10 protocol
  NpmiDiagnostics diagnostics;
};

// Coherence of every topic's top words against a reference corpus sharing
// the model's vocabulary (by default the training split).
CoherenceReport npmi_coherence(const NeuralTopicModel& model,
                               const Vocabulary& vocab,
                               const Corpus& reference,
                               std::size_t active_topics = 0);

// Writes one line per document — "doc_id\tv1 v2 ... vK" — of the
// posterior-mean topic weights (ε = 0), or of one seeded posterior draw
// when `sample` is set. Mixture-decoder rows are simplexes. Deterministic
// formatting: re-exporting the same model and seed yields identical bytes.
void export_theta(const Corpus& corpus, const NeuralTopicModel& model,
                  const std::string& path, std::size_t active_topics = 0,
                  bool sample = false, std::uint64_t seed = 0);

}  // namespace ntm
