#include "ntm/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "ntm/errors.hpp"
#include "ntm/kernels.hpp"
#include "ntm/rng.hpp"
#include "ntm/tape.hpp"

namespace ntm {

namespace {

// Runs `fn(first_doc, forward)` over the corpus in document order, one
// bounded tape per chunk.
template <typename Fn>
void scan_corpus(const Corpus& corpus, const NeuralTopicModel& model,
                 std::size_t active_topics, bool sample, std::uint64_t seed,
                 std::size_t batch, Fn&& fn) {
  if (batch == 0) throw ContractError("evaluation batch size must be positive");
  Rng rng(seed);
  const std::size_t H = model.config().hidden;
  for (std::size_t start = 0; start < corpus.size(); start += batch) {
    const std::size_t stop = std::min(corpus.size(), start + batch);
    std::vector<std::size_t> ids(stop - start);
    std::iota(ids.begin(), ids.end(), start);
    const Tensor counts = dense_counts(corpus, ids);
    const Tensor eps = sample
                           ? Tensor::random_normal({ids.size(), H}, rng, 1.0)
                           : Tensor({ids.size(), H});
    Tape tape;
    const Forward fw = model.forward(tape, counts, eps, /*train_mode=*/false,
                                     nullptr, active_topics);
    fn(start, fw);
  }
}

}  // namespace

double perplexity(const Corpus& corpus, const NeuralTopicModel& model,
                  std::size_t active_topics, bool sample, std::uint64_t seed,
                  std::size_t batch) {
  if (corpus.size() == 0) {
    throw ContractError("perplexity of an empty corpus");
  }
  double rate_sum = 0.0;  // Σ_d L̂_d / N_d
  scan_corpus(corpus, model, active_topics, sample, seed, batch,
              [&](std::size_t first, const Forward& fw) {
                const Tensor& per_doc = fw.per_doc.value();
                for (std::size_t b = 0; b < per_doc.rows(); ++b) {
                  const Document& doc = corpus.docs[first + b];
                  rate_sum += per_doc.at(b, 0) / static_cast<double>(doc.total);
                }
              });
  return std::exp(-rate_sum / static_cast<double>(corpus.size()));
}

std::vector<TopicSummary> top_words(const NeuralTopicModel& model,
                                    const Vocabulary& vocab, std::size_t n,
                                    std::size_t active_topics, bool* clipped) {
  if (n == 0) throw ContractError("top-words count must be positive");
  const std::size_t V = model.config().vocab;
  if (vocab.size() != V) {
    throw MismatchError("vocabulary has " + std::to_string(vocab.size()) +
                        " terms, model expects " + std::to_string(V));
  }
  if (clipped != nullptr) *clipped = n > V;
  n = std::min(n, V);

  const Tensor t = model.topic_matrix(active_topics);
  const Tensor& v = model.params().at("dec.word_vecs").value;
  const std::size_t K = t.rows();
  const std::size_t H = t.cols();
  Tensor scores({K, V});
  kern::gemm(false, true, K, V, H, t.data(), v.data(), scores.data(), false);
  if (model.config().decoder == Decoder::mixture) {
    kern::softmax_rows(K, V, scores.data(), scores.data());
  }

  std::vector<TopicSummary> out(K);
  std::vector<std::size_t> order(V);
  for (std::size_t k = 0; k < K; ++k) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) {
                const double sa = scores.at(k, a), sb = scores.at(k, b);
                if (sa != sb) return sa > sb;
                return vocab.term(a) < vocab.term(b);
              });
    out[k].topic = k;
    out[k].word_ids.assign(order.begin(), order.begin() + n);
    out[k].scores.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      out[k].scores.push_back(scores.at(k, order[i]));
    }
  }
  return out;
}

CooccurrenceIndex::CooccurrenceIndex(const Corpus& reference)
    : docs_(reference.size()),
      words_(reference.vocab_size()),
      stride_((reference.size() + 63) / 64) {
  if (docs_ == 0) {
    throw ContractError("co-occurrence reference corpus is empty");
  }
  bits_.assign(words_ * stride_, 0);
  for (std::size_t d = 0; d < docs_; ++d) {
    for (const auto& [word, count] : reference.docs[d].counts) {
      bits_[word * stride_ + d / 64] |= std::uint64_t{1} << (d % 64);
    }
  }
}

bool CooccurrenceIndex::present(std::size_t word) const {
  if (word >= words_) return false;
  const std::uint64_t* row = bits_.data() + word * stride_;
  for (std::size_t i = 0; i < stride_; ++i) {
    if (row[i] != 0) return true;
  }
  return false;
}

double CooccurrenceIndex::doc_prob(std::size_t word) const {
  if (word >= words_) return 0.0;
  const std::uint64_t* row = bits_.data() + word * stride_;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < stride_; ++i) hits += std::popcount(row[i]);
  return static_cast<double>(hits) / static_cast<double>(docs_);
}

double CooccurrenceIndex::joint_prob(std::size_t a, std::size_t b) const {
  if (a >= words_ || b >= words_) return 0.0;
  const std::uint64_t* ra = bits_.data() + a * stride_;
  const std::uint64_t* rb = bits_.data() + b * stride_;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < stride_; ++i) hits += std::popcount(ra[i] & rb[i]);
  return static_cast<double>(hits) / static_cast<double>(docs_);
}

double npmi_pair(const CooccurrenceIndex& ref, std::size_t a, std::size_t b) {
  if (!ref.present(a) || !ref.present(b)) {
    throw ContractError("word absent from the co-occurrence reference");
  }
  const double joint = ref.joint_prob(a, b);
  if (joint >= 1.0) return 1.0;
  const double pj = joint + kNpmiEps;
  const double value =
      (std::log(pj) - std::log(ref.doc_prob(a) * ref.doc_prob(b))) /
      -std::log(pj);
  // The smoothing can push a perfectly associated pair past the analytic
  // bound by ~1e-11; pin the range instead of leaking that.
  return std::clamp(value, -1.0, 1.0);
}

double topic_npmi(const CooccurrenceIndex& ref,
                  const std::vector<std::size_t>& words,
                  NpmiDiagnostics* diag) {
  std::vector<std::size_t> absent;
  for (std::size_t w : words) {
    if (!ref.present(w) &&
        std::find(absent.begin(), absent.end(), w) == absent.end()) {
      absent.push_back(w);
    }
  }
  double sum = 0.0;
  std::size_t pairs = 0, skipped = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (std::size_t j = i + 1; j < words.size(); ++j) {
      if (!ref.present(words[i]) || !ref.present(words[j])) {
        ++skipped;
        continue;
      }
      sum += npmi_pair(ref, words[i], words[j]);
      ++pairs;
    }
  }
  if (diag != nullptr) {
    diag->skipped_pairs += skipped;
    diag->missing_words += absent.size();
  }
  return pairs == 0 ? 0.0 : sum / static_cast<double>(pairs);
}

CoherenceReport npmi_coherence(const NeuralTopicModel& model,
                               const Vocabulary& vocab,
                               const Corpus& reference,
                               std::size_t active_topics) {
  if (reference.vocab_size() != model.config().vocab) {
    throw MismatchError("reference corpus vocabulary has " +
                        std::to_string(reference.vocab_size()) +
                        " terms, model expects " +
                        std::to_string(model.config().vocab));
  }
  const CooccurrenceIndex index(reference);
  const std::size_t ten = std::min<std::size_t>(10, model.config().vocab);
  const std::vector<TopicSummary> tops =
      top_words(model, vocab, ten, active_topics);

  CoherenceReport report;
  report.topics.reserve(tops.size());
  for (const TopicSummary& summary : tops) {
    TopicCoherence tc;
    tc.topic = summary.topic;
    const std::vector<std::size_t>& ids = summary.word_ids;
    const std::vector<std::size_t> five(
        ids.begin(), ids.begin() + std::min<std::size_t>(5, ids.size()));
    tc.npmi5 = topic_npmi(index, five, &report.diagnostics);
    tc.npmi10 = topic_npmi(index, ids, &report.diagnostics);
    report.mean5 += tc.npmi5;
    report.mean10 += tc.npmi10;
    report.topics.push_back(tc);
  }
  if (!report.topics.empty()) {
    report.mean5 /= static_cast<double>(report.topics.size());
    report.mean10 /= static_cast<double>(report.topics.size());
  }
  return report;
}

void export_theta(const Corpus& corpus, const NeuralTopicModel& model,
                  const std::string& path, std::size_t active_topics,
                  bool sample, std::uint64_t seed) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  char buf[64];
  scan_corpus(corpus, model, active_topics, sample, seed, 64,
              [&](std::size_t first, const Forward& fw) {
                const Tensor& theta = fw.theta.value();
                for (std::size_t b = 0; b < theta.rows(); ++b) {
                  std::string line = std::to_string(first + b);
                  line += '\t';
                  for (std::size_t k = 0; k < theta.cols(); ++k) {
                    std::snprintf(buf, sizeof buf, "%.12g", theta.at(b, k));
                    if (k > 0) line += ' ';
                    line += buf;
                  }
                  line += '\n';
                  out << line;
                }
              });
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace ntm
