#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ntm/tensor.hpp"

namespace ntm {

// Lowercases and splits on non-alphanumeric bytes. No stemming.
std::vector<std::string> tokenize(const std::string& text);

// Ordered term list with a reverse index. Line number = index in the file
// form, so external preprocessed vocabularies plug in unchanged.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> terms);

  // Top-`max_size` terms by corpus frequency after stopword removal, ties
  // broken lexicographically ascending.
  static Vocabulary build(const std::vector<std::vector<std::string>>& docs,
                          std::size_t max_size,
                          const std::unordered_set<std::string>& stopwords);

  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  std::size_t size() const { return terms_.size(); }
  const std::string& term(std::size_t idx) const;
  std::optional<std::size_t> index(const std::string& term) const;
  const std::vector<std::string>& terms() const { return terms_; }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::unordered_set<std::string> load_stopwords(const std::string& path);

// Sparse counts over vocabulary indices. The ordered map keeps the BoW
// serialisation canonical.
struct Document {
  std::map<std::size_t, std::size_t> counts;
  std::size_t total = 0;  // token count N_d, always the sum of `counts`
};

struct Corpus {
  std::vector<Document> docs;
  Vocabulary vocab;
  std::string split;
  // Documents that arrived empty (or became empty after vocabulary
  // filtering) are dropped; this keeps the tally for diagnostics.
  std::size_t dropped_empty = 0;

  std::size_t size() const { return docs.size(); }
  std::size_t vocab_size() const { return vocab.size(); }
};

// Line-based BoW file: "N idx:count idx:count ...". N must equal the sum
// of counts. Lines "0" count as dropped empties.
Corpus load_bow(const std::string& path, const Vocabulary& vocab,
                std::string split = "");
void save_bow(const Corpus& corpus, const std::string& path);

// Counts tokenised documents against `vocab`, dropping documents with no
// in-vocabulary tokens.
Corpus corpus_from_tokens(const std::vector<std::vector<std::string>>& docs,
                          const Vocabulary& vocab, std::string split = "");

// Dense [|ids|×V] count matrix; row b holds the counts of docs[ids[b]].
Tensor dense_counts(const Corpus& corpus, const std::vector<std::size_t>& ids);

// Serves seeded epoch permutations of a corpus as dense count batches. The
// permutation depends only on (seed, epoch), so any epoch can be replayed.
class Minibatcher {
 public:
  Minibatcher(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed);

  std::size_t count() const;  // batches per epoch, final short batch included
  std::vector<std::size_t> order(std::size_t epoch) const;
  std::vector<std::size_t> batch_docs(std::size_t epoch, std::size_t index) const;
  Tensor dense_batch(std::size_t epoch, std::size_t index) const;

 private:
  const Corpus* corpus_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

}  // namespace ntm
