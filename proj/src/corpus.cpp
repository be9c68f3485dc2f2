#include "ntm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

#include "ntm/errors.hpp"
#include "ntm/rng.hpp"

namespace ntm {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char ch : text) {
    const unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// ---- Vocabulary ----

Vocabulary::Vocabulary(std::vector<std::string> terms)
    : terms_(std::move(terms)) {
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!index_.emplace(terms_[i], i).second)
      throw VocabularyError("duplicate term '" + terms_[i] + "' at index " +
                            std::to_string(i));
  }
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& docs,
                             std::size_t max_size,
                             const std::unordered_set<std::string>& stopwords) {
  if (max_size < 1)
    throw ContractError("build_vocabulary: max_size must be at least 1");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& doc : docs)
    for (const auto& tok : doc)
      if (!stopwords.count(tok)) ++freq[tok];
  if (freq.empty())
    throw VocabularyError(
        "no terms survive stopword filtering; vocabulary would be empty");

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(),
                                                          freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  ranked.resize(std::min(max_size, ranked.size()));
  std::vector<std::string> terms;
  terms.reserve(ranked.size());
  for (auto& [term, count] : ranked) terms.push_back(std::move(term));
  return Vocabulary(std::move(terms));
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file: " + path);
  std::vector<std::string> terms;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty())
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": empty vocabulary line");
    terms.push_back(line);
  }
  return Vocabulary(std::move(terms));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary file: " + path);
  for (const auto& t : terms_) out << t << '\n';
  if (!out) throw IoError("short write to vocabulary file: " + path);
}

const std::string& Vocabulary::term(std::size_t idx) const {
  if (idx >= terms_.size())
    throw VocabularyError("term index " + std::to_string(idx) +
                          " out of range for V=" + std::to_string(terms_.size()));
  return terms_[idx];
}

std::optional<std::size_t> Vocabulary::index(const std::string& term) const {
  const auto it = index_.find(term);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stopword file: " + path);
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string lowered;
    lowered.reserve(line.size());
    for (const char ch : line)
      lowered.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    words.insert(std::move(lowered));
  }
  return words;
}

// ---- BoW files ----

namespace {

std::size_t parse_uint(const std::string& file, std::size_t lineno,
                       std::string_view text) {
  std::size_t value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ParseError(file + ":" + std::to_string(lineno) +
                     ": expected a non-negative integer, got '" +
                     std::string(text) + "'");
  return value;
}

}  // namespace

Corpus load_bow(const std::string& path, const Vocabulary& vocab,
                std::string split) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open BoW file: " + path);
  Corpus corpus;
  corpus.vocab = vocab;
  corpus.split = std::move(split);
  const std::size_t V = vocab.size();

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string field;
    if (!(fields >> field)) continue;  // blank line

    const std::size_t declared = parse_uint(path, lineno, field);
    Document doc;
    while (fields >> field) {
      const auto colon = field.find(':');
      if (colon == std::string::npos || colon == 0 ||
          colon + 1 == field.size())
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": expected idx:count, got '" + field + "'");
      const std::size_t idx =
          parse_uint(path, lineno, std::string_view(field).substr(0, colon));
      const std::size_t cnt =
          parse_uint(path, lineno, std::string_view(field).substr(colon + 1));
      if (idx >= V)
        throw VocabularyError(path + ":" + std::to_string(lineno) +
                              ": term index " + std::to_string(idx) +
                              " out of range for V=" + std::to_string(V));
      if (cnt == 0)
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": zero count for index " + std::to_string(idx));
      doc.counts[idx] += cnt;
      doc.total += cnt;
    }
    if (doc.total != declared)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": declared token total " + std::to_string(declared) +
                       " but counts sum to " + std::to_string(doc.total));
    if (doc.total == 0) {
      ++corpus.dropped_empty;
      continue;
    }
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

void save_bow(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write BoW file: " + path);
  for (const Document& doc : corpus.docs) {
    out << doc.total;
    for (const auto& [idx, cnt] : doc.counts) out << ' ' << idx << ':' << cnt;
    out << '\n';
  }
  if (!out) throw IoError("short write to BoW file: " + path);
}

Corpus corpus_from_tokens(const std::vector<std::vector<std::string>>& docs,
                          const Vocabulary& vocab, std::string split) {
  Corpus corpus;
  corpus.vocab = vocab;
  corpus.split = std::move(split);
  for (const auto& tokens : docs) {
    Document doc;
    for (const auto& tok : tokens) {
      if (const auto idx = vocab.index(tok)) {
        ++doc.counts[*idx];
        ++doc.total;
      }
    }
    if (doc.total == 0) {
      ++corpus.dropped_empty;
      continue;
    }
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

Tensor dense_counts(const Corpus& corpus, const std::vector<std::size_t>& ids) {
  if (ids.empty()) throw ContractError("dense_counts: empty id list");
  const std::size_t V = corpus.vocab_size();
  Tensor out({ids.size(), V});
  for (std::size_t b = 0; b < ids.size(); ++b) {
    if (ids[b] >= corpus.size())
      throw ContractError("dense_counts: document id " +
                          std::to_string(ids[b]) + " out of range");
    for (const auto& [idx, cnt] : corpus.docs[ids[b]].counts)
      out.at(b, idx) = static_cast<double>(cnt);
  }
  return out;
}

// ---- Minibatcher ----

Minibatcher::Minibatcher(const Corpus& corpus, std::size_t batch_size,
                         std::uint64_t seed)
    : corpus_(&corpus), batch_size_(batch_size), seed_(seed) {
  if (batch_size < 1)
    throw ContractError("minibatches: batch_size must be at least 1");
  if (corpus.size() == 0) throw ContractError("minibatches: empty corpus");
}

std::size_t Minibatcher::count() const {
  return (corpus_->size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::size_t> Minibatcher::order(std::size_t epoch) const {
  std::vector<std::size_t> ids(corpus_->size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  Rng rng(Rng::derive(seed_, epoch));
  rng.shuffle(ids);
  return ids;
}

std::vector<std::size_t> Minibatcher::batch_docs(std::size_t epoch,
                                                 std::size_t index) const {
  if (index >= count())
    throw ContractError("minibatches: batch index " + std::to_string(index) +
                        " out of range");
  const std::vector<std::size_t> ids = order(epoch);
  const std::size_t lo = index * batch_size_;
  const std::size_t hi = std::min(ids.size(), lo + batch_size_);
  return std::vector<std::size_t>(ids.begin() + lo, ids.begin() + hi);
}

Tensor Minibatcher::dense_batch(std::size_t epoch, std::size_t index) const {
  return dense_counts(*corpus_, batch_docs(epoch, index));
}

}  // namespace ntm
