#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ntm/errors.hpp"
#include "ntm/train.hpp"

// Checkpoint layout (native-endian binary, documented in README.md):
//   magic "NTMCKPT1", u32 version
//   construction name, decoder name            (strings: u64 length + bytes)
//   u64 topics, vocab, hidden, mlp_hidden; f64 dropout_keep
//   u64 epochs_done, u64 active_topics
//   epsilon stream state, dropout stream state (strings)
//   u64 parameter count, then per parameter:
//     name, u8 generative, u64 steps, u64 rank, rank × u64 dims,
//     value doubles, first-moment doubles, second-moment doubles
//   trailer "END!"

namespace ntm {

namespace {

constexpr char kMagic[8] = {'N', 'T', 'M', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr char kTrailer[4] = {'E', 'N', 'D', '!'};

class Writer {
 public:
  explicit Writer(const std::string& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot write checkpoint '" + path + "'");
  }

  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p),
               static_cast<std::streamsize>(n));
  }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void u8(std::uint8_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void doubles(const Tensor& t) { raw(t.data(), t.numel() * sizeof(double)); }

  void finish() {
    out_.flush();
    if (!out_) throw IoError("short write to checkpoint '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot read checkpoint '" + path + "'");
  }

  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw IoError("truncated checkpoint '" + path_ + "'");
    }
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > (1ULL << 32)) {
      throw IoError("corrupt string length in checkpoint '" + path_ + "'");
    }
    std::string s(n, '\0');
    if (n > 0) raw(s.data(), n);
    return s;
  }
  void doubles(Tensor& t) { raw(t.data(), t.numel() * sizeof(double)); }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace

void save_checkpoint(const NeuralTopicModel& model, const TrainState& state,
                     const std::string& path) {
  Writer w(path);
  w.raw(kMagic, sizeof kMagic);
  w.u32(kVersion);
  const ModelConfig& cfg = model.config();
  w.str(to_string(cfg.construction));
  w.str(to_string(cfg.decoder));
  w.u64(cfg.topics);
  w.u64(cfg.vocab);
  w.u64(cfg.hidden);
  w.u64(cfg.mlp_hidden);
  w.f64(cfg.dropout_keep);
  w.u64(state.epochs_done);
  w.u64(state.active_topics);
  w.str(state.epsilon_rng.state());
  w.str(state.dropout_rng.state());
  w.u64(model.params().size());
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    const Param& p = model.params()[i];
    w.str(p.name);
    w.u8(p.generative ? 1 : 0);
    w.u64(p.steps);
    w.u64(p.value.rank());
    for (const std::size_t d : p.value.shape()) w.u64(d);
    w.doubles(p.value);
    w.doubles(p.m);
    w.doubles(p.v);
  }
  w.raw(kTrailer, sizeof kTrailer);
  w.finish();
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw IoError("'" + path + "' is not a checkpoint");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw IoError("checkpoint '" + path + "' has version " +
                  std::to_string(version) + ", this build reads " +
                  std::to_string(kVersion));
  }
  ModelConfig cfg;
  cfg.construction = construction_from(r.str());
  cfg.decoder = decoder_from(r.str());
  cfg.topics = r.u64();
  cfg.vocab = r.u64();
  cfg.hidden = r.u64();
  cfg.mlp_hidden = r.u64();
  cfg.dropout_keep = r.f64();

  TrainState state;
  state.epochs_done = r.u64();
  state.active_topics = r.u64();
  state.epsilon_rng.restore(r.str());
  state.dropout_rng.restore(r.str());

  Rng scratch(0);
  NeuralTopicModel model(cfg, scratch);
  const std::uint64_t count = r.u64();
  if (count != model.params().size()) {
    throw IoError("checkpoint '" + path + "' holds " + std::to_string(count) +
                  " parameters, the declared model has " +
                  std::to_string(model.params().size()));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    if (!model.params().has(name)) {
      throw IoError("checkpoint '" + path + "' names unknown parameter '" +
                    name + "'");
    }
    Param& p = model.params().at(name);
    const bool generative = r.u8() != 0;
    if (generative != p.generative) {
      throw IoError("checkpoint '" + path + "' misgroups parameter '" + name +
                    "'");
    }
    p.steps = r.u64();
    const std::uint64_t rank = r.u64();
    std::vector<std::size_t> shape(rank);
    for (std::uint64_t d = 0; d < rank; ++d) shape[d] = r.u64();
    if (shape != p.value.shape()) {
      throw IoError("checkpoint '" + path + "' stores '" + name + "' as " +
                    Tensor::shape_str(shape) + ", the declared model wants " +
                    p.value.shape_str());
    }
    r.doubles(p.value);
    r.doubles(p.m);
    r.doubles(p.v);
  }
  char trailer[4];
  r.raw(trailer, sizeof trailer);
  if (std::memcmp(trailer, kTrailer, sizeof kTrailer) != 0) {
    throw IoError("truncated checkpoint '" + path + "'");
  }
  return Checkpoint{std::move(model), std::move(state)};
}

void require_compatible(const ModelConfig& loaded, std::size_t topics,
                        std::size_t vocab) {
  if (topics != 0 && topics != loaded.topics) {
    throw MismatchError("checkpoint was trained with " +
                        std::to_string(loaded.topics) +
                        " topics, this run asks for " +
                        std::to_string(topics));
  }
  if (vocab != 0 && vocab != loaded.vocab) {
    throw MismatchError("checkpoint vocabulary size " +
                        std::to_string(loaded.vocab) +
                        " does not match the corpus (" +
                        std::to_string(vocab) + " terms)");
  }
}

}  // namespace ntm
