// Command-line front end: train a model, score held-out perplexity and
// coherence, list topic words, and export per-document topic weights.
//
// Exit codes: 0 success; 2 usage, configuration, or file problems;
// 3 checkpoint/corpus mismatch.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ntm/corpus.hpp"
#include "ntm/errors.hpp"
#include "ntm/eval.hpp"
#include "ntm/model.hpp"
#include "ntm/train.hpp"

namespace {

using namespace ntm;

// A usage problem detected after flag parsing (bad config file value,
// incoherent flag combination). Reported like a parse error: exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // model shape
  std::string model = "gsm";
  std::string decoder = "mixture";
  std::size_t topics = 50;
  std::size_t init_topics = 0;  // unbounded construction: initial active count
  std::size_t hidden = 200;
  std::size_t mlp_hidden = 256;
  double dropout_keep = 0.8;
  // optimisation
  double lr = 1e-3;
  std::size_t batch = 64;
  std::size_t epochs = 1;
  std::uint64_t seed = 1;
  double gamma = 5e-5;
  double lambda = 0.1;
  bool alternating = false;
  bool alternate_per_epoch = false;
  double clip = 5.0;
  std::size_t max_active = 0;
  // paths
  std::string train_path, test_path, vocab_path, stopwords_path;
  std::string checkpoint_path, out_path, ref_path, config_path;
  // evaluation
  std::size_t top = 10;
  bool coherence = false;
  bool sample = false;
  bool dry_run = false;
};

// One resolvable setting: its config-file key, the CLI option bound to it,
// a parser for file values, and a printer for --dry-run.
struct Field {
  std::string key;
  CLI::Option* opt;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw UsageError("config value for '" + key + "' is not a boolean: '" +
                   value + "'");
}

// Registry of a subcommand's settings, applying file values beneath flag
// values: command-line flag > config file > built-in default.
class FieldSet {
 public:
  void add_string(CLI::Option* opt, const std::string& key, std::string& slot) {
    fields_.push_back({key, opt, [&slot](const std::string& v) { slot = v; },
                       [&slot] { return slot; }});
  }
  void add_double(CLI::Option* opt, const std::string& key, double& slot) {
    fields_.push_back({key, opt,
                       [key, &slot](const std::string& v) {
                         try {
                           std::size_t used = 0;
                           slot = std::stod(v, &used);
                           if (used != v.size()) throw std::invalid_argument(v);
                         } catch (const std::exception&) {
                           throw UsageError("config value for '" + key +
                                            "' is not a number: '" + v + "'");
                         }
                       },
                       [&slot] { return format_double(slot); }});
  }
  template <typename UInt>
  void add_unsigned(CLI::Option* opt, const std::string& key, UInt& slot) {
    fields_.push_back({key, opt,
                       [key, &slot](const std::string& v) {
                         try {
                           std::size_t used = 0;
                           const unsigned long long parsed = std::stoull(v, &used);
                           if (used != v.size()) throw std::invalid_argument(v);
                           slot = static_cast<UInt>(parsed);
                         } catch (const std::exception&) {
                           throw UsageError("config value for '" + key +
                                            "' is not a count: '" + v + "'");
                         }
                       },
                       [&slot] { return std::to_string(slot); }});
  }
  void add_bool(CLI::Option* opt, const std::string& key, bool& slot) {
    fields_.push_back({key, opt,
                       [key, &slot](const std::string& v) {
                         slot = parse_bool(key, v);
                       },
                       [&slot] { return slot ? std::string("true")
                                             : std::string("false"); }});
  }

  // key=value lines; '#' starts a comment, blank lines are fine. A file
  // value is used only where the flag was not given.
  void apply_file(const std::string& path) const {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto strip = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
      };
      const std::string entry = strip(line);
      if (entry.empty()) continue;
      const auto eq = entry.find('=');
      if (eq == std::string::npos) {
        throw UsageError("config line " + std::to_string(lineno) +
                         " is not key=value: '" + entry + "'");
      }
      const std::string key = strip(entry.substr(0, eq));
      const std::string value = strip(entry.substr(eq + 1));
      const Field* field = nullptr;
      for (const Field& f : fields_) {
        if (f.key == key) {
          field = &f;
          break;
        }
      }
      if (field == nullptr) throw UsageError("unknown config key '" + key + "'");
      if (field->opt->count() == 0) field->set(value);
    }
  }

  void print_resolved(std::ostream& out) const {
    for (const Field& f : fields_) out << f.key << "=" << f.get() << "\n";
  }

 private:
  std::vector<Field> fields_;
};

// ---- shared option groups ----

void add_config_option(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--config", rc.config_path,
                  "key=value settings file (flags take precedence)");
}

void add_model_options(CLI::App* cmd, RunConfig& rc, FieldSet& fs) {
  fs.add_string(cmd->add_option("--model", rc.model,
                                "construction: gsm, gsb, rsb, or rsb-tf"),
                "model", rc.model);
  fs.add_string(cmd->add_option("--decoder", rc.decoder,
                                "decoder: mixture (topic model) or softmax "
                                "(document model)"),
                "decoder", rc.decoder);
  fs.add_unsigned(cmd->add_option("--topics", rc.topics, "topic count K"),
                  "topics", rc.topics);
  fs.add_unsigned(cmd->add_option("--init-topics", rc.init_topics,
                                  "initial active topics (rsb-tf only)"),
                  "init-topics", rc.init_topics);
  fs.add_unsigned(cmd->add_option("--hidden", rc.hidden,
                                  "width of the Gaussian draw and the "
                                  "topic/word vectors"),
                  "hidden", rc.hidden);
  fs.add_unsigned(cmd->add_option("--mlp-hidden", rc.mlp_hidden,
                                  "inference-network hidden width"),
                  "mlp-hidden", rc.mlp_hidden);
  fs.add_double(cmd->add_option("--dropout-keep", rc.dropout_keep,
                                "keep-probability on the inference hidden "
                                "layer"),
                "dropout-keep", rc.dropout_keep);
}

void add_train_options(CLI::App* cmd, RunConfig& rc, FieldSet& fs) {
  fs.add_double(cmd->add_option("--lr", rc.lr, "Adam learning rate"), "lr",
                rc.lr);
  fs.add_unsigned(cmd->add_option("--batch", rc.batch, "minibatch size"),
                  "batch", rc.batch);
  fs.add_unsigned(cmd->add_option("--epochs", rc.epochs, "training epochs"),
                  "epochs", rc.epochs);
  fs.add_unsigned(cmd->add_option("--seed", rc.seed,
                                  "seed for every random stream"),
                  "seed", rc.seed);
  fs.add_double(cmd->add_option("--gamma", rc.gamma,
                                "topic-acceptance threshold (rsb-tf)"),
                "gamma", rc.gamma);
  fs.add_double(cmd->add_option("--lambda", rc.lambda,
                                "topic-diversity weight (0 disables)"),
                "lambda", rc.lambda);
  fs.add_bool(cmd->add_flag("--alternating", rc.alternating,
                            "alternate decoder and inference updates"),
              "alternating", rc.alternating);
  fs.add_bool(cmd->add_flag("--alternate-per-epoch", rc.alternate_per_epoch,
                            "switch the alternating group per epoch instead "
                            "of per batch"),
              "alternate-per-epoch", rc.alternate_per_epoch);
  fs.add_double(cmd->add_option("--clip", rc.clip,
                                "global gradient-norm ceiling (0 disables)"),
                "clip", rc.clip);
  fs.add_unsigned(cmd->add_option("--max-active", rc.max_active,
                                  "cap on grown topics (rsb-tf; 0 = none)"),
                  "max-active", rc.max_active);
}

// ---- command helpers ----

Vocabulary load_vocab(const RunConfig& rc) {
  if (rc.vocab_path.empty()) throw UsageError("--vocab is required");
  return Vocabulary::load(rc.vocab_path);
}

Corpus load_corpus(const std::string& path, const Vocabulary& vocab,
                   const std::string& split, const RunConfig& rc) {
  if (path.empty()) throw UsageError("--" + split + " is required");
  Corpus corpus = load_bow(path, vocab, split);
  if (!rc.stopwords_path.empty()) {
    const auto stopwords = load_stopwords(rc.stopwords_path);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
      Document& doc = corpus.docs[i];
      for (auto it = doc.counts.begin(); it != doc.counts.end();) {
        if (stopwords.count(vocab.term(it->first)) != 0) {
          doc.total -= it->second;
          it = doc.counts.erase(it);
        } else {
          ++it;
        }
      }
      if (doc.total == 0) continue;
      if (kept != i) corpus.docs[kept] = std::move(doc);
      ++kept;
    }
    corpus.dropped_empty += corpus.docs.size() - kept;
    corpus.docs.resize(kept);
  }
  if (corpus.size() == 0) {
    throw ContractError("corpus '" + path + "' has no usable documents");
  }
  return corpus;
}

Checkpoint load_model(const RunConfig& rc, std::size_t expected_vocab,
                      std::size_t expected_topics = 0) {
  if (rc.checkpoint_path.empty()) throw UsageError("--checkpoint is required");
  Checkpoint ck = load_checkpoint(rc.checkpoint_path);
  require_compatible(ck.model.config(), expected_topics, expected_vocab);
  return ck;
}

std::size_t active_count(const Checkpoint& ck) {
  return ck.state.active_topics != 0 ? ck.state.active_topics
                                     : ck.model.config().topics;
}

// ---- commands ----

int cmd_train(const RunConfig& rc, const FieldSet& fields) {
  if (rc.dry_run) {
    fields.print_resolved(std::cout);
    return 0;
  }
  const Construction construction = construction_from(rc.model);
  if (rc.init_topics != 0 && construction != Construction::rsb_tf) {
    throw UsageError("--init-topics applies only to the rsb-tf construction");
  }
  if (rc.out_path.empty()) throw UsageError("--out is required");

  const Vocabulary vocab = load_vocab(rc);
  const Corpus corpus = load_corpus(rc.train_path, vocab, "train", rc);

  ModelConfig mc;
  mc.construction = construction;
  mc.decoder = decoder_from(rc.decoder);
  mc.topics = construction == Construction::rsb_tf && rc.init_topics != 0
                  ? rc.init_topics
                  : rc.topics;
  mc.vocab = vocab.size();
  mc.hidden = rc.hidden;
  mc.mlp_hidden = rc.mlp_hidden;
  mc.dropout_keep = rc.dropout_keep;

  TrainConfig tc;
  tc.lr = rc.lr;
  tc.batch = rc.batch;
  tc.epochs = rc.epochs;
  tc.seed = rc.seed;
  tc.gamma = rc.gamma;
  tc.lambda = rc.lambda;
  tc.alternating = rc.alternating;
  tc.alternate_per_epoch = rc.alternate_per_epoch;
  tc.clip_norm = rc.clip;
  tc.max_active = rc.max_active;

  std::filesystem::create_directories(rc.out_path);
  const std::filesystem::path out_dir(rc.out_path);
  const std::string metrics_path = (out_dir / "metrics.csv").string();
  const std::string checkpoint_path = (out_dir / "model.ntmc").string();

  // Resuming keeps the checkpoint's shape; a fresh run draws new weights.
  NeuralTopicModel* model = nullptr;
  std::optional<Checkpoint> resumed;
  std::optional<NeuralTopicModel> fresh;
  TrainState state(tc.seed);
  if (!rc.checkpoint_path.empty()) {
    resumed = load_checkpoint(rc.checkpoint_path);
    require_compatible(resumed->model.config(), 0, vocab.size());
    model = &resumed->model;
    state = resumed->state;
  } else {
    Rng init_rng(Rng::derive(tc.seed, 0));
    fresh.emplace(mc, init_rng);
    model = &*fresh;
  }

  // A re-run starts its metrics log fresh; resumes keep appending.
  if (resumed.has_value()) {
    std::ofstream touch(metrics_path, std::ios::app);
  } else {
    std::ofstream truncate(metrics_path, std::ios::trunc);
    if (!truncate) throw IoError("cannot write metrics log: " + metrics_path);
  }
  MetricsLog log(metrics_path);

  const std::vector<EpochMetrics> history = fit(corpus, *model, tc, state, &log);
  for (std::size_t e = 0; e < history.size(); ++e) {
    const EpochMetrics& em = history[e];
    std::printf("epoch %zu  elbo %.6f  kl %.6f  perplexity %.4f  active %zu\n",
                state.epochs_done - history.size() + e, em.mean_elbo,
                em.mean_kl, em.perplexity, em.active_topics);
  }
  save_checkpoint(*model, state, checkpoint_path);
  std::printf("wrote %s\n", checkpoint_path.c_str());
  std::printf("wrote %s\n", metrics_path.c_str());
  return 0;
}

int cmd_eval(const RunConfig& rc) {
  const Vocabulary vocab = load_vocab(rc);
  const Corpus corpus = load_corpus(rc.test_path, vocab, "test", rc);
  const Checkpoint ck = load_model(rc, vocab.size());
  const std::size_t active = active_count(ck);

  const double perp = perplexity(corpus, ck.model, active, rc.sample, rc.seed,
                                 rc.batch);
  std::printf("perplexity %.6f\n", perp);
  std::printf("documents %zu  active-topics %zu\n", corpus.size(), active);

  if (rc.coherence) {
    std::optional<Corpus> loaded_ref;
    if (!rc.ref_path.empty()) {
      loaded_ref = load_bow(rc.ref_path, vocab, "ref");
    }
    const Corpus& reference = loaded_ref.has_value() ? *loaded_ref : corpus;
    const CoherenceReport report =
        npmi_coherence(ck.model, vocab, reference, active);
    std::printf("coherence (npmi)\n");
    for (const TopicCoherence& tc : report.topics) {
      std::printf("topic %zu  top5 %.6f  top10 %.6f\n", tc.topic, tc.npmi5,
                  tc.npmi10);
    }
    std::printf("mean  top5 %.6f  top10 %.6f\n", report.mean5, report.mean10);
    if (report.diagnostics.skipped_pairs != 0) {
      std::fprintf(stderr, "warning: %zu word pairs skipped (%zu words "
                           "absent from the reference corpus)\n",
                   report.diagnostics.skipped_pairs,
                   report.diagnostics.missing_words);
    }
  }
  return 0;
}

int cmd_topics(const RunConfig& rc) {
  if (rc.top == 0) throw UsageError("--top must be positive");
  const Vocabulary vocab = load_vocab(rc);
  const Checkpoint ck = load_model(rc, vocab.size());
  const std::size_t active = active_count(ck);

  bool clipped = false;
  const auto tops = top_words(ck.model, vocab, rc.top, active, &clipped);
  if (clipped) {
    std::fprintf(stderr, "warning: vocabulary has only %zu terms; listing "
                         "all of them\n",
                 vocab.size());
  }
  const bool document_model = ck.model.config().decoder == Decoder::softmax;
  for (const TopicSummary& ts : tops) {
    std::printf("topic %zu (ranked by %s)\n", ts.topic,
                document_model ? "connection weight" : "probability");
    for (std::size_t i = 0; i < ts.word_ids.size(); ++i) {
      std::printf("  %-24s %.6f\n", vocab.term(ts.word_ids[i]).c_str(),
                  ts.scores[i]);
    }
  }
  return 0;
}

int cmd_infer(const RunConfig& rc) {
  if (rc.out_path.empty()) throw UsageError("--out is required");
  const Vocabulary vocab = load_vocab(rc);
  const Corpus corpus = load_corpus(rc.test_path, vocab, "test", rc);
  const Checkpoint ck = load_model(rc, vocab.size());
  export_theta(corpus, ck.model, rc.out_path, active_count(ck), rc.sample,
               rc.seed);
  std::printf("wrote %s\n", rc.out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "neural variational topic models: train, evaluate, list topics, and "
      "export document-topic weights.\nNEURALTOPICS_THREADS caps internal "
      "parallelism."};
  app.require_subcommand(1);
  RunConfig rc;

  FieldSet train_fields;
  CLI::App* train = app.add_subcommand("train", "fit a model on a BoW corpus");
  add_model_options(train, rc, train_fields);
  add_train_options(train, rc, train_fields);
  train_fields.add_string(
      train->add_option("--train", rc.train_path, "training BoW file"),
      "train", rc.train_path);
  train_fields.add_string(
      train->add_option("--vocab", rc.vocab_path, "vocabulary file"), "vocab",
      rc.vocab_path);
  train_fields.add_string(
      train->add_option("--stopwords", rc.stopwords_path,
                        "terms to drop from documents"),
      "stopwords", rc.stopwords_path);
  train_fields.add_string(
      train->add_option("--checkpoint", rc.checkpoint_path,
                        "resume from this checkpoint"),
      "checkpoint", rc.checkpoint_path);
  train_fields.add_string(
      train->add_option("--out", rc.out_path,
                        "output directory for model.ntmc and metrics.csv"),
      "out", rc.out_path);
  add_config_option(train, rc);
  train->add_flag("--dry-run", rc.dry_run,
                  "print the resolved settings and exit");

  FieldSet eval_fields;
  CLI::App* eval = app.add_subcommand("eval", "score a held-out corpus");
  eval_fields.add_string(
      eval->add_option("--test", rc.test_path, "BoW corpus to score"), "test",
      rc.test_path);
  eval_fields.add_string(
      eval->add_option("--vocab", rc.vocab_path, "vocabulary file"), "vocab",
      rc.vocab_path);
  eval_fields.add_string(
      eval->add_option("--stopwords", rc.stopwords_path,
                       "terms to drop from documents"),
      "stopwords", rc.stopwords_path);
  eval_fields.add_string(
      eval->add_option("--checkpoint", rc.checkpoint_path, "model to score"),
      "checkpoint", rc.checkpoint_path);
  eval_fields.add_bool(
      eval->add_flag("--coherence", rc.coherence, "also report topic NPMI"),
      "coherence", rc.coherence);
  eval_fields.add_string(
      eval->add_option("--ref", rc.ref_path,
                       "co-occurrence reference corpus (default: the scored "
                       "corpus)"),
      "ref", rc.ref_path);
  eval_fields.add_bool(
      eval->add_flag("--sample", rc.sample,
                     "score one posterior draw instead of the mean"),
      "sample", rc.sample);
  eval_fields.add_unsigned(
      eval->add_option("--seed", rc.seed, "seed for --sample"), "seed",
      rc.seed);
  eval_fields.add_unsigned(
      eval->add_option("--batch", rc.batch, "evaluation chunk size"), "batch",
      rc.batch);
  add_config_option(eval, rc);

  FieldSet topics_fields;
  CLI::App* topics = app.add_subcommand("topics", "list top words per topic");
  topics_fields.add_string(
      topics->add_option("--vocab", rc.vocab_path, "vocabulary file"), "vocab",
      rc.vocab_path);
  topics_fields.add_string(
      topics->add_option("--checkpoint", rc.checkpoint_path,
                         "model to inspect"),
      "checkpoint", rc.checkpoint_path);
  topics_fields.add_unsigned(
      topics->add_option("--top", rc.top, "words per topic"), "top", rc.top);
  add_config_option(topics, rc);

  FieldSet infer_fields;
  CLI::App* infer = app.add_subcommand(
      "infer", "export per-document topic weights");
  infer_fields.add_string(
      infer->add_option("--test", rc.test_path, "BoW corpus to embed"), "test",
      rc.test_path);
  infer_fields.add_string(
      infer->add_option("--vocab", rc.vocab_path, "vocabulary file"), "vocab",
      rc.vocab_path);
  infer_fields.add_string(
      infer->add_option("--stopwords", rc.stopwords_path,
                        "terms to drop from documents"),
      "stopwords", rc.stopwords_path);
  infer_fields.add_string(
      infer->add_option("--checkpoint", rc.checkpoint_path, "model to apply"),
      "checkpoint", rc.checkpoint_path);
  infer_fields.add_string(
      infer->add_option("--out", rc.out_path, "output weights file"), "out",
      rc.out_path);
  infer_fields.add_bool(
      infer->add_flag("--sample", rc.sample,
                      "export one posterior draw instead of the mean"),
      "sample", rc.sample);
  infer_fields.add_unsigned(
      infer->add_option("--seed", rc.seed, "seed for --sample"), "seed",
      rc.seed);
  add_config_option(infer, rc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) {
      if (!rc.config_path.empty()) train_fields.apply_file(rc.config_path);
      return cmd_train(rc, train_fields);
    }
    if (*eval) {
      if (!rc.config_path.empty()) eval_fields.apply_file(rc.config_path);
      return cmd_eval(rc);
    }
    if (*topics) {
      if (!rc.config_path.empty()) topics_fields.apply_file(rc.config_path);
      return cmd_topics(rc);
    }
    if (!rc.config_path.empty()) infer_fields.apply_file(rc.config_path);
    return cmd_infer(rc);
  } catch (const MismatchError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
}
