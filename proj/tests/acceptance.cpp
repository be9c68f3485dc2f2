// Acceptance gate for the library: one line per criterion, PASS/FAIL/SKIP,
// exit code = number of failures. Criteria 4-6 are properties of a held-out
// reference dataset (point NEURALTOPICS_20NG_DIR at a directory holding
// vocab.txt, train.bow and test.bow to run them); without it those lines
// SKIP, and a small synthetic stand-in exercises the same pipeline so the
// code path is still checked end to end. All runs are seeded; the binary
// prints the same report on every invocation.

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ntm/constructions.hpp"
#include "ntm/eval.hpp"
#include "ntm/gradcheck.hpp"
#include "ntm/model.hpp"
#include "ntm/train.hpp"
#include "support/synthetic.hpp"
#include "support/test_util.hpp"

using namespace ntm;
using testutil::make_planted;
using testutil::random_in;

namespace {

int failures = 0;

enum class Status { pass, fail, skip };

void report(const char* name, Status s, const std::string& detail) {
  const char* tag = s == Status::pass ? "PASS" : s == Status::fail ? "FAIL"
                                                                   : "SKIP";
  std::printf("%s: %s - %s\n", name, tag, detail.c_str());
  std::fflush(stdout);
  if (s == Status::fail) ++failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

Tensor random_simplex_rows(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      t.at(r, c) = 0.05 + rng.uniform();
      total += t.at(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) t.at(r, c) /= total;
  }
  return t;
}

Tensor random_counts(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (std::size_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<double>(rng.below(5));
  return t;
}

// ---- criterion 1: analytic properties of the building blocks ----

struct SimplexStats {
  double worst_sum_err = 0.0;
  double min_entry = 1.0;
};

void check_simplex(const Tensor& theta, SimplexStats& st) {
  const std::size_t rows = theta.shape()[0], cols = theta.shape()[1];
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      sum += theta.at(r, c);
      st.min_entry = std::min(st.min_entry, theta.at(r, c));
    }
    st.worst_sum_err = std::max(st.worst_sum_err, std::abs(sum - 1.0));
  }
}

bool criterion_properties(std::string& detail) {
  bool ok = true;
  std::string why;

  // Simplex invariants: 10^4 random inputs per construction, fresh random
  // weights every thousand rows.
  const std::size_t B = 1000, H = 8, K = 7;
  SimplexStats st;
  for (int chunk = 0; chunk < 10; ++chunk) {
    Rng rng(1000 + chunk);
    Tape t;
    const Var x = t.constant(random_in({B, H}, rng, -3.0, 3.0));
    check_simplex(gsm_theta(x, t.constant(random_in({H, K}, rng))).value(),
                  st);
    check_simplex(gsb_theta(x, t.constant(random_in({H, K - 1}, rng))).value(),
                  st);
    std::vector<Var> cell_vars;
    for (auto& p : lstm_init(H, H, rng))
      cell_vars.push_back(t.constant(random_in(p.value.shape(), rng, -1, 1)));
    const RecurrentState start{t.constant(random_in({1, H}, rng, -0.5, 0.5)),
                               t.constant(random_in({1, H}, rng, -0.5, 0.5))};
    check_simplex(rsb_theta(x, lstm_from_vars(cell_vars), start, K).value(),
                  st);
  }
  if (st.worst_sum_err > 1e-10 || st.min_entry < 0.0) {
    ok = false;
    why += fmt(" simplex violated (sum err %.2e, min %.2e);", st.worst_sum_err,
               st.min_entry);
  }

  // Stick-breaking refinement: appending one more break leaves the leading
  // masses untouched and splits only the old remainder.
  double refine_err = 0.0;
  {
    Rng rng(77);
    Tape t;
    const std::size_t R = 500, Kr = 6;
    const Tensor eta = random_in({R, Kr - 1}, rng, 0.02, 0.98);
    Tensor ext({R, Kr});
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t j = 0; j + 1 < Kr; ++j) ext.at(r, j) = eta.at(r, j);
      ext.at(r, Kr - 1) = 0.05 + 0.9 * rng.uniform();
    }
    const Tensor& base = stick_break(t.constant(eta), Kr).value();
    const Tensor& fine = stick_break(t.constant(ext), Kr + 1).value();
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t j = 0; j + 1 < Kr; ++j)
        refine_err =
            std::max(refine_err, std::abs(fine.at(r, j) - base.at(r, j)));
      refine_err = std::max(
          refine_err, std::abs(fine.at(r, Kr - 1) + fine.at(r, Kr) -
                               base.at(r, Kr - 1)));
    }
  }
  if (refine_err > 1e-12) {
    ok = false;
    why += fmt(" refinement err %.2e;", refine_err);
  }

  // Gaussian KL: nonnegative everywhere, and the closed form agrees with a
  // 10^6-sample Monte-Carlo estimate of E_q[ln q - ln p] on 20 random
  // one-dimensional posteriors.
  double kl_mc_err = 0.0, kl_min = 1e300;
  {
    Rng rng(88);
    Tape t;
    const GaussianParams wide{t.constant(random_in({50, H}, rng, -3, 3)),
                              t.constant(random_in({50, H}, rng, -1.5, 1.5))};
    const Tensor& kl = gaussian_kl(wide).value();
    for (std::size_t i = 0; i < kl.numel(); ++i)
      kl_min = std::min(kl_min, kl[i]);

    for (int trial = 0; trial < 20; ++trial) {
      const double mu = -1.5 + 3.0 * rng.uniform();
      const double ls = -0.6 + 1.2 * rng.uniform();
      const double sigma = std::exp(ls);
      double acc = 0.0;
      const std::size_t S = 1000000;
      for (std::size_t s = 0; s < S; ++s) {
        const double e = rng.normal();
        const double x = mu + sigma * e;
        acc += 0.5 * x * x - 0.5 * e * e - ls;
      }
      const double mc = acc / double(S);
      Tape ts;
      const GaussianParams p{ts.constant(Tensor::scalar(mu)),
                             ts.constant(Tensor::scalar(ls))};
      kl_mc_err =
          std::max(kl_mc_err, std::abs(gaussian_kl(p).value()[0] - mc));
    }
  }
  if (kl_min < 0.0 || kl_mc_err > 1e-2) {
    ok = false;
    why += fmt(" KL min %.2e / MC err %.2e;", kl_min, kl_mc_err);
  }

  // Mixture decoder vs summing the topic assignment out by hand at K=10.
  double mix_err = 0.0;
  {
    Rng rng(99);
    const std::size_t Km = 10, V = 30, D = 3;
    const Tensor theta = random_simplex_rows(D, Km, rng);
    const Tensor beta = random_simplex_rows(Km, V, rng);
    const Tensor counts = random_counts(D, V, rng);
    Tape t;
    const MixtureLikelihood ml =
        mixture_log_likelihood(counts, t.constant(theta), t.constant(beta));
    for (std::size_t d = 0; d < D; ++d) {
      double want = 0.0;
      for (std::size_t w = 0; w < V; ++w) {
        if (counts.at(d, w) == 0.0) continue;
        double p = 0.0;
        for (std::size_t z = 0; z < Km; ++z)
          p += theta.at(d, z) * beta.at(z, w);
        want += counts.at(d, w) * std::log(p);
      }
      mix_err = std::max(mix_err, std::abs(ml.per_doc.value()[d] - want) /
                                      std::max(1.0, std::abs(want)));
    }
  }
  if (mix_err > 1e-12) {
    ok = false;
    why += fmt(" mixture enumeration err %.2e;", mix_err);
  }

  // Softmax decoder: adding a constant to every score shifts each document
  // by a per-document constant, which the normaliser must absorb.
  double shift_err = 0.0;
  {
    Rng rng(111);
    const std::size_t D = 50, Km = 6, V = 40;
    const Tensor theta = random_in({D, Km}, rng, -1.5, 1.5);
    const Tensor beta = random_in({Km, V}, rng, -1.0, 1.0);
    Tensor shifted = beta;
    for (std::size_t i = 0; i < shifted.numel(); ++i) shifted[i] += 0.83;
    const Tensor counts = random_counts(D, V, rng);
    Tape t;
    const Var a =
        softmax_log_likelihood(counts, t.constant(theta), t.constant(beta));
    const Var b =
        softmax_log_likelihood(counts, t.constant(theta), t.constant(shifted));
    for (std::size_t d = 0; d < D; ++d)
      shift_err = std::max(shift_err,
                           std::abs(a.value()[d] - b.value()[d]));
  }
  if (shift_err > 1e-10) {
    ok = false;
    why += fmt(" shift invariance err %.2e;", shift_err);
  }

  detail = ok ? fmt("simplex sum err %.1e over 3x10^4 rows, refinement %.1e, "
                    "KL>=%.1e with MC err %.1e, enumeration %.1e, shift %.1e",
                    st.worst_sum_err, refine_err, kl_min, kl_mc_err, mix_err,
                    shift_err)
              : why;
  return ok;
}

// ---- criterion 2: end-to-end gradients ----

bool criterion_gradients(std::string& detail) {
  const Construction cons[] = {Construction::gsm, Construction::gsb,
                               Construction::rsb, Construction::rsb_tf};
  const Decoder decs[] = {Decoder::mixture, Decoder::softmax};
  Rng cr(38);
  const Tensor counts = random_counts(3, 20, cr);
  double worst = 0.0;
  int combo = 0;
  for (const Construction c : cons) {
    for (const Decoder d : decs) {
      ModelConfig cfg;
      cfg.construction = c;
      cfg.decoder = d;
      cfg.topics = 4;
      cfg.vocab = 20;
      cfg.hidden = 3;
      cfg.mlp_hidden = 5;
      cfg.dropout_keep = 1.0;
      Rng init(55);
      const NeuralTopicModel model(cfg, init);

      Rng pr(100 + combo++);
      std::vector<Tensor> point;
      point.reserve(model.params().size());
      for (std::size_t i = 0; i < model.params().size(); ++i) {
        const Param& p = model.params()[i];
        // Keep the rectifier inputs clear of the kink under probing.
        point.push_back(p.name == "inf.b_hidden"
                            ? Tensor::full(p.value.shape(), 1.0)
                            : random_in(p.value.shape(), pr, -0.2, 0.2));
      }
      const Tensor eps = random_in({3, 3}, pr, -1, 1);
      const GradCheckFn f = [&](Tape& tape, const std::vector<Var>& vars) {
        return model.forward(tape, counts, eps, false, nullptr, 0, &vars)
            .mean_elbo;
      };
      worst = std::max(worst, grad_check(f, point, 1e-5));
    }
  }
  detail = fmt("8 construction/decoder pairs on 3 docs, V=20, K=4: "
               "max rel err %.2e (limit 1e-4)",
               worst);
  return worst < 1e-4;
}

// ---- criterion 3: planted-topic recovery ----

// Greedy one-to-one matching of learned topics to planted word blocks by
// top-10 overlap. Returns the mean matched overlap in [0,1].
double matched_overlap(const NeuralTopicModel& model,
                       const testutil::PlantedCorpus& planted) {
  const std::size_t T = planted.blocks.size();
  const auto tops = top_words(model, planted.corpus.vocab, 10);
  std::vector<std::vector<double>> ov(tops.size(), std::vector<double>(T));
  for (std::size_t l = 0; l < tops.size(); ++l)
    for (std::size_t p = 0; p < T; ++p) {
      int hits = 0;
      for (const std::size_t w : tops[l].word_ids)
        if (std::find(planted.blocks[p].begin(), planted.blocks[p].end(), w) !=
            planted.blocks[p].end())
          ++hits;
      ov[l][p] = hits / 10.0;
    }
  std::set<std::size_t> used_l, used_p;
  double mean = 0.0;
  const std::size_t picks = std::min(tops.size(), T);
  for (std::size_t pick = 0; pick < picks; ++pick) {
    double best = -1.0;
    std::size_t bl = 0, bp = 0;
    for (std::size_t l = 0; l < tops.size(); ++l)
      for (std::size_t p = 0; p < T; ++p)
        if (!used_l.count(l) && !used_p.count(p) && ov[l][p] > best) {
          best = ov[l][p];
          bl = l;
          bp = p;
        }
    used_l.insert(bl);
    used_p.insert(bp);
    mean += best;
  }
  return mean / double(picks);
}

// The recovery recipe. The planted corpus has an exactly uniform word
// marginal, so a uniform decoder with a collapsed posterior is a stationary
// point; escaping it needs the wide nets, the per-epoch alternation and the
// strong diversity pressure pinned here (verified across twelve seeds).
NeuralTopicModel train_recovery(const Corpus& corpus, Decoder dec,
                                double lambda, std::size_t epochs,
                                std::uint64_t seed, EpochMetrics* last,
                                MetricsLog* log = nullptr) {
  ModelConfig mc;
  mc.construction = Construction::gsm;
  mc.decoder = dec;
  mc.topics = 5;
  mc.vocab = corpus.vocab_size();
  mc.hidden = 50;
  mc.mlp_hidden = 256;
  mc.dropout_keep = 1.0;
  Rng init(Rng::derive(seed, 0));
  NeuralTopicModel model(mc, init);
  TrainConfig tc;
  tc.lr = 5e-3;
  tc.batch = 50;
  tc.epochs = epochs;
  tc.seed = seed;
  tc.lambda = lambda;
  tc.alternating = true;
  tc.alternate_per_epoch = true;
  TrainState state(seed);
  const auto hist = fit(corpus, model, tc, state, log);
  if (last != nullptr) *last = hist.back();
  return model;
}

bool criterion_recovery(std::string& detail) {
  const auto planted = make_planted(500, 100, 5, 20, 0.9, 101);
  EpochMetrics last;
  const NeuralTopicModel model =
      train_recovery(planted.corpus, Decoder::mixture, 1.0, 200, 1, &last);
  const double mean = matched_overlap(model, planted);
  detail = fmt("mean matched top-10 overlap %.2f (threshold 0.60) after 200 "
               "epochs; train perplexity %.2f",
               mean, last.perplexity);
  return mean >= 0.6;
}

// ---- criteria 4-6: reference-dataset experiments with synthetic stand-ins

struct RefData {
  Corpus train;
  Corpus test;
};

std::optional<RefData> load_reference() {
  const char* dir = std::getenv("NEURALTOPICS_20NG_DIR");
  if (dir == nullptr || *dir == '\0') return std::nullopt;
  const std::string base(dir);
  const Vocabulary vocab = Vocabulary::load(base + "/vocab.txt");
  RefData data{load_bow(base + "/train.bow", vocab, "train"),
               load_bow(base + "/test.bow", vocab, "test")};
  return data;
}

NeuralTopicModel train_reference(const Corpus& corpus, Construction cons,
                                 Decoder dec, double lambda,
                                 std::size_t topics, std::size_t epochs,
                                 std::uint64_t seed, TrainState& state,
                                 std::vector<EpochMetrics>* hist = nullptr) {
  ModelConfig mc;
  mc.construction = cons;
  mc.decoder = dec;
  mc.topics = topics;
  mc.vocab = corpus.vocab_size();
  mc.hidden = 200;
  mc.mlp_hidden = 256;
  mc.dropout_keep = 0.8;
  Rng init(Rng::derive(seed, 0));
  NeuralTopicModel model(mc, init);
  TrainConfig tc;
  tc.lr = 1e-3;
  tc.batch = 64;
  tc.epochs = epochs;
  tc.seed = seed;
  tc.lambda = lambda;
  auto h = fit(corpus, model, tc, state);
  if (hist != nullptr) *hist = std::move(h);
  return model;
}

Status criterion_heldout(const std::optional<RefData>& ref,
                         std::string& detail) {
  if (ref.has_value()) {
    TrainState s1(1), s2(1);
    const NeuralTopicModel mix = train_reference(
        ref->train, Construction::gsm, Decoder::mixture, 0.0, 50, 40, 1, s1);
    const NeuralTopicModel soft = train_reference(
        ref->train, Construction::gsm, Decoder::softmax, 0.0, 50, 40, 1, s2);
    const double pm = perplexity(ref->test, mix);
    const double ps = perplexity(ref->test, soft);
    detail = fmt("test perplexity: mixture %.1f (limit 945), softmax %.1f "
                 "(must be lower); 40 epochs, K=50",
                 pm, ps);
    return (pm <= 945.0 && ps < pm) ? Status::pass : Status::fail;
  }
  // Stand-in: train both decoders on one synthetic corpus and score fresh
  // documents from the same generator. The direction of the decoder gap is
  // a property of real text (on data that truly is a topic mixture the
  // mixture decoder is correctly specified and can win), so only learning
  // itself is gated here: both must beat the uniform bound V=100 by a wide
  // margin.
  const auto train_set = make_planted(500, 100, 5, 20, 0.9, 101);
  const auto test_set = make_planted(200, 100, 5, 20, 0.9, 909);
  const NeuralTopicModel mix =
      train_recovery(train_set.corpus, Decoder::mixture, 1.0, 200, 1, nullptr);
  const NeuralTopicModel soft =
      train_recovery(train_set.corpus, Decoder::softmax, 1.0, 200, 1, nullptr);
  const double pm = perplexity(test_set.corpus, mix);
  const double ps = perplexity(test_set.corpus, soft);
  detail = fmt("reference dataset absent (set NEURALTOPICS_20NG_DIR); "
               "stand-in held-out perplexity mixture %.2f, softmax %.2f "
               "(uniform bound 100, sanity limit 60)",
               pm, ps);
  return (pm < 60.0 && ps < 60.0) ? Status::skip : Status::fail;
}

struct GrowthRun {
  std::size_t init = 0;
  std::size_t final_active = 0;
  bool nondecreasing = true;
  double perplexity = 0.0;
};

GrowthRun run_unbounded(const Corpus& corpus, std::size_t init_topics,
                        std::size_t hidden, std::size_t mlp, double keep,
                        double lr, std::size_t batch, std::size_t epochs,
                        std::uint64_t seed) {
  ModelConfig mc;
  mc.construction = Construction::rsb_tf;
  mc.decoder = Decoder::mixture;
  mc.topics = init_topics;
  mc.vocab = corpus.vocab_size();
  mc.hidden = hidden;
  mc.mlp_hidden = mlp;
  mc.dropout_keep = keep;
  Rng init(Rng::derive(seed, 0));
  NeuralTopicModel model(mc, init);
  TrainConfig tc;
  tc.lr = lr;
  tc.batch = batch;
  tc.epochs = epochs;
  tc.seed = seed;
  tc.gamma = 5e-5;
  tc.alternating = true;
  tc.alternate_per_epoch = true;
  TrainState state(seed);
  const auto hist = fit(corpus, model, tc, state);

  GrowthRun out;
  out.init = init_topics;
  out.final_active = state.active_topics;
  out.perplexity = hist.back().perplexity;
  std::size_t prev = init_topics;
  for (const auto& em : hist)
    for (const auto& row : em.rows) {
      if (row.batch < 0) continue;
      if (row.active_topics < prev) out.nondecreasing = false;
      prev = row.active_topics;
    }
  return out;
}

Status criterion_growth(const std::optional<RefData>& ref,
                        std::string& detail) {
  const bool have_ref = ref.has_value();
  std::vector<std::size_t> inits =
      have_ref ? std::vector<std::size_t>{10, 30, 50}
               : std::vector<std::size_t>{2, 4, 6};
  std::optional<testutil::PlantedCorpus> planted;
  if (!have_ref) planted = make_planted(600, 120, 12, 10, 0.9, 101);
  const Corpus& corpus = have_ref ? ref->train : planted->corpus;

  std::vector<GrowthRun> runs;
  for (const std::size_t i : inits)
    runs.push_back(have_ref
                       ? run_unbounded(corpus, i, 200, 256, 0.8, 1e-3, 64, 20, 1)
                       : run_unbounded(corpus, i, 50, 256, 1.0, 1e-3, 50, 120,
                                       1));

  bool nondec = true, grew = true;
  double pmin = 1e300, pmax = 0.0;
  std::string trace;
  for (const GrowthRun& r : runs) {
    nondec = nondec && r.nondecreasing;
    grew = grew && r.final_active > r.init;
    pmin = std::min(pmin, r.perplexity);
    pmax = std::max(pmax, r.perplexity);
    trace += fmt(" %zu->%zu(%.2f)", r.init, r.final_active, r.perplexity);
  }
  const double spread = pmax / pmin - 1.0;
  const bool ok = nondec && grew && spread < 0.05;
  detail = fmt("active-topic growth%s; nondecreasing %s, all grew %s, final "
               "train perplexity spread %.2f%% (limit 5%%)%s",
               trace.c_str(), nondec ? "yes" : "NO", grew ? "yes" : "NO",
               100.0 * spread,
               have_ref ? ""
                        : "; reference dataset absent, synthetic stand-in "
                          "with 12 planted topics");
  if (have_ref) return ok ? Status::pass : Status::fail;
  return ok ? Status::skip : Status::fail;
}

Status criterion_diversity(const std::optional<RefData>& ref,
                           std::string& detail) {
  if (ref.has_value()) {
    TrainState s0(1), s1(1);
    const NeuralTopicModel plain = train_reference(
        ref->train, Construction::gsm, Decoder::mixture, 0.0, 50, 40, 1, s0);
    const NeuralTopicModel reg = train_reference(
        ref->train, Construction::gsm, Decoder::mixture, 0.1, 50, 40, 1, s1);
    const double p0 = perplexity(ref->test, plain);
    const double p1 = perplexity(ref->test, reg);
    const double z0 = diversity_penalty(plain.topic_matrix(), 1.0).zeta;
    const double z1 = diversity_penalty(reg.topic_matrix(), 1.0).zeta;
    const double rel = std::abs(p1 - p0) / p0;
    detail = fmt("lambda 0 -> 0.1: perplexity %.1f -> %.1f (|change| %.2f%%, "
                 "limit 5%%), mean pairwise angle %.3f -> %.3f (must rise)",
                 p0, p1, 100.0 * rel, z0, z1);
    return (rel < 0.05 && z1 > z0) ? Status::pass : Status::fail;
  }
  // Stand-in: the angle statistic must rise under the penalty (holds for
  // every seed tried). The perplexity change is reported but not gated: on
  // the synthetic corpus the penalty materially improves recovery, so the
  // small-change clause is a property of the reference dataset only.
  const auto planted = make_planted(500, 100, 5, 20, 0.9, 101);
  EpochMetrics m0, m1;
  const NeuralTopicModel plain =
      train_recovery(planted.corpus, Decoder::mixture, 0.0, 200, 1, &m0);
  const NeuralTopicModel reg =
      train_recovery(planted.corpus, Decoder::mixture, 0.1, 200, 1, &m1);
  const double z0 = diversity_penalty(plain.topic_matrix(), 1.0).zeta;
  const double z1 = diversity_penalty(reg.topic_matrix(), 1.0).zeta;
  detail = fmt("reference dataset absent; stand-in lambda 0 -> 0.1: mean "
               "pairwise angle %.3f -> %.3f (must rise), train perplexity "
               "%.2f -> %.2f (reported, not gated at this scale)",
               z0, z1, m0.perplexity, m1.perplexity);
  return z1 > z0 ? Status::skip : Status::fail;
}

// ---- criterion 7: determinism ----

std::vector<std::string> formatted_rows(const MetricsLog& log) {
  std::vector<std::string> out;
  out.reserve(log.rows().size());
  for (const auto& row : log.rows()) out.push_back(MetricsLog::format(row));
  return out;
}

bool criterion_determinism(std::string& detail) {
  const auto planted = make_planted(500, 100, 5, 20, 0.9, 101);

  MetricsLog a, b;
  train_recovery(planted.corpus, Decoder::mixture, 1.0, 5, 7, nullptr, &a);
  train_recovery(planted.corpus, Decoder::mixture, 1.0, 5, 7, nullptr, &b);
  const bool finite_same = formatted_rows(a) == formatted_rows(b);

  const auto grown = make_planted(600, 120, 12, 10, 0.9, 101);
  const GrowthRun g1 = run_unbounded(grown.corpus, 2, 50, 256, 1.0, 1e-3, 50,
                                     5, 7);
  const GrowthRun g2 = run_unbounded(grown.corpus, 2, 50, 256, 1.0, 1e-3, 50,
                                     5, 7);
  const bool unbounded_same = g1.final_active == g2.final_active &&
                              g1.perplexity == g2.perplexity;

  detail = fmt("same-seed reruns: finite metrics log %s (%zu rows), "
               "unbounded run %s",
               finite_same ? "identical" : "DIFFERS", a.rows().size(),
               unbounded_same ? "identical" : "DIFFERS");
  return finite_same && unbounded_same;
}

// ---- coherence gate: planted word blocks vs shuffled word sets ----

bool coherence_gate(std::string& detail) {
  const auto planted = make_planted(500, 100, 5, 20, 0.9, 101);
  const CooccurrenceIndex index(planted.corpus);

  double planted_mean = 0.0;
  for (const auto& block : planted.blocks) {
    const std::vector<std::size_t> ten(block.begin(), block.begin() + 10);
    planted_mean += topic_npmi(index, ten);
  }
  planted_mean /= double(planted.blocks.size());

  Rng rng(7);
  std::vector<std::size_t> pool(planted.corpus.vocab_size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  rng.shuffle(pool);
  double shuffled_mean = 0.0;
  for (std::size_t k = 0; k < planted.blocks.size(); ++k) {
    const std::vector<std::size_t> ten(pool.begin() + 10 * k,
                                       pool.begin() + 10 * (k + 1));
    shuffled_mean += topic_npmi(index, ten);
  }
  shuffled_mean /= double(planted.blocks.size());

  detail = fmt("mean NPMI of planted blocks %.3f vs shuffled word sets %.3f "
               "(planted must score higher)",
               planted_mean, shuffled_mean);
  return planted_mean > shuffled_mean;
}

template <typename Fn>
void run_bool(const char* name, Fn fn) {
  std::string detail;
  try {
    const bool ok = fn(detail);
    report(name, ok ? Status::pass : Status::fail, detail);
  } catch (const std::exception& e) {
    report(name, Status::fail, fmt("exception: %s", e.what()));
  }
}

template <typename Fn>
void run_status(const char* name, Fn fn) {
  std::string detail;
  try {
    const Status s = fn(detail);
    report(name, s, detail);
  } catch (const std::exception& e) {
    report(name, Status::fail, fmt("exception: %s", e.what()));
  }
}

}  // namespace

int main() {
  std::optional<RefData> ref;
  try {
    ref = load_reference();
  } catch (const std::exception& e) {
    std::printf("reference dataset: unusable (%s); criteria 4-6 fall back "
                "to stand-ins\n",
                e.what());
  }

  run_bool("criterion 1", criterion_properties);
  run_bool("criterion 2", criterion_gradients);
  run_bool("criterion 3", criterion_recovery);
  run_status("criterion 4", [&](std::string& d) {
    return criterion_heldout(ref, d);
  });
  run_status("criterion 5", [&](std::string& d) {
    return criterion_growth(ref, d);
  });
  run_status("criterion 6", [&](std::string& d) {
    return criterion_diversity(ref, d);
  });
  run_bool("criterion 7", criterion_determinism);
  run_bool("coherence gate", coherence_gate);

  std::printf("acceptance: %d failure(s)\n", failures);
  return failures;
}
