// Times the serial reference kernels against the OpenMP versions on the
// shapes the training loop actually produces (batch × vocab × topics), and
// verifies the two give bit-identical results while it is at it.
//
//   neuraltopics-bench [batch] [vocab] [hidden] [reps]
//
// NEURALTOPICS_THREADS caps the parallel side, like everywhere else.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "ntm/kernels.hpp"
#include "ntm/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> random_values(std::size_t n, ntm::Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct Timing {
  double serial = 0.0;
  double parallel = 0.0;
  bool identical = false;
};

template <typename SerialFn, typename ParFn>
Timing time_pair(std::size_t reps, std::vector<double>& out_serial,
                 std::vector<double>& out_par, SerialFn&& serial_fn,
                 ParFn&& par_fn) {
  Timing t;
  auto start = Clock::now();
  for (std::size_t r = 0; r < reps; ++r) serial_fn(out_serial.data());
  t.serial = seconds_since(start);
  start = Clock::now();
  for (std::size_t r = 0; r < reps; ++r) par_fn(out_par.data());
  t.parallel = seconds_since(start);
  t.identical = bit_equal(out_serial, out_par);
  return t;
}

void report(const char* name, const Timing& t, std::size_t reps) {
  std::printf("%-22s serial %8.2f ms   parallel %8.2f ms   speedup %5.2fx   %s\n",
              name, 1e3 * t.serial / static_cast<double>(reps),
              1e3 * t.parallel / static_cast<double>(reps),
              t.serial / t.parallel, t.identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t batch = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 64;
  const std::size_t vocab = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 2000;
  const std::size_t hidden = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 200;
  const std::size_t reps = argc > 4 ? std::strtoull(argv[4], nullptr, 10) : 20;
  if (batch == 0 || vocab == 0 || hidden == 0 || reps == 0) {
    std::fprintf(stderr, "usage: %s [batch] [vocab] [hidden] [reps]\n", argv[0]);
    return 2;
  }

  std::printf("batch %zu, vocab %zu, hidden %zu, reps %zu, threads %d\n\n",
              batch, vocab, hidden, reps, ntm::kern::thread_cap());

  ntm::Rng rng(2024);
  const std::vector<double> docs = random_values(batch * vocab, rng);
  const std::vector<double> proj = random_values(vocab * hidden, rng);
  const std::vector<double> scores = random_values(batch * vocab, rng);

  std::vector<double> a(batch * hidden), b(batch * hidden);
  report("gemm counts*weights",
         time_pair(reps, a, b,
                   [&](double* out) {
                     ntm::kern::serial::gemm(false, false, batch, hidden, vocab,
                                             docs.data(), proj.data(), out,
                                             false);
                   },
                   [&](double* out) {
                     ntm::kern::par::gemm(false, false, batch, hidden, vocab,
                                          docs.data(), proj.data(), out, false);
                   }),
         reps);

  std::vector<double> c(batch * vocab), d(batch * vocab);
  report("softmax rows",
         time_pair(reps, c, d,
                   [&](double* out) {
                     ntm::kern::serial::softmax_rows(batch, vocab,
                                                     scores.data(), out);
                   },
                   [&](double* out) {
                     ntm::kern::par::softmax_rows(batch, vocab, scores.data(),
                                                  out);
                   }),
         reps);

  report("log-softmax rows",
         time_pair(reps, c, d,
                   [&](double* out) {
                     ntm::kern::serial::log_softmax_rows(batch, vocab,
                                                         scores.data(), out);
                   },
                   [&](double* out) {
                     ntm::kern::par::log_softmax_rows(batch, vocab,
                                                      scores.data(), out);
                   }),
         reps);

  std::vector<double> e(batch), f(batch);
  report("row sums",
         time_pair(reps, e, f,
                   [&](double* out) {
                     ntm::kern::serial::row_sums(batch, vocab, docs.data(), out);
                   },
                   [&](double* out) {
                     ntm::kern::par::row_sums(batch, vocab, docs.data(), out);
                   }),
         reps);

  std::vector<double> g(1), h(1);
  report("reduce all",
         time_pair(reps, g, h,
                   [&](double* out) {
                     out[0] = ntm::kern::serial::sum_all(docs.size(), docs.data());
                   },
                   [&](double* out) {
                     out[0] = ntm::kern::par::sum_all(docs.size(), docs.data());
                   }),
         reps);

  return 0;
}
