#include <algorithm>
#include <cstdlib>

#include "ntm/kernels.hpp"

namespace ntm::kern {

namespace {

int read_thread_cap() {
  int hw = 1;
#ifdef _OPENMP
  hw = omp_get_max_threads();
#endif
  if (const char* env = std::getenv("NEURALTOPICS_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) hw = std::min(hw, cap);
  }
  return std::max(1, hw);
}

// Below this many elementary operations the fork/join overhead dominates.
constexpr std::size_t kParallelGrain = 1 << 14;

}  // namespace

int thread_cap() {
  static const int cap = read_thread_cap();
  return cap;
}

bool should_parallelize(std::size_t work) {
  return thread_cap() > 1 && work >= kParallelGrain;
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate) {
  if (should_parallelize(m * n * k)) {
    par::gemm(trans_a, trans_b, m, n, k, a, b, c, accumulate);
  } else {
    serial::gemm(trans_a, trans_b, m, n, k, a, b, c, accumulate);
  }
}

void softmax_rows(std::size_t m, std::size_t n, const double* in, double* out) {
  if (should_parallelize(m * n)) {
    par::softmax_rows(m, n, in, out);
  } else {
    serial::softmax_rows(m, n, in, out);
  }
}

void log_softmax_rows(std::size_t m, std::size_t n, const double* in, double* out) {
  if (should_parallelize(m * n)) {
    par::log_softmax_rows(m, n, in, out);
  } else {
    serial::log_softmax_rows(m, n, in, out);
  }
}

void row_sums(std::size_t m, std::size_t n, const double* in, double* out) {
  if (should_parallelize(m * n)) {
    par::row_sums(m, n, in, out);
  } else {
    serial::row_sums(m, n, in, out);
  }
}

void col_sums(std::size_t m, std::size_t n, const double* in, double* out) {
  if (should_parallelize(m * n)) {
    par::col_sums(m, n, in, out);
  } else {
    serial::col_sums(m, n, in, out);
  }
}

double sum_all(std::size_t count, const double* in) {
  if (should_parallelize(count)) return par::sum_all(count, in);
  return serial::sum_all(count, in);
}

}  // namespace ntm::kern
