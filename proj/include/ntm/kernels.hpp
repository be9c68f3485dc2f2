#pragma once

#include <cstddef>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ntm::kern {

// Thread budget: min(OpenMP max threads, NEURALTOPICS_THREADS). Read once.
int thread_cap();

// True when a loop of `work` elements is worth fanning out.
bool should_parallelize(std::size_t work);

// Deterministic chunk width shared by the serial and parallel reduction
// kernels so the two produce bit-identical sums regardless of thread count.
inline constexpr std::size_t kReduceChunk = 4096;

// Every kernel exists twice with the same contract: `serial` is the
// reference, `par` fans the outer loop across OpenMP threads. Outputs are
// bit-identical because each output element (or fixed chunk) is computed
// by exactly one thread with the same inner loop order as the reference.
namespace serial {

// C[m×n] = op(A)·op(B) (+ C when accumulate). A is m×k (or k×m when
// trans_a), B is k×n (or n×k when trans_b). Row-major.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate);

void softmax_rows(std::size_t m, std::size_t n, const double* in, double* out);
void log_softmax_rows(std::size_t m, std::size_t n, const double* in, double* out);
void row_sums(std::size_t m, std::size_t n, const double* in, double* out);
void col_sums(std::size_t m, std::size_t n, const double* in, double* out);
double sum_all(std::size_t count, const double* in);

}  // namespace serial

namespace par {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate);

void softmax_rows(std::size_t m, std::size_t n, const double* in, double* out);
void log_softmax_rows(std::size_t m, std::size_t n, const double* in, double* out);
void row_sums(std::size_t m, std::size_t n, const double* in, double* out);
void col_sums(std::size_t m, std::size_t n, const double* in, double* out);
double sum_all(std::size_t count, const double* in);

}  // namespace par

// Size-dispatched entry points used by the tape.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate);
void softmax_rows(std::size_t m, std::size_t n, const double* in, double* out);
void log_softmax_rows(std::size_t m, std::size_t n, const double* in, double* out);
void row_sums(std::size_t m, std::size_t n, const double* in, double* out);
void col_sums(std::size_t m, std::size_t n, const double* in, double* out);
double sum_all(std::size_t count, const double* in);

// Elementwise y[i] = f(a[i]). Pure per element, so the parallel path is
// bit-identical to the serial one.
template <typename F>
void map(double* y, const double* a, std::size_t n, F f) {
#ifdef _OPENMP
  if (should_parallelize(n)) {
#pragma omp parallel for schedule(static) num_threads(thread_cap())
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
      y[i] = f(a[i]);
    }
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) y[i] = f(a[i]);
}

// Elementwise y[i] = f(a[i], b[i]).
template <typename F>
void zip(double* y, const double* a, const double* b, std::size_t n, F f) {
#ifdef _OPENMP
  if (should_parallelize(n)) {
#pragma omp parallel for schedule(static) num_threads(thread_cap())
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
      y[i] = f(a[i], b[i]);
    }
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) y[i] = f(a[i], b[i]);
}

}  // namespace ntm::kern
