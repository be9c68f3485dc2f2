#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "ntm/kernels.hpp"

// Parallel twins of the serial kernels. Each output row/element/chunk is
// owned by one thread and computed with the reference inner-loop order, so
// results match the serial kernels bit for bit at any thread count.

namespace ntm::kern::par {

namespace {
inline std::int64_t i64(std::size_t v) { return static_cast<std::int64_t>(v); }
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate) {
#ifndef _OPENMP
  serial::gemm(trans_a, trans_b, m, n, k, a, b, c, accumulate);
#else
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  const int threads = thread_cap();
  if (!trans_a && !trans_b) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < i64(m); ++i) {
      double* ci = c + i * i64(n);
      const double* ai = a + i * i64(k);
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ai[p];
        const double* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else if (!trans_a && trans_b) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < i64(m); ++i) {
      const double* ai = a + i * i64(k);
      for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b + j * k;
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
        c[i * n + j] += acc;
      }
    }
  } else if (trans_a && !trans_b) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < i64(m); ++i) {
      double* ci = c + i * i64(n);
      for (std::size_t p = 0; p < k; ++p) {
        const double av = a[p * m + i];
        const double* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < i64(m); ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[j * k + p];
        c[i * n + j] += acc;
      }
    }
  }
#endif
}

namespace {

inline void softmax_row(std::size_t n, const double* in, double* out, bool log_form) {
  double mx = in[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) sum += std::exp(in[j] - mx);
  if (log_form) {
    const double lse = std::log(sum);
    for (std::size_t j = 0; j < n; ++j) out[j] = in[j] - mx - lse;
  } else {
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < n; ++j) out[j] = std::exp(in[j] - mx) * inv;
  }
}

}  // namespace

void softmax_rows(std::size_t m, std::size_t n, const double* in, double* out) {
#ifndef _OPENMP
  serial::softmax_rows(m, n, in, out);
#else
#pragma omp parallel for schedule(static) num_threads(thread_cap())
  for (std::int64_t i = 0; i < i64(m); ++i) {
    softmax_row(n, in + i * i64(n), out + i * i64(n), false);
  }
#endif
}

void log_softmax_rows(std::size_t m, std::size_t n, const double* in, double* out) {
#ifndef _OPENMP
  serial::log_softmax_rows(m, n, in, out);
#else
#pragma omp parallel for schedule(static) num_threads(thread_cap())
  for (std::int64_t i = 0; i < i64(m); ++i) {
    softmax_row(n, in + i * i64(n), out + i * i64(n), true);
  }
#endif
}

void row_sums(std::size_t m, std::size_t n, const double* in, double* out) {
#ifndef _OPENMP
  serial::row_sums(m, n, in, out);
#else
#pragma omp parallel for schedule(static) num_threads(thread_cap())
  for (std::int64_t i = 0; i < i64(m); ++i) {
    const double* ri = in + i * i64(n);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += ri[j];
    out[i] = acc;
  }
#endif
}

void col_sums(std::size_t m, std::size_t n, const double* in, double* out) {
#ifndef _OPENMP
  serial::col_sums(m, n, in, out);
#else
#pragma omp parallel for schedule(static) num_threads(thread_cap())
  for (std::int64_t j = 0; j < i64(n); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += in[i * n + j];
    out[j] = acc;
  }
#endif
}

double sum_all(std::size_t count, const double* in) {
#ifndef _OPENMP
  return serial::sum_all(count, in);
#else
  const std::size_t chunks = (count + kReduceChunk - 1) / kReduceChunk;
  std::vector<double> partial(chunks, 0.0);
#pragma omp parallel for schedule(static) num_threads(thread_cap())
  for (std::int64_t ci = 0; ci < i64(chunks); ++ci) {
    const std::size_t lo = static_cast<std::size_t>(ci) * kReduceChunk;
    const std::size_t hi = std::min(count, lo + kReduceChunk);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += in[i];
    partial[static_cast<std::size_t>(ci)] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
#endif
}

}  // namespace ntm::kern::par
