#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "ntm/kernels.hpp"

namespace ntm::kern::serial {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = c + i * n;
      const double* ai = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ai[p];
        const double* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* ai = a + i * k;
      for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b + j * k;
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
        c[i * n + j] += acc;
      }
    }
  } else if (trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = c + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = a[p * m + i];
        const double* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[j * k + p];
        c[i * n + j] += acc;
      }
    }
  }
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
  for (std::size_t i = 0; i < m; ++i) softmax_row(n, in + i * n, out + i * n, false);
}

void log_softmax_rows(std::size_t m, std::size_t n, const double* in, double* out) {
  for (std::size_t i = 0; i < m; ++i) softmax_row(n, in + i * n, out + i * n, true);
}

void row_sums(std::size_t m, std::size_t n, const double* in, double* out) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ri = in + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += ri[j];
    out[i] = acc;
  }
}

void col_sums(std::size_t m, std::size_t n, const double* in, double* out) {
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += in[i * n + j];
    out[j] = acc;
  }
}

double sum_all(std::size_t count, const double* in) {
  // Fixed-width chunks summed independently, then combined in order; the
  // parallel kernel uses the same decomposition so both agree bitwise.
  const std::size_t chunks = (count + kReduceChunk - 1) / kReduceChunk;
  std::vector<double> partial(chunks, 0.0);
  for (std::size_t ci = 0; ci < chunks; ++ci) {
    const std::size_t lo = ci * kReduceChunk;
    const std::size_t hi = std::min(count, lo + kReduceChunk);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += in[i];
    partial[ci] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace ntm::kern::serial
