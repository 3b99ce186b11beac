#include "ocl/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <vector>

namespace ocl::kernels {

namespace {

int g_threads = 0;

int active_threads() { return g_threads > 0 ? g_threads : omp_get_max_threads(); }

constexpr std::size_t kColumnBlock = 512;
constexpr std::size_t kRowBlock = 4;

// Four output rows at a time against one column panel of b; each c entry is
// accumulated over k in ascending order.
void panel_rows(const double* a, const double* b, double* c, std::size_t row_begin,
                std::size_t row_end, std::size_t k, std::size_t p, std::size_t j0,
                std::size_t j1) {
  std::size_t i = row_begin;
  for (; i + kRowBlock <= row_end; i += kRowBlock) {
    double* c0 = c + i * p;
    double* c1 = c0 + p;
    double* c2 = c1 + p;
    double* c3 = c2 + p;
    std::fill(c0 + j0, c0 + j1, 0.0);
    std::fill(c1 + j0, c1 + j1, 0.0);
    std::fill(c2 + j0, c2 + j1, 0.0);
    std::fill(c3 + j0, c3 + j1, 0.0);
    const double* a0 = a + i * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double x0 = a0[kk], x1 = a1[kk], x2 = a2[kk], x3 = a3[kk];
      const double* brow = b + kk * p;
      for (std::size_t j = j0; j < j1; ++j) {
        const double bj = brow[j];
        c0[j] += x0 * bj;
        c1[j] += x1 * bj;
        c2[j] += x2 * bj;
        c3[j] += x3 * bj;
      }
    }
  }
  for (; i < row_end; ++i) {
    double* ci = c + i * p;
    std::fill(ci + j0, ci + j1, 0.0);
    const double* ai = a + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double x = ai[kk];
      const double* brow = b + kk * p;
      for (std::size_t j = j0; j < j1; ++j) ci[j] += x * brow[j];
    }
  }
}

}  // namespace

void set_thread_count(int threads) { g_threads = std::max(threads, 0); }

int thread_count() { return active_threads(); }

namespace serial {

void matmul(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
            std::size_t p) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += a[i * k + kk] * b[kk * p + j];
      c[i * p + j] = acc;
    }
  }
}

void matmul_transposed_b(const double* a, const double* b, double* c, std::size_t n,
                         std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += a[i * k + kk] * b[j * k + kk];
      c[i * p + j] = acc;
    }
  }
}

}  // namespace serial

namespace parallel {

void matmul(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
            std::size_t p) {
  if (n == 0 || p == 0) return;
  const std::size_t row_blocks = (n + kRowBlock - 1) / kRowBlock;
  const long long total = static_cast<long long>(row_blocks);
  const bool worth_it = n * k * p > 32768;
#pragma omp parallel for schedule(static) num_threads(active_threads()) if (worth_it)
  for (long long rb = 0; rb < total; ++rb) {
    const std::size_t r0 = static_cast<std::size_t>(rb) * kRowBlock;
    const std::size_t r1 = std::min(n, r0 + kRowBlock);
    for (std::size_t j0 = 0; j0 < p; j0 += kColumnBlock) {
      panel_rows(a, b, c, r0, r1, k, p, j0, std::min(p, j0 + kColumnBlock));
    }
  }
}

void matmul_transposed_b(const double* a, const double* b, double* c, std::size_t n,
                         std::size_t k, std::size_t p) {
  std::vector<double> bt(k * p);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t kk = 0; kk < k; ++kk) bt[kk * p + j] = b[j * k + kk];
  }
  matmul(a, bt.data(), c, n, k, p);
}

}  // namespace parallel

}  // namespace ocl::kernels
