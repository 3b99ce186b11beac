#pragma once

#include <cstddef>

// Dense products over row-major buffers. `parallel` is what the library runs;
// `serial` is a plain triple-loop reference kept for tests and benchmarks.
//
// The parallel kernels partition output rows across threads and always
// accumulate over the inner dimension in ascending order, so results do not
// depend on the thread count.
namespace ocl::kernels {

namespace serial {

// c[n x p] = a[n x k] * b[k x p]
void matmul(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
            std::size_t p);
// c[n x p] = a[n x k] * b[p x k]^T
void matmul_transposed_b(const double* a, const double* b, double* c, std::size_t n,
                         std::size_t k, std::size_t p);

}  // namespace serial

namespace parallel {

void matmul(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
            std::size_t p);
void matmul_transposed_b(const double* a, const double* b, double* c, std::size_t n,
                         std::size_t k, std::size_t p);

}  // namespace parallel

/// Bounds the thread count used by the parallel kernels (0 = OpenMP default).
void set_thread_count(int threads);
int thread_count();

}  // namespace ocl::kernels
