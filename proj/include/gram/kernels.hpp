#pragma once

#include <cstddef>
#include <cstdint>

namespace gram::kernels {

// Dense row-major kernels. Every *_omp kernel parallelizes over independent
// output rows/elements only and keeps each element's reduction order equal to
// the serial reference, so serial and parallel results are bitwise identical
// for any thread count. That property is tested, not assumed.

void set_threads(int n);   // 0 = library default (all available)
int threads();             // effective thread count for parallel kernels
bool openmp_available();

// ---- serial reference ----

// C[m,n] = A[m,k] * B[k,n]
template <typename T>
void gemm_nn_ref(int m, int k, int n, const T* a, const T* b, T* c);
// C[m,n] = A[m,k] * B[n,k]^T
template <typename T>
void gemm_nt_ref(int m, int k, int n, const T* a, const T* b, T* c);
// C[m,n] = A[k,m]^T * B[k,n]
template <typename T>
void gemm_tn_ref(int m, int k, int n, const T* a, const T* b, T* c);

// row-wise softmax with max subtraction, rows x cols
template <typename T>
void softmax_rows_ref(int rows, int cols, const T* x, T* y);

// y = x * rsqrt(mean(x^2) + eps) * w, per row
template <typename T>
void rmsnorm_rows_ref(int rows, int cols, const T* x, const T* w, T* y, T eps);

template <typename T>
void relu_ref(std::size_t n, const T* x, T* y);

// y += x (gradient accumulation and residual adds)
template <typename T>
void axpy_ref(std::size_t n, T alpha, const T* x, T* y);

// ---- OpenMP variants (fall back to the reference when OpenMP is off) ----

template <typename T>
void gemm_nn_omp(int m, int k, int n, const T* a, const T* b, T* c);
template <typename T>
void gemm_nt_omp(int m, int k, int n, const T* a, const T* b, T* c);
template <typename T>
void gemm_tn_omp(int m, int k, int n, const T* a, const T* b, T* c);
template <typename T>
void softmax_rows_omp(int rows, int cols, const T* x, T* y);
template <typename T>
void rmsnorm_rows_omp(int rows, int cols, const T* x, const T* w, T* y, T eps);
template <typename T>
void relu_omp(std::size_t n, const T* x, T* y);
template <typename T>
void axpy_omp(std::size_t n, T alpha, const T* x, T* y);

// ---- dispatching entry points used by the tensor layer ----
// Small problems stay on the serial path; the cutover is a flop-count
// heuristic, results are identical either way.

template <typename T>
void gemm_nn(int m, int k, int n, const T* a, const T* b, T* c);
template <typename T>
void gemm_nt(int m, int k, int n, const T* a, const T* b, T* c);
template <typename T>
void gemm_tn(int m, int k, int n, const T* a, const T* b, T* c);
template <typename T>
void softmax_rows(int rows, int cols, const T* x, T* y);
template <typename T>
void rmsnorm_rows(int rows, int cols, const T* x, const T* w, T* y, T eps);
template <typename T>
void relu(std::size_t n, const T* x, T* y);
template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y);

}  // namespace gram::kernels
