#include "gram/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gram::kernels {

namespace {
int g_threads = 0;
// Below this many flops the fork/join overhead dominates on small ops.
constexpr std::int64_t kParallelFlopCutoff = 64 * 1024;
}  // namespace

void set_threads(int n) { g_threads = n < 0 ? 0 : n; }

int threads() {
#ifdef _OPENMP
    return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
    return 1;
#endif
}

bool openmp_available() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

// ---- serial reference ----

template <typename T>
void gemm_nn_ref(int m, int k, int n, const T* a, const T* b, T* c) {
    // i,p,j loop order for locality; per-element accumulation order is still
    // ascending p, same as the naive triple loop.
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::size_t>(i) * n;
        std::fill(crow, crow + n, T(0));
        const T* arow = a + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void gemm_nt_ref(int m, int k, int n, const T* a, const T* b, T* c) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<std::size_t>(i) * k;
        T* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* brow = b + static_cast<std::size_t>(j) * k;
            T acc = 0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = acc;
        }
    }
}

template <typename T>
void gemm_tn_ref(int m, int k, int n, const T* a, const T* b, T* c) {
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::size_t>(i) * n;
        std::fill(crow, crow + n, T(0));
        for (int p = 0; p < k; ++p) {
            const T av = a[static_cast<std::size_t>(p) * m + i];
            const T* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void softmax_rows_ref(int rows, int cols, const T* x, T* y) {
    for (int r = 0; r < rows; ++r) {
        const T* xr = x + static_cast<std::size_t>(r) * cols;
        T* yr = y + static_cast<std::size_t>(r) * cols;
        T mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        T sum = 0;
        for (int j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        const T inv = T(1) / sum;
        for (int j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

template <typename T>
void rmsnorm_rows_ref(int rows, int cols, const T* x, const T* w, T* y, T eps) {
    for (int r = 0; r < rows; ++r) {
        const T* xr = x + static_cast<std::size_t>(r) * cols;
        T* yr = y + static_cast<std::size_t>(r) * cols;
        T ms = 0;
        for (int j = 0; j < cols; ++j) ms += xr[j] * xr[j];
        ms /= static_cast<T>(cols);
        const T inv = T(1) / std::sqrt(ms + eps);
        for (int j = 0; j < cols; ++j) yr[j] = xr[j] * inv * w[j];
    }
}

template <typename T>
void relu_ref(std::size_t n, const T* x, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void axpy_ref(std::size_t n, T alpha, const T* x, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// ---- OpenMP variants ----

template <typename T>
void gemm_nn_omp(int m, int k, int n, const T* a, const T* b, T* c) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads())
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::size_t>(i) * n;
        std::fill(crow, crow + n, T(0));
        const T* arow = a + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
#else
    gemm_nn_ref(m, k, n, a, b, c);
#endif
}

template <typename T>
void gemm_nt_omp(int m, int k, int n, const T* a, const T* b, T* c) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads())
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<std::size_t>(i) * k;
        T* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* brow = b + static_cast<std::size_t>(j) * k;
            T acc = 0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = acc;
        }
    }
#else
    gemm_nt_ref(m, k, n, a, b, c);
#endif
}

template <typename T>
void gemm_tn_omp(int m, int k, int n, const T* a, const T* b, T* c) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads())
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::size_t>(i) * n;
        std::fill(crow, crow + n, T(0));
        for (int p = 0; p < k; ++p) {
            const T av = a[static_cast<std::size_t>(p) * m + i];
            const T* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
#else
    gemm_tn_ref(m, k, n, a, b, c);
#endif
}

template <typename T>
void softmax_rows_omp(int rows, int cols, const T* x, T* y) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads())
    for (int r = 0; r < rows; ++r) softmax_rows_ref(1, cols, x + static_cast<std::size_t>(r) * cols, y + static_cast<std::size_t>(r) * cols);
#else
    softmax_rows_ref(rows, cols, x, y);
#endif
}

template <typename T>
void rmsnorm_rows_omp(int rows, int cols, const T* x, const T* w, T* y, T eps) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads())
    for (int r = 0; r < rows; ++r) rmsnorm_rows_ref(1, cols, x + static_cast<std::size_t>(r) * cols, w, y + static_cast<std::size_t>(r) * cols, eps);
#else
    rmsnorm_rows_ref(rows, cols, x, w, y, eps);
#endif
}

template <typename T>
void relu_omp(std::size_t n, const T* x, T* y) {
#ifdef _OPENMP
    const std::int64_t sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) num_threads(threads())
    for (std::int64_t i = 0; i < sn; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
#else
    relu_ref(n, x, y);
#endif
}

template <typename T>
void axpy_omp(std::size_t n, T alpha, const T* x, T* y) {
#ifdef _OPENMP
    const std::int64_t sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) num_threads(threads())
    for (std::int64_t i = 0; i < sn; ++i) y[i] += alpha * x[i];
#else
    axpy_ref(n, alpha, x, y);
#endif
}

// ---- dispatch ----

namespace {
inline bool go_parallel(std::int64_t flops) {
    return openmp_available() && threads() > 1 && flops >= kParallelFlopCutoff;
}
}  // namespace

template <typename T>
void gemm_nn(int m, int k, int n, const T* a, const T* b, T* c) {
    if (go_parallel(2LL * m * k * n))
        gemm_nn_omp(m, k, n, a, b, c);
    else
        gemm_nn_ref(m, k, n, a, b, c);
}

template <typename T>
void gemm_nt(int m, int k, int n, const T* a, const T* b, T* c) {
    if (go_parallel(2LL * m * k * n))
        gemm_nt_omp(m, k, n, a, b, c);
    else
        gemm_nt_ref(m, k, n, a, b, c);
}

template <typename T>
void gemm_tn(int m, int k, int n, const T* a, const T* b, T* c) {
    if (go_parallel(2LL * m * k * n))
        gemm_tn_omp(m, k, n, a, b, c);
    else
        gemm_tn_ref(m, k, n, a, b, c);
}

template <typename T>
void softmax_rows(int rows, int cols, const T* x, T* y) {
    if (go_parallel(4LL * rows * cols))
        softmax_rows_omp(rows, cols, x, y);
    else
        softmax_rows_ref(rows, cols, x, y);
}

template <typename T>
void rmsnorm_rows(int rows, int cols, const T* x, const T* w, T* y, T eps) {
    if (go_parallel(3LL * rows * cols))
        rmsnorm_rows_omp(rows, cols, x, w, y, eps);
    else
        rmsnorm_rows_ref(rows, cols, x, w, y, eps);
}

template <typename T>
void relu(std::size_t n, const T* x, T* y) {
    if (go_parallel(static_cast<std::int64_t>(n)))
        relu_omp(n, x, y);
    else
        relu_ref(n, x, y);
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
    if (go_parallel(2LL * static_cast<std::int64_t>(n)))
        axpy_omp(n, alpha, x, y);
    else
        axpy_ref(n, alpha, x, y);
}

#define GRAM_INSTANTIATE_KERNELS(T)                                              \
    template void gemm_nn_ref<T>(int, int, int, const T*, const T*, T*);         \
    template void gemm_nt_ref<T>(int, int, int, const T*, const T*, T*);         \
    template void gemm_tn_ref<T>(int, int, int, const T*, const T*, T*);         \
    template void softmax_rows_ref<T>(int, int, const T*, T*);                   \
    template void rmsnorm_rows_ref<T>(int, int, const T*, const T*, T*, T);      \
    template void relu_ref<T>(std::size_t, const T*, T*);                        \
    template void axpy_ref<T>(std::size_t, T, const T*, T*);                     \
    template void gemm_nn_omp<T>(int, int, int, const T*, const T*, T*);         \
    template void gemm_nt_omp<T>(int, int, int, const T*, const T*, T*);         \
    template void gemm_tn_omp<T>(int, int, int, const T*, const T*, T*);         \
    template void softmax_rows_omp<T>(int, int, const T*, T*);                   \
    template void rmsnorm_rows_omp<T>(int, int, const T*, const T*, T*, T);      \
    template void relu_omp<T>(std::size_t, const T*, T*);                        \
    template void axpy_omp<T>(std::size_t, T, const T*, T*);                     \
    template void gemm_nn<T>(int, int, int, const T*, const T*, T*);             \
    template void gemm_nt<T>(int, int, int, const T*, const T*, T*);             \
    template void gemm_tn<T>(int, int, int, const T*, const T*, T*);             \
    template void softmax_rows<T>(int, int, const T*, T*);                       \
    template void rmsnorm_rows<T>(int, int, const T*, const T*, T*, T);          \
    template void relu<T>(std::size_t, const T*, T*);                            \
    template void axpy<T>(std::size_t, T, const T*, T*);

GRAM_INSTANTIATE_KERNELS(float)
GRAM_INSTANTIATE_KERNELS(double)

#undef GRAM_INSTANTIATE_KERNELS

}  // namespace gram::kernels
