// Compares the serial reference kernels against the OpenMP variants on
// attention-shaped workloads. Emits CSV: kernel,dtype,size,threads,wall_ms.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "gram/kernels.hpp"
#include "gram/rng.hpp"

using namespace gram;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
    std::vector<double> times;
    fn();  // warmup
    for (int r = 0; r < repeats; ++r) {
        auto t0 = Clock::now();
        fn();
        times.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

template <typename T>
void bench_dtype(const char* dtype, int repeats) {
    Rng rng(42);
    for (int side : {128, 256, 512}) {
        const size_t n = static_cast<size_t>(side) * side;
        std::vector<T> a(n), b(n), c(n);
        for (auto& v : a) v = static_cast<T>(rng.uniform(-1, 1));
        for (auto& v : b) v = static_cast<T>(rng.uniform(-1, 1));

        double serial = time_ms([&] { kernels::gemm_nn_ref(side, side, side, a.data(), b.data(), c.data()); }, repeats);
        std::printf("gemm_nn,%s,%d,1,%.3f\n", dtype, side, serial);
        double par = time_ms([&] { kernels::gemm_nn_omp(side, side, side, a.data(), b.data(), c.data()); }, repeats);
        std::printf("gemm_nn,%s,%d,%d,%.3f\n", dtype, side, kernels::threads(), par);

        double sm_serial = time_ms([&] { kernels::softmax_rows_ref(side, side, a.data(), c.data()); }, repeats);
        std::printf("softmax_rows,%s,%d,1,%.3f\n", dtype, side, sm_serial);
        double sm_par = time_ms([&] { kernels::softmax_rows_omp(side, side, a.data(), c.data()); }, repeats);
        std::printf("softmax_rows,%s,%d,%d,%.3f\n", dtype, side, kernels::threads(), sm_par);

        std::vector<T> w(static_cast<size_t>(side), T(1));
        double rn_serial = time_ms([&] { kernels::rmsnorm_rows_ref(side, side, a.data(), w.data(), c.data(), T(1e-6)); }, repeats);
        std::printf("rmsnorm_rows,%s,%d,1,%.3f\n", dtype, side, rn_serial);
        double rn_par = time_ms([&] { kernels::rmsnorm_rows_omp(side, side, a.data(), w.data(), c.data(), T(1e-6)); }, repeats);
        std::printf("rmsnorm_rows,%s,%d,%d,%.3f\n", dtype, side, kernels::threads(), rn_par);
    }
}

}  // namespace

int main(int argc, char** argv) {
    int repeats = 5;
    if (argc > 1) repeats = std::atoi(argv[1]);
    std::printf("kernel,dtype,size,threads,wall_ms\n");
    bench_dtype<double>("f64", repeats);
    bench_dtype<float>("f32", repeats);
    return 0;
}
