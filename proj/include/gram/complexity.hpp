#pragma once

#include <string>
#include <vector>

#include "gram/config.hpp"

namespace gram {

// Exact attention-pair counts and measured scaling. Pair count = number of
// permitted (query, key) entries in the attention score matrices; FLOPs are
// derived as 2 * d_kv * pairs per head.
struct ComplexityReport {
    std::string architecture;
    int64_t n = 0;    // tokens per page (N_t + N_v + N_q)
    int64_t n_g = 0;  // doc tokens per page
    int64_t k = 0;    // pages
    int64_t n_c = 0;  // compression length
    int64_t l = 0;    // max answer length
    int64_t pair_count = 0;    // encoder pairs per block
    int64_t decode_pairs = 0;  // decode-path pairs (iterative, no cache)
    double flops_estimate = 0.0;
    double wall_ms = 0.0;
    int64_t peak_bytes = 0;
};

// Analytic per-block encoder pairs: concat (N*K)^2; global-local
// (N+N_g)^2*K + (N_g*K)^2 (doc stage absent for page_isolated).
int64_t encoder_block_pairs(Architecture arch, int64_t n, int64_t n_g, int64_t k);

// Decode-path pairs: full memory (N+N_g)*K*L^2; concat N*K*L^2; compressed
// (N+N_g)*K*N_c + N_c*L^2; bottleneck N_g*L^2.
int64_t decode_path_pairs(Architecture arch, int64_t n, int64_t n_g, int64_t k, int64_t n_c,
                          int64_t l);

ComplexityReport count_pairs(Architecture arch, int64_t n, int64_t n_g, int64_t k, int64_t n_c,
                             int64_t l, int n_heads, int d_kv);

// Brute-force oracle: walks the global (query, key) index space of each
// attention stage and counts entries the mask permits.
int64_t enumerate_block_pairs(Architecture arch, int64_t n, int64_t n_g, int64_t k);

struct BenchRow {
    std::string architecture;  // phase rows are suffixed .encode / .decode
    int64_t k = 0;
    int64_t n = 0;
    int64_t pairs = 0;
    double flops = 0.0;
    double wall_ms = 0.0;  // negative marks a memory-limit event
    int64_t peak_bytes = 0;
};

struct BenchConfig {
    GramConfig model;  // shared dims; architecture is set per run
    std::vector<Architecture> architectures;
    std::vector<int> k_values;
    int repeats = 3;
    int warmup = 1;
    int answer_len = 4;             // decode steps timed per document
    int64_t mem_limit_bytes = 0;    // 0 = unlimited
    int threads = 1;                // benchmarks pin to one thread by default
};

// Median-of-repeats forward timings per (architecture, K): one total row plus
// .encode/.decode phase rows; exceeding the memory budget records an event
// row instead of aborting.
std::vector<BenchRow> bench_scaling(const BenchConfig& bc);

// Least-squares slope of ln(y) vs ln(x); pairs with non-positive values are
// skipped (memory-limit events).
double loglog_slope(const std::vector<std::pair<double, double>>& xy);

std::string bench_csv_header();
std::string to_csv(const BenchRow& row);

}  // namespace gram
