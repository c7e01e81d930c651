#include "gram/complexity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "gram/kernels.hpp"
#include "gram/model.hpp"
#include "gram/tasks.hpp"

namespace gram {

int64_t encoder_block_pairs(Architecture arch, int64_t n, int64_t n_g, int64_t k) {
    switch (arch) {
        case Architecture::Concat:
            return (n * k) * (n * k);
        case Architecture::PageIsolated:
            return (n + n_g) * (n + n_g) * k;
        case Architecture::Gram:
        case Architecture::GramCFormer:
        case Architecture::BottleneckProbe:
            return (n + n_g) * (n + n_g) * k + (n_g * k) * (n_g * k);
    }
    return 0;
}

int64_t decode_path_pairs(Architecture arch, int64_t n, int64_t n_g, int64_t k, int64_t n_c,
                          int64_t l) {
    switch (arch) {
        case Architecture::Concat:
            return n * k * l * l;
        case Architecture::Gram:
        case Architecture::PageIsolated:
            return (n + n_g) * k * l * l;
        case Architecture::GramCFormer:
            return (n + n_g) * k * n_c + n_c * l * l;
        case Architecture::BottleneckProbe:
            return n_g * l * l;
    }
    return 0;
}

ComplexityReport count_pairs(Architecture arch, int64_t n, int64_t n_g, int64_t k, int64_t n_c,
                             int64_t l, int n_heads, int d_kv) {
    if (n < 0 || n_g < 0 || k < 0 || n_c < 0 || l < 0)
        throw ContractError("count_pairs: dimensions must be >= 0");
    ComplexityReport r;
    r.architecture = to_string(arch);
    r.n = n;
    r.n_g = n_g;
    r.k = k;
    r.n_c = n_c;
    r.l = l;
    r.pair_count = encoder_block_pairs(arch, n, n_g, k);
    r.decode_pairs = decode_path_pairs(arch, n, n_g, k, n_c, l);
    r.flops_estimate = 2.0 * d_kv * n_heads * static_cast<double>(r.pair_count);
    return r;
}

int64_t enumerate_block_pairs(Architecture arch, int64_t n, int64_t n_g, int64_t k) {
    int64_t count = 0;
    if (arch == Architecture::Concat) {
        const int64_t len = n * k;
        for (int64_t q = 0; q < len; ++q)
            for (int64_t kk = 0; kk < len; ++kk) ++count;  // full attention
        return count;
    }
    // stage 1: pages attend within their own [page ‖ doc] block
    const int64_t page_len = n + n_g;
    const int64_t total = page_len * k;
    for (int64_t q = 0; q < total; ++q) {
        const int64_t qp = q / page_len;
        for (int64_t kk = 0; kk < total; ++kk)
            if (kk / page_len == qp) ++count;
    }
    if (arch == Architecture::PageIsolated) return count;
    // stage 2: all doc tokens attend to each other across pages
    const int64_t docs = n_g * k;
    for (int64_t q = 0; q < docs; ++q)
        for (int64_t kk = 0; kk < docs; ++kk) ++count;
    return count;
}

double loglog_slope(const std::vector<std::pair<double, double>>& xy) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& [x, y] : xy) {
        if (x <= 0 || y <= 0) continue;
        const double lx = std::log(x), ly = std::log(y);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) return 0.0;
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

std::vector<PageInput> bench_document(const GramConfig& cfg, int k) {
    std::vector<PageInput> pages;
    Rng rng(99);
    for (int i = 0; i < k; ++i) {
        PageInput p;
        p.page_index = i;
        for (int t = 0; t < cfg.n_text; ++t) {
            p.token_ids.push_back(
                vocab::kWordBase +
                static_cast<int>(rng.next_below(cfg.vocab_size - vocab::kWordBase)));
            const int col = t % 8, row = t / 8;
            p.boxes.push_back({col * 125, (row * 50) % 960, col * 125 + 100, (row * 50) % 960 + 40});
        }
        pages.push_back(std::move(p));
    }
    return pages;
}

}  // namespace

std::vector<BenchRow> bench_scaling(const BenchConfig& bc) {
    std::vector<BenchRow> rows;
    const int prev_threads = kernels::threads();
    kernels::set_threads(bc.threads);
    const std::vector<int> question = {vocab::kExists, vocab::kWordBase};

    for (Architecture arch : bc.architectures) {
        GramConfig cfg = bc.model;
        cfg.architecture = arch;
        cfg.cformer.enabled = arch == Architecture::GramCFormer;
        cfg.max_answer_len = std::max(cfg.max_answer_len, bc.answer_len + 1);
        cfg.validate();
        GramModel model(cfg);
        const int64_t n = cfg.page_seq_len();

        for (int k : bc.k_values) {
            auto doc = bench_document(cfg, k);
            BenchRow base;
            base.k = k;
            base.n = n;
            base.pairs = encoder_block_pairs(arch, n, cfg.n_doc_tokens, k);
            base.flops = 2.0 * cfg.d_kv * cfg.n_heads * static_cast<double>(base.pairs);

            std::vector<double> enc_ms, dec_ms;
            int64_t peak = 0;
            bool oom = false;
            memtrack::set_limit(bc.mem_limit_bytes);
            try {
                NoGradGuard ng;
                for (int r = 0; r < bc.warmup + bc.repeats; ++r) {
                    memtrack::reset_peak();
                    const auto t0 = Clock::now();
                    Tensor mem = model.memory(doc, question, false);
                    const auto t1 = Clock::now();
                    // timed decode sweep: L teacher-forced steps of growing
                    // prefix, the cost profile of cache-free greedy decoding
                    std::vector<int> prefix = {kBos};
                    for (int t = 0; t < bc.answer_len; ++t) {
                        (void)model.decode_logits(prefix, mem);
                        prefix.push_back(vocab::kYes);
                    }
                    const auto t2 = Clock::now();
                    if (r >= bc.warmup) {
                        enc_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
                        dec_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
                        peak = std::max(peak, memtrack::peak_bytes());
                    }
                }
            } catch (const MemoryLimitError&) {
                oom = true;
                peak = memtrack::peak_bytes();
            }
            memtrack::set_limit(0);

            if (oom) {
                BenchRow row = base;
                row.architecture = to_string(arch);
                row.wall_ms = -1.0;  // memory-limit event
                row.peak_bytes = peak;
                rows.push_back(row);
                continue;
            }
            const double enc = median(enc_ms), dec = median(dec_ms);
            BenchRow total = base;
            total.architecture = to_string(arch);
            total.wall_ms = enc + dec;
            total.peak_bytes = peak;
            rows.push_back(total);
            BenchRow enc_row = base;
            enc_row.architecture = to_string(arch) + ".encode";
            enc_row.wall_ms = enc;
            enc_row.peak_bytes = peak;
            rows.push_back(enc_row);
            BenchRow dec_row = base;
            dec_row.architecture = to_string(arch) + ".decode";
            dec_row.wall_ms = dec;
            dec_row.peak_bytes = peak;
            rows.push_back(dec_row);
        }
    }
    kernels::set_threads(prev_threads);
    return rows;
}

std::string bench_csv_header() { return "architecture,K,N,pairs,flops,wall_ms,peak_bytes"; }

std::string to_csv(const BenchRow& row) {
    std::ostringstream os;
    os << row.architecture << ',' << row.k << ',' << row.n << ',' << row.pairs << ','
       << static_cast<int64_t>(row.flops) << ',' << row.wall_ms << ',' << row.peak_bytes;
    return os.str();
}

}  // namespace gram
