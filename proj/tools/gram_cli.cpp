// gram: multi-page document QA models, synthetic tasks, and complexity
// accounting from one binary. All numeric output is CSV.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gram/checkpoint.hpp"
#include "gram/complexity.hpp"
#include "gram/config.hpp"
#include "gram/data.hpp"
#include "gram/eval.hpp"
#include "gram/gradcheck.hpp"
#include "gram/kernels.hpp"
#include "gram/model.hpp"
#include "gram/probe.hpp"
#include "gram/tasks.hpp"
#include "gram/train.hpp"

namespace fs = std::filesystem;
using namespace gram;

namespace {

constexpr const char* kVersion = "0.1.0";

struct ConfigCli {
    std::string config_path;
    std::vector<std::string> sets;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key=value config file");
        cmd->add_option("--set", sets, "config override key=value (repeatable)")
            ->expected(-1);
    }

    void load(GramConfig& cfg, TrainConfig& tc) const {
        if (!config_path.empty()) apply_kv(cfg, tc, read_kv_file(config_path));
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw ConfigError("--set expects key=value, got '" + kv + "'");
            apply_one(cfg, tc, kv.substr(0, eq), kv.substr(eq + 1));
        }
    }
};

std::vector<TaskKind> parse_tasks(const std::string& csv) {
    std::vector<TaskKind> kinds;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) kinds.push_back(task_from_string(item));
    if (kinds.empty()) throw ConfigError("tasks: empty list");
    return kinds;
}

std::string runs_root() {
    const char* env = std::getenv("GRAM_RUN_DIR");
    return env ? env : "runs";
}

void write_manifest(const fs::path& dir, const GramConfig& cfg, const TrainConfig& tc,
                    const std::string& cmdline, const std::vector<std::string>& outputs) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["seed"] = cfg.seed;
    j["config"] = to_kv(cfg, tc);
    j["command_line"] = cmdline;
    j["outputs"] = outputs;
    std::ofstream out(dir / "manifest.json");
    out << j.dump(2) << "\n";
}

int cmd_gen_data(const std::string& tasks_csv, int n, int k, int n_text, int vocab, uint64_t seed,
                 const std::string& out_path) {
    const auto kinds = parse_tasks(tasks_csv);
    auto docs = make_dataset(kinds, n, k, n_text, vocab, seed);
    std::vector<DocumentRecord> records;
    for (size_t i = 0; i < docs.size(); ++i) {
        std::ostringstream id;
        id << "doc" << std::setw(5) << std::setfill('0') << i;
        records.push_back(to_record(docs[i], id.str()));
    }
    write_documents(out_path, records);
    std::cerr << "wrote " << records.size() << " documents to " << out_path << "\n";
    return 0;
}

int cmd_train(const ConfigCli& cc, const std::string& data_path, const std::string& run_dir_opt,
              const std::string& cmdline) {
    GramConfig cfg;
    TrainConfig tc;
    cc.load(cfg, tc);
    cfg.validate();
    tc.validate();

    fs::path run_dir = run_dir_opt.empty()
                           ? fs::path(runs_root()) / ("run-seed" + std::to_string(cfg.seed))
                           : fs::path(run_dir_opt);
    if (fs::exists(run_dir / "manifest.json"))
        throw ContractError("run directory " + run_dir.string() +
                            " already holds a manifest; use a fresh directory");
    fs::create_directories(run_dir);

    const auto docs = read_documents(data_path);
    const auto items = to_eval_items(docs, cfg.vocab_size);
    std::vector<QaExample> dataset;
    for (const auto& item : items) dataset.push_back(item.example);

    GramModel model(cfg);
    std::ofstream metrics(run_dir / "metrics.csv");
    std::ofstream timing(run_dir / "timing.csv");
    metrics << "step,loss,lr\n";
    timing << "step,wall_ms\n";
    metrics.precision(17);
    auto result = train_model(model, dataset, tc, [&](const StepRecord& rec) {
        metrics << rec.step << ',' << rec.loss << ',' << rec.lr << "\n";
        timing << rec.step << ',' << rec.wall_ms << "\n";
        return false;
    });
    const fs::path ckpt = run_dir / "checkpoint.bin";
    save_checkpoint(model.params(), ckpt.string());
    write_manifest(run_dir, cfg, tc, cmdline,
                   {"metrics.csv", "timing.csv", "checkpoint.bin"});
    std::cerr << "trained " << result.steps.size() << " steps, final loss "
              << (result.steps.empty() ? 0.0 : result.steps.back().loss) << ", warnings "
              << result.warning_count << "\n";
    std::cerr << "run artifacts in " << run_dir << "\n";
    return 0;
}

int cmd_eval(const ConfigCli& cc, const std::string& data_path, const std::string& ckpt_path,
             const std::string& out_path) {
    GramConfig cfg;
    TrainConfig tc;
    cc.load(cfg, tc);
    cfg.validate();
    GramModel model(cfg);
    if (!ckpt_path.empty()) load_checkpoint(model.params(), ckpt_path);
    const auto docs = read_documents(data_path);
    const auto items = to_eval_items(docs, cfg.vocab_size);
    const auto report = evaluate(model, items);
    const std::string csv = eval_csv(report);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        std::ofstream out(out_path);
        out << csv;
    }
    if (report.warning_count) std::cerr << "warnings: " << report.warning_count << "\n";
    return 0;
}

int cmd_flops(std::vector<std::string> archs, int64_t n, int64_t n_g, std::vector<int64_t> ks,
              int64_t n_c, int64_t l, int n_heads, int d_kv) {
    if (archs.empty()) archs = {"concat", "gram"};
    if (ks.empty()) ks = {4};
    std::cout << bench_csv_header() << "\n";
    for (const auto& name : archs) {
        const Architecture arch = architecture_from_string(name);
        for (int64_t k : ks) {
            const auto rep = count_pairs(arch, n, n_g, k, n_c, l, n_heads, d_kv);
            BenchRow row{rep.architecture, rep.k, rep.n, rep.pair_count, rep.flops_estimate,
                         0.0, 0};
            std::cout << to_csv(row) << "\n";
        }
    }
    return 0;
}

int cmd_bench(const ConfigCli& cc, std::vector<std::string> archs, std::vector<int> ks,
              int repeats, int warmup, int answer_len, int64_t mem_limit, int threads,
              const std::string& out_path, const std::string& slopes_path) {
    BenchConfig bc;
    // toy dims unless a config overrides them
    bc.model.d_model = 32;
    bc.model.n_blocks = 1;
    bc.model.n_heads = 1;
    bc.model.d_kv = 16;
    bc.model.d_ff = 64;
    bc.model.doc_d = 32;
    bc.model.doc_heads = 1;
    bc.model.doc_d_kv = 16;
    bc.model.doc_d_ff = 64;
    bc.model.n_text = 120;
    bc.model.n_visual = 0;
    bc.model.n_question = 8;
    bc.model.n_doc_tokens = 8;
    bc.model.cformer.n_c = 32;
    bc.model.cformer.n_layers = 1;
    bc.model.cformer.n_heads = 1;
    bc.model.cformer.d_kv = 16;
    bc.model.cformer.d_ff = 64;
    bc.model.vocab_size = 64;
    bc.model.max_pages = 4096;
    bc.model.concat_text_cap_train = 1 << 20;
    bc.model.concat_text_cap_eval = 1 << 20;
    TrainConfig unused;
    cc.load(bc.model, unused);
    if (archs.empty()) archs = {"concat", "gram", "gram_cformer"};
    for (const auto& a : archs) bc.architectures.push_back(architecture_from_string(a));
    bc.k_values = ks.empty() ? std::vector<int>{4, 8, 16, 32, 64} : ks;
    bc.repeats = repeats;
    bc.warmup = warmup;
    bc.answer_len = answer_len;
    bc.mem_limit_bytes = mem_limit;
    bc.threads = threads;

    const auto rows = bench_scaling(bc);
    std::ostringstream csv;
    csv << bench_csv_header() << "\n";
    for (const auto& row : rows) csv << to_csv(row) << "\n";
    if (out_path.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream out(out_path);
        out << csv.str();
    }

    std::ostringstream slopes;
    slopes << "architecture,slope_total,slope_encode\n";
    for (const auto& name : archs) {
        std::vector<std::pair<double, double>> total, encode;
        for (const auto& row : rows) {
            if (row.wall_ms <= 0) continue;
            if (row.architecture == name) total.push_back({double(row.k), row.wall_ms});
            if (row.architecture == name + ".encode") encode.push_back({double(row.k), row.wall_ms});
        }
        slopes << name << ',' << loglog_slope(total) << ',' << loglog_slope(encode) << "\n";
    }
    if (slopes_path.empty()) {
        std::cerr << slopes.str();
    } else {
        std::ofstream out(slopes_path);
        out << slopes.str();
    }
    return 0;
}

int cmd_gradcheck(const ConfigCli& cc, double h, double tol, double scale, uint64_t seed) {
    GramConfig cfg;
    TrainConfig tc;
    // audit profile per the toy contract; --set overrides
    cfg.d_model = 16;
    cfg.n_blocks = 2;
    cfg.n_heads = 2;
    cfg.d_kv = 8;
    cfg.d_ff = 32;
    cfg.doc_d = 16;
    cfg.doc_heads = 2;
    cfg.doc_d_kv = 8;
    cfg.doc_d_ff = 32;
    cfg.n_text = 6;
    cfg.n_visual = 2;
    cfg.n_question = 3;
    cfg.n_doc_tokens = 4;
    cfg.vocab_size = 48;
    cfg.max_answer_len = 6;
    cfg.cformer.n_c = 6;
    cfg.cformer.n_layers = 1;
    cfg.cformer.n_heads = 2;
    cfg.cformer.d_kv = 8;
    cfg.cformer.d_ff = 32;
    cfg.bias_c = 2.0;  // audit conditioning: c=20 saturates softmax at toy lengths
    cfg.seed = seed;
    cc.load(cfg, tc);
    cfg.validate();
    GramModel model(cfg);

    auto doc = generate_task(TaskKind::CrossPageCount, 3, cfg.n_text, cfg.vocab_size, seed);
    auto report = gradcheck_model(model, to_example(doc), h, scale);
    std::cout << "parameter,max_rel_err\n";
    for (const auto& e : report.per_param) std::cout << e.name << ',' << e.max_err << "\n";
    std::cerr << "checked " << report.elements << " elements, max rel err " << report.max_err
              << (report.max_err < tol ? " (pass)" : " (FAIL)") << "\n";
    return report.max_err < tol ? 0 : 1;
}

int cmd_probe(const ConfigCli& cc, int seeds, uint64_t seed0) {
    ProbeConfig pc;
    pc.model.d_model = 32;
    pc.model.n_blocks = 2;
    pc.model.n_heads = 2;
    pc.model.d_kv = 16;
    pc.model.d_ff = 64;
    pc.model.doc_d = 32;
    pc.model.doc_heads = 2;
    pc.model.doc_d_kv = 16;
    pc.model.doc_d_ff = 64;
    pc.model.n_text = 16;
    pc.model.n_visual = 0;
    pc.model.n_question = 2;
    pc.model.n_doc_tokens = 8;
    pc.model.vocab_size = 64;
    pc.model.max_answer_len = 3;
    pc.train.steps = 5000;
    pc.train.warmup_steps = 200;
    pc.train.lr_base = 1e-3;
    pc.train.lr_new = 1e-3;
    pc.train.batch_size = 8;
    cc.load(pc.model, pc.train);

    std::cout << "seed,variant,train_acc,eval_acc,steps\n";
    for (int s = 0; s < seeds; ++s) {
        const uint64_t seed = seed0 + static_cast<uint64_t>(s);
        for (bool with_doc : {true, false}) {
            const auto r = run_probe(pc, seed, with_doc);
            std::cout << r.seed << ',' << (with_doc ? "with_doc" : "ablated") << ','
                      << r.train_acc << ',' << r.eval_acc << ',' << r.steps_run << "\n"
                      << std::flush;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-page document QA: global-local encoder, compression, baselines"};
    app.require_subcommand(1);

    std::ostringstream cmdline;
    for (int i = 0; i < argc; ++i) cmdline << (i ? " " : "") << argv[i];

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic multi-page QA dataset");
    std::string tasks = "single_page_lookup,cross_page_count,cross_page_exists,page_locate";
    int gen_n = 100, gen_k = 4, gen_text = 16, gen_vocab = 64;
    uint64_t gen_seed = 1;
    std::string gen_out;
    gen->add_option("--tasks", tasks, "comma-separated task kinds");
    gen->add_option("--n", gen_n, "number of documents");
    gen->add_option("--K", gen_k, "pages per document");
    gen->add_option("--n-text", gen_text, "text tokens per page");
    gen->add_option("--vocab", gen_vocab, "vocabulary size");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output JSONL path")->required();

    // train
    auto* train = app.add_subcommand("train", "train a model on a dataset");
    ConfigCli train_cc;
    train_cc.attach(train);
    std::string train_data, train_run_dir;
    train->add_option("--data", train_data, "dataset JSONL")->required();
    train->add_option("--run-dir", train_run_dir, "run directory (default runs/run-seed<seed>)");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate ANLS/accuracy by page-count bucket");
    ConfigCli eval_cc;
    eval_cc.attach(eval);
    std::string eval_data, eval_ckpt, eval_out;
    eval->add_option("--data", eval_data, "dataset JSONL")->required();
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint to load");
    eval->add_option("--out", eval_out, "CSV output path (default stdout)");

    // flops
    auto* flops = app.add_subcommand("flops", "analytic attention-pair counts");
    std::vector<std::string> flops_archs;
    std::vector<int64_t> flops_ks;
    int64_t flops_n = 800, flops_ng = 32, flops_nc = 256, flops_l = 16;
    int flops_heads = 4, flops_dkv = 64;
    flops->add_option("--arch", flops_archs, "architecture (repeatable)");
    flops->add_option("--N", flops_n, "tokens per page");
    flops->add_option("--Ng", flops_ng, "doc tokens per page");
    flops->add_option("--K", flops_ks, "page counts (repeatable)");
    flops->add_option("--Nc", flops_nc, "compression length");
    flops->add_option("--L", flops_l, "max answer length");
    flops->add_option("--n-heads", flops_heads, "attention heads");
    flops->add_option("--d-kv", flops_dkv, "per-head width");

    // bench
    auto* bench = app.add_subcommand("bench", "measured wall-time/memory scaling vs page count");
    ConfigCli bench_cc;
    bench_cc.attach(bench);
    std::vector<std::string> bench_archs;
    std::vector<int> bench_ks;
    int bench_repeats = 3, bench_warmup = 1, bench_answer = 4, bench_threads = 1;
    int64_t bench_mem = 0;
    std::string bench_out, bench_slopes;
    bench->add_option("--arch", bench_archs, "architecture (repeatable)");
    bench->add_option("--K", bench_ks, "page counts (repeatable)");
    bench->add_option("--repeats", bench_repeats, "timed repeats per point");
    bench->add_option("--warmup", bench_warmup, "untimed warmup runs");
    bench->add_option("--answer-len", bench_answer, "decode steps timed");
    bench->add_option("--mem-limit", bench_mem, "tensor memory budget in bytes (0 = off)");
    bench->add_option("--threads", bench_threads, "kernel threads (benchmarks default to 1)");
    bench->add_option("--out", bench_out, "measurements CSV path (default stdout)");
    bench->add_option("--slopes-out", bench_slopes, "slope-fit CSV path (default stderr)");

    // gradcheck
    auto* grad = app.add_subcommand("gradcheck", "finite-difference audit of every parameter");
    ConfigCli grad_cc;
    grad_cc.attach(grad);
    double grad_h = 1e-5, grad_tol = 1e-4, grad_scale = 9.0;
    uint64_t grad_seed = 7;
    grad->add_option("--fd-step", grad_h, "finite-difference step");
    grad->add_option("--tol", grad_tol, "max relative error");
    grad->add_option("--scale", grad_scale, "weight scale for audit conditioning");
    grad->add_option("--seed", grad_seed, "model/data seed");

    // probe
    auto* probe = app.add_subcommand("probe", "bottleneck probe: doc-flow necessity experiment");
    ConfigCli probe_cc;
    probe_cc.attach(probe);
    int probe_seeds = 3;
    uint64_t probe_seed0 = 100;
    probe->add_option("--seeds", probe_seeds, "number of seeds");
    probe->add_option("--seed0", probe_seed0, "first seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen_data(tasks, gen_n, gen_k, gen_text, gen_vocab, gen_seed, gen_out);
        if (train->parsed()) return cmd_train(train_cc, train_data, train_run_dir, cmdline.str());
        if (eval->parsed()) return cmd_eval(eval_cc, eval_data, eval_ckpt, eval_out);
        if (flops->parsed())
            return cmd_flops(flops_archs, flops_n, flops_ng, flops_ks, flops_nc, flops_l,
                             flops_heads, flops_dkv);
        if (bench->parsed())
            return cmd_bench(bench_cc, bench_archs, bench_ks, bench_repeats, bench_warmup,
                             bench_answer, bench_mem, bench_threads, bench_out, bench_slopes);
        if (grad->parsed()) return cmd_gradcheck(grad_cc, grad_h, grad_tol, grad_scale, grad_seed);
        if (probe->parsed()) return cmd_probe(probe_cc, probe_seeds, probe_seed0);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
