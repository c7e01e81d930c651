#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "gram/checkpoint.hpp"
#include "gram/config.hpp"
#include "gram/data.hpp"
#include "gram/eval.hpp"
#include "gram/tasks.hpp"
#include "test_util.hpp"

using namespace gram;
using namespace gram::testutil;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/gram_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

GramConfig small_config() {
    GramConfig cfg;
    cfg.d_model = 8;
    cfg.n_blocks = 1;
    cfg.n_heads = 2;
    cfg.d_kv = 4;
    cfg.d_ff = 16;
    cfg.doc_d = 8;
    cfg.doc_heads = 2;
    cfg.doc_d_kv = 4;
    cfg.doc_d_ff = 16;
    cfg.n_text = 8;
    cfg.n_visual = 0;
    cfg.n_question = 4;
    cfg.n_doc_tokens = 2;
    cfg.vocab_size = 64;
    cfg.seed = 17;
    return cfg;
}

}  // namespace

TEST_CASE("document records round-trip through JSONL") {
    TempFile tf("docs.jsonl");
    std::vector<DocumentRecord> records;
    for (uint64_t s = 0; s < 4; ++s)
        records.push_back(to_record(
            generate_task(TaskKind::CrossPageCount, 3, 6, 64, s), "doc" + std::to_string(s)));
    write_documents(tf.path, records);
    auto loaded = read_documents(tf.path);
    REQUIRE(loaded.size() == records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        CHECK(loaded[i].doc_id == records[i].doc_id);
        REQUIRE(loaded[i].pages.size() == records[i].pages.size());
        for (size_t p = 0; p < records[i].pages.size(); ++p) {
            CHECK(loaded[i].pages[p].words == records[i].pages[p].words);
            CHECK(loaded[i].pages[p].boxes == records[i].pages[p].boxes);
        }
        CHECK(loaded[i].questions.at(0).text == records[i].questions.at(0).text);
        CHECK(loaded[i].questions.at(0).answers == records[i].questions.at(0).answers);
    }
    // tokenization returns the original ids
    auto doc = generate_task(TaskKind::CrossPageCount, 3, 6, 64, 0);
    auto pages = tokenize_pages(loaded[0], 64);
    for (size_t p = 0; p < pages.size(); ++p)
        CHECK(pages[p].token_ids == doc.pages[p].token_ids);
}

TEST_CASE("parse errors carry path and line") {
    TempFile tf("bad.jsonl");
    {
        std::ofstream out(tf.path);
        out << R"({"doc_id":"a","pages":[],"questions":[]})" << "\n";
        out << "{not json}\n";
    }
    try {
        read_documents(tf.path);
        FAIL("expected ContractError");
    } catch (const ContractError& e) {
        CHECK(std::string(e.what()).find(tf.path + ":2") != std::string::npos);
    }
}

TEST_CASE("schema violations carry path and line") {
    TempFile tf("schema.jsonl");
    {
        std::ofstream out(tf.path);
        out << R"({"doc_id":"a","pages":[{"page_index":0,"tokens":[{"text":"w5","box":[0,0,2000,40]}]}],"questions":[]})"
            << "\n";
    }
    try {
        read_documents(tf.path);
        FAIL("expected ContractError");
    } catch (const ContractError& e) {
        const std::string msg = e.what();
        CHECK(msg.find(":1") != std::string::npos);
        CHECK(msg.find("2000") != std::string::npos);
    }

    TempFile tf2("pageidx.jsonl");
    {
        std::ofstream out(tf2.path);
        out << R"({"doc_id":"a","pages":[{"page_index":1,"tokens":[]}],"questions":[]})" << "\n";
    }
    CHECK_THROWS_AS(read_documents(tf2.path), ContractError);
}

TEST_CASE("checkpoints restore parameters exactly") {
    TempFile tf("ckpt.bin");
    auto cfg = small_config();
    GramModel m1(cfg);
    // nudge weights so the checkpoint differs from the seeded init
    for (auto& [name, t] : m1.params().params())
        for (auto& v : const_cast<Tensor&>(t).data()) v += 0.25;
    save_checkpoint(m1.params(), tf.path);

    GramModel m2(cfg);
    load_checkpoint(m2.params(), tf.path);
    for (size_t i = 0; i < m1.params().params().size(); ++i) {
        CHECK(m1.params().params()[i].first == m2.params().params()[i].first);
        CHECK(bitwise_equal(m1.params().params()[i].second.data(),
                            m2.params().params()[i].second.data()));
    }
}

TEST_CASE("checkpoint mismatches are contract errors") {
    TempFile tf("ckpt2.bin");
    auto cfg = small_config();
    GramModel m1(cfg);
    save_checkpoint(m1.params(), tf.path);

    GramConfig other = cfg;
    other.d_model = 16;
    other.doc_d = 16;
    GramModel m2(other);
    CHECK_THROWS_AS(load_checkpoint(m2.params(), tf.path), ContractError);
}

TEST_CASE("page-count buckets partition correctly") {
    CHECK(page_bucket_index(1) == 0);
    CHECK(page_bucket_index(2) == 1);
    CHECK(page_bucket_index(4) == 1);
    CHECK(page_bucket_index(5) == 2);
    CHECK(page_bucket_index(10) == 2);
    CHECK(page_bucket_index(11) == 3);
    CHECK(page_bucket_index(400) == 3);
}

TEST_CASE("bucketed ANLS aggregates exactly to the overall score") {
    auto cfg = small_config();
    cfg.max_pages = 12;
    GramModel model(cfg);
    std::vector<DocumentRecord> records;
    int id = 0;
    for (int k : {1, 3, 6, 12})
        records.push_back(to_record(generate_task(TaskKind::CrossPageExists, k, 6, 64, id),
                                    "doc" + std::to_string(id++)));
    auto items = to_eval_items(records, cfg.vocab_size);
    auto report = evaluate(model, items);
    int total = 0;
    double anls_total = 0.0;
    int hits = 0;
    for (const auto& b : report.buckets) {
        total += b.count;
        anls_total += b.anls_sum;
        hits += b.exact_hits;
    }
    CHECK(report.all.count == total);
    CHECK(report.all.anls_sum == anls_total);  // exact: same additions, same order
    CHECK(report.all.exact_hits == hits);
    CHECK(total == 4);
    for (int b = 0; b < 4; ++b) CHECK(report.buckets[static_cast<size_t>(b)].count == 1);
}

TEST_CASE("single-bucket datasets make that bucket equal All") {
    auto cfg = small_config();
    GramModel model(cfg);
    std::vector<DocumentRecord> records;
    for (int i = 0; i < 3; ++i)
        records.push_back(to_record(generate_task(TaskKind::SinglePageLookup, 1, 6, 64, i),
                                    "doc" + std::to_string(i)));
    auto report = evaluate(model, to_eval_items(records, cfg.vocab_size));
    CHECK(report.buckets[0].count == 3);
    for (int b = 1; b < 4; ++b) CHECK(report.buckets[static_cast<size_t>(b)].count == 0);
    CHECK(report.buckets[0].anls_sum == report.all.anls_sum);
    CHECK(report.buckets[0].exact_hits == report.all.exact_hits);
}

TEST_CASE("config files parse, apply, and reject unknown keys") {
    TempFile tf("cfg.txt");
    {
        std::ofstream out(tf.path);
        out << "# comment\n";
        out << "d_model = 24\n";
        out << "bias_mode=constant\n";
        out << "train.steps=77\n";
    }
    GramConfig cfg;
    TrainConfig tc;
    apply_kv(cfg, tc, read_kv_file(tf.path));
    CHECK(cfg.d_model == 24);
    CHECK(cfg.bias_mode == BiasMode::Constant);
    CHECK(tc.steps == 77);

    CHECK_THROWS_WITH_AS(apply_one(cfg, tc, "no_such_key", "1"),
                         doctest::Contains("no_such_key"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_one(cfg, tc, "d_model", "abc"), doctest::Contains("d_model"),
                         ConfigError);

    // snapshot -> reapply round-trip
    GramConfig cfg2;
    TrainConfig tc2;
    TempFile tf2("cfg2.txt");
    {
        std::ofstream out(tf2.path);
        out << to_kv(cfg, tc);
    }
    apply_kv(cfg2, tc2, read_kv_file(tf2.path));
    CHECK(to_kv(cfg2, tc2) == to_kv(cfg, tc));
}

TEST_CASE("learning-rate schedule: warmup then linear decay") {
    TrainConfig tc;
    tc.steps = 100;
    tc.warmup_steps = 10;
    CHECK(tc.lr_factor(0) == doctest::Approx(0.1));
    CHECK(tc.lr_factor(9) == doctest::Approx(1.0));
    CHECK(tc.lr_factor(10) == doctest::Approx(1.0));
    CHECK(tc.lr_factor(99) == doctest::Approx(1.0 / 90));
    for (int t = 1; t < 100; ++t) CHECK(tc.lr_factor(t) > 0.0);
}
