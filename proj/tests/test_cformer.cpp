#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gram/cformer.hpp"
#include "test_util.hpp"

using namespace gram;
using namespace gram::testutil;

namespace {

GramConfig cf_config() {
    GramConfig cfg;
    cfg.d_model = 4;
    cfg.n_heads = 1;
    cfg.d_kv = 4;
    cfg.d_ff = 8;
    cfg.cformer.enabled = true;
    cfg.cformer.n_c = 4;
    cfg.cformer.n_layers = 2;
    cfg.cformer.n_heads = 2;
    cfg.cformer.d_kv = 2;
    cfg.cformer.d_ff = 8;
    cfg.architecture = Architecture::GramCFormer;
    cfg.n_doc_tokens = 2;
    cfg.seed = 51;
    return cfg;
}

}  // namespace

TEST_CASE("compressed output length is N_c for any input length") {
    auto cfg = cf_config();
    ParamRegistry reg(cfg.seed);
    CFormer cf(reg, cfg);
    Rng rng(1);
    auto q = Tensor::randn({3, 4}, rng, 0.0, 1.0);
    for (int64_t len : {100, 4096, 50000}) {
        auto enc_out = Tensor::randn({len, 4}, rng, 0.0, 1.0);
        auto out = cf.compress(enc_out, q);
        CHECK(out.shape() == Shape{4, 4});
    }
}

TEST_CASE("compression covers the whole encoder output") {
    auto cfg = cf_config();
    ParamRegistry reg(cfg.seed);
    CFormer cf(reg, cfg);
    Rng rng(2);
    auto enc_out = Tensor::randn({12, 4}, rng, 0.0, 1.0);
    enc_out.set_requires_grad(true);
    auto q = Tensor::randn({2, 4}, rng, 0.0, 1.0);
    sum(cf.compress(enc_out, q)).backward();
    REQUIRE(enc_out.has_grad());
    for (double g : enc_out.grad()) CHECK(g != 0.0);
}

TEST_CASE("compression is question-aware") {
    auto cfg = cf_config();
    ParamRegistry reg(cfg.seed);
    CFormer cf(reg, cfg);
    Rng rng(3);
    auto enc_out = Tensor::randn({10, 4}, rng, 0.0, 1.0);
    auto q1 = Tensor::randn({2, 4}, rng, 0.0, 1.0);
    auto q2 = Tensor::randn({2, 4}, rng, 0.0, 1.0);
    auto o1 = cf.compress(enc_out, q1);
    auto o2 = cf.compress(enc_out, q2);
    CHECK_FALSE(bitwise_equal(o1.data(), o2.data()));
}

TEST_CASE("self-attention over compression tokens is bidirectional") {
    auto cfg = cf_config();
    ParamRegistry reg(cfg.seed);
    CFormer cf(reg, cfg);
    Rng rng(4);
    auto enc_out = Tensor::randn({10, 4}, rng, 0.0, 1.0);
    auto q = Tensor::randn({2, 4}, rng, 0.0, 1.0);
    auto before = cf.compress(enc_out, q);
    // perturb the last compression token's parameters; position 0 must react
    Tensor* tokens = reg.find("cformer.tokens");
    REQUIRE(tokens != nullptr);
    for (int64_t c = 0; c < 4; ++c) tokens->data()[(cfg.cformer.n_c - 1) * 4 + c] += 0.5;
    auto after = cf.compress(enc_out, q);
    bool pos0_changed = false;
    for (int64_t c = 0; c < 4; ++c)
        if (before.at({0, c}) != after.at({0, c})) pos0_changed = true;
    CHECK(pos0_changed);
}

TEST_CASE("empty encoder output is a contract error") {
    auto cfg = cf_config();
    ParamRegistry reg(cfg.seed);
    CFormer cf(reg, cfg);
    auto q = Tensor::zeros({2, 4});
    CHECK_THROWS_AS(cf.compress(Tensor::zeros({0, 4}), q), ContractError);
}
