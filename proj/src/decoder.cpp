#include "gram/decoder.hpp"

#include <cmath>

namespace gram {

DecoderLayer::DecoderLayer(ParamRegistry& reg, const std::string& prefix, const AttnConfig& cfg)
    : self_attn(reg, prefix + ".self", cfg),
      cross_attn(reg, prefix + ".cross", cfg),
      ffn(reg, prefix + ".ffn", cfg.d_model, cfg.d_ff) {
    norm1_w = reg.create(prefix + ".norm1", {cfg.d_model}, Init::Ones);
    norm2_w = reg.create(prefix + ".norm2", {cfg.d_model}, Init::Ones);
    norm3_w = reg.create(prefix + ".norm3", {cfg.d_model}, Init::Ones);
}

Tensor DecoderLayer::forward(const Tensor& x, const Tensor& memory, const BiasMatrix& self_bias,
                             const BiasMatrix& cross_bias) const {
    Tensor normed = rmsnorm(x, norm1_w);
    Tensor h = add(x, maybe_dropout(self_attn.forward(normed, normed, self_bias)));
    h = add(h, maybe_dropout(cross_attn.forward(rmsnorm(h, norm2_w), memory, cross_bias)));
    return add(h, maybe_dropout(ffn.forward(rmsnorm(h, norm3_w))));
}

Decoder::Decoder(ParamRegistry& reg, const GramConfig& cfg, Tensor word_table)
    : cfg_(cfg), word_(std::move(word_table)) {
    rel_spec_ = RelPosSpec{cfg.rel_buckets, cfg.rel_max_distance};
    rel_ = reg.create("decoder.rel_bias", {cfg.n_heads, cfg.rel_buckets}, Init::Normal002);
    const AttnConfig attn{cfg.d_model, cfg.n_heads, cfg.d_kv, cfg.d_ff};
    for (int j = 0; j < cfg.n_blocks; ++j)
        layers_.emplace_back(reg, "decoder.block" + std::to_string(j), attn);
    final_norm_ = reg.create("decoder.final_norm", {cfg.d_model}, Init::Ones);
}

Tensor Decoder::forward(const std::vector<int>& target, const Tensor& memory) const {
    if (target.empty() || target[0] != kBos)
        throw ContractError("decoder: target must begin with the start token");
    const int64_t t = static_cast<int64_t>(target.size());
    if (t > cfg_.max_answer_len)
        throw ContractError("decoder: target length " + std::to_string(t) +
                            " exceeds max answer length " + std::to_string(cfg_.max_answer_len));
    if (memory.rank() != 2 || memory.dim(1) != cfg_.d_model)
        throw ShapeError("decoder: memory must be [len, d_model], got " + shape_str(memory.shape()));

    std::vector<uint8_t> causal(static_cast<size_t>(t * t), 0);
    for (int64_t i = 0; i < t; ++i)
        for (int64_t j = 0; j <= i; ++j) causal[static_cast<size_t>(i * t + j)] = 1;
    BiasMatrix self_bias = masked_bias(relative_bias(t, t, rel_, rel_spec_), causal);
    BiasMatrix cross_bias = zero_bias(cfg_.n_heads, t, memory.dim(0));

    Tensor x = maybe_dropout(embedding(word_, target));
    for (const auto& layer : layers_) x = layer.forward(x, memory, self_bias, cross_bias);
    Tensor h = rmsnorm(x, final_norm_);
    // tied projection scaled by 1/d: unit-rms states against unit-variance
    // embedding rows give logit spread ~1/sqrt(d), so the uniform-prediction
    // baseline holds at init
    return scale(matmul(h, permute(word_, {1, 0})), 1.0 / double(cfg_.d_model));
}

std::vector<int> Decoder::greedy_generate(const Tensor& memory) const {
    NoGradGuard ng;
    std::vector<int> prefix = {kBos};
    std::vector<int> out;
    while (static_cast<int>(out.size()) < cfg_.max_answer_len &&
           static_cast<int>(prefix.size()) <= cfg_.max_answer_len) {
        Tensor logits = forward(prefix, memory);
        const int64_t v = logits.dim(1);
        const double* row = logits.data().data() + (logits.dim(0) - 1) * v;
        int best = 0;
        for (int64_t j = 1; j < v; ++j)
            if (row[j] > row[best]) best = static_cast<int>(j);
        if (best == kEos) break;
        out.push_back(best);
        if (static_cast<int>(prefix.size()) == cfg_.max_answer_len) break;
        prefix.push_back(best);
    }
    return out;
}

}  // namespace gram
