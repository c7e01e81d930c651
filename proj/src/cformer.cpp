#include "gram/cformer.hpp"

namespace gram {

CFormer::CFormer(ParamRegistry& reg, const GramConfig& cfg) : cfg_(cfg) {
    rel_spec_ = RelPosSpec{cfg.rel_buckets, cfg.rel_max_distance};
    const auto& cc = cfg.cformer;
    tokens_ = reg.create("cformer.tokens", {cc.n_c, cfg.d_model}, Init::Normal002);
    rel_ = reg.create("cformer.rel_bias", {cc.n_heads, cfg.rel_buckets}, Init::Normal002);
    const AttnConfig attn{cfg.d_model, cc.n_heads, cc.d_kv, cc.d_ff};
    for (int j = 0; j < cc.n_layers; ++j) {
        const std::string base = "cformer.block" + std::to_string(j);
        Layer l;
        l.self_attn = MultiHeadAttention(reg, base + ".self", attn);
        l.cross_attn = MultiHeadAttention(reg, base + ".cross", attn);
        l.ffn = FeedForward(reg, base + ".ffn", cfg.d_model, cc.d_ff);
        l.norm1_w = reg.create(base + ".norm1", {cfg.d_model}, Init::Ones);
        l.norm2_w = reg.create(base + ".norm2", {cfg.d_model}, Init::Ones);
        l.norm3_w = reg.create(base + ".norm3", {cfg.d_model}, Init::Ones);
        layers_.push_back(std::move(l));
    }
    final_norm_ = reg.create("cformer.final_norm", {cfg.d_model}, Init::Ones);
}

Tensor CFormer::compress(const Tensor& enc_out, const Tensor& q_emb) const {
    if (!cfg_.cformer.enabled) throw ContractError("compress: compression stage is disabled");
    if (enc_out.rank() != 2 || enc_out.dim(0) == 0)
        throw ContractError("compress: encoder output must be a non-empty [len, d] sequence");
    if (enc_out.dim(1) != cfg_.d_model || q_emb.dim(1) != cfg_.d_model)
        throw ShapeError("compress: width mismatch, memory " + shape_str(enc_out.shape()) +
                         " question " + shape_str(q_emb.shape()) + " vs d_model " +
                         std::to_string(cfg_.d_model));

    const int64_t n_c = cfg_.cformer.n_c;
    std::vector<Tensor> parts = {tokens_, q_emb};
    Tensor x = concat(parts, 0);  // [N_c + N_q, d]
    const int64_t len = x.dim(0);
    // bidirectional self-attention (encoder mask, not causal); cross-attention
    // carries no positional bias, the memory brings its own structure
    BiasMatrix self_bias = relative_bias(len, len, rel_, rel_spec_);
    BiasMatrix cross_bias = zero_bias(cfg_.cformer.n_heads, len, enc_out.dim(0));
    for (const auto& l : layers_) {
        Tensor normed = rmsnorm(x, l.norm1_w);
        x = add(x, maybe_dropout(l.self_attn.forward(normed, normed, self_bias)));
        x = add(x, maybe_dropout(l.cross_attn.forward(rmsnorm(x, l.norm2_w), enc_out, cross_bias)));
        x = add(x, maybe_dropout(l.ffn.forward(rmsnorm(x, l.norm3_w))));
    }
    return slice(rmsnorm(x, final_norm_), 0, 0, n_c);
}

}  // namespace gram
