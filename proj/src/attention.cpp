#include "gram/attention.hpp"

#include <cmath>

namespace gram {

// ---- registry ----

Tensor ParamRegistry::create(const std::string& name, const Shape& shape, Init init) {
    if (index_.count(name)) throw ContractError("parameter name registered twice: " + name);
    Rng rng = named_rng(seed_, name);
    Tensor t;
    switch (init) {
        case Init::Zeros:
            t = Tensor::zeros(shape);
            break;
        case Init::Ones:
            t = Tensor::full(shape, 1.0);
            break;
        case Init::Normal002:
            t = Tensor::randn(shape, rng, 0.0, 0.02);
            break;
        case Init::Normal1:
            t = Tensor::randn(shape, rng, 0.0, 1.0);
            break;
        case Init::Uniform005:
            t = Tensor::uniform(shape, rng, -0.05, 0.05);
            break;
        case Init::XavierIn:
            // projection init scaled to width; fan-in is the leading dim
            t = Tensor::randn(shape, rng, 0.0, 1.0 / std::sqrt(static_cast<double>(shape[0])));
            break;
    }
    t.set_requires_grad(true);
    index_[name] = items_.size();
    items_.emplace_back(name, t);
    return t;
}

Tensor* ParamRegistry::find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &items_[it->second].second;
}

const Tensor* ParamRegistry::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &items_[it->second].second;
}

int64_t ParamRegistry::scalar_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : items_) n += t.size();
    return n;
}

int64_t ParamRegistry::scalar_count_matching(const std::string& prefix) const {
    int64_t n = 0;
    for (const auto& [name, t] : items_)
        if (name.rfind(prefix, 0) == 0) n += t.size();
    return n;
}

void ParamRegistry::zero_grads() {
    for (auto& [name, t] : items_) t.zero_grad();
}

// ---- relative position buckets ----

int relative_bucket(int64_t rel, const RelPosSpec& spec) {
    const int half = spec.n_buckets / 2;
    int bucket = 0;
    if (rel > 0) bucket += half;
    int64_t r = rel < 0 ? -rel : rel;
    const int max_exact = half / 2;
    if (r < max_exact) return bucket + static_cast<int>(r);
    const double frac = std::log(static_cast<double>(r) / max_exact) /
                        std::log(static_cast<double>(spec.max_distance) / max_exact);
    int large = max_exact + static_cast<int>(frac * (half - max_exact));
    if (large > half - 1) large = half - 1;
    return bucket + large;
}

std::vector<int> bucket_table(int64_t q_len, int64_t k_len, const RelPosSpec& spec) {
    std::vector<int> out(static_cast<size_t>(q_len * k_len));
    for (int64_t i = 0; i < q_len; ++i)
        for (int64_t j = 0; j < k_len; ++j)
            out[static_cast<size_t>(i * k_len + j)] = relative_bucket(j - i, spec);
    return out;
}

BiasMatrix relative_bias(int64_t q_len, int64_t k_len, const Tensor& params, const RelPosSpec& spec) {
    if (q_len <= 0 || k_len <= 0) throw ContractError("relative_bias: lengths must be positive");
    return {bias_from_buckets(params, bucket_table(q_len, k_len, spec), q_len, k_len)};
}

// ---- doc-token bias adaptation ----

double doc_bias_value(int head_index, double c) {
    if (head_index < 0) throw ContractError("doc_bias_value: head index must be >= 0");
    return c / std::exp2(static_cast<double>(head_index));
}

BiasMatrix apply_doc_bias(const BiasMatrix& bias, const TokenRoleMap& roles, double c,
                          BiasMode mode, bool both_directions) {
    if (mode == BiasMode::None) return bias;
    const Shape& s = bias.values.shape();
    const int64_t heads = s[0], q_len = s[1], k_len = s[2];
    if (static_cast<int64_t>(roles.size()) != k_len)
        throw ShapeError("apply_doc_bias: roles length " + std::to_string(roles.size()) +
                         " does not match bias key length " + std::to_string(k_len));
    if (both_directions && static_cast<int64_t>(roles.size()) != q_len)
        throw ShapeError("apply_doc_bias: both-directions mode needs roles to match query length");

    std::vector<double> keep(static_cast<size_t>(q_len * k_len), 1.0);
    std::vector<double> fill(static_cast<size_t>(heads * q_len * k_len), 0.0);
    auto head_value = [&](int64_t h) {
        return mode == BiasMode::Decaying ? doc_bias_value(static_cast<int>(h), c) : c;
    };
    for (int64_t j = 0; j < k_len; ++j) {
        if (roles[static_cast<size_t>(j)] != TokenRole::Doc) continue;
        for (int64_t i = 0; i < q_len; ++i) keep[static_cast<size_t>(i * k_len + j)] = 0.0;
        for (int64_t h = 0; h < heads; ++h) {
            const double v = head_value(h);
            for (int64_t i = 0; i < q_len; ++i)
                fill[static_cast<size_t>((h * q_len + i) * k_len + j)] = v;
        }
    }
    if (both_directions) {
        for (int64_t i = 0; i < q_len; ++i) {
            if (roles[static_cast<size_t>(i)] != TokenRole::Doc) continue;
            for (int64_t j = 0; j < k_len; ++j) keep[static_cast<size_t>(i * k_len + j)] = 0.0;
            for (int64_t h = 0; h < heads; ++h) {
                const double v = head_value(h);
                for (int64_t j = 0; j < k_len; ++j)
                    fill[static_cast<size_t>((h * q_len + i) * k_len + j)] = v;
            }
        }
    }
    Tensor keep_t = Tensor::from_data({q_len, k_len}, std::move(keep));
    Tensor fill_t = Tensor::from_data({heads, q_len, k_len}, std::move(fill));
    return {add(mul(bias.values, keep_t), fill_t)};
}

BiasMatrix zero_doc_pairs(const BiasMatrix& bias, const TokenRoleMap& roles) {
    const Shape& s = bias.values.shape();
    const int64_t q_len = s[1], k_len = s[2];
    if (static_cast<int64_t>(roles.size()) != k_len || q_len != k_len)
        throw ShapeError("zero_doc_pairs: expects square self-attention bias matching roles");
    std::vector<double> keep(static_cast<size_t>(q_len * k_len), 1.0);
    for (int64_t i = 0; i < q_len; ++i)
        for (int64_t j = 0; j < k_len; ++j)
            if (roles[static_cast<size_t>(i)] == TokenRole::Doc ||
                roles[static_cast<size_t>(j)] == TokenRole::Doc)
                keep[static_cast<size_t>(i * k_len + j)] = 0.0;
    return {mul(bias.values, Tensor::from_data({q_len, k_len}, std::move(keep)))};
}

BiasMatrix masked_bias(const BiasMatrix& bias, const std::vector<uint8_t>& allowed) {
    const Shape& s = bias.values.shape();
    const int64_t q_len = s[1], k_len = s[2];
    if (static_cast<int64_t>(allowed.size()) != q_len * k_len)
        throw ShapeError("masked_bias: mask size does not match bias plane");
    std::vector<double> keep(allowed.size());
    std::vector<double> sentinel(allowed.size());
    for (size_t i = 0; i < allowed.size(); ++i) {
        keep[i] = allowed[i] ? 1.0 : 0.0;
        sentinel[i] = allowed[i] ? 0.0 : kMaskSentinel;
    }
    Tensor keep_t = Tensor::from_data({q_len, k_len}, std::move(keep));
    Tensor sent_t = Tensor::from_data({q_len, k_len}, std::move(sentinel));
    return {add(mul(bias.values, keep_t), sent_t)};
}

BiasMatrix zero_bias(int n_heads, int64_t q_len, int64_t k_len) {
    return {Tensor::zeros({n_heads, q_len, k_len})};
}

// ---- modules ----

MultiHeadAttention::MultiHeadAttention(ParamRegistry& reg, const std::string& prefix,
                                       const AttnConfig& c)
    : cfg(c) {
    const int64_t d = cfg.d_model, inner = static_cast<int64_t>(cfg.n_heads) * cfg.d_kv;
    wq = reg.create(prefix + ".wq", {d, inner}, Init::XavierIn);
    wk = reg.create(prefix + ".wk", {d, inner}, Init::XavierIn);
    wv = reg.create(prefix + ".wv", {d, inner}, Init::XavierIn);
    wo = reg.create(prefix + ".wo", {inner, d}, Init::XavierIn);
}

Tensor MultiHeadAttention::forward(const Tensor& q_in, const Tensor& kv_in,
                                   const BiasMatrix& bias) const {
    const bool batched = q_in.rank() == 3;
    if (q_in.rank() != kv_in.rank() || (q_in.rank() != 2 && q_in.rank() != 3))
        throw ShapeError("attention: inputs must both be [L,d] or [b,L,d], got " +
                         shape_str(q_in.shape()) + " and " + shape_str(kv_in.shape()));
    const Tensor q3 = batched ? q_in : reshape(q_in, {1, q_in.dim(0), q_in.dim(1)});
    const Tensor kv3 = batched ? kv_in : reshape(kv_in, {1, kv_in.dim(0), kv_in.dim(1)});
    const int64_t b = q3.dim(0), lq = q3.dim(1), lk = kv3.dim(1);
    const int64_t heads = cfg.n_heads, dkv = cfg.d_kv;
    if (q3.dim(2) != cfg.d_model || kv3.dim(2) != cfg.d_model)
        throw ShapeError("attention: model width mismatch, input " + shape_str(q_in.shape()) +
                         " vs d_model " + std::to_string(cfg.d_model));
    if (bias.values.shape() != Shape{heads, lq, lk})
        throw ShapeError("attention: bias shape " + shape_str(bias.values.shape()) +
                         " does not match (heads, q_len, k_len) = " +
                         shape_str({heads, lq, lk}));

    auto split_heads = [&](const Tensor& x, int64_t l) {
        return permute(reshape(x, {b, l, heads, dkv}), {0, 2, 1, 3});  // [b,H,l,dkv]
    };
    Tensor q = split_heads(matmul(q3, wq), lq);
    Tensor k = split_heads(matmul(kv3, wk), lk);
    Tensor v = split_heads(matmul(kv3, wv), lk);

    Tensor scores = matmul(q, permute(k, {0, 1, 3, 2}));  // [b,H,Lq,Lk], unscaled
    Tensor probs = softmax(add(scores, bias.values), -1);
    if (capture_probs) last_probs = probs;
    probs = maybe_dropout(probs);
    Tensor ctx = reshape(permute(matmul(probs, v), {0, 2, 1, 3}), {b, lq, heads * dkv});
    Tensor out = matmul(ctx, wo);
    return batched ? out : reshape(out, {lq, cfg.d_model});
}

FeedForward::FeedForward(ParamRegistry& reg, const std::string& prefix, int d_model, int d_ff) {
    w1 = reg.create(prefix + ".w1", {d_model, d_ff}, Init::XavierIn);
    w2 = reg.create(prefix + ".w2", {d_ff, d_model}, Init::XavierIn);
}

Tensor FeedForward::forward(const Tensor& x) const { return matmul(relu(matmul(x, w1)), w2); }

EncoderLayer::EncoderLayer(ParamRegistry& reg, const std::string& prefix, const AttnConfig& cfg)
    : attn(reg, prefix + ".attn", cfg), ffn(reg, prefix + ".ffn", cfg.d_model, cfg.d_ff) {
    norm1_w = reg.create(prefix + ".norm1", {cfg.d_model}, Init::Ones);
    norm2_w = reg.create(prefix + ".norm2", {cfg.d_model}, Init::Ones);
}

Tensor EncoderLayer::forward(const Tensor& x, const BiasMatrix& bias) const {
    Tensor normed = rmsnorm(x, norm1_w);
    Tensor h = add(x, maybe_dropout(attn.forward(normed, normed, bias)));
    return add(h, maybe_dropout(ffn.forward(rmsnorm(h, norm2_w))));
}

}  // namespace gram
