#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gram/params.hpp"
#include "gram/tensor.hpp"

namespace gram {

// Forbidden attention entries carry this sentinel instead of -inf; exp
// underflows to exactly 0 at f64, so masked keys contribute nothing.
constexpr double kMaskSentinel = -1e9;

struct AttnConfig {
    int d_model = 0;
    int n_heads = 0;
    int d_kv = 0;
    int d_ff = 0;
};

enum class TokenRole : uint8_t { Text, Visual, Question, Doc, Compression };
using TokenRoleMap = std::vector<TokenRole>;

enum class BiasMode { None, Constant, Decaying };

// Additive pre-softmax attention logits, one plane per head.
struct BiasMatrix {
    Tensor values;  // [n_heads, q_len, k_len]
};

struct RelPosSpec {
    int n_buckets = 32;
    int max_distance = 128;
};

// Bidirectional bucket index for relative offset (key - query). Half the
// buckets cover each direction; close offsets get exact buckets, far ones
// share log-spaced buckets and everything beyond max_distance lands in the
// terminal bucket.
int relative_bucket(int64_t rel, const RelPosSpec& spec);

std::vector<int> bucket_table(int64_t q_len, int64_t k_len, const RelPosSpec& spec);

// bias[h,i,j] = params[h, bucket(j-i)]; params is a trainable [n_heads, n_buckets].
BiasMatrix relative_bias(int64_t q_len, int64_t k_len, const Tensor& params, const RelPosSpec& spec);

// Per-head doc-token bias: c / 2^head.
double doc_bias_value(int head_index, double c);

// Overwrites bias columns whose key position is a doc token with the per-head
// constant (Decaying) or with c on every head (Constant); None returns the
// input untouched. Page-token key columns are never modified. With
// both_directions set, rows whose query is a doc token are overwritten too.
BiasMatrix apply_doc_bias(const BiasMatrix& bias, const TokenRoleMap& roles, double c,
                          BiasMode mode, bool both_directions = false);

// Zeroes bias entries where the query or the key is a doc token. Used before
// the doc-bias overwrite: doc tokens carry no positional meaning.
BiasMatrix zero_doc_pairs(const BiasMatrix& bias, const TokenRoleMap& roles);

// Overwrites entries where allowed[i*k_len+j] == 0 with the mask sentinel.
BiasMatrix masked_bias(const BiasMatrix& bias, const std::vector<uint8_t>& allowed);

BiasMatrix zero_bias(int n_heads, int64_t q_len, int64_t k_len);

// Multi-head attention, T5 flavor: no 1/sqrt(d_kv) scaling, no projection
// biases. Self-attention is the q_in == kv_in case. Inputs are [L, d] or
// [b, L, d]; the bias plane is shared across the batch.
struct MultiHeadAttention {
    AttnConfig cfg;
    Tensor wq, wk, wv, wo;
    bool capture_probs = false;  // test hook
    mutable Tensor last_probs;

    MultiHeadAttention() = default;
    MultiHeadAttention(ParamRegistry& reg, const std::string& prefix, const AttnConfig& cfg);
    Tensor forward(const Tensor& q_in, const Tensor& kv_in, const BiasMatrix& bias) const;
};

struct FeedForward {
    Tensor w1, w2;  // [d, d_ff], [d_ff, d]

    FeedForward() = default;
    FeedForward(ParamRegistry& reg, const std::string& prefix, int d_model, int d_ff);
    Tensor forward(const Tensor& x) const;
};

// Pre-norm residual block: x + attn(rmsnorm(x)), then x + ffn(rmsnorm(x)).
struct EncoderLayer {
    MultiHeadAttention attn;
    FeedForward ffn;
    Tensor norm1_w, norm2_w;

    EncoderLayer() = default;
    EncoderLayer(ParamRegistry& reg, const std::string& prefix, const AttnConfig& cfg);
    Tensor forward(const Tensor& x, const BiasMatrix& bias) const;
};

}  // namespace gram
