#pragma once

#include <string>
#include <vector>

#include "gram/attention.hpp"
#include "gram/config.hpp"
#include "gram/params.hpp"

namespace gram {

// Reserved token ids shared by every vocabulary layout.
constexpr int kPad = 0;
constexpr int kBos = 1;
constexpr int kEos = 2;

struct DecoderLayer {
    MultiHeadAttention self_attn;
    MultiHeadAttention cross_attn;
    FeedForward ffn;
    Tensor norm1_w, norm2_w, norm3_w;

    DecoderLayer() = default;
    DecoderLayer(ParamRegistry& reg, const std::string& prefix, const AttnConfig& cfg);
    Tensor forward(const Tensor& x, const Tensor& memory, const BiasMatrix& self_bias,
                   const BiasMatrix& cross_bias) const;
};

// Autoregressive answer decoder: causal self-attention with relative bias,
// cross-attention over the encoder (or compressed) memory. Input embedding
// and output projection are tied to the shared word table; logits are scaled
// by 1/sqrt(d) so their magnitude stays sane as the table grows.
class Decoder {
public:
    Decoder() = default;
    Decoder(ParamRegistry& reg, const GramConfig& cfg, Tensor word_table);

    // Teacher-forced logits [target_len, vocab]; target starts with kBos and
    // holds at most max_answer_len positions.
    Tensor forward(const std::vector<int>& target, const Tensor& memory) const;

    // Iterative argmax decoding until kEos or the answer-length cap; returns
    // generated content tokens (no kBos/kEos). Deterministic; ties break to
    // the lowest token id.
    std::vector<int> greedy_generate(const Tensor& memory) const;

private:
    GramConfig cfg_;
    RelPosSpec rel_spec_;
    Tensor word_;  // shared with the encoder
    Tensor rel_;
    std::vector<DecoderLayer> layers_;
    Tensor final_norm_;
};

}  // namespace gram
