#pragma once

#include <string>
#include <vector>

#include "gram/attention.hpp"
#include "gram/config.hpp"
#include "gram/params.hpp"

namespace gram {

// Compression transformer: N_c learnable tokens concatenated with the
// question run through blocks of bidirectional self-attention,
// cross-attention over the full encoder output, and feed-forward; only the
// first N_c output positions go on to the decoder, so the decoder memory
// length is fixed regardless of document size.
class CFormer {
public:
    CFormer() = default;
    CFormer(ParamRegistry& reg, const GramConfig& cfg);

    // enc_out [L_enc, d], q_emb [N_q, d] -> [N_c, d]
    Tensor compress(const Tensor& enc_out, const Tensor& q_emb) const;

private:
    GramConfig cfg_;
    RelPosSpec rel_spec_;
    Tensor tokens_;  // [N_c, d]
    Tensor rel_;
    struct Layer {
        MultiHeadAttention self_attn;
        MultiHeadAttention cross_attn;
        FeedForward ffn;
        Tensor norm1_w, norm2_w, norm3_w;
    };
    std::vector<Layer> layers_;
    Tensor final_norm_;
};

}  // namespace gram
