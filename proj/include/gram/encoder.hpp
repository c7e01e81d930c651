#pragma once

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gram/attention.hpp"
#include "gram/config.hpp"
#include "gram/params.hpp"
#include "gram/tensor.hpp"

namespace gram {

constexpr int kBoxBuckets = 32;

// One page of input: token ids with [0,1000]-normalized boxes, optional
// visual feature rows (absent means the visual slots are zeros), page index.
struct PageInput {
    std::vector<int> token_ids;
    std::vector<std::array<int, 4>> boxes;  // x0,y0,x1,y1
    std::vector<std::vector<double>> visual_feats;
    int page_index = 0;
};

struct WarningLog {
    std::vector<std::string> items;
    void add(std::string msg) { items.push_back(std::move(msg)); }
    size_t count() const { return items.size(); }
};

// Per-page activations flowing through the interleaved blocks.
struct EncoderState {
    std::vector<Tensor> x;            // [N_page_i, d] per page
    std::vector<Tensor> g;            // [N_g, d] per page (empty when N_g == 0)
    std::vector<TokenRoleMap> roles;  // roles over [x_i ‖ g_i]
    int block_index = 0;

    int pages() const { return static_cast<int>(x.size()); }
};

Tensor sinusoidal_page_embedding(int page_index, int d);

// Re-chunks the document's token stream into fixed-length pseudo-pages
// (visual features are dropped; the stream is text-order).
std::vector<PageInput> segment_pages(std::span<const PageInput> pages, int segment_length);

// Page-major concatenation [x_0 ‖ g_0 ‖ x_1 ‖ g_1 ‖ ...] fed to the decoder.
Tensor concat_encoder_output(const std::vector<Tensor>& x, const std::vector<Tensor>& g);

// Interleaved global-local encoder: per block, a page sub-layer runs the
// shared encoder layer over [page tokens ‖ doc tokens] independently per
// page, then a doc sub-layer lets the gathered doc tokens exchange
// information across pages before routing them back.
class GlobalLocalEncoder {
public:
    GlobalLocalEncoder(ParamRegistry& reg, const GramConfig& cfg);

    EncoderState embed_inputs(std::span<const PageInput> pages, const std::vector<int>& question,
                              WarningLog* warn = nullptr) const;
    void page_sublayer(EncoderState& state, int j) const;
    void doc_sublayer(EncoderState& state, int j) const;

    // embed + M blocks + final norm; returns (X^M per page, G^M per page).
    std::pair<std::vector<Tensor>, std::vector<Tensor>> encode_document(
        std::span<const PageInput> pages, const std::vector<int>& question,
        WarningLog* warn = nullptr) const;

    // Baseline path: all pages fused into one sequence through the same
    // layers, one question copy at the end, no doc tokens.
    Tensor encode_fused(std::span<const PageInput> pages, const std::vector<int>& question,
                        bool training_caps, WarningLog* warn = nullptr) const;

    Tensor question_embedding(const std::vector<int>& question, WarningLog* warn = nullptr) const;
    BiasMatrix page_bias(int64_t len, const TokenRoleMap& roles) const;

    const GramConfig& config() const { return cfg_; }
    const Tensor& word_table() const { return word_; }

private:
    Tensor page_pos_embedding(int page_index) const;
    Tensor embed_text(const PageInput& page, WarningLog* warn, int text_cap) const;
    Tensor embed_visual(const PageInput& page, WarningLog* warn, int* n_visual_out) const;

    GramConfig cfg_;
    RelPosSpec rel_spec_;
    Tensor word_;  // [vocab, d], shared with the decoder
    Tensor box_x0_, box_y0_, box_x1_, box_y1_;
    Tensor page_table_;  // learned page embedding variant only
    Tensor doc_bank_;    // [N_g, d], replicated to every page
    Tensor page_rel_;    // [n_heads, rel_buckets], shared across page blocks
    std::vector<EncoderLayer> page_layers_;
    struct DocSublayer {
        Tensor proj_in;   // [d, doc_d]
        Tensor proj_out;  // [doc_d, d]
        EncoderLayer layer;
    };
    std::vector<DocSublayer> doc_layers_;

    friend class GramModel;
    friend struct EncoderTestAccess;
};

// Test hook: reach module internals without widening the public surface.
struct EncoderTestAccess {
    static Tensor& doc_bank(GlobalLocalEncoder& e) { return e.doc_bank_; }
    static std::vector<EncoderLayer>& page_layers(GlobalLocalEncoder& e) { return e.page_layers_; }
    static Tensor doc_proj_out(GlobalLocalEncoder& e, int j) { return e.doc_layers_.at(j).proj_out; }
    static size_t doc_layer_count(const GlobalLocalEncoder& e) { return e.doc_layers_.size(); }
};

}  // namespace gram
