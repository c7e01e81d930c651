#include "gram/encoder.hpp"

#include <cmath>

namespace gram {

Tensor sinusoidal_page_embedding(int page_index, int d) {
    std::vector<double> v(static_cast<size_t>(d));
    for (int t = 0; t < d; t += 2) {
        const double freq = std::pow(10000.0, -static_cast<double>(t) / d);
        v[static_cast<size_t>(t)] = std::sin(page_index * freq);
        if (t + 1 < d) v[static_cast<size_t>(t + 1)] = std::cos(page_index * freq);
    }
    return Tensor::from_data({d}, std::move(v));
}

std::vector<PageInput> segment_pages(std::span<const PageInput> pages, int segment_length) {
    if (segment_length <= 0) throw ContractError("segment_pages: segment length must be positive");
    std::vector<int> ids;
    std::vector<std::array<int, 4>> boxes;
    for (const auto& p : pages) {
        ids.insert(ids.end(), p.token_ids.begin(), p.token_ids.end());
        boxes.insert(boxes.end(), p.boxes.begin(), p.boxes.end());
    }
    std::vector<PageInput> chunks;
    for (size_t start = 0; start < ids.size(); start += static_cast<size_t>(segment_length)) {
        const size_t end = std::min(ids.size(), start + static_cast<size_t>(segment_length));
        PageInput chunk;
        chunk.token_ids.assign(ids.begin() + start, ids.begin() + end);
        chunk.boxes.assign(boxes.begin() + start, boxes.begin() + end);
        chunk.page_index = static_cast<int>(chunks.size());
        chunks.push_back(std::move(chunk));
    }
    if (chunks.empty()) {
        PageInput empty;
        empty.page_index = 0;
        chunks.push_back(std::move(empty));
    }
    return chunks;
}

Tensor concat_encoder_output(const std::vector<Tensor>& x, const std::vector<Tensor>& g) {
    std::vector<Tensor> parts;
    for (size_t i = 0; i < x.size(); ++i) {
        parts.push_back(x[i]);
        if (i < g.size() && g[i].defined() && g[i].dim(0) > 0) parts.push_back(g[i]);
    }
    return concat(parts, 0);
}

GlobalLocalEncoder::GlobalLocalEncoder(ParamRegistry& reg, const GramConfig& cfg) : cfg_(cfg) {
    rel_spec_ = RelPosSpec{cfg.rel_buckets, cfg.rel_max_distance};
    const int d = cfg.d_model;
    word_ = reg.create("embed.word", {cfg.vocab_size, d}, Init::Normal1);
    box_x0_ = reg.create("embed.box.x0", {kBoxBuckets, d}, Init::Normal1);
    box_y0_ = reg.create("embed.box.y0", {kBoxBuckets, d}, Init::Normal1);
    box_x1_ = reg.create("embed.box.x1", {kBoxBuckets, d}, Init::Normal1);
    box_y1_ = reg.create("embed.box.y1", {kBoxBuckets, d}, Init::Normal1);
    if (cfg.page_embedding == PageEmbeddingKind::Learned)
        page_table_ = reg.create("embed.page_table", {cfg.learned_page_table, d}, Init::Normal1);
    if (cfg.has_doc_tokens())
        doc_bank_ = reg.create("encoder.doc_bank", {cfg.n_doc_tokens, d}, Init::Uniform005);
    page_rel_ = reg.create("encoder.rel_bias", {cfg.n_heads, cfg.rel_buckets}, Init::Normal002);

    const AttnConfig page_attn{cfg.d_model, cfg.n_heads, cfg.d_kv, cfg.d_ff};
    const AttnConfig doc_attn{cfg.doc_d, cfg.doc_heads, cfg.doc_d_kv, cfg.doc_d_ff};
    for (int j = 0; j < cfg.n_blocks; ++j) {
        const std::string base = "encoder.block" + std::to_string(j);
        page_layers_.emplace_back(reg, base + ".page", page_attn);
        if (cfg.uses_doc_sublayers()) {
            DocSublayer ds;
            ds.proj_in = reg.create(base + ".doc.proj_in", {d, cfg.doc_d}, Init::XavierIn);
            // zero start: each doc sub-layer begins as the identity and opens up in training
            ds.proj_out = reg.create(base + ".doc.proj_out", {cfg.doc_d, d}, Init::Zeros);
            ds.layer = EncoderLayer(reg, base + ".doc", doc_attn);
            doc_layers_.push_back(std::move(ds));
        }
    }
}

Tensor GlobalLocalEncoder::page_pos_embedding(int page_index) const {
    switch (cfg_.page_embedding) {
        case PageEmbeddingKind::Sinusoidal:
            return sinusoidal_page_embedding(page_index, cfg_.d_model);
        case PageEmbeddingKind::Learned: {
            // table is finite; indices beyond it clamp to the last row
            const int idx = std::min(page_index, cfg_.learned_page_table - 1);
            return reshape(embedding(page_table_, {idx}), {cfg_.d_model});
        }
        case PageEmbeddingKind::Off:
            return Tensor();
    }
    return Tensor();
}

Tensor GlobalLocalEncoder::embed_text(const PageInput& page, WarningLog* warn, int text_cap) const {
    if (page.boxes.size() != page.token_ids.size())
        throw ContractError("page " + std::to_string(page.page_index) + ": " +
                            std::to_string(page.boxes.size()) + " boxes for " +
                            std::to_string(page.token_ids.size()) + " tokens");
    std::vector<int> ids = page.token_ids;
    if (static_cast<int>(ids.size()) > text_cap) {
        if (warn)
            warn->add("page " + std::to_string(page.page_index) + ": truncated " +
                      std::to_string(ids.size()) + " text tokens to " + std::to_string(text_cap));
        ids.resize(static_cast<size_t>(text_cap));
    }
    if (ids.empty()) return Tensor::zeros({0, cfg_.d_model});
    for (int id : ids)
        if (id < 0 || id >= cfg_.vocab_size)
            throw ContractError("page " + std::to_string(page.page_index) + ": token id " +
                                std::to_string(id) + " outside vocabulary of size " +
                                std::to_string(cfg_.vocab_size));
    std::vector<int> bx0, by0, bx1, by1;
    for (size_t t = 0; t < ids.size(); ++t) {
        const auto& b = page.boxes[t];
        for (int coord : b)
            if (coord < 0 || coord > 1000)
                throw ContractError("page " + std::to_string(page.page_index) +
                                    ": box coordinate " + std::to_string(coord) +
                                    " outside [0,1000]");
        bx0.push_back(b[0] * kBoxBuckets / 1001);
        by0.push_back(b[1] * kBoxBuckets / 1001);
        bx1.push_back(b[2] * kBoxBuckets / 1001);
        by1.push_back(b[3] * kBoxBuckets / 1001);
    }
    Tensor t = embedding(word_, ids);
    t = add(t, embedding(box_x0_, bx0));
    t = add(t, embedding(box_y0_, by0));
    t = add(t, embedding(box_x1_, bx1));
    t = add(t, embedding(box_y1_, by1));
    return t;
}

Tensor GlobalLocalEncoder::embed_visual(const PageInput& page, WarningLog* warn,
                                        int* n_visual_out) const {
    const int cap = cfg_.n_visual;
    int n = cap;  // absent features mean zero rows in every visual slot
    std::vector<double> flat;
    if (!page.visual_feats.empty()) {
        n = static_cast<int>(page.visual_feats.size());
        if (n > cap) {
            if (warn)
                warn->add("page " + std::to_string(page.page_index) + ": truncated " +
                          std::to_string(n) + " visual features to " + std::to_string(cap));
            n = cap;
        }
        for (int r = 0; r < n; ++r) {
            const auto& row = page.visual_feats[static_cast<size_t>(r)];
            if (static_cast<int>(row.size()) != cfg_.d_model)
                throw ContractError("page " + std::to_string(page.page_index) +
                                    ": visual feature width " + std::to_string(row.size()) +
                                    " does not match d_model " + std::to_string(cfg_.d_model));
            flat.insert(flat.end(), row.begin(), row.end());
        }
    } else {
        flat.assign(static_cast<size_t>(n) * cfg_.d_model, 0.0);
    }
    *n_visual_out = n;
    if (n == 0) return Tensor::zeros({0, cfg_.d_model});
    return Tensor::from_data({n, cfg_.d_model}, std::move(flat));
}

EncoderState GlobalLocalEncoder::embed_inputs(std::span<const PageInput> pages,
                                              const std::vector<int>& question,
                                              WarningLog* warn) const {
    if (pages.empty()) throw ContractError("embed_inputs: empty document");
    if (static_cast<int>(pages.size()) > cfg_.max_pages)
        throw ContractError("embed_inputs: " + std::to_string(pages.size()) +
                            " pages exceed max_pages " + std::to_string(cfg_.max_pages));
    std::vector<int> q = question;
    if (static_cast<int>(q.size()) > cfg_.n_question) {
        if (warn)
            warn->add("question truncated from " + std::to_string(q.size()) + " to " +
                      std::to_string(cfg_.n_question) + " tokens");
        q.resize(static_cast<size_t>(cfg_.n_question));
    }
    for (int id : q)
        if (id < 0 || id >= cfg_.vocab_size)
            throw ContractError("question token id " + std::to_string(id) +
                                " outside vocabulary of size " + std::to_string(cfg_.vocab_size));

    EncoderState state;
    for (const auto& page : pages) {
        Tensor t = embed_text(page, warn, cfg_.n_text);
        int n_vis = 0;
        Tensor v = embed_visual(page, warn, &n_vis);
        Tensor pos = page_pos_embedding(page.page_index);
        if (pos.defined()) {
            if (t.dim(0) > 0) t = add(t, pos);
            if (n_vis > 0) v = add(v, pos);
        }
        std::vector<Tensor> parts;
        if (t.dim(0) > 0) parts.push_back(t);
        if (n_vis > 0) parts.push_back(v);
        if (!q.empty()) parts.push_back(embedding(word_, q));
        if (parts.empty())
            throw ContractError("page " + std::to_string(page.page_index) +
                                ": empty page sequence (no text, visual, or question tokens)");
        Tensor x = maybe_dropout(parts.size() == 1 ? parts[0] : concat(parts, 0));

        TokenRoleMap roles;
        roles.insert(roles.end(), static_cast<size_t>(t.dim(0)), TokenRole::Text);
        roles.insert(roles.end(), static_cast<size_t>(n_vis), TokenRole::Visual);
        roles.insert(roles.end(), q.size(), TokenRole::Question);
        roles.insert(roles.end(), static_cast<size_t>(cfg_.has_doc_tokens() ? cfg_.n_doc_tokens : 0),
                     TokenRole::Doc);

        state.x.push_back(x);
        if (cfg_.has_doc_tokens()) state.g.push_back(doc_bank_);
        state.roles.push_back(std::move(roles));
    }
    state.block_index = 0;
    return state;
}

BiasMatrix GlobalLocalEncoder::page_bias(int64_t len, const TokenRoleMap& roles) const {
    BiasMatrix bias = relative_bias(len, len, page_rel_, rel_spec_);
    const bool any_doc =
        std::any_of(roles.begin(), roles.end(), [](TokenRole r) { return r == TokenRole::Doc; });
    if (any_doc && cfg_.bias_mode != BiasMode::None) {
        bias = zero_doc_pairs(bias, roles);
        bias = apply_doc_bias(bias, roles, cfg_.bias_c, cfg_.bias_mode,
                              cfg_.doc_bias_both_directions);
    }
    return bias;
}

void GlobalLocalEncoder::page_sublayer(EncoderState& state, int j) const {
    if (state.block_index != j)
        throw ContractError("page_sublayer: state is at block " + std::to_string(state.block_index) +
                            ", expected " + std::to_string(j));
    const EncoderLayer& layer = page_layers_.at(static_cast<size_t>(j));
    const bool with_doc = !state.g.empty();
    for (int i = 0; i < state.pages(); ++i) {
        Tensor seq = state.x[static_cast<size_t>(i)];
        const int64_t n_page = seq.dim(0);
        if (with_doc) {
            std::vector<Tensor> parts = {seq, state.g[static_cast<size_t>(i)]};
            seq = concat(parts, 0);
        }
        Tensor y = layer.forward(seq, page_bias(seq.dim(0), state.roles[static_cast<size_t>(i)]));
        if (with_doc) {
            state.x[static_cast<size_t>(i)] = slice(y, 0, 0, n_page);
            state.g[static_cast<size_t>(i)] = slice(y, 0, n_page, seq.dim(0));
        } else {
            state.x[static_cast<size_t>(i)] = y;
        }
    }
}

void GlobalLocalEncoder::doc_sublayer(EncoderState& state, int j) const {
    if (doc_layers_.empty()) return;
    const DocSublayer& ds = doc_layers_.at(static_cast<size_t>(j));
    const int k = state.pages();
    const int64_t ng = cfg_.n_doc_tokens;
    // gather in ascending page order (fixed order keeps runs reproducible)
    Tensor gall = k == 1 ? state.g[0] : concat(std::span<const Tensor>(state.g.data(), state.g.size()), 0);
    Tensor h = matmul(gall, ds.proj_in);
    h = ds.layer.forward(h, zero_bias(cfg_.doc_heads, h.dim(0), h.dim(0)));
    Tensor updated = add(gall, matmul(h, ds.proj_out));
    for (int i = 0; i < k; ++i)
        state.g[static_cast<size_t>(i)] = slice(updated, 0, i * ng, (i + 1) * ng);
}

std::pair<std::vector<Tensor>, std::vector<Tensor>> GlobalLocalEncoder::encode_document(
    std::span<const PageInput> pages, const std::vector<int>& question, WarningLog* warn) const {
    EncoderState state = embed_inputs(pages, question, warn);
    for (int j = 0; j < cfg_.n_blocks; ++j) {
        page_sublayer(state, j);
        if (cfg_.uses_doc_sublayers()) doc_sublayer(state, j);
        state.block_index = j + 1;
    }
    return {std::move(state.x), std::move(state.g)};
}

Tensor GlobalLocalEncoder::encode_fused(std::span<const PageInput> pages,
                                        const std::vector<int>& question, bool training_caps,
                                        WarningLog* warn) const {
    if (pages.empty()) throw ContractError("encode_fused: empty document");
    const int text_cap = std::min(
        cfg_.n_text, training_caps ? cfg_.concat_text_cap_train : cfg_.concat_text_cap_eval);
    std::vector<int> q = question;
    if (static_cast<int>(q.size()) > cfg_.n_question) {
        if (warn) warn->add("question truncated to " + std::to_string(cfg_.n_question) + " tokens");
        q.resize(static_cast<size_t>(cfg_.n_question));
    }
    std::vector<Tensor> parts;
    for (const auto& page : pages) {
        Tensor t = embed_text(page, warn, text_cap);
        int n_vis = 0;
        Tensor v = embed_visual(page, warn, &n_vis);
        Tensor pos = page_pos_embedding(page.page_index);
        if (pos.defined()) {
            if (t.dim(0) > 0) t = add(t, pos);
            if (n_vis > 0) v = add(v, pos);
        }
        if (t.dim(0) > 0) parts.push_back(t);
        if (n_vis > 0) parts.push_back(v);
    }
    if (!q.empty()) parts.push_back(embedding(word_, q));
    if (parts.empty()) throw ContractError("encode_fused: empty page sequence");
    Tensor x = maybe_dropout(parts.size() == 1 ? parts[0] : concat(parts, 0));
    const int64_t len = x.dim(0);
    for (int j = 0; j < cfg_.n_blocks; ++j)
        x = page_layers_[static_cast<size_t>(j)].forward(
            x, relative_bias(len, len, page_rel_, rel_spec_));
    return x;
}

Tensor GlobalLocalEncoder::question_embedding(const std::vector<int>& question,
                                              WarningLog* warn) const {
    std::vector<int> q = question;
    if (static_cast<int>(q.size()) > cfg_.n_question) {
        if (warn) warn->add("question truncated to " + std::to_string(cfg_.n_question) + " tokens");
        q.resize(static_cast<size_t>(cfg_.n_question));
    }
    if (q.empty()) throw ContractError("question_embedding: empty question");
    return embedding(word_, q);
}

}  // namespace gram
