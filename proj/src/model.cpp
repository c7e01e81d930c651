#include "gram/model.hpp"

namespace gram {

GramModel::GramModel(const GramConfig& cfg) : cfg_(cfg), reg_(cfg.seed) {
    cfg_.validate();
    encoder_ = std::make_unique<GlobalLocalEncoder>(reg_, cfg_);
    if (cfg_.cformer.enabled) cformer_ = std::make_unique<CFormer>(reg_, cfg_);
    decoder_ = std::make_unique<Decoder>(reg_, cfg_, encoder_->word_table());
}

std::vector<PageInput> GramModel::effective_pages(std::span<const PageInput> pages) const {
    if (cfg_.segment_length > 0) return segment_pages(pages, cfg_.segment_length);
    return {pages.begin(), pages.end()};
}

Tensor GramModel::memory(std::span<const PageInput> pages, const std::vector<int>& question,
                         bool training, WarningLog* warn) const {
    std::vector<PageInput> eff = effective_pages(pages);
    switch (cfg_.architecture) {
        case Architecture::Concat:
            return encoder_->encode_fused(eff, question, training, warn);
        case Architecture::Gram:
        case Architecture::PageIsolated: {
            auto [x, g] = encoder_->encode_document(eff, question, warn);
            return concat_encoder_output(x, g);
        }
        case Architecture::GramCFormer: {
            auto [x, g] = encoder_->encode_document(eff, question, warn);
            return cformer_->compress(concat_encoder_output(x, g),
                                      encoder_->question_embedding(question, warn));
        }
        case Architecture::BottleneckProbe: {
            auto [x, g] = encoder_->encode_document(eff, question, warn);
            if (g.empty())
                throw ContractError("bottleneck_probe: needs doc tokens (n_doc_tokens > 0)");
            return g[0];
        }
    }
    throw ContractError("memory: unknown architecture");
}

Tensor GramModel::logits(std::span<const PageInput> pages, const std::vector<int>& question,
                         const std::vector<int>& answer, bool training, WarningLog* warn) const {
    std::vector<int> target = {kBos};
    target.insert(target.end(), answer.begin(), answer.end());
    return decoder_->forward(target, memory(pages, question, training, warn));
}

Tensor GramModel::decode_logits(const std::vector<int>& target, const Tensor& memory) const {
    return decoder_->forward(target, memory);
}

Tensor GramModel::loss(const QaExample& ex, bool training, WarningLog* warn) const {
    if (static_cast<int>(ex.answer.size()) + 1 > cfg_.max_answer_len)
        throw ContractError("loss: answer of " + std::to_string(ex.answer.size()) +
                            " tokens exceeds max answer length " +
                            std::to_string(cfg_.max_answer_len));
    std::vector<int> targets = ex.answer;
    targets.push_back(kEos);
    return cross_entropy(logits(ex.pages, ex.question, ex.answer, training, warn), targets);
}

std::vector<int> GramModel::generate(std::span<const PageInput> pages,
                                     const std::vector<int>& question, WarningLog* warn) const {
    NoGradGuard ng;
    return decoder_->greedy_generate(memory(pages, question, false, warn));
}

}  // namespace gram
