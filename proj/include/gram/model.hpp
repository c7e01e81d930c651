#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "gram/cformer.hpp"
#include "gram/config.hpp"
#include "gram/decoder.hpp"
#include "gram/encoder.hpp"

namespace gram {

// One training/eval example: a document, a question, the gold answer tokens.
struct QaExample {
    std::vector<PageInput> pages;
    std::vector<int> question;
    std::vector<int> answer;  // content tokens, no kBos/kEos
};

// Full trainable architecture behind one switch: gram (full-memory decoder),
// gram_cformer (compressed memory), concat (single fused stack), page_isolated
// (doc sub-layers removed), bottleneck_probe (decoder sees only page 0's doc
// tokens).
class GramModel {
public:
    explicit GramModel(const GramConfig& cfg);

    const GramConfig& config() const { return cfg_; }
    ParamRegistry& params() { return reg_; }
    const ParamRegistry& params() const { return reg_; }
    GlobalLocalEncoder& encoder() { return *encoder_; }

    // Decoder memory for this document under the configured architecture.
    Tensor memory(std::span<const PageInput> pages, const std::vector<int>& question,
                  bool training, WarningLog* warn = nullptr) const;

    // Teacher-forced logits for decoder input [kBos, answer...].
    Tensor logits(std::span<const PageInput> pages, const std::vector<int>& question,
                  const std::vector<int>& answer, bool training, WarningLog* warn = nullptr) const;

    // Decoder pass against an already-computed memory.
    Tensor decode_logits(const std::vector<int>& target, const Tensor& memory) const;

    // Mean cross-entropy over the answer positions (targets [answer..., kEos]).
    Tensor loss(const QaExample& ex, bool training = true, WarningLog* warn = nullptr) const;

    std::vector<int> generate(std::span<const PageInput> pages, const std::vector<int>& question,
                              WarningLog* warn = nullptr) const;

private:
    std::vector<PageInput> effective_pages(std::span<const PageInput> pages) const;

    GramConfig cfg_;
    ParamRegistry reg_;
    std::unique_ptr<GlobalLocalEncoder> encoder_;
    std::unique_ptr<CFormer> cformer_;
    std::unique_ptr<Decoder> decoder_;
};

}  // namespace gram
