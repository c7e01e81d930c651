#include "gram/train.hpp"

#include <chrono>
#include <cmath>
#include <optional>

namespace gram {

bool is_new_path_param(const std::string& name) {
    if (name.rfind("cformer.", 0) == 0) return true;
    if (name == "encoder.doc_bank") return true;
    return name.find(".doc.") != std::string::npos;
}

AdamW::AdamW(ParamRegistry& reg, const TrainConfig& tc) : reg_(reg), tc_(tc) {
    for (const auto& [name, t] : reg.params()) {
        m_.emplace_back(static_cast<size_t>(t.size()), 0.0);
        v_.emplace_back(static_cast<size_t>(t.size()), 0.0);
        group_lr_.push_back(is_new_path_param(name) ? tc.lr_new : tc.lr_base);
    }
}

void AdamW::step(double lr_factor) {
    ++t_;
    const double bc1 = 1.0 - std::pow(tc_.adam_beta1, t_);
    const double bc2 = 1.0 - std::pow(tc_.adam_beta2, t_);
    auto& params = reg_.params();
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = const_cast<Tensor&>(params[pi].second);
        if (!p.has_grad()) continue;
        const double lr = group_lr_[pi] * lr_factor;
        const auto& g = p.grad();
        auto& data = p.data();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (size_t i = 0; i < data.size(); ++i) {
            m[i] = tc_.adam_beta1 * m[i] + (1.0 - tc_.adam_beta1) * g[i];
            v[i] = tc_.adam_beta2 * v[i] + (1.0 - tc_.adam_beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            data[i] -= lr * (mhat / (std::sqrt(vhat) + tc_.adam_eps) + tc_.weight_decay * data[i]);
        }
    }
}

TrainResult train_model(GramModel& model, const std::vector<QaExample>& dataset,
                        const TrainConfig& tc, const std::function<bool(const StepRecord&)>& on_step) {
    tc.validate();
    if (dataset.empty()) throw ContractError("train: empty dataset");
    AdamW opt(model.params(), tc);
    Rng batch_rng(model.config().seed ^ 0x7261696e5f726e67ULL);
    Rng dropout_rng(model.config().seed ^ 0x64726f706f757421ULL);
    TrainResult result;
    WarningLog warn;
    using Clock = std::chrono::steady_clock;

    for (int step = 0; step < tc.steps; ++step) {
        const auto t0 = Clock::now();
        model.params().zero_grads();
        Tensor total;
        {
            std::optional<DropoutGuard> guard;
            if (tc.dropout > 0.0) guard.emplace(tc.dropout, &dropout_rng);
            for (int b = 0; b < tc.batch_size; ++b) {
                const auto& ex = dataset[batch_rng.next_below(dataset.size())];
                Tensor l = model.loss(ex, true, &warn);
                total = b == 0 ? l : add(total, l);
            }
        }
        Tensor loss = scale(total, 1.0 / tc.batch_size);
        const double loss_v = loss.value();
        if (!std::isfinite(loss_v))
            throw TrainDivergence("training diverged: loss " + std::to_string(loss_v) +
                                  " at step " + std::to_string(step));
        loss.backward();
        const double factor = tc.lr_factor(step);
        opt.step(factor);
        const double wall =
            std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        StepRecord rec{step, loss_v, tc.lr_base * factor, wall};
        result.steps.push_back(rec);
        if (on_step && on_step(rec)) break;
    }
    result.warning_count = warn.count();
    return result;
}

double exact_match_accuracy(const GramModel& model, const std::vector<QaExample>& dataset) {
    if (dataset.empty()) return 0.0;
    int hits = 0;
    for (const auto& ex : dataset)
        if (model.generate(ex.pages, ex.question) == ex.answer) ++hits;
    return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

}  // namespace gram
