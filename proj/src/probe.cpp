#include "gram/probe.hpp"

#include "gram/tasks.hpp"
#include "gram/train.hpp"

namespace gram {

ProbeRunResult run_probe(const ProbeConfig& pc, uint64_t seed, bool with_doc) {
    GramConfig cfg = pc.model;
    cfg.architecture = Architecture::BottleneckProbe;
    cfg.ablate_doc_sublayers = !with_doc;
    cfg.seed = seed;
    GramModel model(cfg);

    auto to_examples = [](const std::vector<SyntheticDoc>& docs) {
        std::vector<QaExample> out;
        for (const auto& d : docs) out.push_back(to_example(d));
        return out;
    };
    const auto train_set = to_examples(make_dataset({TaskKind::CrossPageCount}, pc.train_instances,
                                                    pc.k_pages, pc.n_text, cfg.vocab_size,
                                                    pc.data_seed));
    const auto eval_set = to_examples(make_dataset({TaskKind::CrossPageCount}, pc.eval_instances,
                                                   pc.k_pages, pc.n_text, cfg.vocab_size,
                                                   pc.data_seed ^ 0x5eedULL));
    const std::vector<QaExample> probe_sample(
        train_set.begin(), train_set.begin() + std::min<size_t>(train_set.size(), pc.probe_sample));

    ProbeRunResult result;
    result.seed = seed;
    result.with_doc = with_doc;
    auto outcome = train_model(model, train_set, pc.train, [&](const StepRecord& rec) {
        result.steps_run = rec.step + 1;
        if ((rec.step + 1) % pc.check_every != 0) return false;
        return exact_match_accuracy(model, probe_sample) >= pc.stop_train_acc;
    });
    (void)outcome;
    result.train_acc = exact_match_accuracy(model, train_set);
    result.eval_acc = exact_match_accuracy(model, eval_set);
    return result;
}

}  // namespace gram
