#include "gram/eval.hpp"

#include <sstream>

#include "gram/tasks.hpp"

namespace gram {

const char* const kBucketNames[4] = {"1", "2-4", "5-10", "11+"};

int page_bucket_index(int pages) {
    if (pages <= 1) return 0;
    if (pages <= 4) return 1;
    if (pages <= 10) return 2;
    return 3;
}

EvalReport evaluate(const GramModel& model, const std::vector<EvalItem>& items) {
    EvalReport report;
    for (int b = 0; b < 4; ++b) report.buckets.push_back(BucketStat{kBucketNames[b]});
    report.all.name = "All";
    WarningLog warn;
    for (const auto& item : items) {
        const std::string pred =
            vocab::render(model.generate(item.example.pages, item.example.question, &warn));
        std::vector<std::string> anls_warn;
        const double score = anls({pred}, {item.gold}, 0.5, &anls_warn).value;
        const bool hit = exact_match({pred}, {item.gold}) == 1.0;
        BucketStat& bucket = report.buckets[static_cast<size_t>(page_bucket_index(item.page_count))];
        bucket.count += 1;
        bucket.anls_sum += score;
        bucket.exact_hits += hit ? 1 : 0;
        report.warning_count += anls_warn.size();
    }
    for (const auto& b : report.buckets) {
        report.all.count += b.count;
        report.all.anls_sum += b.anls_sum;
        report.all.exact_hits += b.exact_hits;
    }
    report.warning_count += warn.count();
    return report;
}

std::string eval_csv(const EvalReport& report) {
    std::ostringstream os;
    os << "bucket,count,anls,accuracy\n";
    auto row = [&os](const BucketStat& b) {
        os << b.name << ',' << b.count << ',' << b.anls() << ',' << b.accuracy() << "\n";
    };
    for (const auto& b : report.buckets) row(b);
    row(report.all);
    return os.str();
}

}  // namespace gram
