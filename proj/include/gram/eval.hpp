#pragma once

#include <string>
#include <vector>

#include "gram/data.hpp"
#include "gram/metrics.hpp"
#include "gram/model.hpp"

namespace gram {

// Page-count buckets follow the reporting scheme 1, 2-4, 5-10, 11+.
int page_bucket_index(int pages);
extern const char* const kBucketNames[4];

struct BucketStat {
    std::string name;
    int count = 0;
    double anls_sum = 0.0;  // sums kept so "All" aggregates exactly
    int exact_hits = 0;

    double anls() const { return count == 0 ? 0.0 : anls_sum / count; }
    double accuracy() const { return count == 0 ? 0.0 : static_cast<double>(exact_hits) / count; }
};

struct EvalReport {
    std::vector<BucketStat> buckets;  // 4 page-count buckets
    BucketStat all;
    size_t warning_count = 0;
};

EvalReport evaluate(const GramModel& model, const std::vector<EvalItem>& items);

// CSV: bucket,count,anls,accuracy — one row per bucket plus All.
std::string eval_csv(const EvalReport& report);

}  // namespace gram
