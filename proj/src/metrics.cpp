#include "gram/metrics.hpp"

#include <algorithm>
#include <cctype>

#include "gram/common.hpp"

namespace gram {

size_t levenshtein(const std::string& a, const std::string& b) {
    const size_t n = a.size(), m = b.size();
    if (n == 0) return m;
    if (m == 0) return n;
    std::vector<size_t> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = j;
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= m; ++j) {
            const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

std::string normalize_answer(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    std::string out = s.substr(a, b - a);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

AnlsScore anls(const std::vector<std::string>& predictions,
               const std::vector<std::vector<std::string>>& golds, double threshold,
               std::vector<std::string>* warnings) {
    if (predictions.size() != golds.size())
        throw ContractError("anls: " + std::to_string(predictions.size()) + " predictions for " +
                            std::to_string(golds.size()) + " gold lists");
    AnlsScore score;
    for (size_t q = 0; q < predictions.size(); ++q) {
        if (golds[q].empty()) {
            if (warnings)
                warnings->push_back("question " + std::to_string(q) + " has no gold answers");
            score.per_question.push_back(0.0);
            continue;
        }
        const std::string pred = normalize_answer(predictions[q]);
        double best = 0.0;
        for (const auto& g : golds[q]) {
            const std::string gold = normalize_answer(g);
            const size_t denom = std::max(pred.size(), gold.size());
            const double nl =
                denom == 0 ? 0.0 : static_cast<double>(levenshtein(pred, gold)) / denom;
            if (nl < threshold) best = std::max(best, 1.0 - nl);
        }
        score.per_question.push_back(best);
    }
    if (!score.per_question.empty()) {
        double total = 0.0;
        for (double v : score.per_question) total += v;
        score.value = total / static_cast<double>(score.per_question.size());
    }
    return score;
}

double exact_match(const std::vector<std::string>& predictions,
                   const std::vector<std::vector<std::string>>& golds) {
    if (predictions.size() != golds.size())
        throw ContractError("exact_match: prediction/gold size mismatch");
    if (predictions.empty()) return 0.0;
    int hits = 0;
    for (size_t q = 0; q < predictions.size(); ++q) {
        const std::string pred = normalize_answer(predictions[q]);
        for (const auto& g : golds[q])
            if (pred == normalize_answer(g)) {
                ++hits;
                break;
            }
    }
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

}  // namespace gram
