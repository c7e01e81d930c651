#pragma once

#include <string>
#include <vector>

namespace gram {

size_t levenshtein(const std::string& a, const std::string& b);

// trimmed and lowercased before comparison
std::string normalize_answer(const std::string& s);

struct AnlsScore {
    double value = 0.0;  // mean of per_question
    std::vector<double> per_question;
};

// Per question: max over gold answers of (1 - NL) when NL < threshold else 0,
// NL = edit distance / max(len(pred), len(gold)). A question with no gold
// answers scores 0 and records a warning.
AnlsScore anls(const std::vector<std::string>& predictions,
               const std::vector<std::vector<std::string>>& golds, double threshold = 0.5,
               std::vector<std::string>* warnings = nullptr);

double exact_match(const std::vector<std::string>& predictions,
                   const std::vector<std::vector<std::string>>& golds);

}  // namespace gram
