#pragma once

#include <string>
#include <vector>

#include "gram/encoder.hpp"
#include "gram/model.hpp"
#include "gram/rng.hpp"

namespace gram {

enum class TaskKind { SinglePageLookup, CrossPageCount, CrossPageExists, PageLocate };

std::string to_string(TaskKind k);
TaskKind task_from_string(const std::string& s);

// Integer-token vocabulary with direct id<->string rendering; no subword
// tokenizer, so architecture effects are not confounded by tokenization.
namespace vocab {
constexpr int kYes = 3;
constexpr int kNo = 4;
constexpr int kLookup = 5;
constexpr int kCount = 6;
constexpr int kExists = 7;
constexpr int kLocate = 8;
constexpr int kNumBase = 9;
constexpr int kNumCount = 33;  // "0".."32"
constexpr int kWordBase = kNumBase + kNumCount;

int number_token(int n);
std::string token_string(int id);
int token_from_string(const std::string& word, int vocab_size);
std::string render(const std::vector<int>& ids);
std::vector<int> parse(const std::string& text, int vocab_size);
}  // namespace vocab

struct SyntheticDoc {
    std::vector<PageInput> pages;
    std::vector<int> question;
    std::vector<std::string> answers;  // gold strings
    std::vector<int> answer_ids;       // gold token sequence
    TaskKind task_kind = TaskKind::SinglePageLookup;
};

// Deterministic per seed. Questions: lookup = "what follows marker m",
// count = "on how many pages does t appear", exists = "does t appear
// anywhere", locate = "which page holds marker m". Raster-layout boxes.
SyntheticDoc generate_task(TaskKind kind, int k_pages, int n_text, int vocab_size, uint64_t seed);

std::vector<SyntheticDoc> make_dataset(const std::vector<TaskKind>& kinds, int n, int k_pages,
                                       int n_text, int vocab_size, uint64_t seed);

QaExample to_example(const SyntheticDoc& doc);

}  // namespace gram
