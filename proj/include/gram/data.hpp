#pragma once

#include <string>
#include <vector>

#include "gram/encoder.hpp"
#include "gram/model.hpp"
#include "gram/tasks.hpp"

namespace gram {

struct DocQuestion {
    std::string qid;
    std::string text;
    std::vector<std::string> answers;
};

// Word-level page text with layout; tokenization happens against a model's
// vocabulary when records are turned into examples.
struct DocPageText {
    int page_index = 0;
    std::vector<std::string> words;
    std::vector<std::array<int, 4>> boxes;
    std::vector<std::vector<double>> visual_feats;
};

struct DocumentRecord {
    std::string doc_id;
    std::vector<DocPageText> pages;
    std::vector<DocQuestion> questions;
};

// Line-delimited JSON documents. Parse and validation errors carry path:line.
std::vector<DocumentRecord> read_documents(const std::string& path);
void write_documents(const std::string& path, const std::vector<DocumentRecord>& docs);

DocumentRecord to_record(const SyntheticDoc& doc, const std::string& doc_id);

PageInput tokenize_page(const DocPageText& page, int vocab_size);
std::vector<PageInput> tokenize_pages(const DocumentRecord& rec, int vocab_size);

// Flattens records into (example, gold answers, page count) rows for training
// and evaluation.
struct EvalItem {
    QaExample example;
    std::vector<std::string> gold;
    int page_count = 0;
};
std::vector<EvalItem> to_eval_items(const std::vector<DocumentRecord>& docs, int vocab_size);

}  // namespace gram
