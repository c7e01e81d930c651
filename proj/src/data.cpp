#include "gram/data.hpp"

#include <fstream>

#include <json.hpp>

namespace gram {

using nlohmann::json;

namespace {

json page_to_json(const DocPageText& page) {
    json tokens = json::array();
    for (size_t t = 0; t < page.words.size(); ++t) {
        const auto& b = page.boxes[t];
        tokens.push_back({{"text", page.words[t]}, {"box", {b[0], b[1], b[2], b[3]}}});
    }
    json p = {{"page_index", page.page_index}, {"tokens", std::move(tokens)}};
    if (!page.visual_feats.empty()) p["visual_feats"] = page.visual_feats;
    return p;
}

DocPageText page_from_json(const json& p, const std::string& where) {
    DocPageText page;
    page.page_index = p.at("page_index").get<int>();
    for (const auto& tok : p.at("tokens")) {
        page.words.push_back(tok.at("text").get<std::string>());
        const auto& box = tok.at("box");
        if (!box.is_array() || box.size() != 4)
            throw ContractError(where + ": token box must be [x0,y0,x1,y1]");
        std::array<int, 4> b{};
        for (int i = 0; i < 4; ++i) {
            b[static_cast<size_t>(i)] = box[static_cast<size_t>(i)].get<int>();
            if (b[static_cast<size_t>(i)] < 0 || b[static_cast<size_t>(i)] > 1000)
                throw ContractError(where + ": box coordinate " +
                                    std::to_string(b[static_cast<size_t>(i)]) +
                                    " outside [0,1000]");
        }
        page.boxes.push_back(b);
    }
    if (p.contains("visual_feats"))
        page.visual_feats = p.at("visual_feats").get<std::vector<std::vector<double>>>();
    return page;
}

}  // namespace

std::vector<DocumentRecord> read_documents(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("documents: cannot open " + path);
    std::vector<DocumentRecord> docs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ContractError(where + ": " + e.what());
        }
        try {
            DocumentRecord rec;
            rec.doc_id = j.at("doc_id").get<std::string>();
            for (const auto& p : j.at("pages")) rec.pages.push_back(page_from_json(p, where));
            for (size_t i = 0; i < rec.pages.size(); ++i)
                if (rec.pages[i].page_index != static_cast<int>(i))
                    throw ContractError(where + ": page_index must be contiguous from 0");
            for (const auto& q : j.at("questions")) {
                DocQuestion dq;
                dq.qid = q.at("qid").get<std::string>();
                dq.text = q.at("text").get<std::string>();
                dq.answers = q.at("answers").get<std::vector<std::string>>();
                rec.questions.push_back(std::move(dq));
            }
            docs.push_back(std::move(rec));
        } catch (const json::exception& e) {
            throw ContractError(where + ": " + e.what());
        }
    }
    return docs;
}

void write_documents(const std::string& path, const std::vector<DocumentRecord>& docs) {
    std::ofstream out(path);
    if (!out) throw ContractError("documents: cannot write " + path);
    for (const auto& rec : docs) {
        json j;
        j["doc_id"] = rec.doc_id;
        json pages = json::array();
        for (const auto& p : rec.pages) pages.push_back(page_to_json(p));
        j["pages"] = std::move(pages);
        json questions = json::array();
        for (const auto& q : rec.questions)
            questions.push_back({{"qid", q.qid}, {"text", q.text}, {"answers", q.answers}});
        j["questions"] = std::move(questions);
        out << j.dump() << "\n";
    }
}

DocumentRecord to_record(const SyntheticDoc& doc, const std::string& doc_id) {
    DocumentRecord rec;
    rec.doc_id = doc_id;
    for (const auto& page : doc.pages) {
        DocPageText p;
        p.page_index = page.page_index;
        for (int id : page.token_ids) p.words.push_back(vocab::token_string(id));
        p.boxes = page.boxes;
        p.visual_feats = page.visual_feats;
        rec.pages.push_back(std::move(p));
    }
    DocQuestion q;
    q.qid = "q0";
    q.text = vocab::render(doc.question);
    q.answers = doc.answers;
    rec.questions.push_back(std::move(q));
    return rec;
}

PageInput tokenize_page(const DocPageText& page, int vocab_size) {
    PageInput p;
    p.page_index = page.page_index;
    for (const auto& w : page.words) p.token_ids.push_back(vocab::token_from_string(w, vocab_size));
    p.boxes = page.boxes;
    p.visual_feats = page.visual_feats;
    return p;
}

std::vector<PageInput> tokenize_pages(const DocumentRecord& rec, int vocab_size) {
    std::vector<PageInput> pages;
    for (const auto& p : rec.pages) pages.push_back(tokenize_page(p, vocab_size));
    return pages;
}

std::vector<EvalItem> to_eval_items(const std::vector<DocumentRecord>& docs, int vocab_size) {
    std::vector<EvalItem> items;
    for (const auto& rec : docs) {
        auto pages = tokenize_pages(rec, vocab_size);
        for (const auto& q : rec.questions) {
            EvalItem item;
            item.example.pages = pages;
            item.example.question = vocab::parse(q.text, vocab_size);
            if (!q.answers.empty())
                item.example.answer = vocab::parse(q.answers.front(), vocab_size);
            item.gold = q.answers;
            item.page_count = static_cast<int>(rec.pages.size());
            items.push_back(std::move(item));
        }
    }
    return items;
}

}  // namespace gram
