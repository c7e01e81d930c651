#include "gram/tasks.hpp"

#include <algorithm>

namespace gram {

std::string to_string(TaskKind k) {
    switch (k) {
        case TaskKind::SinglePageLookup: return "single_page_lookup";
        case TaskKind::CrossPageCount: return "cross_page_count";
        case TaskKind::CrossPageExists: return "cross_page_exists";
        case TaskKind::PageLocate: return "page_locate";
    }
    return "?";
}

TaskKind task_from_string(const std::string& s) {
    if (s == "single_page_lookup") return TaskKind::SinglePageLookup;
    if (s == "cross_page_count") return TaskKind::CrossPageCount;
    if (s == "cross_page_exists") return TaskKind::CrossPageExists;
    if (s == "page_locate") return TaskKind::PageLocate;
    throw ConfigError("task: unknown value '" + s + "'");
}

namespace vocab {

int number_token(int n) {
    if (n < 0 || n >= kNumCount)
        throw ContractError("number token out of range: " + std::to_string(n));
    return kNumBase + n;
}

std::string token_string(int id) {
    switch (id) {
        case kPad: return "<pad>";
        case kBos: return "<s>";
        case kEos: return "</s>";
        case kYes: return "yes";
        case kNo: return "no";
        case kLookup: return "lookup";
        case kCount: return "count";
        case kExists: return "exists";
        case kLocate: return "locate";
        default: break;
    }
    if (id >= kNumBase && id < kNumBase + kNumCount) return std::to_string(id - kNumBase);
    return "w" + std::to_string(id);
}

int token_from_string(const std::string& w, int vocab_size) {
    auto check = [&](int id) {
        if (id >= vocab_size)
            throw ContractError("token '" + w + "' maps to id " + std::to_string(id) +
                                " outside vocabulary of size " + std::to_string(vocab_size));
        return id;
    };
    if (w == "<pad>") return kPad;
    if (w == "<s>") return kBos;
    if (w == "</s>") return kEos;
    if (w == "yes") return check(kYes);
    if (w == "no") return check(kNo);
    if (w == "lookup") return check(kLookup);
    if (w == "count") return check(kCount);
    if (w == "exists") return check(kExists);
    if (w == "locate") return check(kLocate);
    if (!w.empty() && w[0] == 'w') {
        try {
            return check(std::stoi(w.substr(1)));
        } catch (const ContractError&) {
            throw;
        } catch (...) {
        }
    }
    try {
        size_t pos = 0;
        const int n = std::stoi(w, &pos);
        if (pos == w.size() && n >= 0 && n < kNumCount) return check(number_token(n));
    } catch (const ContractError&) {
        throw;
    } catch (...) {
    }
    throw ContractError("cannot tokenize word '" + w + "'");
}

std::string render(const std::vector<int>& ids) {
    std::string out;
    for (int id : ids) {
        if (id == kPad || id == kBos || id == kEos) continue;
        if (!out.empty()) out += ' ';
        out += token_string(id);
    }
    return out;
}

std::vector<int> parse(const std::string& text, int vocab_size) {
    std::vector<int> ids;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && text[i] == ' ') ++i;
        size_t j = i;
        while (j < text.size() && text[j] != ' ') ++j;
        if (j > i) ids.push_back(token_from_string(text.substr(i, j - i), vocab_size));
        i = j;
    }
    return ids;
}

}  // namespace vocab

namespace {

std::array<int, 4> raster_box(int position) {
    const int col = position % 8, row = position / 8;
    const int y = (row * 50) % 960;
    return {col * 125, y, col * 125 + 100, y + 40};
}

// filler words from the open word range, avoiding the planted specials
int draw_filler(Rng& rng, int vocab_size, const std::vector<int>& forbidden) {
    const int span = vocab_size - vocab::kWordBase;
    for (;;) {
        const int w = vocab::kWordBase + static_cast<int>(rng.next_below(static_cast<uint64_t>(span)));
        if (std::find(forbidden.begin(), forbidden.end(), w) == forbidden.end()) return w;
    }
}

PageInput filler_page(Rng& rng, int index, int n_text, int vocab_size,
                      const std::vector<int>& forbidden) {
    PageInput p;
    p.page_index = index;
    for (int t = 0; t < n_text; ++t) {
        p.token_ids.push_back(draw_filler(rng, vocab_size, forbidden));
        p.boxes.push_back(raster_box(t));
    }
    return p;
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ContractError("generate_task: " + msg);
}

}  // namespace

SyntheticDoc generate_task(TaskKind kind, int k_pages, int n_text, int vocab_size, uint64_t seed) {
    require(k_pages >= 1, "document needs at least one page");
    require(vocab_size >= vocab::kWordBase + 3,
            "vocabulary of " + std::to_string(vocab_size) + " leaves no word tokens (need >= " +
                std::to_string(vocab::kWordBase + 3) + ")");
    Rng rng(seed);
    SyntheticDoc doc;
    doc.task_kind = kind;

    switch (kind) {
        case TaskKind::SinglePageLookup: {
            require(n_text >= 2, "lookup needs page capacity for marker + answer");
            const int span = vocab_size - vocab::kWordBase;
            const int marker = vocab::kWordBase + static_cast<int>(rng.next_below(span));
            int succ = marker;
            while (succ == marker)
                succ = vocab::kWordBase + static_cast<int>(rng.next_below(span));
            const int page = static_cast<int>(rng.next_below(k_pages));
            for (int i = 0; i < k_pages; ++i)
                doc.pages.push_back(filler_page(rng, i, n_text, vocab_size, {marker}));
            const int pos = static_cast<int>(rng.next_below(n_text - 1));
            doc.pages[page].token_ids[pos] = marker;
            doc.pages[page].token_ids[pos + 1] = succ;
            doc.question = {vocab::kLookup, marker};
            doc.answer_ids = {succ};
            break;
        }
        case TaskKind::CrossPageCount: {
            require(n_text >= 1, "count needs nonzero page capacity");
            require(k_pages < vocab::kNumCount, "count answers limited to 0..32 pages");
            const int span = vocab_size - vocab::kWordBase;
            const int needle = vocab::kWordBase + static_cast<int>(rng.next_below(span));
            const int count = static_cast<int>(rng.next_below(k_pages + 1));
            std::vector<int> order(static_cast<size_t>(k_pages));
            for (int i = 0; i < k_pages; ++i) order[static_cast<size_t>(i)] = i;
            for (int i = k_pages - 1; i > 0; --i)
                std::swap(order[static_cast<size_t>(i)],
                          order[static_cast<size_t>(rng.next_below(i + 1))]);
            std::vector<bool> planted(static_cast<size_t>(k_pages), false);
            for (int i = 0; i < count; ++i) planted[static_cast<size_t>(order[static_cast<size_t>(i)])] = true;
            for (int i = 0; i < k_pages; ++i) {
                doc.pages.push_back(filler_page(rng, i, n_text, vocab_size, {needle}));
                if (planted[static_cast<size_t>(i)]) {
                    const int pos = static_cast<int>(rng.next_below(n_text));
                    doc.pages.back().token_ids[static_cast<size_t>(pos)] = needle;
                }
            }
            doc.question = {vocab::kCount, needle};
            doc.answer_ids = {vocab::number_token(count)};
            break;
        }
        case TaskKind::CrossPageExists: {
            require(n_text >= 1, "exists needs nonzero page capacity");
            const int span = vocab_size - vocab::kWordBase;
            const int needle = vocab::kWordBase + static_cast<int>(rng.next_below(span));
            const bool present = rng.next_below(2) == 1;
            std::vector<bool> planted(static_cast<size_t>(k_pages), false);
            if (present) {
                const int count = 1 + static_cast<int>(rng.next_below(k_pages));
                std::vector<int> order(static_cast<size_t>(k_pages));
                for (int i = 0; i < k_pages; ++i) order[static_cast<size_t>(i)] = i;
                for (int i = k_pages - 1; i > 0; --i)
                    std::swap(order[static_cast<size_t>(i)],
                              order[static_cast<size_t>(rng.next_below(i + 1))]);
                for (int i = 0; i < count; ++i)
                    planted[static_cast<size_t>(order[static_cast<size_t>(i)])] = true;
            }
            for (int i = 0; i < k_pages; ++i) {
                doc.pages.push_back(filler_page(rng, i, n_text, vocab_size, {needle}));
                if (planted[static_cast<size_t>(i)]) {
                    const int pos = static_cast<int>(rng.next_below(n_text));
                    doc.pages.back().token_ids[static_cast<size_t>(pos)] = needle;
                }
            }
            doc.question = {vocab::kExists, needle};
            doc.answer_ids = {present ? vocab::kYes : vocab::kNo};
            break;
        }
        case TaskKind::PageLocate: {
            require(n_text >= 1, "locate needs nonzero page capacity");
            require(k_pages <= vocab::kNumCount, "locate answers limited to pages 0..32");
            const int span = vocab_size - vocab::kWordBase;
            const int marker = vocab::kWordBase + static_cast<int>(rng.next_below(span));
            const int page = static_cast<int>(rng.next_below(k_pages));
            for (int i = 0; i < k_pages; ++i)
                doc.pages.push_back(filler_page(rng, i, n_text, vocab_size, {marker}));
            const int pos = static_cast<int>(rng.next_below(n_text));
            doc.pages[static_cast<size_t>(page)].token_ids[static_cast<size_t>(pos)] = marker;
            doc.question = {vocab::kLocate, marker};
            doc.answer_ids = {vocab::number_token(page)};
            break;
        }
    }
    doc.answers = {vocab::render(doc.answer_ids)};
    return doc;
}

std::vector<SyntheticDoc> make_dataset(const std::vector<TaskKind>& kinds, int n, int k_pages,
                                       int n_text, int vocab_size, uint64_t seed) {
    if (kinds.empty()) throw ContractError("make_dataset: no task kinds");
    std::vector<SyntheticDoc> out;
    for (int i = 0; i < n; ++i) {
        const TaskKind kind = kinds[static_cast<size_t>(i) % kinds.size()];
        const uint64_t s = hash_string(std::to_string(seed) + ":" + std::to_string(i));
        out.push_back(generate_task(kind, k_pages, n_text, vocab_size, s));
    }
    return out;
}

QaExample to_example(const SyntheticDoc& doc) {
    return QaExample{doc.pages, doc.question, doc.answer_ids};
}

}  // namespace gram
