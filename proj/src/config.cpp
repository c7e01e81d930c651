#include "gram/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace gram {

std::string to_string(Architecture a) {
    switch (a) {
        case Architecture::Gram: return "gram";
        case Architecture::GramCFormer: return "gram_cformer";
        case Architecture::Concat: return "concat";
        case Architecture::PageIsolated: return "page_isolated";
        case Architecture::BottleneckProbe: return "bottleneck_probe";
    }
    return "?";
}

std::string to_string(BiasMode m) {
    switch (m) {
        case BiasMode::None: return "none";
        case BiasMode::Constant: return "constant";
        case BiasMode::Decaying: return "decaying";
    }
    return "?";
}

std::string to_string(PageEmbeddingKind k) {
    switch (k) {
        case PageEmbeddingKind::Sinusoidal: return "sinusoidal";
        case PageEmbeddingKind::Learned: return "learned";
        case PageEmbeddingKind::Off: return "off";
    }
    return "?";
}

Architecture architecture_from_string(const std::string& s) {
    if (s == "gram") return Architecture::Gram;
    if (s == "gram_cformer") return Architecture::GramCFormer;
    if (s == "concat") return Architecture::Concat;
    if (s == "page_isolated") return Architecture::PageIsolated;
    if (s == "bottleneck_probe") return Architecture::BottleneckProbe;
    throw ConfigError("architecture: unknown value '" + s + "'");
}

BiasMode bias_mode_from_string(const std::string& s) {
    if (s == "none") return BiasMode::None;
    if (s == "constant") return BiasMode::Constant;
    if (s == "decaying") return BiasMode::Decaying;
    throw ConfigError("bias_mode: unknown value '" + s + "'");
}

PageEmbeddingKind page_embedding_from_string(const std::string& s) {
    if (s == "sinusoidal") return PageEmbeddingKind::Sinusoidal;
    if (s == "learned") return PageEmbeddingKind::Learned;
    if (s == "off") return PageEmbeddingKind::Off;
    throw ConfigError("page_embedding: unknown value '" + s + "'");
}

bool GramConfig::has_doc_tokens() const {
    return n_doc_tokens > 0 && architecture != Architecture::Concat;
}

bool GramConfig::uses_doc_sublayers() const {
    if (!has_doc_tokens() || ablate_doc_sublayers) return false;
    return architecture == Architecture::Gram || architecture == Architecture::GramCFormer ||
           architecture == Architecture::BottleneckProbe;
}

void GramConfig::validate() const {
    auto positive = [](int v, const char* field) {
        if (v <= 0) throw ConfigError(std::string(field) + ": must be positive, got " + std::to_string(v));
    };
    auto non_negative = [](int v, const char* field) {
        if (v < 0) throw ConfigError(std::string(field) + ": must be >= 0, got " + std::to_string(v));
    };
    positive(d_model, "d_model");
    non_negative(n_blocks, "n_blocks");
    positive(n_heads, "n_heads");
    positive(d_kv, "d_kv");
    positive(d_ff, "d_ff");
    non_negative(n_text, "n_text");
    non_negative(n_visual, "n_visual");
    positive(n_question, "n_question");
    non_negative(n_doc_tokens, "n_doc_tokens");
    positive(vocab_size, "vocab_size");
    positive(max_pages, "max_pages");
    positive(max_answer_len, "max_answer_len");
    non_negative(segment_length, "segment_length");
    positive(rel_buckets, "rel_buckets");
    positive(rel_max_distance, "rel_max_distance");
    non_negative(concat_text_cap_train, "concat_text_cap_train");
    non_negative(concat_text_cap_eval, "concat_text_cap_eval");
    if (rel_buckets % 4 != 0)
        throw ConfigError("rel_buckets: must be divisible by 4, got " + std::to_string(rel_buckets));
    if (n_doc_tokens == 0 && architecture != Architecture::Concat &&
        architecture != Architecture::PageIsolated)
        throw ConfigError("n_doc_tokens: 0 requires architecture concat or page_isolated, got " +
                          to_string(architecture));
    if (architecture == Architecture::GramCFormer && !cformer.enabled)
        throw ConfigError("cformer.enabled: architecture gram_cformer needs the compression stage on");
    if (cformer.enabled) {
        positive(cformer.n_c, "cformer.n_c");
        positive(cformer.n_layers, "cformer.n_layers");
        positive(cformer.n_heads, "cformer.n_heads");
        positive(cformer.d_kv, "cformer.d_kv");
        positive(cformer.d_ff, "cformer.d_ff");
    }
    if (uses_doc_sublayers() || has_doc_tokens()) {
        positive(doc_d, "doc_d");
        positive(doc_heads, "doc_heads");
        positive(doc_d_kv, "doc_d_kv");
        positive(doc_d_ff, "doc_d_ff");
    }
    if (page_embedding == PageEmbeddingKind::Learned) positive(learned_page_table, "learned_page_table");
}

void TrainConfig::validate() const {
    if (steps <= 0) throw ConfigError("steps: must be positive");
    if (warmup_steps < 0) throw ConfigError("warmup_steps: must be >= 0");
    if (batch_size <= 0) throw ConfigError("batch_size: must be positive");
    if (lr_base <= 0 || lr_new <= 0) throw ConfigError("lr: learning rates must be positive");
    if (dropout < 0 || dropout >= 1) throw ConfigError("dropout: must be in [0, 1)");
}

double TrainConfig::lr_factor(int t) const {
    if (warmup_steps > 0 && t < warmup_steps)
        return static_cast<double>(t + 1) / static_cast<double>(warmup_steps);
    if (steps <= warmup_steps) return 1.0;
    return static_cast<double>(steps - t) / static_cast<double>(steps - warmup_steps);
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            auto a = s.find_first_not_of(" \t");
            auto b = s.find_last_not_of(" \t");
            s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
        };
        trim(key);
        trim(val);
        kv[key] = val;
    }
    return kv;
}

namespace {

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return r;
    } catch (...) {
        throw ConfigError(key + ": expected integer, got '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return r;
    } catch (...) {
        throw ConfigError(key + ": expected number, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError(key + ": expected boolean, got '" + v + "'");
}

}  // namespace

void apply_one(GramConfig& cfg, TrainConfig& tc, const std::string& key, const std::string& v) {
    if (key == "d_model") cfg.d_model = to_int(key, v);
    else if (key == "n_blocks") cfg.n_blocks = to_int(key, v);
    else if (key == "n_heads") cfg.n_heads = to_int(key, v);
    else if (key == "d_kv") cfg.d_kv = to_int(key, v);
    else if (key == "d_ff") cfg.d_ff = to_int(key, v);
    else if (key == "doc_d") cfg.doc_d = to_int(key, v);
    else if (key == "doc_heads") cfg.doc_heads = to_int(key, v);
    else if (key == "doc_d_kv") cfg.doc_d_kv = to_int(key, v);
    else if (key == "doc_d_ff") cfg.doc_d_ff = to_int(key, v);
    else if (key == "n_text") cfg.n_text = to_int(key, v);
    else if (key == "n_visual") cfg.n_visual = to_int(key, v);
    else if (key == "n_question") cfg.n_question = to_int(key, v);
    else if (key == "n_doc_tokens") cfg.n_doc_tokens = to_int(key, v);
    else if (key == "bias_mode") cfg.bias_mode = bias_mode_from_string(v);
    else if (key == "bias_c") cfg.bias_c = to_double(key, v);
    else if (key == "doc_bias_both_directions") cfg.doc_bias_both_directions = to_bool(key, v);
    else if (key == "page_embedding") cfg.page_embedding = page_embedding_from_string(v);
    else if (key == "learned_page_table") cfg.learned_page_table = to_int(key, v);
    else if (key == "rel_buckets") cfg.rel_buckets = to_int(key, v);
    else if (key == "rel_max_distance") cfg.rel_max_distance = to_int(key, v);
    else if (key == "cformer.enabled") cfg.cformer.enabled = to_bool(key, v);
    else if (key == "cformer.n_c") cfg.cformer.n_c = to_int(key, v);
    else if (key == "cformer.n_layers") cfg.cformer.n_layers = to_int(key, v);
    else if (key == "cformer.n_heads") cfg.cformer.n_heads = to_int(key, v);
    else if (key == "cformer.d_kv") cfg.cformer.d_kv = to_int(key, v);
    else if (key == "cformer.d_ff") cfg.cformer.d_ff = to_int(key, v);
    else if (key == "architecture") cfg.architecture = architecture_from_string(v);
    else if (key == "ablate_doc_sublayers") cfg.ablate_doc_sublayers = to_bool(key, v);
    else if (key == "segment_length") cfg.segment_length = to_int(key, v);
    else if (key == "vocab_size") cfg.vocab_size = to_int(key, v);
    else if (key == "max_pages") cfg.max_pages = to_int(key, v);
    else if (key == "max_answer_len") cfg.max_answer_len = to_int(key, v);
    else if (key == "concat_text_cap_train") cfg.concat_text_cap_train = to_int(key, v);
    else if (key == "concat_text_cap_eval") cfg.concat_text_cap_eval = to_int(key, v);
    else if (key == "seed") cfg.seed = static_cast<uint64_t>(std::stoull(v));
    else if (key == "train.steps") tc.steps = to_int(key, v);
    else if (key == "train.warmup_steps") tc.warmup_steps = to_int(key, v);
    else if (key == "train.lr_base") tc.lr_base = to_double(key, v);
    else if (key == "train.lr_new") tc.lr_new = to_double(key, v);
    else if (key == "train.batch_size") tc.batch_size = to_int(key, v);
    else if (key == "train.adam_beta1") tc.adam_beta1 = to_double(key, v);
    else if (key == "train.adam_beta2") tc.adam_beta2 = to_double(key, v);
    else if (key == "train.adam_eps") tc.adam_eps = to_double(key, v);
    else if (key == "train.weight_decay") tc.weight_decay = to_double(key, v);
    else if (key == "train.dropout") tc.dropout = to_double(key, v);
    else throw ConfigError("unknown config key: " + key);
}

void apply_kv(GramConfig& cfg, TrainConfig& tc, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) apply_one(cfg, tc, k, v);
}

std::string to_kv(const GramConfig& c, const TrainConfig& t) {
    std::ostringstream os;
    os << "d_model=" << c.d_model << "\n"
       << "n_blocks=" << c.n_blocks << "\n"
       << "n_heads=" << c.n_heads << "\n"
       << "d_kv=" << c.d_kv << "\n"
       << "d_ff=" << c.d_ff << "\n"
       << "doc_d=" << c.doc_d << "\n"
       << "doc_heads=" << c.doc_heads << "\n"
       << "doc_d_kv=" << c.doc_d_kv << "\n"
       << "doc_d_ff=" << c.doc_d_ff << "\n"
       << "n_text=" << c.n_text << "\n"
       << "n_visual=" << c.n_visual << "\n"
       << "n_question=" << c.n_question << "\n"
       << "n_doc_tokens=" << c.n_doc_tokens << "\n"
       << "bias_mode=" << to_string(c.bias_mode) << "\n"
       << "bias_c=" << c.bias_c << "\n"
       << "doc_bias_both_directions=" << (c.doc_bias_both_directions ? "true" : "false") << "\n"
       << "page_embedding=" << to_string(c.page_embedding) << "\n"
       << "learned_page_table=" << c.learned_page_table << "\n"
       << "rel_buckets=" << c.rel_buckets << "\n"
       << "rel_max_distance=" << c.rel_max_distance << "\n"
       << "cformer.enabled=" << (c.cformer.enabled ? "true" : "false") << "\n"
       << "cformer.n_c=" << c.cformer.n_c << "\n"
       << "cformer.n_layers=" << c.cformer.n_layers << "\n"
       << "cformer.n_heads=" << c.cformer.n_heads << "\n"
       << "cformer.d_kv=" << c.cformer.d_kv << "\n"
       << "cformer.d_ff=" << c.cformer.d_ff << "\n"
       << "architecture=" << to_string(c.architecture) << "\n"
       << "ablate_doc_sublayers=" << (c.ablate_doc_sublayers ? "true" : "false") << "\n"
       << "segment_length=" << c.segment_length << "\n"
       << "vocab_size=" << c.vocab_size << "\n"
       << "max_pages=" << c.max_pages << "\n"
       << "max_answer_len=" << c.max_answer_len << "\n"
       << "concat_text_cap_train=" << c.concat_text_cap_train << "\n"
       << "concat_text_cap_eval=" << c.concat_text_cap_eval << "\n"
       << "seed=" << c.seed << "\n"
       << "train.steps=" << t.steps << "\n"
       << "train.warmup_steps=" << t.warmup_steps << "\n"
       << "train.lr_base=" << t.lr_base << "\n"
       << "train.lr_new=" << t.lr_new << "\n"
       << "train.batch_size=" << t.batch_size << "\n"
       << "train.adam_beta1=" << t.adam_beta1 << "\n"
       << "train.adam_beta2=" << t.adam_beta2 << "\n"
       << "train.adam_eps=" << t.adam_eps << "\n"
       << "train.weight_decay=" << t.weight_decay << "\n"
       << "train.dropout=" << t.dropout << "\n";
    return os.str();
}

}  // namespace gram
