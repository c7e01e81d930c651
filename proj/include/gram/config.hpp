#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "gram/attention.hpp"

namespace gram {

enum class Architecture { Gram, GramCFormer, Concat, PageIsolated, BottleneckProbe };
enum class PageEmbeddingKind { Sinusoidal, Learned, Off };

std::string to_string(Architecture a);
std::string to_string(BiasMode m);
std::string to_string(PageEmbeddingKind k);
Architecture architecture_from_string(const std::string& s);
BiasMode bias_mode_from_string(const std::string& s);
PageEmbeddingKind page_embedding_from_string(const std::string& s);

struct CFormerConfig {
    bool enabled = false;
    int n_c = 256;      // compression output length
    int n_layers = 4;   // tiny profile
    int n_heads = 4;
    int d_kv = 64;
    int d_ff = 1024;
};

// Every architectural hyperparameter in one validated record. Defaults follow
// the base profile; desk-scale runs override via config file or flags.
struct GramConfig {
    // page stack + decoder dims
    int d_model = 256;
    int n_blocks = 12;  // M
    int n_heads = 4;
    int d_kv = 64;
    int d_ff = 1024;
    // doc sub-layer dims (own width, projected from/to d_model)
    int doc_d = 256;
    int doc_heads = 4;
    int doc_d_kv = 64;
    int doc_d_ff = 1024;
    // per-page sequence caps
    int n_text = 800;      // N_t
    int n_visual = 128;    // N_v
    int n_question = 32;   // N_q
    int n_doc_tokens = 32;  // N_g
    // bias adaptation
    BiasMode bias_mode = BiasMode::Decaying;
    double bias_c = 20.0;
    bool doc_bias_both_directions = false;
    // page embedding
    PageEmbeddingKind page_embedding = PageEmbeddingKind::Sinusoidal;
    int learned_page_table = 64;
    // relative position bias
    int rel_buckets = 32;
    int rel_max_distance = 128;

    CFormerConfig cformer;

    Architecture architecture = Architecture::Gram;
    bool ablate_doc_sublayers = false;
    int segment_length = 0;  // 0 = page division, >0 = fixed-length pseudo-pages

    int vocab_size = 512;
    int max_pages = 1024;
    int max_answer_len = 16;  // L, counted with the start token
    // concat baseline per-page text caps
    int concat_text_cap_train = 600;
    int concat_text_cap_eval = 400;

    uint64_t seed = 0;

    int page_seq_len() const { return n_text + n_visual + n_question; }  // N
    bool uses_doc_sublayers() const;
    bool has_doc_tokens() const;
    void validate() const;  // throws ConfigError naming the field
};

struct TrainConfig {
    int steps = 1000;
    int warmup_steps = 1000;
    double lr_base = 3e-5;  // pretrained-path group
    double lr_new = 1e-4;   // newly initialized path group
    int batch_size = 8;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    double dropout = 0.1;

    void validate() const;
    // shared warmup + linear-decay factor at step t (0-based)
    double lr_factor(int t) const;
};

// Flat key=value config file; '#' starts a comment. Unknown keys raise
// ConfigError naming the key.
std::map<std::string, std::string> read_kv_file(const std::string& path);
void apply_kv(GramConfig& cfg, TrainConfig& tc, const std::map<std::string, std::string>& kv);
void apply_one(GramConfig& cfg, TrainConfig& tc, const std::string& key, const std::string& value);
std::string to_kv(const GramConfig& cfg, const TrainConfig& tc);

}  // namespace gram
