#pragma once

#include <cstdint>
#include <vector>

#include "alm/frontend.hpp"
#include "alm/graph.hpp"
#include "alm/rng.hpp"

namespace alm {

struct QFormerConfig {
    std::int64_t window_size = 17;  // L
    std::int64_t num_queries = 1;   // N
    int num_blocks = 2;
    std::int64_t model_dim = 16;
    int num_heads = 4;
    std::int64_t input_dim = kSpeechDim + kAudioDim;
    std::int64_t output_dim = 64;  // LM embedding width
    bool mask_padding = false;      // default: paper-literal zero padding, no mask
    bool window_pos_embed = false;  // default: frames attend position-free

    void validate() const;
};

struct QFormerBlock {
    // self-attention over queries (no causal mask)
    Parameter sa_wq, sa_wk, sa_wv, sa_wo;  // [dm x dm]
    Parameter ln1_g, ln1_b;
    // cross-attention from queries to window frames
    Parameter ca_wq, ca_wo;  // [dm x dm]
    Parameter ca_wk, ca_wv;  // [dm x input_dim]
    Parameter ln2_g, ln2_b;
    // feed-forward
    Parameter ff_w1, ff_b1;  // [4*dm x dm], [1 x 4*dm]
    Parameter ff_w2, ff_b2;  // [dm x 4*dm], [1 x dm]
    Parameter ln3_g, ln3_b;
};

struct QFormerParams {
    QFormerConfig cfg;
    Parameter queries;  // [N x dm], shared across all windows
    std::vector<QFormerBlock> blocks;
    Parameter out_w;    // [output_dim x dm]
    Parameter out_b;    // [1 x output_dim]
    Parameter win_pos;  // [L x input_dim], used only when window_pos_embed

    void init(const QFormerConfig& config, std::uint64_t seed);
    std::vector<Parameter*> parameters();  // trainable set
    std::int64_t num_params() const;
};

struct Window {
    Tensor frames;           // [L x d], zero-padded
    std::int64_t pad_count;  // zero frames appended
    std::int64_t start;      // first source frame
    std::int64_t length;     // source frames covered (L - pad_count)
};

// ceil(T/L) windows; the last one zero-padded to length L.
std::vector<Window> segment(const FeatureSequence& z, std::int64_t window_size);

struct AuditoryTokens {
    Tensor tokens;  // [(ceil(T/L)*N) x output_dim]
    std::int64_t windows = 0;
    std::vector<Window> spans;  // per-window source metadata (frames omitted)
};

// Graph-building forward; gradient flows into the Q-Former parameters and out
// through the returned Var.
Var qformer_forward(Graph& g, const FeatureSequence& z, QFormerParams& p);

// Value-only convenience wrapper.
AuditoryTokens qformer_apply(const FeatureSequence& z, QFormerParams& p);

}  // namespace alm
