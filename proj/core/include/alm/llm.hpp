#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "alm/graph.hpp"
#include "alm/qformer.hpp"
#include "alm/rng.hpp"

namespace alm {

// ---- tokenizer ---------------------------------------------------------------
// Fixed char-level vocabulary: id 0 is '\n' (also end-of-sequence), ids 1..95
// are ASCII 32..126.

namespace tok {
inline constexpr int kVocabSize = 96;
inline constexpr int kEos = 0;

int encode_char(char c);  // throws DataError on out-of-set chars
std::vector<int> encode(const std::string& text);
std::string decode(const std::vector<int>& ids);
}  // namespace tok

// ---- backbone -----------------------------------------------------------------

struct BackboneConfig {
    std::int64_t vocab_size = tok::kVocabSize;
    std::int64_t embed_dim = 64;
    int num_layers = 4;
    int num_heads = 4;
    std::int64_t ffn_dim = 512;
    std::int64_t max_context = 512;

    void validate() const;
};

struct DecoderLayer {
    Parameter ln1_g, ln1_b;
    Parameter wq, wk, wv, wo;  // [d x d]
    Parameter ln2_g, ln2_b;
    Parameter ff_w1, ff_b1;  // [ffn x d], [1 x ffn]
    Parameter ff_w2, ff_b2;  // [d x ffn], [1 x d]
};

struct BackboneParams {
    BackboneConfig cfg;
    Parameter tok_embed;  // [V x d]
    Parameter pos_embed;  // [max_context x d]
    std::vector<DecoderLayer> layers;
    Parameter lnf_g, lnf_b;
    Parameter head_w;  // [V x d]

    void init(const BackboneConfig& config, std::uint64_t seed);
    void set_trainable(bool trainable);
    std::vector<Parameter*> parameters();
    std::int64_t num_params() const;
    std::uint64_t digest() const;
};

// ---- LoRA ----------------------------------------------------------------------

struct LoraConfig {
    int rank = 8;
    double alpha = 4.0;

    void validate() const;
};

struct LoraAdaptor {
    Parameter a;  // [r x d_in]
    Parameter b;  // [d_out x r], zero-init
    int rank = 0;
    double alpha = 0.0;
};

// One adaptor pair (query, value) per decoder layer.
struct LoraSet {
    LoraConfig cfg;
    std::vector<LoraAdaptor> q_adaptors;
    std::vector<LoraAdaptor> v_adaptors;

    void init(const BackboneConfig& bb, const LoraConfig& config, std::uint64_t seed);
    std::vector<Parameter*> parameters();
    std::int64_t num_params() const;
};

// y = x W0^T + s * (alpha/r) * (x A^T) B^T. `scale_mult` is the test-time
// discount multiplier s; 1.0 reproduces training behavior, 0.0 is the frozen
// backbone.
Var lora_project(Graph& g, Var x, Parameter& base_weight, LoraAdaptor* adaptor,
                 double scale_mult);

// ---- prompt --------------------------------------------------------------------
// Rendered layout: "USER: " + [auditory embeddings] + " " + instruction + "\n"
// + "ASSISTANT:"; the response target is " " + reference + "\n".

std::string prompt_pre_text();
std::string prompt_post_text(const std::string& instruction);
std::string response_target(const std::string& reference);

struct PromptInputs {
    std::string instruction;                     // may be empty (keeps the frame)
    const FeatureSequence* features = nullptr;   // auditory span via the Q-Former
    const Tensor* raw_span = nullptr;            // direct soft embeddings (pretraining)
};

// ---- full model ------------------------------------------------------------------

struct CrossModalModel {
    BackboneParams backbone;
    QFormerParams qformer;
    LoraSet lora;

    void init(const BackboneConfig& bb, const QFormerConfig& qf, const LoraConfig& lc,
              std::uint64_t seed);
    std::vector<Parameter*> trainable_parameters();  // Q-Former + LoRA
    std::uint64_t backbone_digest() const { return backbone.digest(); }
};

// (Q-Former + LoRA params) / total params; encoder codebook counted frozen.
double trainable_fraction(const CrossModalModel& model, std::int64_t frozen_extra = 0);

struct ForwardStats {
    std::int64_t total_tokens = 0;
    std::int64_t response_positions = 0;
    std::int64_t response_start = 0;  // index of first response token
};

// Logits over the full embedded sequence (prompt + response). When kv_capture
// is non-null, per-layer key/value activations are copied out for incremental
// decoding. `qformer` may be null only when inputs carry no features.
Var decoder_logits(Graph& g, BackboneParams& bb, QFormerParams* qformer, LoraSet* lora,
                   double scale_mult, const PromptInputs& inputs,
                   const std::vector<int>& response_tokens, ForwardStats* stats,
                   std::vector<Tensor>* k_capture = nullptr,
                   std::vector<Tensor>* v_capture = nullptr);

// Teacher-forced mean cross-entropy over the response positions (response
// must already include the trailing EOS).
Var decoder_loss(Graph& g, CrossModalModel& m, const PromptInputs& inputs,
                 const std::string& reference, double scale_mult,
                 ForwardStats* stats = nullptr);

// Per-response-token negative log-likelihoods, no-grad path.
std::vector<double> response_nlls(CrossModalModel& m, const PromptInputs& inputs,
                                  const std::string& reference, double scale_mult);

// Backbone-only loss used in text pre-training; optional raw span embeddings.
Var text_lm_loss(Graph& g, BackboneParams& bb, const PromptInputs& inputs,
                 const std::string& reference);

// ---- generation -------------------------------------------------------------------

struct GenerateOptions {
    int max_new_tokens = 200;
    double scale_mult = 1.0;
};

// Greedy decode, stops at EOS or budget; ties break toward the lowest token
// id. Returns the decoded text without the terminating EOS, trailing
// whitespace stripped.
std::string generate(CrossModalModel& m, const PromptInputs& inputs,
                     const GenerateOptions& opts);

// Exposed for equivalence tests: same decode, computed by full re-forwarding
// each step instead of incremental K/V reuse.
std::string generate_full_recompute(CrossModalModel& m, const PromptInputs& inputs,
                                    const GenerateOptions& opts);

}  // namespace alm
