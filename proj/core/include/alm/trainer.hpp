#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "alm/checkpoint.hpp"
#include "alm/llm.hpp"
#include "alm/world.hpp"

namespace alm {

// ---- optimizer -----------------------------------------------------------------

struct AdamWConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Decoupled-weight-decay adaptive moments over a fixed parameter set.
class AdamW {
public:
    AdamW(std::vector<Parameter*> params, AdamWConfig cfg);

    void zero_grad();
    void step();

    const std::vector<Parameter*>& params() const { return params_; }
    std::vector<Tensor>& moment_m() { return m_; }
    std::vector<Tensor>& moment_v() { return v_; }
    std::int64_t step_count() const { return t_; }
    void set_step_count(std::int64_t t) { t_ = t; }
    void set_lr(double lr) { cfg_.lr = lr; }
    void set_weight_decay(double wd) { cfg_.weight_decay = wd; }

private:
    std::vector<Parameter*> params_;
    AdamWConfig cfg_;
    std::vector<Tensor> m_, v_;
    std::int64_t t_ = 0;
};

// ---- stage configuration ----------------------------------------------------------

struct StageConfig {
    std::string stage;  // "stage1" | "stage2" | "stage3"
    int steps = 0;
    int batch_size = 1;
    double learning_rate = 3e-4;
    double weight_decay = 0.01;
    std::map<std::string, double> mixture;  // per-task sampling weights
    double datagen_scale = 0.0;             // alpha units; <= 0 selects by sweep
    int datagen_min_words = 50;
    std::uint64_t seed = 0;
};

struct StepLog {
    int step = 0;
    double loss = 0.0;
};

struct TrainResult {
    std::vector<StepLog> losses;
};

// One batched optimizer update; returns the mean loss.
struct TrainItem {
    const FeatureSequence* features = nullptr;  // null => text-only prompt
    std::string instruction;
    std::string reference;
};

double train_step(CrossModalModel& m, AdamW& opt, const std::vector<TrainItem>& batch,
                  double scale_mult = 1.0);

// ---- backbone text pre-training -----------------------------------------------------

struct BackbonePretrainConfig {
    int steps = 1000;
    int batch_size = 4;
    double learning_rate = 1e-3;
    double weight_decay = 0.01;
    std::size_t corpus_lines = 1600;
    std::uint64_t seed = 0;
};

// Trains the backbone on the templated text corpus (with simulated auditory
// spans), then freezes it.
std::vector<StepLog> pretrain_backbone(BackboneParams& bb,
                                       const BackbonePretrainConfig& cfg);

// ---- cross-modal stages ----------------------------------------------------------------

// Stage 1: strongly-aligned tasks only; rejects datasets carrying others.
TrainResult stage1_pretrain(CrossModalModel& m, AdamW& opt,
                            const std::vector<const WorldExample*>& dataset,
                            const StageConfig& cfg);

// Stage 2: weighted task mixture with per-step reseeding from (seed, step).
TrainResult stage2_instruction_tune(
    CrossModalModel& m, AdamW& opt,
    const std::map<std::string, std::vector<const WorldExample*>>& pools,
    const StageConfig& cfg);

// ---- activation data ------------------------------------------------------------------

struct ActivationStory {
    const WorldExample* clip = nullptr;
    std::string instruction;
    std::string text;
};

struct ActivationData {
    std::vector<ActivationStory> stories;
    int requested = 0;
    int usable = 0;
    double scale_alpha = 0.0;  // the discounted scaling factor actually used
};

// Greedy generations under a discounted scaling factor; keeps stories of at
// least min_words words. Fewer usable stories than requested is reported, not
// padded; zero usable is an error.
ActivationData generate_activation_data(CrossModalModel& m,
                                        const std::vector<WorldExample>& pool,
                                        double scale_alpha, int min_words, int want);

// Stage 3: one sample per step, full scale, per-step hook for checkpoints.
TrainResult stage3_activation_tune(CrossModalModel& m, AdamW& opt,
                                   const std::vector<TrainItem>& items,
                                   const StageConfig& cfg,
                                   const std::function<void(int)>& after_step = {});

// ---- activation ablations ------------------------------------------------------------

enum class ActivationVariant { story, qa_long, asr_long, story_text_based, story_lora_only };

std::string variant_name(ActivationVariant v);
ActivationVariant variant_from_name(const std::string& name);

// Builds the stage-3 item list for a variant; story variants consume the
// generated activation stories, the others draw on dedicated world splits.
std::vector<TrainItem> ablation_items(ActivationVariant v, const World& world,
                                      const ActivationData& act);

// ---- checkpoint glue --------------------------------------------------------------------

Checkpoint snapshot_trainables(CrossModalModel& m, AdamW* opt, const std::string& stage,
                               std::int64_t step, std::uint64_t config_hash,
                               const Rng& rng);
void restore_trainables(CrossModalModel& m, AdamW* opt, const Checkpoint& c, Rng* rng);

Checkpoint snapshot_backbone(BackboneParams& bb, std::uint64_t config_hash);
void restore_backbone(BackboneParams& bb, const Checkpoint& c);

}  // namespace alm
