#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "alm/frontend.hpp"
#include "alm/rng.hpp"

namespace alm {

// One supervised example: audio features, an instruction, and the reference
// response (plus the reference transcript of the spoken content, if any).
struct PromptedExample {
    std::string id;
    std::string task;  // transcribe | caption | qa | story
    std::string instruction;
    std::string reference;
    std::string transcript;  // empty when the clip has no speech
    std::string feature_path;
};

struct WorldExample {
    PromptedExample ex;
    RawAudioSpec spec;
    FeatureSequence fused;  // materialized features
};

struct TaskQuota {
    int transcribe = 0;
    int caption = 0;
    int qa = 0;
    int story = 0;
    int total() const { return transcribe + caption + qa + story; }
};

struct WorldConfig {
    TaskQuota train, eval, probe;
    int activation_pool = 24;  // caption-style clips used to write activation data
    int asr_long_pool = 16;    // transcription examples with >= 50-symbol content
    int qa_long_pool = 16;     // qa examples with expanded >= 50-word answers
    double noise_std = 0.05;
};

// Splits: train / eval / probe / activation / asr_long / qa_long. Story
// examples in eval+probe splits come with a sibling caption example over the
// same clip (same feature_path) so probes can score caption-style responses
// against story instructions.
struct World {
    std::map<std::string, std::vector<WorldExample>> splits;
    std::uint64_t seed = 0;
};

World make_world(const WorldConfig& config, std::uint64_t seed);

// Dataset directory layout: <dir>/world_<split>.jsonl + <dir>/features/*.audf
// + <dir>/world_manifest.json.
void write_world(const World& world, const std::string& dir, std::uint64_t config_hash);
std::vector<PromptedExample> load_split(const std::string& dir, const std::string& split);
FeatureSequence load_example_features(const std::string& dir, const PromptedExample& ex);

// ---- template language ------------------------------------------------------
// All generated text sticks to short words so a 50-word story fits the
// 200-token character budget of story-style decoding.

const std::vector<std::string>& instruction_pool(const std::string& task);

std::string render_transcript(const std::vector<int>& symbols);
std::string render_caption(const std::set<int>& events);

// >= 50 words, <= 192 chars, single line.
std::string make_story(const std::vector<std::string>& event_terms, Rng& rng);
// Two short sentences grounded in the clip's events and symbols.
std::string make_qa_answer(const std::set<int>& events, const std::vector<int>& symbols,
                           Rng& rng);
// Expand a short qa answer to >= 50 words with a deliberately low-diversity
// filler (the long-answer pool is meant to be less varied than stories).
std::string expand_qa_answer(const std::string& short_answer, Rng& rng);

// Text-only pretraining line for the backbone LM. span_len > 0 marks a
// simulated auditory span between "USER: " and the user text.
struct TextLine {
    std::string user_text;
    std::string response;
    int span_len = 0;
};

std::vector<TextLine> make_text_corpus(std::uint64_t seed, std::size_t lines);

}  // namespace alm
