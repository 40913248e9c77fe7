#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "alm/tensor.hpp"

namespace alm {

// ---- registry ---------------------------------------------------------------
// The synthetic "audio world": 26 speech symbols (letters) and a fixed set of
// 16 audio event types. Per-symbol / per-event template vectors come from a
// seeded codebook; the encoders render them into frame sequences.

inline constexpr int kNumSymbols = 26;
inline constexpr int kSpeechDim = 16;
inline constexpr int kAudioDim = 8;
inline constexpr int kFrameRateHz = 50;

const std::vector<std::string>& event_registry();  // 16 names, registry order
int event_id(const std::string& name);
std::string symbol_name(int id);  // "a".."z"

struct Codebook {
    std::vector<Tensor> symbol_templates;  // 26 x [1 x kSpeechDim]
    std::vector<Tensor> event_templates;   // 16 x [1 x kAudioDim]
};

// Deterministic in the seed; every run of the pipeline shares one codebook.
Codebook make_codebook(std::uint64_t seed);

// ---- raw specs & features ---------------------------------------------------

struct RawAudioSpec {
    std::vector<int> symbol_sequence;  // speech content, may be empty
    std::set<int> event_tags;          // non-speech events
    std::int64_t duration_frames = 0;  // T
    double noise_std = 0.0;

    void validate() const;
};

enum class FeatureSource : std::uint8_t { speech_enc = 0, audio_enc = 1, fused = 2 };

struct FeatureSequence {
    Tensor frames;  // [T x d]
    FeatureSource source = FeatureSource::speech_enc;
    int frame_rate_hz = kFrameRateHz;

    std::int64_t num_frames() const { return frames.rows(); }
    std::int64_t dim() const { return frames.cols(); }
};

// Even frame split: symbol i of n gets T/n frames, the first T%n symbols one
// extra, spans consecutive from the start.
std::vector<std::pair<std::int64_t, std::int64_t>> symbol_spans(std::int64_t total_frames,
                                                                std::size_t num_symbols);

FeatureSequence synth_speech_encode(const RawAudioSpec& spec, const Codebook& cb,
                                    std::uint64_t seed);
FeatureSequence synth_audio_encode(const RawAudioSpec& spec, const Codebook& cb,
                                   std::uint64_t seed);
FeatureSequence fuse(const FeatureSequence& speech, const FeatureSequence& audio);

// Template-matching decoders; exact on zero-noise renderings.
std::vector<int> decode_symbols_nearest(const FeatureSequence& speech, const Codebook& cb,
                                        std::size_t num_symbols);
std::set<int> decode_events_least_squares(const FeatureSequence& audio, const Codebook& cb,
                                          std::size_t max_events = 4);

// ---- feature file format ----------------------------------------------------
// Binary little-endian: magic "AUDF", version u32=1, T u32, d u32, source u8,
// then T*d float32 row-major.

void save_features(const FeatureSequence& seq, const std::string& path);
FeatureSequence load_features(const std::string& path);

}  // namespace alm
