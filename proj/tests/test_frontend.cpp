#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "alm/errors.hpp"
#include "alm/frontend.hpp"
#include "alm/world.hpp"
#include "oracles.hpp"

using namespace alm;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("alm_frontend_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}
}  // namespace

TEST_CASE("speech encode: zero-noise single symbol renders the template") {
    const Codebook cb = make_codebook(7);
    RawAudioSpec spec;
    spec.symbol_sequence = {0};  // 'a'
    spec.duration_frames = 4;
    const auto seq = synth_speech_encode(spec, cb, 1);
    CHECK(seq.num_frames() == 4);
    CHECK(seq.dim() == kSpeechDim);
    for (int t = 0; t < 4; ++t)
        for (int j = 0; j < kSpeechDim; ++j)
            CHECK(seq.frames.at(t, j) == cb.symbol_templates[0].data[j]);
}

TEST_CASE("speech encode: even split, earlier symbols take extra frames") {
    const Codebook cb = make_codebook(7);
    RawAudioSpec spec;
    spec.symbol_sequence = {0, 1};  // a, b
    spec.duration_frames = 4;
    const auto seq = synth_speech_encode(spec, cb, 1);
    for (int t = 0; t < 2; ++t)
        CHECK(seq.frames.at(t, 0) == cb.symbol_templates[0].data[0]);
    for (int t = 2; t < 4; ++t)
        CHECK(seq.frames.at(t, 0) == cb.symbol_templates[1].data[0]);

    const auto spans = symbol_spans(5, 2);
    CHECK(spans[0].second == 3);
    CHECK(spans[1].second == 2);
}

TEST_CASE("speech encode: rejects unknown symbols and bad durations") {
    const Codebook cb = make_codebook(7);
    RawAudioSpec spec;
    spec.symbol_sequence = {99};
    spec.duration_frames = 4;
    CHECK_THROWS_AS(synth_speech_encode(spec, cb, 1), DataError);
    spec.symbol_sequence = {0, 1, 2};
    spec.duration_frames = 2;
    CHECK_THROWS_AS(synth_speech_encode(spec, cb, 1), DataError);
}

TEST_CASE("speech decode: noisy nearest-template recovery over 1000 seeds") {
    const Codebook cb = make_codebook(7);
    int correct = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        Rng rng = Rng::stream(seed, "case");
        RawAudioSpec spec;
        const std::size_t n = 2 + rng.uniform_below(6);
        for (std::size_t i = 0; i < n; ++i)
            spec.symbol_sequence.push_back(static_cast<int>(rng.uniform_below(kNumSymbols)));
        spec.duration_frames = static_cast<std::int64_t>(n) * 8;
        spec.noise_std = 0.05;
        const auto seq = synth_speech_encode(spec, cb, seed);
        const auto decoded = decode_symbols_nearest(seq, cb, n);
        if (decoded == spec.symbol_sequence) ++correct;
    }
    CHECK(correct == 1000);
}

TEST_CASE("audio encode: empty set and single event") {
    const Codebook cb = make_codebook(7);
    RawAudioSpec spec;
    spec.duration_frames = 5;
    auto seq = synth_audio_encode(spec, cb, 1);
    for (double v : seq.frames.data) CHECK(v == 0.0);

    spec.event_tags = {event_id("dog")};
    seq = synth_audio_encode(spec, cb, 1);
    for (int t = 0; t < 5; ++t)
        for (int j = 0; j < kAudioDim; ++j)
            CHECK(seq.frames.at(t, j) ==
                  cb.event_templates[static_cast<std::size_t>(event_id("dog"))].data[j]);
}

TEST_CASE("audio decode: subset recovery by least-squares enumeration") {
    const Codebook cb = make_codebook(7);
    RawAudioSpec spec;
    spec.duration_frames = 6;
    spec.event_tags = {event_id("dog"), event_id("rain")};
    const auto seq = synth_audio_encode(spec, cb, 3);
    CHECK(decode_events_least_squares(seq, cb) == spec.event_tags);

    // noisy case
    spec.noise_std = 0.05;
    const auto noisy = synth_audio_encode(spec, cb, 3);
    CHECK(decode_events_least_squares(noisy, cb) == spec.event_tags);
}

TEST_CASE("fuse: shape arithmetic and zero-audio passthrough") {
    const Codebook cb = make_codebook(7);
    RawAudioSpec spec;
    spec.symbol_sequence = {0, 1, 2};
    spec.duration_frames = 3;
    const auto zs = synth_speech_encode(spec, cb, 1);
    const auto za = synth_audio_encode(spec, cb, 2);
    const auto fused = fuse(zs, za);
    CHECK(fused.num_frames() == 3);
    CHECK(fused.dim() == kSpeechDim + kAudioDim);
    for (int t = 0; t < 3; ++t)
        for (int j = 0; j < kSpeechDim; ++j) CHECK(fused.frames.at(t, j) == zs.frames.at(t, j));

    RawAudioSpec other = spec;
    other.duration_frames = 4;
    const auto za4 = synth_audio_encode(other, cb, 2);
    CHECK_THROWS_AS(fuse(zs, za4), DataError);
}

TEST_CASE("fuse: dimension sums over 100 random shapes, slice round-trip") {
    Rng rng(31);
    const Codebook cb = make_codebook(7);
    for (int trial = 0; trial < 100; ++trial) {
        RawAudioSpec spec;
        spec.duration_frames = 1 + static_cast<std::int64_t>(rng.uniform_below(60));
        const std::size_t n = rng.uniform_below(
            std::min<std::uint64_t>(6, static_cast<std::uint64_t>(spec.duration_frames)) + 1);
        for (std::size_t i = 0; i < n; ++i)
            spec.symbol_sequence.push_back(static_cast<int>(rng.uniform_below(kNumSymbols)));
        spec.event_tags.insert(static_cast<int>(rng.uniform_below(16)));
        const auto zs = synth_speech_encode(spec, cb, trial);
        const auto za = synth_audio_encode(spec, cb, trial + 1);
        const auto fused = fuse(zs, za);
        CHECK(fused.num_frames() == spec.duration_frames);
        CHECK(fused.dim() == zs.dim() + za.dim());
        // slicing back reproduces the streams bit-exactly
        for (std::int64_t t = 0; t < fused.num_frames(); ++t) {
            for (int j = 0; j < kSpeechDim; ++j)
                CHECK(fused.frames.at(t, j) == zs.frames.at(t, j));
            for (int j = 0; j < kAudioDim; ++j)
                CHECK(fused.frames.at(t, kSpeechDim + j) == za.frames.at(t, j));
        }
    }
}

TEST_CASE("encoders deterministic given (spec, seed)") {
    const Codebook cb = make_codebook(7);
    RawAudioSpec spec;
    spec.symbol_sequence = {3, 4};
    spec.duration_frames = 20;
    spec.noise_std = 0.1;
    const auto a = synth_speech_encode(spec, cb, 5);
    const auto b = synth_speech_encode(spec, cb, 5);
    CHECK(a.frames.data == b.frames.data);
    const auto c = synth_speech_encode(spec, cb, 6);
    CHECK(a.frames.data != c.frames.data);
}

TEST_CASE("feature files: round-trips and corruption errors") {
    const auto dir = temp_dir("io");
    const Codebook cb = make_codebook(7);

    RawAudioSpec tiny;
    tiny.duration_frames = 1;
    tiny.symbol_sequence = {0};
    auto seq = synth_speech_encode(tiny, cb, 1);
    seq.frames = Tensor({1, 1}, {0.5});
    const std::string p1 = (dir / "tiny.audf").string();
    save_features(seq, p1);
    auto loaded = load_features(p1);
    CHECK(loaded.frames.data == seq.frames.data);
    CHECK(loaded.source == seq.source);

    RawAudioSpec big;
    big.duration_frames = 1500;
    big.symbol_sequence = {0, 1, 2};
    big.noise_std = 0.25;
    auto bseq = synth_speech_encode(big, cb, 9);
    const std::string p2 = (dir / "big.audf").string();
    save_features(bseq, p2);
    auto bloaded = load_features(p2);
    // storage is f32: save-load-save-load must be the identity
    const std::string p3 = (dir / "big2.audf").string();
    save_features(bloaded, p3);
    auto bloaded2 = load_features(p3);
    CHECK(bloaded.frames.data == bloaded2.frames.data);

    // corrupt the magic
    {
        std::fstream f(p2, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.put('X');
    }
    try {
        load_features(p2);
        FAIL("expected magic-number error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("magic") != std::string::npos);
    }
}

TEST_CASE("feature files: truncation and overflow") {
    const auto dir = temp_dir("io2");
    FeatureSequence seq;
    seq.frames = Tensor({4, 3});
    const std::string p = (dir / "t.audf").string();
    save_features(seq, p);
    // truncate payload
    fs::resize_file(p, fs::file_size(p) - 5);
    CHECK_THROWS_AS(load_features(p), DataError);

    FeatureSequence zero;
    zero.frames = Tensor({0, 3});
    CHECK_THROWS_AS(save_features(zero, p), DataError);
}

TEST_CASE("make_world: quotas, rendering, word floors") {
    WorldConfig cfg;
    cfg.train = {4, 3, 2, 0};
    cfg.eval = {0, 0, 0, 2};
    cfg.probe = {0, 0, 0, 2};
    cfg.activation_pool = 2;
    cfg.asr_long_pool = 1;
    cfg.qa_long_pool = 1;
    cfg.noise_std = 0.0;
    const World w = make_world(cfg, 11);
    CHECK(w.splits.at("train").size() == 9);
    // story examples in eval/probe come with caption siblings over the same clip
    CHECK(w.splits.at("eval").size() == 4);
    CHECK(w.splits.at("probe").size() == 4);

    for (const auto& we : w.splits.at("train")) {
        if (we.ex.task == "transcribe") {
            CHECK(we.ex.reference == render_transcript(we.spec.symbol_sequence));
        } else if (we.ex.task == "caption") {
            CHECK(we.ex.reference == render_caption(we.spec.event_tags));
        }
        CHECK(!we.ex.instruction.empty());
    }
    for (const auto& we : w.splits.at("eval"))
        if (we.ex.task == "story") {
            CHECK(diversity(we.ex.reference) > 0);
            std::int64_t words = 0;
            bool in = false;
            for (char c : we.ex.reference) {
                if (c == ' ') in = false;
                else if (!in) { in = true; ++words; }
            }
            CHECK(words >= 50);
            CHECK(we.ex.reference.size() <= 192);
        }
    for (const auto& we : w.splits.at("asr_long"))
        CHECK(we.spec.symbol_sequence.size() >= 50);
    for (const auto& we : w.splits.at("qa_long")) {
        std::int64_t words = static_cast<std::int64_t>(
            oracle::split_ws(we.ex.reference).size());
        CHECK(words >= 50);
    }

    WorldConfig empty;
    empty.activation_pool = empty.asr_long_pool = empty.qa_long_pool = 0;
    CHECK_THROWS_AS(make_world(empty, 1), DataError);
}

TEST_CASE("make_world: deterministic and instruction variety") {
    WorldConfig cfg;
    cfg.train = {10, 10, 10, 0};
    cfg.eval = {0, 0, 0, 0};
    cfg.probe = {0, 0, 0, 0};
    cfg.activation_pool = 0;
    cfg.asr_long_pool = 0;
    cfg.qa_long_pool = 0;
    const World a = make_world(cfg, 5);
    const World b = make_world(cfg, 5);
    for (std::size_t i = 0; i < a.splits.at("train").size(); ++i) {
        CHECK(a.splits.at("train")[i].ex.reference == b.splits.at("train")[i].ex.reference);
        CHECK(a.splits.at("train")[i].fused.frames.data ==
              b.splits.at("train")[i].fused.frames.data);
    }
    for (const std::string task : {"transcribe", "caption", "qa", "story"})
        CHECK(instruction_pool(task).size() >= 5);
}

TEST_CASE("world io: jsonl round-trip") {
    WorldConfig cfg;
    cfg.train = {2, 1, 1, 0};
    cfg.eval = {1, 0, 0, 1};
    cfg.probe = {0, 0, 0, 0};
    cfg.activation_pool = 0;
    cfg.asr_long_pool = 0;
    cfg.qa_long_pool = 0;
    const World w = make_world(cfg, 3);
    const auto dir = temp_dir("world");
    write_world(w, dir.string(), 0xabcd);
    const auto train = load_split(dir.string(), "train");
    CHECK(train.size() == w.splits.at("train").size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        CHECK(train[i].id == w.splits.at("train")[i].ex.id);
        CHECK(train[i].reference == w.splits.at("train")[i].ex.reference);
        const auto feats = load_example_features(dir.string(), train[i]);
        CHECK(feats.num_frames() == w.splits.at("train")[i].fused.num_frames());
    }
}
