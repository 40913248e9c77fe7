#include "alm/frontend.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "alm/errors.hpp"
#include "alm/rng.hpp"

namespace alm {

const std::vector<std::string>& event_registry() {
    static const std::vector<std::string> kEvents = {
        "dog",  "cat",  "rain", "wind", "bell", "bird", "car",  "drum",
        "horn", "wave", "fire", "owl",  "bee",  "frog", "gull", "thud"};
    return kEvents;
}

int event_id(const std::string& name) {
    const auto& reg = event_registry();
    for (std::size_t i = 0; i < reg.size(); ++i)
        if (reg[i] == name) return static_cast<int>(i);
    throw DataError("unknown event name '" + name + "'");
}

std::string symbol_name(int id) {
    if (id < 0 || id >= kNumSymbols)
        throw DataError("unknown symbol id " + std::to_string(id));
    return std::string(1, static_cast<char>('a' + id));
}

Codebook make_codebook(std::uint64_t seed) {
    Codebook cb;
    Rng rs = Rng::stream(seed, "codebook/symbols");
    for (int s = 0; s < kNumSymbols; ++s) {
        Tensor t({1, kSpeechDim});
        for (double& v : t.data) v = rs.normal(0.0, 1.0);
        cb.symbol_templates.push_back(std::move(t));
    }
    Rng re = Rng::stream(seed, "codebook/events");
    for (std::size_t e = 0; e < event_registry().size(); ++e) {
        Tensor t({1, kAudioDim});
        for (double& v : t.data) v = re.normal(0.0, 1.0);
        cb.event_templates.push_back(std::move(t));
    }
    return cb;
}

void RawAudioSpec::validate() const {
    if (duration_frames < 1) throw DataError("audio spec: duration_frames must be >= 1");
    if (duration_frames < static_cast<std::int64_t>(symbol_sequence.size()))
        throw DataError("audio spec: duration_frames " + std::to_string(duration_frames) +
                        " shorter than symbol sequence length " +
                        std::to_string(symbol_sequence.size()));
    if (noise_std < 0.0) throw DataError("audio spec: negative noise_std");
    for (int s : symbol_sequence)
        if (s < 0 || s >= kNumSymbols)
            throw DataError("audio spec: unknown symbol id " + std::to_string(s));
    for (int e : event_tags)
        if (e < 0 || e >= static_cast<int>(event_registry().size()))
            throw DataError("audio spec: unknown event id " + std::to_string(e));
}

std::vector<std::pair<std::int64_t, std::int64_t>> symbol_spans(std::int64_t total_frames,
                                                                std::size_t num_symbols) {
    std::vector<std::pair<std::int64_t, std::int64_t>> spans;
    if (num_symbols == 0) return spans;
    const std::int64_t n = static_cast<std::int64_t>(num_symbols);
    const std::int64_t base = total_frames / n;
    const std::int64_t extra = total_frames % n;
    std::int64_t start = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t len = base + (i < extra ? 1 : 0);
        spans.emplace_back(start, len);
        start += len;
    }
    return spans;
}

FeatureSequence synth_speech_encode(const RawAudioSpec& spec, const Codebook& cb,
                                    std::uint64_t seed) {
    spec.validate();
    const std::int64_t T = spec.duration_frames;
    Tensor frames({T, kSpeechDim});
    const auto spans = symbol_spans(T, spec.symbol_sequence.size());
    for (std::size_t si = 0; si < spec.symbol_sequence.size(); ++si) {
        const Tensor& tmpl = cb.symbol_templates[static_cast<std::size_t>(
            spec.symbol_sequence[si])];
        const auto [start, len] = spans[si];
        for (std::int64_t t = start; t < start + len; ++t)
            std::memcpy(frames.data.data() + t * kSpeechDim, tmpl.data.data(),
                        kSpeechDim * sizeof(double));
    }
    if (spec.noise_std > 0.0) {
        Rng rng = Rng::stream(seed, "speech_noise");
        for (double& v : frames.data) v += rng.normal(0.0, spec.noise_std);
    }
    FeatureSequence seq;
    seq.frames = std::move(frames);
    seq.source = FeatureSource::speech_enc;
    return seq;
}

FeatureSequence synth_audio_encode(const RawAudioSpec& spec, const Codebook& cb,
                                   std::uint64_t seed) {
    spec.validate();
    const std::int64_t T = spec.duration_frames;
    Tensor base({1, kAudioDim});
    for (int e : spec.event_tags)
        for (int j = 0; j < kAudioDim; ++j)
            base.data[j] += cb.event_templates[static_cast<std::size_t>(e)].data[j];
    Tensor frames({T, kAudioDim});
    for (std::int64_t t = 0; t < T; ++t)
        std::memcpy(frames.data.data() + t * kAudioDim, base.data.data(),
                    kAudioDim * sizeof(double));
    if (spec.noise_std > 0.0) {
        Rng rng = Rng::stream(seed, "audio_noise");
        for (double& v : frames.data) v += rng.normal(0.0, spec.noise_std);
    }
    FeatureSequence seq;
    seq.frames = std::move(frames);
    seq.source = FeatureSource::audio_enc;
    return seq;
}

FeatureSequence fuse(const FeatureSequence& speech, const FeatureSequence& audio) {
    if (speech.num_frames() != audio.num_frames())
        throw DataError("fuse: desynchronized encoders, speech T=" +
                        std::to_string(speech.num_frames()) + " vs audio T=" +
                        std::to_string(audio.num_frames()));
    const std::int64_t T = speech.num_frames();
    const std::int64_t ds = speech.dim(), da = audio.dim();
    Tensor frames({T, ds + da});
    for (std::int64_t t = 0; t < T; ++t) {
        std::memcpy(frames.data.data() + t * (ds + da),
                    speech.frames.data.data() + t * ds, ds * sizeof(double));
        std::memcpy(frames.data.data() + t * (ds + da) + ds,
                    audio.frames.data.data() + t * da, da * sizeof(double));
    }
    FeatureSequence seq;
    seq.frames = std::move(frames);
    seq.source = FeatureSource::fused;
    return seq;
}

std::vector<int> decode_symbols_nearest(const FeatureSequence& speech, const Codebook& cb,
                                        std::size_t num_symbols) {
    std::vector<int> out;
    const auto spans = symbol_spans(speech.num_frames(), num_symbols);
    for (const auto& [start, len] : spans) {
        // mean frame over the span, then nearest template
        Tensor mean({1, kSpeechDim});
        for (std::int64_t t = start; t < start + len; ++t)
            for (int j = 0; j < kSpeechDim; ++j)
                mean.data[j] += speech.frames.data[t * kSpeechDim + j];
        for (double& v : mean.data) v /= static_cast<double>(len);
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int s = 0; s < kNumSymbols; ++s) {
            double d = 0.0;
            for (int j = 0; j < kSpeechDim; ++j) {
                const double dv = mean.data[j] - cb.symbol_templates[s].data[j];
                d += dv * dv;
            }
            if (d < best_d) {
                best_d = d;
                best = s;
            }
        }
        out.push_back(best);
    }
    return out;
}

std::set<int> decode_events_least_squares(const FeatureSequence& audio, const Codebook& cb,
                                          std::size_t max_events) {
    // Mean frame, then exhaustive subset search up to max_events: the subset
    // whose template sum has smallest squared distance wins.
    const std::int64_t T = audio.num_frames();
    Tensor mean({1, kAudioDim});
    for (std::int64_t t = 0; t < T; ++t)
        for (int j = 0; j < kAudioDim; ++j) mean.data[j] += audio.frames.data[t * kAudioDim + j];
    for (double& v : mean.data) v /= static_cast<double>(T);

    const int n = static_cast<int>(cb.event_templates.size());
    std::set<int> best_set;
    double best_d = std::numeric_limits<double>::infinity();
    std::vector<int> members;
    // iterate subsets by popcount-bounded bitmask
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
        if (static_cast<std::size_t>(__builtin_popcount(bits)) > max_events) continue;
        double d = 0.0;
        for (int j = 0; j < kAudioDim; ++j) {
            double s = 0.0;
            for (int e = 0; e < n; ++e)
                if (bits & (1u << e)) s += cb.event_templates[e].data[j];
            const double dv = mean.data[j] - s;
            d += dv * dv;
        }
        if (d < best_d) {
            best_d = d;
            members.clear();
            for (int e = 0; e < n; ++e)
                if (bits & (1u << e)) members.push_back(e);
        }
    }
    best_set.insert(members.begin(), members.end());
    return best_set;
}

// ---- feature file io --------------------------------------------------------

namespace {
constexpr char kMagic[4] = {'A', 'U', 'D', 'F'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxElements = 1ull << 28;  // caps T*d at ~268M floats

void put_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw DataError("feature file: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace

void save_features(const FeatureSequence& seq, const std::string& path) {
    const std::int64_t T = seq.num_frames(), d = seq.dim();
    if (T <= 0 || d <= 0 || T > std::numeric_limits<std::uint32_t>::max() ||
        d > std::numeric_limits<std::uint32_t>::max() ||
        static_cast<std::uint64_t>(T) * static_cast<std::uint64_t>(d) > kMaxElements)
        throw DataError("feature file: dimension overflow, T=" + std::to_string(T) +
                        " d=" + std::to_string(d));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("feature file: cannot open for writing: " + path);
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(T));
    put_u32(os, static_cast<std::uint32_t>(d));
    const unsigned char src = static_cast<unsigned char>(seq.source);
    os.write(reinterpret_cast<const char*>(&src), 1);
    std::vector<float> payload(seq.frames.data.size());
    for (std::size_t i = 0; i < payload.size(); ++i)
        payload[i] = static_cast<float>(seq.frames.data[i]);
    os.write(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!os) throw DataError("feature file: write failed: " + path);
}

FeatureSequence load_features(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("feature file: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("feature file: magic-number mismatch in " + path);
    const std::uint32_t version = get_u32(is);
    if (version != kVersion)
        throw DataError("feature file: unsupported version " + std::to_string(version));
    const std::uint32_t T = get_u32(is);
    const std::uint32_t d = get_u32(is);
    if (T == 0 || d == 0 ||
        static_cast<std::uint64_t>(T) * static_cast<std::uint64_t>(d) > kMaxElements)
        throw DataError("feature file: dimension overflow, T=" + std::to_string(T) +
                        " d=" + std::to_string(d));
    unsigned char src = 0;
    is.read(reinterpret_cast<char*>(&src), 1);
    if (!is || src > 2) throw DataError("feature file: bad source byte");
    std::vector<float> payload(static_cast<std::size_t>(T) * d);
    is.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (static_cast<std::size_t>(is.gcount()) != payload.size() * sizeof(float))
        throw DataError("feature file: truncated payload in " + path);
    FeatureSequence seq;
    seq.frames = Tensor({static_cast<std::int64_t>(T), static_cast<std::int64_t>(d)});
    for (std::size_t i = 0; i < payload.size(); ++i)
        seq.frames.data[i] = static_cast<double>(payload[i]);
    seq.source = static_cast<FeatureSource>(src);
    return seq;
}

}  // namespace alm
