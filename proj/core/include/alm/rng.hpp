#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace alm {

// All stochastic behavior in the project derives from one global seed via
// named streams, so independent components never share or race a generator.
// The engine is std::mt19937_64 (portable by the standard); the distributions
// are pinned here because the std ones are implementation-defined.
class Rng {
public:
    Rng() : engine_(0) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Derive a named sub-stream: hash(seed, name, index) -> fresh engine.
    static Rng stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 significant bits.
    double uniform();

    // Uniform integer in [0, n), rejection-sampled (n >= 1).
    std::uint64_t uniform_below(std::uint64_t n);

    // Box-Muller normal; the spare value is cached in this object.
    double normal(double mean = 0.0, double stddev = 1.0);

    // Engine + spare state flattened for checkpointing.
    std::string serialize() const;
    void deserialize(const std::string& blob);

    bool operator==(const Rng& other) const;

private:
    std::mt19937_64 engine_;
    double gauss_spare_ = 0.0;
    bool has_spare_ = false;
};

// FNV-1a 64-bit, used for config hashing and parameter digests.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ull);
std::uint64_t fnv1a_u64(std::uint64_t value, std::uint64_t h);

}  // namespace alm
