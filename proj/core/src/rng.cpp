#include "alm/rng.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

#include "alm/errors.hpp"

namespace alm {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t fnv1a_u64(std::uint64_t value, std::uint64_t h) {
    for (int i = 0; i < 8; ++i) {
        h ^= (value >> (8 * i)) & 0xffu;
        h *= 1099511628211ull;
    }
    return h;
}

Rng Rng::stream(std::uint64_t seed, std::string_view name, std::uint64_t index) {
    std::uint64_t h = fnv1a_u64(seed, 1469598103934665603ull);
    h = fnv1a(name, h);
    h = fnv1a_u64(index, h);
    return Rng(h);
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_below(std::uint64_t n) {
    if (n == 0) throw ModelError("uniform_below: n must be >= 1");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

double Rng::normal(double mean, double stddev) {
    if (has_spare_) {
        has_spare_ = false;
        return mean + stddev * gauss_spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    gauss_spare_ = mag * std::sin(ang);
    has_spare_ = true;
    return mean + stddev * mag * std::cos(ang);
}

std::string Rng::serialize() const {
    std::ostringstream os;
    os << engine_ << ' ' << (has_spare_ ? 1 : 0);
    if (has_spare_) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(gauss_spare_));
        std::memcpy(&bits, &gauss_spare_, sizeof(bits));
        os << ' ' << bits;
    }
    return os.str();
}

void Rng::deserialize(const std::string& blob) {
    std::istringstream is(blob);
    int spare_flag = 0;
    is >> engine_ >> spare_flag;
    if (!is) throw DataError("rng state: malformed blob");
    has_spare_ = spare_flag != 0;
    if (has_spare_) {
        std::uint64_t bits = 0;
        is >> bits;
        if (!is) throw DataError("rng state: missing spare value");
        std::memcpy(&gauss_spare_, &bits, sizeof(bits));
    } else {
        gauss_spare_ = 0.0;
    }
}

bool Rng::operator==(const Rng& other) const {
    return engine_ == other.engine_ && has_spare_ == other.has_spare_ &&
           (!has_spare_ || gauss_spare_ == other.gauss_spare_);
}

}  // namespace alm
