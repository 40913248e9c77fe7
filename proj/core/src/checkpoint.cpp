#include "alm/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "alm/errors.hpp"

namespace alm {

namespace {
constexpr char kMagic[4] = {'A', 'L', 'M', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_u64(std::ofstream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_str(std::ofstream& os, const std::string& s) {
    put_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::uint32_t get_u32(std::ifstream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw DataError("checkpoint: truncated file");
    return v;
}
std::uint64_t get_u64(std::ifstream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw DataError("checkpoint: truncated file");
    return v;
}
std::string get_str(std::ifstream& is) {
    const std::uint32_t n = get_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw DataError("checkpoint: truncated string");
    return s;
}
}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void round_to_f32_inplace(Tensor& t) {
    for (double& v : t.data) v = static_cast<double>(static_cast<float>(v));
}

void save_checkpoint_file(const Checkpoint& c, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot open for writing: " + path);
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u64(os, c.config_hash);
    put_u64(os, c.backbone_digest);
    put_str(os, c.stage);
    put_u64(os, static_cast<std::uint64_t>(c.step));
    put_str(os, c.rng_state);
    put_u32(os, static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& [name, t] : c.tensors) {
        put_str(os, name);
        put_u32(os, static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) put_u64(os, static_cast<std::uint64_t>(d));
        std::vector<float> payload(t.data.size());
        for (std::size_t i = 0; i < payload.size(); ++i)
            payload[i] = static_cast<float>(t.data[i]);
        os.write(reinterpret_cast<const char*>(payload.data()),
                 static_cast<std::streamsize>(payload.size() * sizeof(float)));
    }
    if (!os) throw DataError("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("checkpoint: magic-number mismatch in " + path);
    const std::uint32_t version = get_u32(is);
    if (version != kVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    Checkpoint c;
    c.config_hash = get_u64(is);
    c.backbone_digest = get_u64(is);
    c.stage = get_str(is);
    c.step = static_cast<std::int64_t>(get_u64(is));
    c.rng_state = get_str(is);
    const std::uint32_t count = get_u32(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = get_str(is);
        const std::uint32_t rank = get_u32(is);
        std::vector<std::int64_t> shape;
        std::int64_t numel = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            shape.push_back(static_cast<std::int64_t>(get_u64(is)));
            numel *= shape.back();
        }
        std::vector<float> payload(static_cast<std::size_t>(numel));
        is.read(reinterpret_cast<char*>(payload.data()),
                static_cast<std::streamsize>(payload.size() * sizeof(float)));
        if (static_cast<std::size_t>(is.gcount()) != payload.size() * sizeof(float))
            throw DataError("checkpoint: truncated tensor payload in " + path);
        Tensor t(shape);
        for (std::size_t j = 0; j < payload.size(); ++j)
            t.data[j] = static_cast<double>(payload[j]);
        c.tensors.emplace_back(name, std::move(t));
    }
    return c;
}

}  // namespace alm
