#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "alm/tensor.hpp"

namespace alm {

// Versioned binary container of named tensors plus run bookkeeping. Tensor
// payloads are float32; snapshotting rounds the live doubles to the stored
// values so that resuming from a checkpoint continues bit-exactly where the
// saved run would have.
struct Checkpoint {
    std::string stage;
    std::int64_t step = 0;
    std::uint64_t config_hash = 0;
    std::uint64_t backbone_digest = 0;
    std::string rng_state;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const;
};

void round_to_f32_inplace(Tensor& t);

void save_checkpoint_file(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint_file(const std::string& path);

}  // namespace alm
