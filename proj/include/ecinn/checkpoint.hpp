#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "ecinn/flow.hpp"
#include "ecinn/gmm.hpp"

namespace ecinn {

// Model checkpoint: "ECNN" magic, u32 format version, u32 D, u32 layer count,
// then tagged blocks. Layer tags 1=actnorm, 2=coupling, 3=permutation carry
// little-endian float32 parameter blobs in declaration order; tag 4 is the
// latent GMM means; tag 5 records completed training epochs (for resume).
// Parameters are float32-representable doubles in memory, so a save -> load
// round-trip reproduces the model bit for bit.

struct Checkpoint {
    FlowModel model;
    std::optional<LatentGMM> gmm;
    uint32_t epochs_completed = 0;
};

std::string checkpoint_to_bytes(const FlowModel& model, const LatentGMM* gmm = nullptr,
                                uint32_t epochs_completed = 0);
Checkpoint checkpoint_from_bytes(std::string_view bytes);

void save_checkpoint(const std::string& path, const FlowModel& model,
                     const LatentGMM* gmm = nullptr, uint32_t epochs_completed = 0);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ecinn
