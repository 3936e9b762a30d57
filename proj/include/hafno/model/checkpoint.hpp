#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "hafno/model/model.hpp"

namespace hafno::model {

inline constexpr char kCheckpointMagic[4] = {'H', 'A', 'F', 'N'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Adam state needed to resume bit-exactly.
struct OptimizerState {
    std::uint64_t step = 0;
    std::uint64_t epoch = 0;          // epochs completed
    std::string training_config;      // canonical text
    std::vector<Tensor> first_moment;  // one per parameter, declaration order
    std::vector<Tensor> second_moment;
};

struct Checkpoint {
    ModelConfig config;
    NamedTensors parameters;
    std::optional<OptimizerState> optimizer;
};

/// Layout: magic, u16 version, u32 length + config text, u32 count + named
/// tensors, u8 optimizer flag, then (u64 step, u64 epoch, u32 length + text,
/// moment tensors) when set. All integers and floats little-endian.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const HierarchicalModel& m, std::optional<OptimizerState> opt = std::nullopt);
HierarchicalModel restore_model(const Checkpoint& ck);

}  // namespace hafno::model
