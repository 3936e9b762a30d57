#include "hafno/model/checkpoint.hpp"

#include "hafno/error.hpp"
#include "hafno/util/io.hpp"

namespace hafno::model {

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
    ByteWriter w;
    w.bytes(std::string_view(kCheckpointMagic, 4));
    w.u16(kCheckpointVersion);
    const std::string text = ck.config.to_text();
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.bytes(text);
    w.u32(static_cast<std::uint32_t>(ck.parameters.size()));
    for (const auto& [name, t] : ck.parameters) w.named_tensor(name, t);
    w.u8(ck.optimizer ? 1 : 0);
    if (ck.optimizer) {
        const auto& o = *ck.optimizer;
        if (o.first_moment.size() != ck.parameters.size() || o.second_moment.size() != ck.parameters.size())
            throw std::invalid_argument("checkpoint: optimizer moments do not match parameter count");
        w.u64(o.step);
        w.u64(o.epoch);
        w.u32(static_cast<std::uint32_t>(o.training_config.size()));
        w.bytes(o.training_config);
        for (const auto& t : o.first_moment) w.tensor(t);
        for (const auto& t : o.second_moment) w.tensor(t);
    }
    return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    if (bytes.size() < 4 || r.bytes(4) != std::string_view(kCheckpointMagic, 4))
        throw FormatError(FormatErrorCode::bad_magic, "not a model checkpoint (bad magic)");
    const std::uint16_t version = r.u16();
    if (version != kCheckpointVersion) {
        throw FormatError(FormatErrorCode::version_mismatch, "checkpoint version " + std::to_string(version) +
                                                                 ", this build reads " +
                                                                 std::to_string(kCheckpointVersion));
    }
    Checkpoint ck;
    ck.config = ModelConfig::from_text(r.bytes(r.u32()));
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) ck.parameters.push_back(r.named_tensor());
    if (r.u8()) {
        OptimizerState o;
        o.step = r.u64();
        o.epoch = r.u64();
        o.training_config = r.bytes(r.u32());
        for (std::uint32_t i = 0; i < n; ++i) o.first_moment.push_back(r.tensor());
        for (std::uint32_t i = 0; i < n; ++i) o.second_moment.push_back(r.tensor());
        ck.optimizer = std::move(o);
    }
    if (r.remaining() != 0)
        throw FormatError(FormatErrorCode::malformed, std::to_string(r.remaining()) + " trailing bytes in checkpoint");
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    write_file(path, encode_checkpoint(ck));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

Checkpoint make_checkpoint(const HierarchicalModel& m, std::optional<OptimizerState> opt) {
    return Checkpoint{m.config(), m.state(), std::move(opt)};
}

HierarchicalModel restore_model(const Checkpoint& ck) { return HierarchicalModel(ck.config, ck.parameters); }

}  // namespace hafno::model
