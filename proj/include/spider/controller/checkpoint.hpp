#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "spider/controller/controller.hpp"

namespace spider::controller {

inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'D', 'R', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointErrorKind { Io, BadMagic, VersionMismatch, Truncated, Malformed, DimMismatch, MissingTensor };

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] CheckpointErrorKind kind() const noexcept { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

/// Sidecar config document written next to a checkpoint.
std::filesystem::path config_path_for(const std::filesystem::path& checkpoint);

/// Binary layout (little-endian): magic "SPDRCKPT", u32 version, u32 tensor
/// count, then per tensor u16 name length, name bytes, u8 rank, u64 dims,
/// f64 row-major data. The config is written to config_path_for(path).
void save_checkpoint(const std::filesystem::path& path, const Controller& controller);

/// Loads parameters into a controller built from `config`. Every tensor must
/// be present with the shape `config` implies; a config sidecar, when
/// present, must agree with `config`.
Controller load_checkpoint(const std::filesystem::path& path, const ControllerConfig& config);

/// Loads using the config sidecar.
Controller load_checkpoint(const std::filesystem::path& path);

}  // namespace spider::controller
