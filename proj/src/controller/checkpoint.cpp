#include "spider/controller/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <vector>

namespace spider::controller {

namespace {

template <typename T>
void put_le(std::vector<char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(const std::vector<char>& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  template <typename T>
  T get_le(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  [[nodiscard]] bool at_end() const noexcept { return pos_ == bytes_.size(); }
  [[nodiscard]] std::size_t pos() const noexcept { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(CheckpointErrorKind::Truncated, "checkpoint '" + path_ + "' is truncated while reading " +
                                                                what + " at byte " + std::to_string(pos_));
    }
  }

  const std::vector<char>& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrorKind::Io, "cannot open checkpoint '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string shape_str(const std::vector<std::uint64_t>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "x" : "") + std::to_string(dims[i]);
  return s + "]";
}

}  // namespace

std::filesystem::path config_path_for(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".json");
}

void save_checkpoint(const std::filesystem::path& path, const Controller& controller) {
  auto named = const_cast<ControllerParams&>(controller.params()).named();
  std::vector<char> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, tensor] : named) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(2);
    put_le<std::uint64_t>(out, tensor->rows());
    put_le<std::uint64_t>(out, tensor->cols());
    for (double v : tensor->data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }

  std::ofstream bin(path, std::ios::binary | std::ios::trunc);
  if (!bin) throw CheckpointError(CheckpointErrorKind::Io, "cannot write checkpoint '" + path.string() + "'");
  bin.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!bin) throw CheckpointError(CheckpointErrorKind::Io, "write failed for '" + path.string() + "'");

  std::ofstream cfg(config_path_for(path), std::ios::trunc);
  if (!cfg) throw CheckpointError(CheckpointErrorKind::Io, "cannot write '" + config_path_for(path).string() + "'");
  cfg << to_json(controller.config()).dump(2) << "\n";
}

Controller load_checkpoint(const std::filesystem::path& path, const ControllerConfig& config) {
  const auto sidecar = config_path_for(path);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream in(sidecar);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw CheckpointError(CheckpointErrorKind::Io, "bad config '" + sidecar.string() + "': " + e.what());
    }
    const ControllerConfig saved = config_from_json(j);
    if (saved.D != config.D || saved.D_c != config.D_c || saved.K != config.K || saved.N != config.N ||
        saved.L != config.L || saved.expert_layers != config.expert_layers ||
        saved.router_hidden != config.router_hidden) {
      throw CheckpointError(CheckpointErrorKind::DimMismatch,
                            "checkpoint config " + to_json(saved).dump() + " does not match " + to_json(config).dump());
    }
  }

  const std::vector<char> bytes = read_file(path);
  Reader r(bytes, path.string());
  const std::string magic = r.get_bytes(sizeof(kCheckpointMagic), "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CheckpointError(CheckpointErrorKind::BadMagic, "'" + path.string() + "' is not a controller checkpoint");
  }
  const auto version = r.get_le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrorKind::VersionMismatch, "checkpoint version " + std::to_string(version) +
                                                                    ", expected " +
                                                                    std::to_string(kCheckpointVersion));
  }
  const auto count = r.get_le<std::uint32_t>("tensor count");

  Controller controller(config, 0);
  std::map<std::string, Tensor*> slots;
  for (const auto& nt : controller.params().named()) slots.emplace(nt.name, nt.tensor);
  std::map<std::string, bool> seen;

  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = r.get_le<std::uint16_t>("name length");
    const std::string name = r.get_bytes(name_len, "tensor name");
    const auto rank = r.get_le<std::uint8_t>("rank");
    if (rank < 1 || rank > 2) {
      throw CheckpointError(CheckpointErrorKind::Malformed, "tensor '" + name + "' has rank " + std::to_string(rank));
    }
    std::vector<std::uint64_t> dims;
    for (std::uint8_t i = 0; i < rank; ++i) dims.push_back(r.get_le<std::uint64_t>("dims"));
    if (rank == 1) dims.insert(dims.begin(), 1);

    const auto slot = slots.find(name);
    if (slot == slots.end()) {
      throw CheckpointError(CheckpointErrorKind::DimMismatch, "checkpoint tensor '" + name + "' has no place in the config");
    }
    Tensor& dst = *slot->second;
    if (dims[0] != dst.rows() || dims[1] != dst.cols()) {
      throw CheckpointError(CheckpointErrorKind::DimMismatch, "tensor '" + name + "' is " + shape_str(dims) +
                                                                  " in the checkpoint but " + to_string(dst.shape()) +
                                                                  " in the config");
    }
    for (double& v : dst.data()) v = std::bit_cast<double>(r.get_le<std::uint64_t>("tensor data"));
    seen[name] = true;
  }
  if (!r.at_end()) {
    throw CheckpointError(CheckpointErrorKind::Malformed,
                          "trailing bytes after the last tensor at byte " + std::to_string(r.pos()));
  }
  for (const auto& [name, _] : slots) {
    if (!seen.count(name)) throw CheckpointError(CheckpointErrorKind::MissingTensor, "checkpoint lacks tensor '" + name + "'");
  }
  return controller;
}

Controller load_checkpoint(const std::filesystem::path& path) {
  const auto sidecar = config_path_for(path);
  std::ifstream in(sidecar);
  if (!in) throw CheckpointError(CheckpointErrorKind::Io, "missing config '" + sidecar.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointErrorKind::Io, "bad config '" + sidecar.string() + "': " + e.what());
  }
  ControllerConfig cfg = config_from_json(j);
  return load_checkpoint(path, cfg);
}

}  // namespace spider::controller
