#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mimicgait/encoder.hpp"
#include "mimicgait/ven.hpp"

namespace mimicgait {

/// `git describe` of the build, or "unknown".
std::string version_string();

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

/// Container layout: "MGCK", u32 version, u64 header length, JSON header
/// (metadata plus a tensor table of name/shape/offset/numel), then raw
/// little-endian float32 payloads.
void write_container(const std::filesystem::path& file, const nlohmann::json& meta, const NamedTensors& tensors);
std::pair<nlohmann::json, NamedTensors> read_container(const std::filesystem::path& file);

/// Writes backbone, injection and (if guided) VEN weights plus every config
/// needed to rebuild the encoder. `extra` is merged into the metadata.
void save_encoder(const GaitEncoder& model, const std::filesystem::path& file, const nlohmann::json& extra = {});

struct LoadedEncoder {
  GaitEncoder model;
  nlohmann::json meta;
};
LoadedEncoder load_encoder(const std::filesystem::path& file);

void save_ven(const FrozenVen& ven, const std::filesystem::path& file, const nlohmann::json& extra = {});
std::shared_ptr<const FrozenVen> load_ven(const std::filesystem::path& file);

}  // namespace mimicgait
