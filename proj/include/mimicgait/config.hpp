#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "mimicgait/backbone.hpp"
#include "mimicgait/mimic.hpp"
#include "mimicgait/toy_dataset.hpp"
#include "mimicgait/training.hpp"
#include "mimicgait/ven.hpp"

namespace mimicgait {

inline constexpr int kRunConfigSchema = 1;

/// Every stage's settings in one document. Defaults are sized for the toy
/// benchmark on a single CPU core.
struct RunConfig {
  int schema_version = kRunConfigSchema;
  std::uint64_t seed = 0;
  ToyDatasetOptions data;
  BackboneConfig backbone;
  TrainConfig teacher = default_teacher();
  VenConfig ven = default_ven();
  DistillConfig distill = default_distill();
  AdaptConfig adapt;
  OcclusionRanges eval_ranges;

  static TrainConfig default_teacher();
  static VenConfig default_ven();
  static DistillConfig default_distill();

  /// Propagates `seed` into every stage, each stage getting its own stream.
  void reseed(std::uint64_t new_seed);
};

void to_json(nlohmann::json& j, const ToyDatasetOptions& o);
void from_json(const nlohmann::json& j, ToyDatasetOptions& o);
void to_json(nlohmann::json& j, const AdaptConfig& c);
void from_json(const nlohmann::json& j, AdaptConfig& c);

void to_json(nlohmann::json& j, const RunConfig& c);
/// Rejects unknown keys anywhere in the document and schema mismatches.
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& file);
void save_run_config(const RunConfig& config, const std::filesystem::path& file);

/// Throws ValidationError naming the first key of `doc` that `reference`
/// (a fully populated default document) does not have. Clip policies are
/// left to their own parser since their keys depend on the mode.
void reject_unknown_keys(const nlohmann::json& doc, const nlohmann::json& reference, const std::string& where = "");

}  // namespace mimicgait
