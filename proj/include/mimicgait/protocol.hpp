#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mimicgait/encoder.hpp"
#include "mimicgait/metrics.hpp"
#include "mimicgait/occlusion.hpp"
#include "mimicgait/toy_dataset.hpp"

namespace mimicgait {

struct ScenarioConfig {
  std::string name = "holistic";
  std::vector<OcclusionKind> eval_kinds{OcclusionKind::none};
  std::optional<OcclusionKind> restrict_to;
  bool flip_mid_video = false;
  std::optional<AmountRange> amount_range_override;
  int repeats = 1;

  /// Kinds occlusions are actually drawn from.
  std::vector<OcclusionKind> active_kinds() const;
};

void validate(const ScenarioConfig& scenario);
void to_json(nlohmann::json& j, const ScenarioConfig& s);
void from_json(const nlohmann::json& j, ScenarioConfig& s);

inline const std::vector<double> kDefaultFars{0.01};

struct EvalReport {
  std::string protocol_name;
  ScenarioConfig scenario;
  OcclusionRanges ranges;  // after any override
  std::vector<std::string> model_ids;
  std::uint64_t seed = 0;

  std::map<int, double> rank_k;      // mean over repeats
  std::map<int, double> rank_k_std;  // population std over repeats
  std::map<double, double> tar_at_far;
  std::map<std::string, double> rp;  // present only against a holistic companion
  std::vector<double> rank1_per_repeat;
  std::vector<ProbeRecord> records;  // first repeat
  nlohmann::json manifest = nlohmann::json::array();
};

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

SignatureSet signatures(GaitEncoder& model, const std::vector<SilhouetteSequence>& sequences);

/// Occludes every probe and gallery sequence with its own independently
/// drawn spec, encodes, and scores. Bit-reproducible for a fixed seed.
EvalReport run_protocol(GaitEncoder& model, const Dataset& dataset, const ProtocolSplit& split,
                        const ScenarioConfig& scenario, const OcclusionRanges& ranges, std::uint64_t seed,
                        const std::vector<double>& fars = kDefaultFars);

/// Fills `occluded.rp` with OP / HP per metric against a holistic report.
void attach_relative_performance(EvalReport& occluded, const EvalReport& holistic);

/// One report per (model, scenario), each carrying RP against the model's
/// own holistic run.
std::vector<EvalReport> compare_methods(const std::vector<std::pair<std::string, GaitEncoder*>>& models,
                                        const Dataset& dataset, const ProtocolSplit& split,
                                        const std::vector<ScenarioConfig>& scenarios, const OcclusionRanges& ranges,
                                        std::uint64_t seed);

/// Flat table: method, scenario, rank-1/5/20, TAR, RP columns.
std::string comparison_csv(const std::vector<EvalReport>& reports);

}  // namespace mimicgait
