#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mimicgait/silhouette.hpp"

namespace mimicgait {

/// Identity-level parameters of a procedural walker. Lengths are fractions of
/// standing body height.
struct WalkerParams {
  int identity_id = 0;
  std::array<double, 4> limb_length_ratios{};  // thigh, shin, upper arm, forearm
  double torso_width = 0.15;
  double gait_frequency = 0.06;  // cycles/frame
  double phase = 0.0;            // radians; overridden per sequence
  double stride_amplitude = 0.4; // peak hip swing, radians
  double arm_swing = 0.5;        // arm swing as a fraction of hip swing
  double step_asymmetry = 0.25;  // near leg swings (1 + a) times the mean, far leg (1 - a)
  double noise_level = 0.02;     // boundary pixel flip probability
};

/// Per-sequence nuisance factors.
struct WalkerVariation {
  double phase = 0.0;
  double view_scale = 1.0;
  std::uint64_t noise_seed = 0;
};

/// Parameters for identity `identity_id` of an n-identity dataset. Gait
/// frequency and torso width are laid out on a jittered grid so every
/// identity occupies its own (frequency, width) cell.
WalkerParams walker_params(int identity_id, int n_identities, std::uint64_t dataset_seed);

/// Renders T raw frames (canvas x canvas binary images) of a walker.
std::vector<Image8> render_walker(const WalkerParams& params, const WalkerVariation& variation, int frames,
                                  int canvas = 128);

struct ToyDatasetOptions {
  int n_identities = 50;
  int seqs_per_identity = 4;
  int frames_per_seq = 60;
  std::uint64_t seed = 0;
};

std::string toy_subject_id(int identity);
std::string toy_sequence_id(int identity, int index);

/// In-memory generation; sequences ordered by identity then index.
std::vector<SilhouetteSequence> generate_toy_sequences(const ToyDatasetOptions& options);

enum class DatasetFormat { frame_dirs, packed };

/// Writes <out>/<subject>/<sequence>/ frame directories or <out>/<subject>/<sequence>.mgsl files.
void generate_toy_dataset(const ToyDatasetOptions& options, const std::filesystem::path& out,
                          DatasetFormat format = DatasetFormat::frame_dirs);

struct SequenceRef {
  std::string subject_id;
  std::string sequence_id;
  bool operator==(const SequenceRef&) const = default;
  auto operator<=>(const SequenceRef&) const = default;
};

/// Handle over a set of labelled sequences; disk-backed handles read each
/// sequence on demand and validate it on load.
class Dataset {
 public:
  static Dataset in_memory(std::vector<SilhouetteSequence> sequences);
  /// Scans `root` for sequences of the declared format.
  static Dataset open(const std::filesystem::path& root, DatasetFormat format);

  std::size_t size() const { return refs_.size(); }
  const SequenceRef& ref(std::size_t i) const { return refs_[i]; }
  const std::vector<SequenceRef>& refs() const { return refs_; }
  std::optional<std::size_t> find(const SequenceRef& ref) const;
  std::vector<std::string> subjects() const;

  SilhouetteSequence load(std::size_t i) const;
  SilhouetteSequence load(const SequenceRef& ref) const;

 private:
  std::vector<SequenceRef> refs_;
  std::vector<std::filesystem::path> paths_;
  std::vector<SilhouetteSequence> memory_;
  DatasetFormat format_ = DatasetFormat::frame_dirs;
};

Dataset ingest_external(const std::filesystem::path& path, DatasetFormat format);

struct ProtocolSplit {
  std::string name;
  std::vector<SequenceRef> gallery;
  std::vector<SequenceRef> probes;
};

struct SplitProtocol {
  enum class Kind { grew_local, holdout } kind = Kind::grew_local;
  double holdout_fraction = 0.5;

  static SplitProtocol grew_local() { return {Kind::grew_local, 0.0}; }
  static SplitProtocol holdout(double fraction) { return {Kind::holdout, fraction}; }
};

/// grew_local: one gallery and one probe sequence per subject.
/// holdout: a fraction of subjects is held out; one gallery sequence each, the rest probes.
ProtocolSplit build_split(const std::vector<SequenceRef>& sequences, const SplitProtocol& protocol,
                          std::uint64_t seed);

/// Dataset indices used by neither gallery nor probes.
std::vector<std::size_t> training_indices(const Dataset& dataset, const ProtocolSplit& split);

void to_json(nlohmann::json& j, const SequenceRef& ref);
void from_json(const nlohmann::json& j, SequenceRef& ref);
void to_json(nlohmann::json& j, const ProtocolSplit& split);
void from_json(const nlohmann::json& j, ProtocolSplit& split);
void to_json(nlohmann::json& j, const WalkerParams& params);

ProtocolSplit load_split(const std::filesystem::path& file);
void save_split(const ProtocolSplit& split, const std::filesystem::path& file);

}  // namespace mimicgait
