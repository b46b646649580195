#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mimicgait/silhouette.hpp"

namespace mimicgait {

enum class OcclusionKind { none, top, bottom, middle, dynamic_small, dynamic_tall };
enum class PatchDirection { left_to_right, right_to_left };

std::string to_string(OcclusionKind kind);
OcclusionKind occlusion_kind_from_string(const std::string& name);
std::vector<OcclusionKind> parse_kind_list(const std::string& comma_separated);
std::string join_kinds(const std::vector<OcclusionKind>& kinds);

bool is_consistent(OcclusionKind kind);
bool is_dynamic(OcclusionKind kind);

struct AmountRange {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Sampling ranges. `amount` (R) covers top/bottom/middle/dynamic_small,
/// `tall_width` (R_t) the width of full-height patches and `speed` (R_s) the
/// patch speed in pixels per frame.
struct OcclusionRanges {
  AmountRange amount{0.4, 0.6};
  AmountRange tall_width{0.2, 0.4};
  AmountRange speed{0.5, 1.0};
};

/// Fully resolved occlusion; replaying it on the same input is bit-exact.
struct OcclusionSpec {
  OcclusionKind kind = OcclusionKind::none;
  double amount = 0.0;
  PatchDirection direction = PatchDirection::left_to_right;
  double speed = 0.0;
  int start_offset = 0;
  int vertical_offset = 0;
  std::uint64_t seed = 0;

  bool operator==(const OcclusionSpec&) const = default;
};

/// Throws ValidationError if `spec` is outside the given ranges.
void validate_spec(const OcclusionSpec& spec, const OcclusionRanges& ranges = {});

struct VisibilityLabel {
  OcclusionKind kind = OcclusionKind::none;
  double amount_target = 0.0;

  /// Position of `kind` in the classifier's class set; -1 if absent.
  int class_index(const std::vector<OcclusionKind>& class_set) const;
};

struct OccludedSequence {
  SilhouetteSequence sequence;
  VisibilityLabel label;
};

/// Kinds and ranges occlusions are drawn from during training or evaluation.
struct OcclusionPolicy {
  std::vector<OcclusionKind> kinds;
  OcclusionRanges ranges;

  OcclusionSpec draw(std::uint64_t seed) const;
};

OcclusionSpec sample_spec(const std::vector<OcclusionKind>& allowed_kinds, std::uint64_t seed,
                          const OcclusionRanges& ranges = {}, int frame_height = kFrameSize,
                          int frame_width = kFrameSize);

/// Rows removed or zeroed by a consistent occlusion of the given amount.
int occluded_rows(double amount, int height);
/// First row of the vertically centred middle band.
int middle_band_start(double amount, int height);
/// Left column (before wrapping) of a dynamic patch at frame t.
int patch_left(const OcclusionSpec& spec, int t, int width);
int patch_width(const OcclusionSpec& spec, int width);
int patch_height(const OcclusionSpec& spec, int height);

SilhouetteSequence apply_consistent(const SilhouetteSequence& seq, const OcclusionSpec& spec);
SilhouetteSequence apply_dynamic(const SilhouetteSequence& seq, const OcclusionSpec& spec);
OccludedSequence apply(const SilhouetteSequence& seq, const OcclusionSpec& spec);

/// First ceil(T/2) frames occluded by `first`, the rest by `second`.
SilhouetteSequence flip_mid_video(const SilhouetteSequence& seq, const OcclusionSpec& first,
                                  const OcclusionSpec& second);

void to_json(nlohmann::json& j, const OcclusionSpec& spec);
void from_json(const nlohmann::json& j, OcclusionSpec& spec);
void to_json(nlohmann::json& j, const AmountRange& range);
void from_json(const nlohmann::json& j, AmountRange& range);
void to_json(nlohmann::json& j, const OcclusionRanges& ranges);
void from_json(const nlohmann::json& j, OcclusionRanges& ranges);

}  // namespace mimicgait
