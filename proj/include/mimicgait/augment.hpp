#pragma once

#include <cstdint>

#include "json.hpp"
#include "mimicgait/silhouette.hpp"

namespace mimicgait {

/// Training-time clip augmentation. One draw per clip; every frame of the
/// clip gets the same geometric transform, so motion is left intact.
struct AugmentConfig {
  double flip_prob = 0.2;
  double crop_prob = 0.2;
  double crop_max = 0.1;  // largest fraction trimmed from each edge
  double perspective_prob = 0.2;
  double perspective_scale = 0.2;  // corner displacement, fraction of half the frame size

  static AugmentConfig off() { return {0.0, 0.0, 0.0, 0.0, 0.0}; }
  bool operator==(const AugmentConfig&) const = default;
};

void validate(const AugmentConfig& config);
void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);

/// Horizontal flip, random crop resized back to full frame and a random
/// perspective warp, composed into one homography and resampled once
/// (bilinear, re-binarized at 128). Returns the input unchanged when no
/// transform is drawn.
SilhouetteSequence augment(const SilhouetteSequence& seq, const AugmentConfig& config, std::uint64_t seed);

}  // namespace mimicgait
