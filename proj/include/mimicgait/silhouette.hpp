#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mimicgait {

inline constexpr int kFrameSize = 64;
inline constexpr std::uint8_t kBinarizeThreshold = 128;

/// Raised when input data violates a documented invariant (non-binary frame,
/// wrong size, malformed file, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major 8-bit image. Silhouette frames store 0/1; raw imagery stores 0..255.
struct Image8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  Image8() = default;
  Image8(int h, int w, std::uint8_t fill = 0);

  std::uint8_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
  bool is_binary() const;
  std::size_t count_nonzero() const;
  bool operator==(const Image8&) const = default;
};

struct BoundingBox {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
};

/// Tight foreground box of a frame; empty optional-like result signalled by height == 0.
BoundingBox foreground_box(const Image8& frame);

/// A binary silhouette video of T frames, each H x W. Pixel storage is shared
/// between copies and never mutated after construction.
class SilhouetteSequence {
 public:
  SilhouetteSequence(std::vector<std::uint8_t> pixels, std::vector<bool> valid, int height, int width,
                     std::string subject_id = "unlabeled", std::string sequence_id = "", double fps = 30.0);

  /// Builds a sequence from individual binary frames; validity is derived
  /// from non-emptiness.
  static SilhouetteSequence from_frames(const std::vector<Image8>& frames, std::string subject_id = "unlabeled",
                                        std::string sequence_id = "", double fps = 30.0);

  int length() const { return length_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t frame_pixels() const { return static_cast<std::size_t>(height_) * width_; }

  std::span<const std::uint8_t> pixels() const { return *pixels_; }
  std::span<const std::uint8_t> frame(int t) const;
  Image8 frame_image(int t) const;
  bool valid(int t) const { return valid_[static_cast<std::size_t>(t)]; }
  const std::vector<bool>& valid_mask() const { return valid_; }
  int valid_count() const;

  const std::string& subject_id() const { return subject_id_; }
  const std::string& sequence_id() const { return sequence_id_; }
  double fps() const { return fps_; }

  /// Same metadata, new pixel content. A frame stays valid only if it was
  /// valid before and still has foreground.
  SilhouetteSequence with_pixels(std::vector<std::uint8_t> pixels) const;
  SilhouetteSequence with_ids(std::string subject_id, std::string sequence_id) const;

  bool same_content(const SilhouetteSequence& other) const;

 private:
  std::shared_ptr<const std::vector<std::uint8_t>> pixels_;
  std::vector<bool> valid_;
  int length_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::string subject_id_;
  std::string sequence_id_;
  double fps_ = 30.0;
};

/// Output pixel is 1 iff input >= 128.
Image8 rebinarize(const Image8& frame);

/// Bilinear resize of an 8-bit image (half-pixel centres).
Image8 resize_bilinear(const Image8& image, int height, int width);

struct CenteredFrame {
  Image8 frame;
  bool valid = false;
};

/// Scales the subject's bounding box to the full target height (aspect kept),
/// centres it horizontally and re-binarizes. Empty input gives an empty,
/// invalid frame. Throws ValidationError on non-binary input.
CenteredFrame center_and_resize(const Image8& raw_frame, int target_height = kFrameSize,
                                int target_width = kFrameSize);

/// Preprocesses every frame of a raw binary video.
SilhouetteSequence preprocess_frames(const std::vector<Image8>& raw_frames, std::string subject_id,
                                     std::string sequence_id, double fps = 30.0);

struct ClipPolicy {
  enum class Mode { fixed, uniform } mode = Mode::fixed;
  int lo = 30;  // fixed length, or lower bound
  int hi = 30;  // upper bound (inclusive) for uniform

  static ClipPolicy fixed(int n) { return {Mode::fixed, n, n}; }
  static ClipPolicy uniform(int lo, int hi) { return {Mode::uniform, lo, hi}; }
};

struct ClipWindow {
  int start = 0;
  int length = 0;
};

/// Draws a clip length and start frame. When the sequence is shorter than the
/// clip the window wraps around cyclically.
ClipWindow choose_window(int sequence_length, const ClipPolicy& policy, std::mt19937_64& rng);

/// Frame indices (start + i) mod T for i in [0, length).
SilhouetteSequence take_window(const SilhouetteSequence& seq, const ClipWindow& window);

SilhouetteSequence sample_clip(const SilhouetteSequence& seq, const ClipPolicy& policy, std::uint64_t seed);

/// Deterministic 64-bit seed mixing (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace mimicgait
