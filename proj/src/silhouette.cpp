#include "mimicgait/silhouette.hpp"

#include <algorithm>
#include <numeric>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

namespace mimicgait {

Image8::Image8(int h, int w, std::uint8_t fill)
    : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

bool Image8::is_binary() const {
  return std::all_of(pixels.begin(), pixels.end(), [](std::uint8_t v) { return v <= 1; });
}

std::size_t Image8::count_nonzero() const {
  return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(), [](std::uint8_t v) { return v != 0; }));
}

BoundingBox foreground_box(const Image8& frame) {
  int top = frame.height, bottom = -1, left = frame.width, right = -1;
  for (int r = 0; r < frame.height; ++r) {
    for (int c = 0; c < frame.width; ++c) {
      if (frame.at(r, c) != 0) {
        top = std::min(top, r);
        bottom = std::max(bottom, r);
        left = std::min(left, c);
        right = std::max(right, c);
      }
    }
  }
  if (bottom < 0) return {};
  return {top, left, bottom - top + 1, right - left + 1};
}

// ---------------------------------------------------------------------------
// SilhouetteSequence
// ---------------------------------------------------------------------------

SilhouetteSequence::SilhouetteSequence(std::vector<std::uint8_t> pixels, std::vector<bool> valid, int height,
                                       int width, std::string subject_id, std::string sequence_id, double fps)
    : valid_(std::move(valid)),
      height_(height),
      width_(width),
      subject_id_(std::move(subject_id)),
      sequence_id_(std::move(sequence_id)),
      fps_(fps) {
  if (height <= 0 || width <= 0) throw ValidationError("silhouette sequence needs positive frame size");
  const std::size_t per_frame = static_cast<std::size_t>(height) * width;
  if (pixels.empty() || pixels.size() % per_frame != 0) {
    throw ValidationError("silhouette sequence '" + sequence_id_ + "': pixel buffer is not a whole number of frames");
  }
  length_ = static_cast<int>(pixels.size() / per_frame);
  if (valid_.size() != static_cast<std::size_t>(length_)) {
    throw ValidationError("silhouette sequence '" + sequence_id_ + "': validity mask length mismatch");
  }
  for (int t = 0; t < length_; ++t) {
    const auto* f = pixels.data() + per_frame * t;
    bool any = false;
    for (std::size_t i = 0; i < per_frame; ++i) {
      if (f[i] > 1) throw ValidationError("silhouette sequence '" + sequence_id_ + "': non-binary pixel value");
      any = any || f[i] != 0;
    }
    if (!valid_[t] && any) {
      throw ValidationError("silhouette sequence '" + sequence_id_ + "': frame flagged invalid is not empty");
    }
  }
  pixels_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(pixels));
}

SilhouetteSequence SilhouetteSequence::from_frames(const std::vector<Image8>& frames, std::string subject_id,
                                                   std::string sequence_id, double fps) {
  if (frames.empty()) throw ValidationError("silhouette sequence needs at least one frame");
  const int h = frames.front().height, w = frames.front().width;
  std::vector<std::uint8_t> pixels;
  pixels.reserve(static_cast<std::size_t>(h) * w * frames.size());
  std::vector<bool> valid;
  for (const auto& f : frames) {
    if (f.height != h || f.width != w) throw ValidationError("frames of one sequence must share a size");
    pixels.insert(pixels.end(), f.pixels.begin(), f.pixels.end());
    valid.push_back(f.count_nonzero() > 0);
  }
  return {std::move(pixels), std::move(valid), h, w, std::move(subject_id), std::move(sequence_id), fps};
}

std::span<const std::uint8_t> SilhouetteSequence::frame(int t) const {
  return std::span<const std::uint8_t>(*pixels_).subspan(frame_pixels() * t, frame_pixels());
}

Image8 SilhouetteSequence::frame_image(int t) const {
  Image8 img(height_, width_);
  auto f = frame(t);
  std::copy(f.begin(), f.end(), img.pixels.begin());
  return img;
}

int SilhouetteSequence::valid_count() const {
  return static_cast<int>(std::count(valid_.begin(), valid_.end(), true));
}

SilhouetteSequence SilhouetteSequence::with_pixels(std::vector<std::uint8_t> pixels) const {
  if (pixels.size() != pixels_->size()) throw ValidationError("with_pixels: size mismatch");
  std::vector<bool> valid(valid_);
  const std::size_t per_frame = frame_pixels();
  for (int t = 0; t < length_; ++t) {
    const auto* f = pixels.data() + per_frame * t;
    valid[t] = valid[t] && std::any_of(f, f + per_frame, [](std::uint8_t v) { return v != 0; });
  }
  return {std::move(pixels), std::move(valid), height_, width_, subject_id_, sequence_id_, fps_};
}

SilhouetteSequence SilhouetteSequence::with_ids(std::string subject_id, std::string sequence_id) const {
  SilhouetteSequence copy(*this);
  copy.subject_id_ = std::move(subject_id);
  copy.sequence_id_ = std::move(sequence_id);
  return copy;
}

bool SilhouetteSequence::same_content(const SilhouetteSequence& other) const {
  return height_ == other.height_ && width_ == other.width_ && valid_ == other.valid_ && *pixels_ == *other.pixels_;
}

// ---------------------------------------------------------------------------
// Frame operations
// ---------------------------------------------------------------------------

Image8 rebinarize(const Image8& frame) {
  Image8 out(frame.height, frame.width);
  std::transform(frame.pixels.begin(), frame.pixels.end(), out.pixels.begin(),
                 [](std::uint8_t v) -> std::uint8_t { return v >= kBinarizeThreshold ? 1 : 0; });
  return out;
}

Image8 resize_bilinear(const Image8& image, int height, int width) {
  if (image.height == height && image.width == width) return image;
  // cv::Mat wraps the buffer without copying; the const_cast never leads to a write.
  cv::Mat src(image.height, image.width, CV_8UC1, const_cast<std::uint8_t*>(image.pixels.data()));
  Image8 out(height, width);
  cv::Mat dst(height, width, CV_8UC1, out.pixels.data());
  cv::resize(src, dst, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  return out;
}

namespace {

// Shifts columns so the foreground box sits at left = (W - w) / 2.
Image8 recenter_columns(const Image8& frame) {
  const BoundingBox box = foreground_box(frame);
  if (box.height == 0) return frame;
  const int target_left = (frame.width - box.width) / 2;
  const int shift = target_left - box.left;
  if (shift == 0) return frame;
  Image8 out(frame.height, frame.width);
  for (int r = 0; r < frame.height; ++r) {
    for (int c = 0; c < frame.width; ++c) {
      const int src = c - shift;
      if (src >= 0 && src < frame.width) out.at(r, c) = frame.at(r, src);
    }
  }
  return out;
}

}  // namespace

CenteredFrame center_and_resize(const Image8& raw_frame, int target_height, int target_width) {
  if (!raw_frame.is_binary()) throw ValidationError("center_and_resize: input frame is not binary");
  const BoundingBox box = foreground_box(raw_frame);
  if (box.height == 0) return {Image8(target_height, target_width), false};

  Image8 crop(box.height, box.width);
  for (int r = 0; r < box.height; ++r) {
    for (int c = 0; c < box.width; ++c) crop.at(r, c) = raw_frame.at(box.top + r, box.left + c) ? 255 : 0;
  }
  const double scale = static_cast<double>(target_height) / box.height;
  const int scaled_width = std::max(1, static_cast<int>(std::lround(box.width * scale)));
  const Image8 scaled = resize_bilinear(crop, target_height, scaled_width);

  Image8 canvas(target_height, target_width);
  const int offset = (target_width - scaled_width) / 2;  // negative when the subject is wider than the frame
  for (int r = 0; r < target_height; ++r) {
    for (int c = 0; c < scaled_width; ++c) {
      const int dst = c + offset;
      if (dst >= 0 && dst < target_width) canvas.at(r, dst) = scaled.at(r, c);
    }
  }
  Image8 binary = recenter_columns(rebinarize(canvas));
  const bool valid = binary.count_nonzero() > 0;
  return {std::move(binary), valid};
}

SilhouetteSequence preprocess_frames(const std::vector<Image8>& raw_frames, std::string subject_id,
                                     std::string sequence_id, double fps) {
  if (raw_frames.empty()) throw ValidationError("sequence '" + sequence_id + "' has no frames");
  std::vector<std::uint8_t> pixels;
  pixels.reserve(static_cast<std::size_t>(kFrameSize) * kFrameSize * raw_frames.size());
  std::vector<bool> valid;
  for (const auto& raw : raw_frames) {
    auto centered = center_and_resize(raw);
    pixels.insert(pixels.end(), centered.frame.pixels.begin(), centered.frame.pixels.end());
    valid.push_back(centered.valid);
  }
  return {std::move(pixels), std::move(valid), kFrameSize, kFrameSize, std::move(subject_id), std::move(sequence_id),
          fps};
}

// ---------------------------------------------------------------------------
// Clip sampling
// ---------------------------------------------------------------------------

ClipWindow choose_window(int sequence_length, const ClipPolicy& policy, std::mt19937_64& rng) {
  if (sequence_length < 1) throw ValidationError("choose_window: empty sequence");
  if (policy.lo < 1 || policy.hi < policy.lo) throw ValidationError("choose_window: invalid clip policy");
  int n = policy.lo;
  if (policy.mode == ClipPolicy::Mode::uniform) n = std::uniform_int_distribution<int>(policy.lo, policy.hi)(rng);
  const int max_start = sequence_length >= n ? sequence_length - n : sequence_length - 1;
  const int start = std::uniform_int_distribution<int>(0, max_start)(rng);
  return {start, n};
}

SilhouetteSequence take_window(const SilhouetteSequence& seq, const ClipWindow& window) {
  const std::size_t per_frame = seq.frame_pixels();
  std::vector<std::uint8_t> pixels(per_frame * window.length);
  std::vector<bool> valid(window.length);
  for (int i = 0; i < window.length; ++i) {
    const int t = (window.start + i) % seq.length();
    auto f = seq.frame(t);
    std::copy(f.begin(), f.end(), pixels.begin() + static_cast<std::ptrdiff_t>(per_frame * i));
    valid[i] = seq.valid(t);
  }
  return {std::move(pixels), std::move(valid), seq.height(), seq.width(), seq.subject_id(), seq.sequence_id(),
          seq.fps()};
}

SilhouetteSequence sample_clip(const SilhouetteSequence& seq, const ClipPolicy& policy, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return take_window(seq, choose_window(seq.length(), policy, rng));
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace mimicgait
