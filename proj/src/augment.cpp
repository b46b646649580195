#include "mimicgait/augment.hpp"

#include <opencv2/imgproc.hpp>

#include <array>
#include <random>

namespace mimicgait {

using nlohmann::json;

void validate(const AugmentConfig& c) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(c.flip_prob) || !prob(c.crop_prob) || !prob(c.perspective_prob)) {
    throw ValidationError("augment: probabilities must lie in [0, 1]");
  }
  if (c.crop_max < 0.0 || c.crop_max >= 0.5) throw ValidationError("augment: crop_max must lie in [0, 0.5)");
  if (c.perspective_scale < 0.0 || c.perspective_scale > 1.0) {
    throw ValidationError("augment: perspective_scale must lie in [0, 1]");
  }
}

void to_json(json& j, const AugmentConfig& c) {
  j = {{"flip_prob", c.flip_prob},
       {"crop_prob", c.crop_prob},
       {"crop_max", c.crop_max},
       {"perspective_prob", c.perspective_prob},
       {"perspective_scale", c.perspective_scale}};
}

void from_json(const json& j, AugmentConfig& c) {
  c = AugmentConfig{};
  c.flip_prob = j.value("flip_prob", c.flip_prob);
  c.crop_prob = j.value("crop_prob", c.crop_prob);
  c.crop_max = j.value("crop_max", c.crop_max);
  c.perspective_prob = j.value("perspective_prob", c.perspective_prob);
  c.perspective_scale = j.value("perspective_scale", c.perspective_scale);
  validate(c);
}

SilhouetteSequence augment(const SilhouetteSequence& seq, const AugmentConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const bool flip = u(rng) < config.flip_prob;
  const bool crop = u(rng) < config.crop_prob && config.crop_max > 0.0;
  const bool warp = u(rng) < config.perspective_prob && config.perspective_scale > 0.0;
  if (!flip && !crop && !warp) return seq;

  const int H = seq.height(), W = seq.width();
  const float x1 = static_cast<float>(W - 1), y1 = static_cast<float>(H - 1);
  // source quad (TL, TR, BR, BL) that lands on the full output frame
  std::array<cv::Point2f, 4> src{cv::Point2f{0, 0}, {x1, 0}, {x1, y1}, {0, y1}};
  if (crop) {
    const double top = u(rng) * config.crop_max * H, bottom = u(rng) * config.crop_max * H;
    const double left = u(rng) * config.crop_max * W, right = u(rng) * config.crop_max * W;
    src = {cv::Point2f(static_cast<float>(left), static_cast<float>(top)),
           {static_cast<float>(x1 - right), static_cast<float>(top)},
           {static_cast<float>(x1 - right), static_cast<float>(y1 - bottom)},
           {static_cast<float>(left), static_cast<float>(y1 - bottom)}};
  }
  if (warp) {
    // each corner moves inward by up to scale * half the frame size
    const double dx = config.perspective_scale * W / 2, dy = config.perspective_scale * H / 2;
    const std::array<int, 4> sx{1, -1, -1, 1}, sy{1, 1, -1, -1};
    for (std::size_t c = 0; c < 4; ++c) {
      src[c].x += static_cast<float>(sx[c] * u(rng) * dx);
      src[c].y += static_cast<float>(sy[c] * u(rng) * dy);
    }
  }
  std::array<cv::Point2f, 4> dst{cv::Point2f{0, 0}, {x1, 0}, {x1, y1}, {0, y1}};
  if (flip) {
    std::swap(dst[0], dst[1]);
    std::swap(dst[2], dst[3]);
  }
  const cv::Mat M = cv::getPerspectiveTransform(src.data(), dst.data());

  std::vector<std::uint8_t> out(seq.pixels().size());
  cv::Mat in_frame(H, W, CV_8U), out_frame;
  for (int t = 0; t < seq.length(); ++t) {
    const auto f = seq.frame(t);
    for (std::size_t p = 0; p < f.size(); ++p) in_frame.data[p] = f[p] ? 255 : 0;
    cv::warpPerspective(in_frame, out_frame, M, cv::Size(W, H), cv::INTER_LINEAR, cv::BORDER_CONSTANT, 0);
    auto* o = out.data() + static_cast<std::size_t>(t) * seq.frame_pixels();
    for (std::size_t p = 0; p < f.size(); ++p) o[p] = out_frame.data[p] >= kBinarizeThreshold ? 1 : 0;
  }
  return seq.with_pixels(std::move(out));
}

}  // namespace mimicgait
