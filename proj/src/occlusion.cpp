#include "mimicgait/occlusion.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace mimicgait {

using nlohmann::json;

namespace {

constexpr std::pair<OcclusionKind, const char*> kKindNames[] = {
    {OcclusionKind::none, "none"},
    {OcclusionKind::top, "top"},
    {OcclusionKind::bottom, "bottom"},
    {OcclusionKind::middle, "middle"},
    {OcclusionKind::dynamic_small, "dynamic_small"},
    {OcclusionKind::dynamic_tall, "dynamic_tall"},
};

// floor() guarded against representation error just below an integer.
int floor_px(double value) { return static_cast<int>(std::floor(value + 1e-9)); }

std::vector<std::uint8_t> copy_pixels(const SilhouetteSequence& seq) {
  auto px = seq.pixels();
  return {px.begin(), px.end()};
}

}  // namespace

std::string to_string(OcclusionKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

OcclusionKind occlusion_kind_from_string(const std::string& name) {
  for (const auto& [k, n] : kKindNames) {
    if (name == n) return k;
  }
  throw ValidationError("unknown occlusion kind '" + name + "'");
}

std::vector<OcclusionKind> parse_kind_list(const std::string& comma_separated) {
  std::vector<OcclusionKind> kinds;
  std::stringstream ss(comma_separated);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) kinds.push_back(occlusion_kind_from_string(item));
  }
  return kinds;
}

std::string join_kinds(const std::vector<OcclusionKind>& kinds) {
  std::string out;
  for (std::size_t i = 0; i < kinds.size(); ++i) out += (i ? "," : "") + to_string(kinds[i]);
  return out;
}

bool is_consistent(OcclusionKind kind) {
  return kind == OcclusionKind::top || kind == OcclusionKind::bottom || kind == OcclusionKind::middle;
}

bool is_dynamic(OcclusionKind kind) {
  return kind == OcclusionKind::dynamic_small || kind == OcclusionKind::dynamic_tall;
}

void validate_spec(const OcclusionSpec& spec, const OcclusionRanges& ranges) {
  const std::string name = to_string(spec.kind);
  if (spec.kind == OcclusionKind::none) {
    if (spec.amount != 0.0) throw ValidationError("occlusion 'none' must have amount 0");
    return;
  }
  const AmountRange& r = spec.kind == OcclusionKind::dynamic_tall ? ranges.tall_width : ranges.amount;
  if (!r.contains(spec.amount)) throw ValidationError("occlusion '" + name + "': amount outside its range");
  if (is_dynamic(spec.kind)) {
    if (!ranges.speed.contains(spec.speed)) throw ValidationError("occlusion '" + name + "': speed outside its range");
  } else if (spec.speed != 0.0) {
    throw ValidationError("occlusion '" + name + "': speed is only defined for dynamic kinds");
  }
}

int VisibilityLabel::class_index(const std::vector<OcclusionKind>& class_set) const {
  auto it = std::find(class_set.begin(), class_set.end(), kind);
  return it == class_set.end() ? -1 : static_cast<int>(it - class_set.begin());
}

OcclusionSpec sample_spec(const std::vector<OcclusionKind>& allowed_kinds, std::uint64_t seed,
                          const OcclusionRanges& ranges, int frame_height, int frame_width) {
  if (allowed_kinds.empty()) throw ValidationError("sample_spec: allowed kinds must not be empty");
  std::mt19937_64 rng(seed);
  OcclusionSpec spec;
  spec.seed = seed;
  spec.kind = allowed_kinds[std::uniform_int_distribution<std::size_t>(0, allowed_kinds.size() - 1)(rng)];
  if (spec.kind == OcclusionKind::none) return spec;

  const AmountRange& r = spec.kind == OcclusionKind::dynamic_tall ? ranges.tall_width : ranges.amount;
  spec.amount = std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
  if (is_dynamic(spec.kind)) {
    spec.direction = std::bernoulli_distribution(0.5)(rng) ? PatchDirection::right_to_left : PatchDirection::left_to_right;
    spec.speed = std::uniform_real_distribution<double>(ranges.speed.lo, ranges.speed.hi)(rng);
    const int w = patch_width(spec, frame_width);
    spec.start_offset = std::uniform_int_distribution<int>(0, std::max(0, frame_width - w))(rng);
    if (spec.kind == OcclusionKind::dynamic_small) {
      const int h = patch_height(spec, frame_height);
      spec.vertical_offset = std::uniform_int_distribution<int>(0, std::max(0, frame_height - h))(rng);
    }
  }
  return spec;
}

OcclusionSpec OcclusionPolicy::draw(std::uint64_t seed) const { return sample_spec(kinds, seed, ranges); }

int occluded_rows(double amount, int height) { return std::clamp(floor_px(amount * height), 0, height); }

int middle_band_start(double amount, int height) { return (height - occluded_rows(amount, height)) / 2; }

int patch_width(const OcclusionSpec& spec, int width) { return std::clamp(floor_px(spec.amount * width), 0, width); }

int patch_height(const OcclusionSpec& spec, int height) {
  if (spec.kind == OcclusionKind::dynamic_tall) return height;
  return std::clamp(floor_px(spec.amount * height), 0, height);
}

int patch_left(const OcclusionSpec& spec, int t, int width) {
  const int shift = floor_px(spec.speed * t);
  const int x = spec.direction == PatchDirection::left_to_right ? spec.start_offset + shift : spec.start_offset - shift;
  return ((x % width) + width) % width;
}

SilhouetteSequence apply_consistent(const SilhouetteSequence& seq, const OcclusionSpec& spec) {
  if (spec.kind == OcclusionKind::none) return seq;
  if (!is_consistent(spec.kind)) throw ValidationError("apply_consistent: kind must be top, bottom or middle");
  const int H = seq.height(), W = seq.width();
  const int k = occluded_rows(spec.amount, H);
  if (k == 0) return seq;

  std::vector<std::uint8_t> out = copy_pixels(seq);
  const std::size_t per_frame = seq.frame_pixels();
  if (spec.kind == OcclusionKind::middle) {
    const int band = middle_band_start(spec.amount, H);
    for (int t = 0; t < seq.length(); ++t) {
      auto* f = out.data() + per_frame * t;
      std::fill(f + static_cast<std::size_t>(band) * W, f + static_cast<std::size_t>(band + k) * W, 0);
    }
    return seq.with_pixels(std::move(out));
  }

  // top/bottom: crop the occluded rows away, stretch the remainder back.
  const int kept = H - k;
  const int first_row = spec.kind == OcclusionKind::top ? k : 0;
  for (int t = 0; t < seq.length(); ++t) {
    auto* f = out.data() + per_frame * t;
    if (kept == 0) {
      std::fill(f, f + per_frame, 0);
      continue;
    }
    Image8 crop(kept, W);
    auto src = seq.frame(t);
    for (int r = 0; r < kept; ++r) {
      for (int c = 0; c < W; ++c) crop.at(r, c) = src[static_cast<std::size_t>(first_row + r) * W + c] ? 255 : 0;
    }
    const Image8 binary = rebinarize(resize_bilinear(crop, H, W));
    std::copy(binary.pixels.begin(), binary.pixels.end(), f);
  }
  return seq.with_pixels(std::move(out));
}

SilhouetteSequence apply_dynamic(const SilhouetteSequence& seq, const OcclusionSpec& spec) {
  if (!is_dynamic(spec.kind)) throw ValidationError("apply_dynamic: kind must be dynamic_small or dynamic_tall");
  const int H = seq.height(), W = seq.width();
  const int w = patch_width(spec, W);
  const int h = patch_height(spec, H);
  const int top = spec.kind == OcclusionKind::dynamic_tall ? 0 : std::clamp(spec.vertical_offset, 0, H - h);
  std::vector<std::uint8_t> out = copy_pixels(seq);
  const std::size_t per_frame = seq.frame_pixels();
  for (int t = 0; t < seq.length(); ++t) {
    auto* f = out.data() + per_frame * t;
    const int left = patch_left(spec, t, W);
    for (int dx = 0; dx < w; ++dx) {
      const int c = (left + dx) % W;
      for (int r = top; r < top + h; ++r) f[static_cast<std::size_t>(r) * W + c] = 0;
    }
  }
  return seq.with_pixels(std::move(out));
}

OccludedSequence apply(const SilhouetteSequence& seq, const OcclusionSpec& spec) {
  if (spec.kind == OcclusionKind::none) return {seq, {OcclusionKind::none, 0.0}};
  SilhouetteSequence out = is_dynamic(spec.kind) ? apply_dynamic(seq, spec) : apply_consistent(seq, spec);
  return {std::move(out), {spec.kind, spec.amount}};
}

SilhouetteSequence flip_mid_video(const SilhouetteSequence& seq, const OcclusionSpec& first,
                                  const OcclusionSpec& second) {
  auto consistent_or_none = [](OcclusionKind k) { return k == OcclusionKind::none || is_consistent(k); };
  if (!consistent_or_none(first.kind) || !consistent_or_none(second.kind)) {
    throw ValidationError("flip_mid_video: only consistent occlusions can be flipped");
  }
  const SilhouetteSequence a = apply(seq, first).sequence;
  const SilhouetteSequence b = apply(seq, second).sequence;
  const int split = (seq.length() + 1) / 2;
  std::vector<std::uint8_t> out(a.pixels().begin(), a.pixels().end());
  const std::size_t per_frame = seq.frame_pixels();
  std::copy(b.pixels().begin() + static_cast<std::ptrdiff_t>(per_frame * split), b.pixels().end(),
            out.begin() + static_cast<std::ptrdiff_t>(per_frame * split));
  return seq.with_pixels(std::move(out));
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

void to_json(json& j, const OcclusionSpec& spec) {
  j = json{{"kind", to_string(spec.kind)}, {"amount", spec.amount}, {"seed", spec.seed}};
  if (is_dynamic(spec.kind)) {
    j["direction"] = spec.direction == PatchDirection::left_to_right ? "left_to_right" : "right_to_left";
    j["speed"] = spec.speed;
    j["start_offset"] = spec.start_offset;
    if (spec.kind == OcclusionKind::dynamic_small) j["vertical_offset"] = spec.vertical_offset;
  }
}

void from_json(const json& j, OcclusionSpec& spec) {
  spec = OcclusionSpec{};
  spec.kind = occlusion_kind_from_string(j.at("kind").get<std::string>());
  spec.amount = j.value("amount", 0.0);
  spec.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("direction")) {
    const auto dir = j.at("direction").get<std::string>();
    if (dir == "left_to_right") {
      spec.direction = PatchDirection::left_to_right;
    } else if (dir == "right_to_left") {
      spec.direction = PatchDirection::right_to_left;
    } else {
      throw ValidationError("unknown patch direction '" + dir + "'");
    }
  }
  spec.speed = j.value("speed", 0.0);
  spec.start_offset = j.value("start_offset", 0);
  spec.vertical_offset = j.value("vertical_offset", 0);
}

void to_json(json& j, const AmountRange& range) { j = json::array({range.lo, range.hi}); }

void from_json(const json& j, AmountRange& range) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("range must be a [lo, hi] pair");
  range.lo = j[0].get<double>();
  range.hi = j[1].get<double>();
  if (range.hi < range.lo) throw ValidationError("range must satisfy lo <= hi");
}

void to_json(json& j, const OcclusionRanges& ranges) {
  j = json{{"amount", ranges.amount}, {"tall_width", ranges.tall_width}, {"speed", ranges.speed}};
}

void from_json(const json& j, OcclusionRanges& ranges) {
  ranges = OcclusionRanges{};
  if (j.contains("amount")) ranges.amount = j.at("amount").get<AmountRange>();
  if (j.contains("tall_width")) ranges.tall_width = j.at("tall_width").get<AmountRange>();
  if (j.contains("speed")) ranges.speed = j.at("speed").get<AmountRange>();
}

}  // namespace mimicgait
