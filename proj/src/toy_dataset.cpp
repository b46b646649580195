#include "mimicgait/toy_dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "mimicgait/silhouette_io.hpp"

namespace mimicgait {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kFreqLo = 0.04, kFreqHi = 0.10;
constexpr double kTorsoLo = 0.08, kTorsoHi = 0.32;
constexpr double kHeadRadius = 0.06;
constexpr double kShoulderY = 0.14;
constexpr double kFootLength = 0.07;
constexpr double kGroundClearance = 0.02;

struct Vec2 {
  double x, y;
};

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 limb_end(Vec2 from, double angle, double length) {
  // angle measured from straight down, positive towards the walking direction
  return {from.x + length * std::sin(angle), from.y + length * std::cos(angle)};
}

// Rasterizes shapes given in body units onto a binary canvas.
class Canvas {
 public:
  Canvas(int size, double pixels_per_unit, Vec2 origin_px)
      : image_(size, size), ppu_(pixels_per_unit), origin_(origin_px) {}

  void capsule(Vec2 a, Vec2 b, double radius) {
    const Vec2 pa = to_px(a), pb = to_px(b);
    const double r = radius * ppu_;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(pa.x, pb.x) - r)));
    const int x1 = std::min(image_.width - 1, static_cast<int>(std::ceil(std::max(pa.x, pb.x) + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(pa.y, pb.y) - r)));
    const int y1 = std::min(image_.height - 1, static_cast<int>(std::ceil(std::max(pa.y, pb.y) + r)));
    const double dx = pb.x - pa.x, dy = pb.y - pa.y;
    const double len2 = dx * dx + dy * dy;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        double u = len2 > 0 ? ((px - pa.x) * dx + (py - pa.y) * dy) / len2 : 0.0;
        u = std::clamp(u, 0.0, 1.0);
        const double ex = pa.x + u * dx - px, ey = pa.y + u * dy - py;
        if (ex * ex + ey * ey <= r * r) image_.at(y, x) = 1;
      }
    }
  }

  void disc(Vec2 centre, double radius) { capsule(centre, centre, radius); }

  void rect(Vec2 top_left, Vec2 bottom_right) {
    const Vec2 a = to_px(top_left), b = to_px(bottom_right);
    for (int y = std::max(0, static_cast<int>(std::lround(a.y))); y < std::min(image_.height, static_cast<int>(std::lround(b.y))); ++y) {
      for (int x = std::max(0, static_cast<int>(std::lround(a.x))); x < std::min(image_.width, static_cast<int>(std::lround(b.x))); ++x) {
        image_.at(y, x) = 1;
      }
    }
  }

  Image8 take() { return std::move(image_); }

 private:
  Vec2 to_px(Vec2 p) const { return {origin_.x + p.x * ppu_, origin_.y + p.y * ppu_}; }

  Image8 image_;
  double ppu_;
  Vec2 origin_;
};

void flip_boundary(Image8& img, double probability, std::mt19937_64& rng) {
  if (probability <= 0) return;
  const Image8 src = img;
  std::bernoulli_distribution flip(probability);
  for (int r = 1; r + 1 < src.height; ++r) {
    for (int c = 1; c + 1 < src.width; ++c) {
      const auto v = src.at(r, c);
      const bool boundary = src.at(r - 1, c) != v || src.at(r + 1, c) != v || src.at(r, c - 1) != v || src.at(r, c + 1) != v;
      if (boundary && flip(rng)) img.at(r, c) = v ? 0 : 1;
    }
  }
}

WalkerVariation sequence_variation(int identity, int index, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(identity)), 1000 + static_cast<std::uint64_t>(index)));
  WalkerVariation v;
  v.phase = std::uniform_real_distribution<double>(0.0, 2 * std::numbers::pi)(rng);
  v.view_scale = std::uniform_real_distribution<double>(0.85, 1.0)(rng);
  v.noise_seed = rng();
  return v;
}

}  // namespace

WalkerParams walker_params(int identity_id, int n_identities, std::uint64_t dataset_seed) {
  if (identity_id < 0 || identity_id >= n_identities) throw ValidationError("walker_params: identity out of range");
  const int grid_f = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_identities))));
  const int grid_w = (n_identities + grid_f - 1) / grid_f;
  std::vector<int> cells(static_cast<std::size_t>(grid_f * grid_w));
  std::iota(cells.begin(), cells.end(), 0);
  std::mt19937_64 layout_rng(mix_seed(dataset_seed, 0xC0FFEE));
  std::shuffle(cells.begin(), cells.end(), layout_rng);
  const int cell = cells[static_cast<std::size_t>(identity_id)];

  std::mt19937_64 rng(mix_seed(dataset_seed, static_cast<std::uint64_t>(identity_id) + 1));
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  WalkerParams p;
  p.identity_id = identity_id;
  p.gait_frequency = kFreqLo + (cell % grid_f + 0.5 + uniform(-0.15, 0.15)) / grid_f * (kFreqHi - kFreqLo);
  p.torso_width = kTorsoLo + (cell / grid_f + 0.5 + uniform(-0.15, 0.15)) / grid_w * (kTorsoHi - kTorsoLo);
  p.limb_length_ratios = {uniform(0.21, 0.29), uniform(0.20, 0.28), uniform(0.13, 0.20), uniform(0.11, 0.18)};
  p.stride_amplitude = uniform(0.35, 0.50);
  p.arm_swing = uniform(0.8, 1.4);
  p.step_asymmetry = uniform(0.2, 0.35);
  p.noise_level = uniform(0.01, 0.04);
  return p;
}

std::vector<Image8> render_walker(const WalkerParams& params, const WalkerVariation& variation, int frames,
                                  int canvas) {
  const auto [thigh, shin, upper_arm, forearm] = params.limb_length_ratios;
  const double leg = thigh + shin;
  const double hip_y = 1.0 - leg - kGroundClearance;
  const double ppu = 0.78 * canvas * variation.view_scale;
  const Vec2 origin{canvas / 2.0, (canvas - ppu) / 2.0};
  std::mt19937_64 noise_rng(variation.noise_seed);
  std::vector<Image8> out;
  out.reserve(static_cast<std::size_t>(frames));

  for (int t = 0; t < frames; ++t) {
    const double psi = 2 * std::numbers::pi * params.gait_frequency * t + variation.phase;
    Canvas c(canvas, ppu, origin);
    const Vec2 hip{0.0, hip_y};
    const Vec2 shoulder{0.0, kShoulderY};

    // far side first; near limbs are drawn thicker
    for (int side = 0; side < 2; ++side) {
      const bool near = side == 1;
      const double leg_phase = near ? psi : psi + std::numbers::pi;
      // uneven step lengths give the silhouette a component at the stride frequency itself
      const double amplitude = params.stride_amplitude * (near ? 1.0 + params.step_asymmetry : 1.0 - params.step_asymmetry);
      const double hip_angle = amplitude * std::sin(leg_phase);
      const double knee_flex = 1.2 * amplitude * std::max(0.0, std::cos(leg_phase));
      const double scale = near ? 1.0 : 0.55;
      const Vec2 knee = limb_end(hip, hip_angle, thigh);
      const Vec2 ankle = limb_end(knee, hip_angle - knee_flex, shin);
      c.capsule(hip, knee, 0.045 * scale);
      c.capsule(knee, ankle, 0.035 * scale);
      c.capsule(ankle, ankle + Vec2{kFootLength, 0.0}, 0.02 * scale);

      // the far arm is hidden behind the torso in a side view
      if (!near) continue;
      const double arm_angle = -params.arm_swing * hip_angle;
      const Vec2 elbow = limb_end(shoulder, arm_angle, upper_arm);
      const Vec2 wrist = limb_end(elbow, arm_angle + 0.35, forearm);
      c.capsule(shoulder, elbow, 0.03);
      c.capsule(elbow, wrist, 0.024);
    }
    c.rect({-params.torso_width / 2, kShoulderY - 0.02}, {params.torso_width / 2, hip_y + 0.03});
    c.capsule({0.0, kHeadRadius * 2}, {0.0, kShoulderY}, 0.025);
    c.disc({0.0, kHeadRadius}, kHeadRadius);

    Image8 img = c.take();
    flip_boundary(img, params.noise_level, noise_rng);
    out.push_back(std::move(img));
  }
  return out;
}

std::string toy_subject_id(int identity) {
  std::ostringstream os;
  os << "id" << std::setw(4) << std::setfill('0') << identity;
  return os.str();
}

std::string toy_sequence_id(int identity, int index) {
  std::ostringstream os;
  os << toy_subject_id(identity) << "_s" << std::setw(2) << std::setfill('0') << index;
  return os.str();
}

std::vector<SilhouetteSequence> generate_toy_sequences(const ToyDatasetOptions& options) {
  if (options.n_identities < 2) throw ValidationError("toy dataset needs at least 2 identities");
  if (options.seqs_per_identity < 2) throw ValidationError("toy dataset needs at least 2 sequences per identity");
  if (options.frames_per_seq < 1) throw ValidationError("toy dataset needs at least 1 frame per sequence");
  std::vector<SilhouetteSequence> out;
  out.reserve(static_cast<std::size_t>(options.n_identities) * options.seqs_per_identity);
  for (int id = 0; id < options.n_identities; ++id) {
    const WalkerParams params = walker_params(id, options.n_identities, options.seed);
    for (int s = 0; s < options.seqs_per_identity; ++s) {
      const auto raw = render_walker(params, sequence_variation(id, s, options.seed), options.frames_per_seq);
      out.push_back(preprocess_frames(raw, toy_subject_id(id), toy_sequence_id(id, s), 30.0));
    }
  }
  return out;
}

void generate_toy_dataset(const ToyDatasetOptions& options, const fs::path& out, DatasetFormat format) {
  fs::create_directories(out);
  if (!fs::is_directory(out)) throw std::runtime_error("cannot create output directory " + out.string());
  for (const auto& seq : generate_toy_sequences(options)) {
    const fs::path subject_dir = out / seq.subject_id();
    if (format == DatasetFormat::frame_dirs) {
      write_frame_dir(seq, subject_dir / seq.sequence_id());
    } else {
      write_packed(seq, subject_dir / (seq.sequence_id() + kPackedExtension));
    }
  }
}

// ---------------------------------------------------------------------------
// Dataset handle
// ---------------------------------------------------------------------------

Dataset Dataset::in_memory(std::vector<SilhouetteSequence> sequences) {
  Dataset d;
  for (const auto& s : sequences) d.refs_.push_back({s.subject_id(), s.sequence_id()});
  d.memory_ = std::move(sequences);
  return d;
}

Dataset Dataset::open(const fs::path& root, DatasetFormat format) {
  if (!fs::is_directory(root)) throw ValidationError(root.string() + ": dataset root is not a directory");
  Dataset d;
  d.format_ = format;
  std::vector<fs::path> found;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (format == DatasetFormat::frame_dirs) {
      if (entry.is_regular_file() && entry.path().filename() == kMetaFileName) found.push_back(entry.path().parent_path());
    } else if (entry.is_regular_file() && entry.path().extension() == kPackedExtension) {
      found.push_back(entry.path());
    }
  }
  std::sort(found.begin(), found.end());
  for (const auto& path : found) {
    SequenceRef ref;
    if (format == DatasetFormat::frame_dirs) {
      std::ifstream in(path / kMetaFileName);
      json meta;
      try {
        meta = json::parse(in);
      } catch (const json::exception& e) {
        throw ValidationError((path / kMetaFileName).string() + ": " + e.what());
      }
      if (!meta.contains("subject_id")) throw ValidationError((path / kMetaFileName).string() + ": missing subject_id");
      ref.subject_id = meta.at("subject_id").get<std::string>();
      ref.sequence_id = meta.value("sequence_id", path.filename().string());
    } else {
      // the header is parsed up front so corrupt files are reported at ingestion
      const auto seq = read_packed(path);
      ref = {seq.subject_id(), seq.sequence_id()};
    }
    d.refs_.push_back(std::move(ref));
    d.paths_.push_back(path);
  }
  if (d.refs_.empty()) throw ValidationError(root.string() + ": no sequences found");
  return d;
}

std::optional<std::size_t> Dataset::find(const SequenceRef& ref) const {
  auto it = std::find(refs_.begin(), refs_.end(), ref);
  if (it == refs_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - refs_.begin());
}

std::vector<std::string> Dataset::subjects() const {
  std::set<std::string> s;
  for (const auto& r : refs_) s.insert(r.subject_id);
  return {s.begin(), s.end()};
}

SilhouetteSequence Dataset::load(std::size_t i) const {
  if (i >= refs_.size()) throw ValidationError("dataset index out of range");
  if (!memory_.empty()) return memory_[i];
  SilhouetteSequence seq = format_ == DatasetFormat::frame_dirs ? read_frame_dir(paths_[i]) : read_packed(paths_[i]);
  if (seq.height() != kFrameSize || seq.width() != kFrameSize) {
    throw ValidationError(paths_[i].string() + ": frames are not 64x64");
  }
  return seq;
}

SilhouetteSequence Dataset::load(const SequenceRef& ref) const {
  auto i = find(ref);
  if (!i) throw ValidationError("sequence " + ref.subject_id + "/" + ref.sequence_id + " not in dataset");
  return load(*i);
}

Dataset ingest_external(const fs::path& path, DatasetFormat format) { return Dataset::open(path, format); }

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

ProtocolSplit build_split(const std::vector<SequenceRef>& sequences, const SplitProtocol& protocol,
                          std::uint64_t seed) {
  std::map<std::string, std::vector<SequenceRef>> by_subject;
  for (const auto& r : sequences) by_subject[r.subject_id].push_back(r);
  std::mt19937_64 rng(seed);
  ProtocolSplit split;

  if (protocol.kind == SplitProtocol::Kind::grew_local) {
    split.name = "grew_local";
    for (auto& [subject, refs] : by_subject) {
      if (refs.size() < 2) throw ValidationError("grew_local split: subject '" + subject + "' has fewer than 2 sequences");
      std::sort(refs.begin(), refs.end());
      std::shuffle(refs.begin(), refs.end(), rng);
      split.gallery.push_back(refs[0]);
      split.probes.push_back(refs[1]);
    }
    return split;
  }

  if (protocol.holdout_fraction <= 0.0 || protocol.holdout_fraction > 1.0) {
    throw ValidationError("holdout split: fraction must be in (0, 1]");
  }
  split.name = "holdout";
  std::vector<std::string> subjects;
  for (const auto& [s, refs] : by_subject) subjects.push_back(s);
  std::shuffle(subjects.begin(), subjects.end(), rng);
  const auto n_held = static_cast<std::size_t>(std::ceil(protocol.holdout_fraction * static_cast<double>(subjects.size())));
  for (std::size_t i = 0; i < n_held && i < subjects.size(); ++i) {
    auto refs = by_subject[subjects[i]];
    if (refs.size() < 2) throw ValidationError("holdout split: subject '" + subjects[i] + "' has fewer than 2 sequences");
    std::sort(refs.begin(), refs.end());
    std::shuffle(refs.begin(), refs.end(), rng);
    split.gallery.push_back(refs[0]);
    split.probes.insert(split.probes.end(), refs.begin() + 1, refs.end());
  }
  return split;
}

std::vector<std::size_t> training_indices(const Dataset& dataset, const ProtocolSplit& split) {
  std::set<SequenceRef> held(split.gallery.begin(), split.gallery.end());
  held.insert(split.probes.begin(), split.probes.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!held.contains(dataset.ref(i))) out.push_back(i);
  }
  return out;
}

void to_json(json& j, const SequenceRef& ref) { j = json::array({ref.subject_id, ref.sequence_id}); }

void from_json(const json& j, SequenceRef& ref) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("sequence reference must be [subject_id, sequence_id]");
  ref.subject_id = j[0].get<std::string>();
  ref.sequence_id = j[1].get<std::string>();
}

void to_json(json& j, const ProtocolSplit& split) {
  j = json{{"name", split.name}, {"gallery", split.gallery}, {"probes", split.probes}};
}

void from_json(const json& j, ProtocolSplit& split) {
  split.name = j.value("name", std::string("custom"));
  split.gallery = j.at("gallery").get<std::vector<SequenceRef>>();
  split.probes = j.at("probes").get<std::vector<SequenceRef>>();
}

void to_json(json& j, const WalkerParams& p) {
  j = json{{"identity_id", p.identity_id},       {"limb_length_ratios", p.limb_length_ratios},
           {"torso_width", p.torso_width},       {"gait_frequency", p.gait_frequency},
           {"phase", p.phase},                   {"stride_amplitude", p.stride_amplitude},
           {"arm_swing", p.arm_swing},           {"step_asymmetry", p.step_asymmetry},           {"noise_level", p.noise_level}};
}

ProtocolSplit load_split(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError(file.string() + ": cannot open split file");
  try {
    return json::parse(in).get<ProtocolSplit>();
  } catch (const json::exception& e) {
    throw ValidationError(file.string() + ": " + e.what());
  }
}

void save_split(const ProtocolSplit& split, const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << json(split).dump(2) << '\n';
}

}  // namespace mimicgait
