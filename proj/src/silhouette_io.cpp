#include "mimicgait/silhouette_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include <opencv2/imgcodecs.hpp>

namespace mimicgait {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json sequence_meta(const SilhouetteSequence& seq) {
  return {{"subject_id", seq.subject_id()}, {"sequence_id", seq.sequence_id()}, {"fps", seq.fps()}};
}

std::string frame_name(int t) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << t << ".png";
  return os.str();
}

template <typename T>
void put_le(std::vector<char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const std::vector<char>& in, std::size_t& pos, const fs::path& file) {
  if (pos + sizeof(T) > in.size()) throw ValidationError(file.string() + ": truncated packed header");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i));
  }
  pos += sizeof(T);
  return value;
}

}  // namespace

void write_frame_dir(const SilhouetteSequence& seq, const fs::path& dir) {
  fs::create_directories(dir);
  for (int t = 0; t < seq.length(); ++t) {
    Image8 img = seq.frame_image(t);
    for (auto& v : img.pixels) v = v ? 255 : 0;
    cv::Mat mat(img.height, img.width, CV_8UC1, img.pixels.data());
    const auto path = dir / frame_name(t);
    if (!cv::imwrite(path.string(), mat)) throw std::runtime_error("cannot write frame " + path.string());
  }
  std::ofstream meta(dir / kMetaFileName);
  if (!meta) throw std::runtime_error("cannot write " + (dir / kMetaFileName).string());
  meta << sequence_meta(seq).dump(2) << '\n';
}

SilhouetteSequence read_frame_dir(const fs::path& dir) {
  const auto meta_path = dir / kMetaFileName;
  if (!fs::exists(meta_path)) throw ValidationError(dir.string() + ": missing " + kMetaFileName);
  json meta;
  try {
    std::ifstream in(meta_path);
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(meta_path.string() + ": " + e.what());
  }
  if (!meta.contains("subject_id")) throw ValidationError(meta_path.string() + ": missing subject_id");

  std::vector<fs::path> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") frames.push_back(entry.path());
  }
  std::sort(frames.begin(), frames.end());
  if (frames.empty()) throw ValidationError(dir.string() + ": no frame images");

  std::vector<Image8> raw;
  raw.reserve(frames.size());
  bool needs_resize = false;
  for (const auto& path : frames) {
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (mat.empty() || mat.type() != CV_8UC1) throw ValidationError(path.string() + ": unreadable or malformed frame");
    Image8 img(mat.rows, mat.cols);
    for (int r = 0; r < mat.rows; ++r) std::memcpy(&img.at(r, 0), mat.ptr<std::uint8_t>(r), mat.cols);
    needs_resize = needs_resize || img.height != kFrameSize || img.width != kFrameSize;
    raw.push_back(rebinarize(img));
  }
  const std::string subject = meta.at("subject_id").get<std::string>();
  const std::string sequence = meta.value("sequence_id", dir.filename().string());
  const double fps = meta.value("fps", 30.0);
  if (needs_resize) return preprocess_frames(raw, subject, sequence, fps);
  return SilhouetteSequence::from_frames(raw, subject, sequence, fps);
}

void write_packed(const SilhouetteSequence& seq, const fs::path& file) {
  std::vector<char> out(std::begin(kPackedMagic), std::end(kPackedMagic));
  put_le<std::uint16_t>(out, kPackedVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.length()));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(seq.height()));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(seq.width()));
  const std::string meta = sequence_meta(seq).dump();
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out.insert(out.end(), meta.begin(), meta.end());

  const std::size_t bytes_per_frame = (seq.frame_pixels() + 7) / 8;
  for (int t = 0; t < seq.length(); ++t) {
    std::vector<char> packed(bytes_per_frame, 0);
    auto f = seq.frame(t);
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (1 << (i % 8)));
    }
    out.insert(out.end(), packed.begin(), packed.end());
  }
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + file.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
}

SilhouetteSequence read_packed(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw ValidationError(file.string() + ": cannot open packed sequence");
  std::vector<char> in((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (in.size() < 4 || std::memcmp(in.data(), kPackedMagic, 4) != 0) {
    throw ValidationError(file.string() + ": bad magic in packed header");
  }
  std::size_t pos = 4;
  const auto version = get_le<std::uint16_t>(in, pos, file);
  if (version != kPackedVersion) throw ValidationError(file.string() + ": unsupported packed version");
  const auto length = get_le<std::uint32_t>(in, pos, file);
  const auto height = get_le<std::uint16_t>(in, pos, file);
  const auto width = get_le<std::uint16_t>(in, pos, file);
  const auto meta_len = get_le<std::uint32_t>(in, pos, file);
  if (length == 0 || height == 0 || width == 0) throw ValidationError(file.string() + ": corrupt packed header");
  if (pos + meta_len > in.size()) throw ValidationError(file.string() + ": truncated packed metadata");
  json meta;
  try {
    meta = json::parse(in.begin() + static_cast<std::ptrdiff_t>(pos),
                       in.begin() + static_cast<std::ptrdiff_t>(pos + meta_len));
  } catch (const json::exception& e) {
    throw ValidationError(file.string() + ": corrupt packed metadata: " + e.what());
  }
  pos += meta_len;

  const std::size_t per_frame = static_cast<std::size_t>(height) * width;
  const std::size_t bytes_per_frame = (per_frame + 7) / 8;
  if (in.size() - pos != bytes_per_frame * length) throw ValidationError(file.string() + ": frame payload size mismatch");
  std::vector<std::uint8_t> pixels(per_frame * length);
  std::vector<bool> valid(length, false);
  for (std::size_t t = 0; t < length; ++t) {
    const char* src = in.data() + pos + t * bytes_per_frame;
    for (std::size_t i = 0; i < per_frame; ++i) {
      const std::uint8_t bit = (static_cast<unsigned char>(src[i / 8]) >> (i % 8)) & 1U;
      pixels[t * per_frame + i] = bit;
      valid[t] = valid[t] || bit;
    }
  }
  return {std::move(pixels),
          std::move(valid),
          height,
          width,
          meta.value("subject_id", std::string("unlabeled")),
          meta.value("sequence_id", file.stem().string()),
          meta.value("fps", 30.0)};
}

}  // namespace mimicgait
