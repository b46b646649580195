#include "mimicgait/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#ifndef MIMICGAIT_GIT_VERSION
#define MIMICGAIT_GIT_VERSION "unknown"
#endif

namespace mimicgait {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'G', 'C', 'K'};
constexpr std::uint32_t kContainerVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& file) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ValidationError("truncated checkpoint " + file.string());
  return v;
}

void load_into(torch::nn::Module& module, const NamedTensors& tensors, const std::string& prefix,
               const std::filesystem::path& file) {
  torch::NoGradGuard guard;
  for (auto& item : module.named_parameters(true)) {
    const auto name = prefix + item.key();
    auto it = std::find_if(tensors.begin(), tensors.end(), [&](const auto& t) { return t.first == name; });
    if (it == tensors.end()) throw ValidationError(file.string() + ": missing tensor '" + name + "'");
    if (!it->second.sizes().equals(item.value().sizes())) {
      throw ValidationError(file.string() + ": shape mismatch for '" + name + "'");
    }
    item.value().copy_(it->second);
  }
}

void add_module(NamedTensors& out, const torch::nn::Module& module, const std::string& prefix) {
  for (const auto& item : module.named_parameters(true)) out.emplace_back(prefix + item.key(), item.value().detach());
}

NamedTensors with_prefix(const NamedTensors& in, const std::string& prefix) {
  NamedTensors out;
  for (const auto& [name, t] : in) {
    if (name.rfind(prefix, 0) == 0) out.emplace_back(name.substr(prefix.size()), t);
  }
  return out;
}

json base_meta(const std::string& kind, const json& extra) {
  json meta = extra.is_object() ? extra : json::object();
  meta["kind"] = kind;
  meta["version"] = version_string();
  return meta;
}

}  // namespace

std::string version_string() { return MIMICGAIT_GIT_VERSION; }

void write_container(const std::filesystem::path& file, const json& meta, const NamedTensors& tensors) {
  json header = meta;
  json table = json::array();
  std::uint64_t offset = 0;
  std::vector<torch::Tensor> payloads;
  for (const auto& [name, t] : tensors) {
    auto flat = t.detach().to(torch::kCPU, torch::kFloat32).contiguous();
    table.push_back({{"name", name}, {"shape", flat.sizes().vec()}, {"offset", offset}, {"numel", flat.numel()}});
    offset += static_cast<std::uint64_t>(flat.numel()) * sizeof(float);
    payloads.push_back(flat);
  }
  header["tensors"] = table;
  const auto text = header.dump();

  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary);
  if (!os) throw ValidationError("cannot write checkpoint " + file.string());
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kContainerVersion);
  put<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : payloads) {
    os.write(static_cast<const char*>(p.data_ptr()), static_cast<std::streamsize>(p.numel() * sizeof(float)));
  }
  if (!os) throw ValidationError("failed writing checkpoint " + file.string());
}

std::pair<json, NamedTensors> read_container(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw ValidationError("cannot open checkpoint " + file.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw ValidationError(file.string() + " is not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(is, file);
  if (version != kContainerVersion) {
    throw ValidationError(file.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(is, file);
  if (header_len > (1ULL << 30)) throw ValidationError(file.string() + ": implausible header length");
  std::string text(header_len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw ValidationError("truncated checkpoint " + file.string());
  }
  json meta;
  try {
    meta = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(file.string() + ": corrupt header: " + e.what());
  }
  const auto data_start = is.tellg();
  NamedTensors tensors;
  for (const auto& entry : meta.at("tensors")) {
    const auto shape = entry.at("shape").get<std::vector<int64_t>>();
    const auto numel = entry.at("numel").get<int64_t>();
    auto t = torch::empty(shape, torch::kFloat32);
    if (t.numel() != numel) throw ValidationError(file.string() + ": inconsistent tensor table");
    is.seekg(data_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
    if (!is.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(numel * sizeof(float)))) {
      throw ValidationError("truncated checkpoint " + file.string());
    }
    tensors.emplace_back(entry.at("name").get<std::string>(), t);
  }
  meta.erase("tensors");
  return {meta, tensors};
}

void save_encoder(const GaitEncoder& model, const std::filesystem::path& file, const json& extra) {
  json meta = base_meta("encoder", extra);
  meta["backbone"] = model.config();
  meta["guided"] = model.guided();
  NamedTensors tensors;
  add_module(tensors, *model.backbone(), "backbone.");
  if (model.guided()) {
    add_module(tensors, *model.injection(), "injection.");
    meta["ven_config"] = model.ven()->config();
    for (const auto& [name, t] : model.ven()->state()) tensors.emplace_back("ven." + name, t);
  }
  write_container(file, meta, tensors);
}

LoadedEncoder load_encoder(const std::filesystem::path& file) {
  auto [meta, tensors] = read_container(file);
  if (meta.value("kind", "") != "encoder") throw ValidationError(file.string() + " is not an encoder checkpoint");
  const auto config = meta.at("backbone").get<BackboneConfig>();
  std::shared_ptr<const FrozenVen> ven;
  if (meta.value("guided", false)) {
    ven = std::make_shared<const FrozenVen>(
        FrozenVen::from_state(with_prefix(tensors, "ven."), meta.at("ven_config").get<VenConfig>()));
  }
  auto model = GaitEncoder::create(config, 0, ven);
  load_into(*model.backbone(), tensors, "backbone.", file);
  if (ven) load_into(*model.injection().ptr(), tensors, "injection.", file);
  return {std::move(model), std::move(meta)};
}

void save_ven(const FrozenVen& ven, const std::filesystem::path& file, const json& extra) {
  json meta = base_meta("ven", extra);
  meta["ven_config"] = ven.config();
  write_container(file, meta, ven.state());
}

std::shared_ptr<const FrozenVen> load_ven(const std::filesystem::path& file) {
  auto [meta, tensors] = read_container(file);
  if (meta.value("kind", "") != "ven") throw ValidationError(file.string() + " is not a VEN checkpoint");
  return std::make_shared<const FrozenVen>(FrozenVen::from_state(tensors, meta.at("ven_config").get<VenConfig>()));
}

}  // namespace mimicgait
