#include "mimicgait/config.hpp"

#include <fstream>

namespace mimicgait {

using nlohmann::json;

TrainConfig RunConfig::default_teacher() {
  TrainConfig c;
  c.optimizer = OptimizerKind::adam;
  c.learning_rate = 1e-3;
  c.weight_decay = 0.0;
  c.iterations = 200;
  c.batch_identities = 8;
  c.seqs_per_identity = 4;
  c.clip = ClipPolicy::uniform(16, 24);
  return c;
}

VenConfig RunConfig::default_ven() {
  VenConfig c;
  c.iterations = 600;
  c.learning_rate = 1e-3;
  c.clip = ClipPolicy::uniform(16, 24);
  return c;
}

DistillConfig RunConfig::default_distill() {
  DistillConfig c;
  c.train.optimizer = OptimizerKind::adam;
  c.train.learning_rate = 1e-3;
  c.train.weight_decay = 0.0;
  c.train.iterations = 400;
  c.train.batch_identities = 8;
  c.train.seqs_per_identity = 4;
  c.train.clip = ClipPolicy::uniform(16, 24);
  return c;
}

void RunConfig::reseed(std::uint64_t new_seed) {
  seed = new_seed;
  data.seed = new_seed;
  teacher.seed = mix_seed(new_seed, 1);
  ven.seed = mix_seed(new_seed, 2);
  distill.train.seed = mix_seed(new_seed, 3);
}

void to_json(json& j, const ToyDatasetOptions& o) {
  j = {{"n_identities", o.n_identities},
       {"seqs_per_identity", o.seqs_per_identity},
       {"frames_per_seq", o.frames_per_seq},
       {"seed", o.seed}};
}

void from_json(const json& j, ToyDatasetOptions& o) {
  o = ToyDatasetOptions{};
  o.n_identities = j.value("n_identities", o.n_identities);
  o.seqs_per_identity = j.value("seqs_per_identity", o.seqs_per_identity);
  o.frames_per_seq = j.value("frames_per_seq", o.frames_per_seq);
  o.seed = j.value("seed", o.seed);
}

void to_json(json& j, const AdaptConfig& c) {
  j = {{"new_kinds", join_kinds(c.new_kinds)}, {"budget_fraction", c.budget_fraction}};
}

void from_json(const json& j, AdaptConfig& c) {
  c = AdaptConfig{};
  if (j.contains("new_kinds")) c.new_kinds = parse_kind_list(j.at("new_kinds").get<std::string>());
  c.budget_fraction = j.value("budget_fraction", c.budget_fraction);
  if (c.budget_fraction < 0.0) throw ValidationError("adapt budget_fraction must be non-negative");
}

void to_json(json& j, const RunConfig& c) {
  j = {{"schema_version", c.schema_version},
       {"seed", c.seed},
       {"data", c.data},
       {"backbone", c.backbone},
       {"teacher", c.teacher},
       {"ven", c.ven},
       {"distill", c.distill},
       {"adapt", c.adapt},
       {"eval_ranges", c.eval_ranges}};
}

void reject_unknown_keys(const json& doc, const json& reference, const std::string& where) {
  if (!doc.is_object() || !reference.is_object()) return;
  for (const auto& [key, value] : doc.items()) {
    const auto path = where.empty() ? key : where + "." + key;
    if (!reference.contains(key)) throw ValidationError("config: unknown key '" + path + "'");
    // clip policies change shape with their mode and are validated by their own parser
    if (key == "clip") continue;
    reject_unknown_keys(value, reference.at(key), path);
  }
}

void from_json(const json& j, RunConfig& c) {
  if (!j.is_object()) throw ValidationError("config: document must be an object");
  const auto version = j.value("schema_version", kRunConfigSchema);
  if (version != kRunConfigSchema) {
    throw ValidationError("config: schema_version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kRunConfigSchema) + ")");
  }
  reject_unknown_keys(j, json(RunConfig{}));
  c = RunConfig{};
  try {
    if (j.contains("seed")) c.reseed(j.at("seed").get<std::uint64_t>());
    if (j.contains("data")) c.data = j.at("data").get<ToyDatasetOptions>();
    if (j.contains("backbone")) c.backbone = j.at("backbone").get<BackboneConfig>();
    // sections merge over the toy defaults rather than the library defaults
    auto merged = [](const json& defaults, const json& patch) {
      json out = defaults;
      out.merge_patch(patch);
      return out;
    };
    if (j.contains("teacher")) c.teacher = merged(json(c.teacher), j.at("teacher")).get<TrainConfig>();
    if (j.contains("ven")) c.ven = merged(json(c.ven), j.at("ven")).get<VenConfig>();
    if (j.contains("distill")) c.distill = merged(json(c.distill), j.at("distill")).get<DistillConfig>();
    if (j.contains("adapt")) c.adapt = j.at("adapt").get<AdaptConfig>();
    if (j.contains("eval_ranges")) c.eval_ranges = j.at("eval_ranges").get<OcclusionRanges>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  validate(c.teacher);
  validate(c.ven);
  validate(c.distill.train);
}

RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ValidationError("cannot open config " + file.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ValidationError("config " + file.string() + ": " + e.what());
  }
  return j.get<RunConfig>();
}

void save_run_config(const RunConfig& config, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file);
  if (!os) throw ValidationError("cannot write " + file.string());
  os << json(config).dump(2) << '\n';
}

}  // namespace mimicgait
