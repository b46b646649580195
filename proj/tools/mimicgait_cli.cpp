// Command-line entry point: data synthesis, occlusion manifests, training,
// distillation, adaptation, evaluation and reporting.

#include <torch/torch.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mimicgait/checkpoint.hpp"
#include "mimicgait/config.hpp"
#include "mimicgait/mimic.hpp"
#include "mimicgait/protocol.hpp"
#include "mimicgait/report.hpp"
#include "mimicgait/silhouette_io.hpp"
#include "mimicgait/toy_dataset.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mimicgait;

namespace {

// Options shared by every subcommand.
struct Common {
  std::optional<std::uint64_t> seed;
  std::string config_file;
  bool json_out = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Seed for every random choice of this run");
    cmd->add_option("--config", config_file, "Run configuration (JSON)")->check(CLI::ExistingFile);
    cmd->add_flag("--json", json_out, "Print a machine-readable summary");
  }

  RunConfig resolve() const {
    RunConfig c = config_file.empty() ? RunConfig{} : load_run_config(config_file);
    if (seed) c.reseed(*seed);
    return c;
  }
};

struct DataArgs {
  std::string path;
  std::string format = "auto";
  std::string split_file;

  void attach(CLI::App* cmd, bool with_split = true) {
    cmd->add_option("--data", path, "Dataset root")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--format", format, "frame_dirs, packed or auto")
        ->check(CLI::IsMember({"auto", "frame_dirs", "packed"}));
    if (with_split) cmd->add_option("--split", split_file, "Split file (default: <data>/split.json or grew_local)");
  }

  DatasetFormat resolved_format() const {
    if (format == "frame_dirs") return DatasetFormat::frame_dirs;
    if (format == "packed") return DatasetFormat::packed;
    for (const auto& e : fs::recursive_directory_iterator(path)) {
      if (e.path().extension() == kPackedExtension) return DatasetFormat::packed;
    }
    return DatasetFormat::frame_dirs;
  }

  Dataset open() const { return Dataset::open(path, resolved_format()); }

  ProtocolSplit split(const Dataset& ds, std::uint64_t seed) const {
    if (!split_file.empty()) return load_split(split_file);
    if (fs::exists(fs::path(path) / "split.json")) return load_split(fs::path(path) / "split.json");
    return build_split(ds.refs(), SplitProtocol::grew_local(), seed);
  }
};

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

// FNV-1a over ids and pixels, so artifacts can name the exact input they saw.
std::string fingerprint(const Dataset& ds) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const auto* bytes, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) h = (h ^ static_cast<unsigned char>(bytes[i])) * 1099511628211ULL;
  };
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto seq = ds.load(i);
    mix(seq.subject_id().data(), seq.subject_id().size());
    mix(seq.sequence_id().data(), seq.sequence_id().size());
    mix(seq.pixels().data(), seq.pixels().size());
  }
  return hex(h);
}

std::vector<SilhouetteSequence> training_sequences(const Dataset& ds, const ProtocolSplit& split) {
  std::vector<SilhouetteSequence> out;
  for (auto i : training_indices(ds, split)) out.push_back(ds.load(i));
  if (out.empty()) throw ValidationError("no training sequences remain outside the evaluation split");
  return out;
}

json provenance(const RunConfig& config, const Dataset* ds) {
  json p = {{"config", config}, {"version", version_string()}, {"seed", config.seed}};
  if (ds != nullptr) p["data_fingerprint"] = fingerprint(*ds);
  return p;
}

void write_json(const fs::path& file, const json& j) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream os(file);
  if (!os) throw ValidationError("cannot write " + file.string());
  os << j.dump(2) << '\n';
}

void print(const Common& common, const json& summary, const std::string& human) {
  if (common.json_out) {
    std::cout << summary.dump(2) << '\n';
  } else {
    std::cout << human << '\n';
  }
}

json log_summary(const TrainLog& log) {
  json j = {{"iterations", log.loss.size()},
            {"first_loss", log.loss.empty() ? 0.0 : log.loss.front()},
            {"final_loss", log.loss.empty() ? 0.0 : log.loss.back()},
            {"learning_rate", log.learning_rate},
            {"restarts", log.restarts}};
  return j;
}

std::vector<ScenarioConfig> read_scenarios(const std::string& file) {
  std::ifstream is(file);
  if (!is) throw ValidationError("cannot open scenario " + file);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ValidationError("scenario " + file + ": " + e.what());
  }
  if (j.is_array()) return j.get<std::vector<ScenarioConfig>>();
  return {j.get<ScenarioConfig>()};
}

AmountRange parse_range(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ValidationError("amount range must be written lo,hi");
  return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  CLI::App app{"Occluded gait recognition toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  // synth-data
  Common synth_c;
  int identities = 50, seqs_per_id = 4, frames = 60;
  std::string synth_out, synth_format = "frame_dirs";
  auto* synth = app.add_subcommand("synth-data", "Render the procedural walker benchmark");
  synth_c.attach(synth);
  synth->add_option("--identities", identities)->check(CLI::PositiveNumber);
  synth->add_option("--seqs-per-id", seqs_per_id)->check(CLI::Range(2, 1000));
  synth->add_option("--frames", frames)->check(CLI::PositiveNumber);
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--format", synth_format)->check(CLI::IsMember({"frame_dirs", "packed"}));

  // occlude
  Common occ_c;
  DataArgs occ_d;
  std::string occ_kinds = "top,bottom", occ_out;
  auto* occ = app.add_subcommand("occlude", "Write an occluded copy of a dataset plus a replay manifest");
  occ_c.attach(occ);
  occ_d.attach(occ, false);
  occ->add_option("--kinds", occ_kinds, "Comma-separated occlusion kinds");
  occ->add_option("--out", occ_out)->required();

  // pretrain
  Common pre_c;
  DataArgs pre_d;
  std::string pre_out;
  bool pre_ven = false;
  std::optional<int> pre_iters;
  std::optional<double> pre_lr;
  auto* pre = app.add_subcommand("pretrain", "Train the teacher backbone, or the VEN with --ven");
  pre_c.attach(pre);
  pre_d.attach(pre);
  pre->add_option("--out", pre_out)->required();
  pre->add_flag("--ven", pre_ven, "Train the visibility estimation network instead");
  pre->add_option("--iterations", pre_iters)->check(CLI::NonNegativeNumber);
  pre->add_option("--lr", pre_lr)->check(CLI::PositiveNumber);

  // distill
  Common dis_c;
  DataArgs dis_d;
  std::string dis_teacher, dis_ven, dis_out, dis_kinds, dis_loss;
  std::optional<double> dis_margin, dis_lr;
  std::optional<int> dis_iters;
  bool dis_xe = false, dis_no_ven = false;
  auto* dis = app.add_subcommand("distill", "Train a mimic network against a frozen teacher");
  dis_c.attach(dis);
  dis_d.attach(dis);
  dis->add_option("--teacher", dis_teacher)->required()->check(CLI::ExistingFile);
  dis->add_option("--ven", dis_ven)->check(CLI::ExistingFile);
  dis->add_option("--out", dis_out)->required();
  dis->add_option("--kinds", dis_kinds, "Training occlusion kinds");
  dis->add_option("--margin", dis_margin)->check(CLI::PositiveNumber);
  dis->add_option("--loss", dis_loss)->check(CLI::IsMember({"mickd", "l2kd", "none"}));
  dis->add_flag("--xe", dis_xe, "Add cross-entropy through a batch-norm neck");
  dis->add_flag("--no-ven", dis_no_ven, "Train without visibility guidance");
  dis->add_option("--iterations", dis_iters)->check(CLI::NonNegativeNumber);
  dis->add_option("--lr", dis_lr)->check(CLI::PositiveNumber);

  // adapt
  Common ad_c;
  DataArgs ad_d;
  std::string ad_model, ad_teacher, ad_ven, ad_out, ad_ven_out, ad_kinds;
  std::optional<double> ad_budget;
  auto* ad = app.add_subcommand("adapt", "Extend a mimic model to new occlusion kinds");
  ad_c.attach(ad);
  ad_d.attach(ad);
  ad->add_option("--model", ad_model)->required()->check(CLI::ExistingFile);
  ad->add_option("--teacher", ad_teacher)->required()->check(CLI::ExistingFile);
  ad->add_option("--ven", ad_ven, "VEN to extend (required for guided models)")->check(CLI::ExistingFile);
  ad->add_option("--kinds", ad_kinds, "New occlusion kinds");
  ad->add_option("--budget", ad_budget, "Extra iterations as a fraction of the original")->check(CLI::NonNegativeNumber);
  ad->add_option("--out", ad_out)->required();
  ad->add_option("--ven-out", ad_ven_out, "Where to store the extended VEN");

  // evaluate
  Common ev_c;
  DataArgs ev_d;
  std::string ev_model, ev_scenario, ev_out, ev_kinds, ev_restrict, ev_amount;
  bool ev_flip = false;
  std::optional<int> ev_repeats;
  auto* ev = app.add_subcommand("evaluate", "Score one model under one occlusion scenario");
  ev_c.attach(ev);
  ev_d.attach(ev);
  ev->add_option("--model", ev_model)->required()->check(CLI::ExistingFile);
  ev->add_option("--scenario", ev_scenario, "Scenario file (JSON)")->check(CLI::ExistingFile);
  ev->add_option("--kinds", ev_kinds, "Evaluation kinds (overrides the scenario)");
  ev->add_option("--restrict-to", ev_restrict);
  ev->add_flag("--flip", ev_flip, "Switch occlusion kind halfway through every video");
  ev->add_option("--amount", ev_amount, "Amount range lo,hi");
  ev->add_option("--repeats", ev_repeats)->check(CLI::PositiveNumber);
  ev->add_option("--out", ev_out);

  // compare
  Common cmp_c;
  DataArgs cmp_d;
  std::vector<std::string> cmp_models, cmp_scenarios;
  std::string cmp_out;
  auto* cmp = app.add_subcommand("compare", "Evaluate several models on several scenarios with RP");
  cmp_c.attach(cmp);
  cmp_d.attach(cmp);
  cmp->add_option("--model", cmp_models, "name=checkpoint, repeatable")->required();
  cmp->add_option("--scenario", cmp_scenarios, "Scenario files (default: top+bottom)")->check(CLI::ExistingFile);
  cmp->add_option("--out", cmp_out, "Output directory")->required();

  // report
  Common rep_c;
  std::vector<std::string> rep_inputs;
  std::string rep_out;
  auto* rep = app.add_subcommand("report", "Render CSV tables and SVG plots from reports");
  rep_c.attach(rep);
  rep->add_option("--input", rep_inputs, "Report or comparison JSON files")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", rep_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth->parsed()) {
      RunConfig cfg = synth_c.resolve();
      cfg.data.n_identities = identities;
      cfg.data.seqs_per_identity = seqs_per_id;
      cfg.data.frames_per_seq = frames;
      const auto format = synth_format == "packed" ? DatasetFormat::packed : DatasetFormat::frame_dirs;
      generate_toy_dataset(cfg.data, synth_out, format);
      const auto ds = Dataset::open(synth_out, format);
      const auto split = build_split(ds.refs(), SplitProtocol::grew_local(), cfg.seed);
      save_split(split, fs::path(synth_out) / "split.json");
      write_json(fs::path(synth_out) / "provenance.json", provenance(cfg, &ds));
      print(synth_c, {{"sequences", ds.size()}, {"out", synth_out}},
            "wrote " + std::to_string(ds.size()) + " sequences to " + synth_out);
    } else if (occ->parsed()) {
      const RunConfig cfg = occ_c.resolve();
      const auto ds = occ_d.open();
      const auto format = occ_d.resolved_format();
      const OcclusionPolicy policy{parse_kind_list(occ_kinds), cfg.eval_ranges};
      json records = json::array();
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto seq = ds.load(i);
        const auto spec = policy.draw(mix_seed(cfg.seed, i));
        const auto out = apply(seq, spec).sequence;
        const auto dir = fs::path(occ_out) / seq.subject_id();
        if (format == DatasetFormat::packed) {
          fs::create_directories(dir);
          write_packed(out, dir / (seq.sequence_id() + kPackedExtension));
        } else {
          write_frame_dir(out, dir / seq.sequence_id());
        }
        records.push_back({{"subject_id", seq.subject_id()}, {"sequence_id", seq.sequence_id()}, {"spec", spec}});
      }
      json manifest = provenance(cfg, &ds);
      manifest["source"] = fs::absolute(occ_d.path).string();
      manifest["kinds"] = occ_kinds;
      manifest["records"] = records;
      write_json(fs::path(occ_out) / "manifest.json", manifest);
      print(occ_c, {{"sequences", ds.size()}, {"manifest", (fs::path(occ_out) / "manifest.json").string()}},
            "occluded " + std::to_string(ds.size()) + " sequences into " + occ_out);
    } else if (pre->parsed()) {
      RunConfig cfg = pre_c.resolve();
      const auto ds = pre_d.open();
      const auto split = pre_d.split(ds, cfg.seed);
      auto train = training_sequences(ds, split);
      json summary;
      if (pre_ven) {
        if (pre_iters) cfg.ven.iterations = *pre_iters;
        if (pre_lr) cfg.ven.learning_rate = *pre_lr;
        auto result = train_ven(train, cfg.ven);
        json meta = provenance(cfg, &ds);
        meta["log"] = log_summary(result.log);
        save_ven(result.ven, pre_out, meta);
        summary = {{"kind", "ven"}, {"out", pre_out}, {"log", meta["log"]}};
      } else {
        if (pre_iters) cfg.teacher.iterations = *pre_iters;
        if (pre_lr) cfg.teacher.learning_rate = *pre_lr;
        auto teacher = GaitEncoder::create(cfg.backbone, cfg.teacher.seed);
        auto log = pretrain_teacher(teacher, LabeledSet::from_sequences(std::move(train)), cfg.teacher);
        json meta = provenance(cfg, &ds);
        meta["role"] = "teacher";
        meta["log"] = log_summary(log);
        save_encoder(teacher, pre_out, meta);
        summary = {{"kind", "teacher"}, {"out", pre_out}, {"log", meta["log"]}};
      }
      print(pre_c, summary, "saved " + pre_out);
    } else if (dis->parsed()) {
      RunConfig cfg = dis_c.resolve();
      auto& dc = cfg.distill;
      if (!dis_kinds.empty()) dc.occlusion.kinds = parse_kind_list(dis_kinds);
      if (dis_margin) dc.train.margin = *dis_margin;
      if (!dis_loss.empty()) dc.loss = distill_loss_from_string(dis_loss);
      if (dis_xe) dc.xe = true;
      if (dis_no_ven) dc.use_ven = false;
      if (dis_iters) dc.train.iterations = *dis_iters;
      if (dis_lr) dc.train.learning_rate = *dis_lr;
      if (dc.use_ven && dis_ven.empty()) throw ValidationError("distill needs --ven unless --no-ven is given");
      const auto teacher = load_encoder(dis_teacher).model;
      const auto ven = dc.use_ven ? load_ven(dis_ven) : nullptr;
      const auto ds = dis_d.open();
      const auto split = dis_d.split(ds, cfg.seed);
      const auto data = LabeledSet::from_sequences(training_sequences(ds, split));
      auto result = distill(teacher, ven, data, dc);
      json meta = provenance(cfg, &ds);
      meta["role"] = "mimic";
      meta["distill"] = dc;
      meta["teacher_hash"] = hex(teacher.hash());
      meta["log"] = log_summary(result.log);
      save_encoder(result.mimic, dis_out, meta);
      print(dis_c, {{"out", dis_out}, {"log", meta["log"]}}, "saved " + dis_out);
    } else if (ad->parsed()) {
      RunConfig cfg = ad_c.resolve();
      auto loaded = load_encoder(ad_model);
      DistillConfig base = loaded.meta.contains("distill") ? loaded.meta.at("distill").get<DistillConfig>() : cfg.distill;
      if (ad_c.seed) base.train.seed = cfg.distill.train.seed;
      AdaptConfig ac = cfg.adapt;
      if (!ad_kinds.empty()) ac.new_kinds = parse_kind_list(ad_kinds);
      if (ad_budget) ac.budget_fraction = *ad_budget;
      const auto teacher = load_encoder(ad_teacher).model;
      const auto ds = ad_d.open();
      const auto split = ad_d.split(ds, cfg.seed);
      auto train = training_sequences(ds, split);
      std::shared_ptr<const FrozenVen> extended;
      if (loaded.model.guided()) {
        if (ad_ven.empty()) throw ValidationError("adapt: a guided model needs --ven to extend");
        const auto base_ven = load_ven(ad_ven);
        VenConfig vc = base_ven->config();
        for (auto k : ac.new_kinds) {
          if (std::find(vc.class_set.begin(), vc.class_set.end(), k) == vc.class_set.end()) vc.class_set.push_back(k);
        }
        vc.iterations = static_cast<int>(std::lround(ac.budget_fraction * vc.iterations));
        vc.seed = mix_seed(cfg.ven.seed, 0xe47u);
        extended = std::make_shared<const FrozenVen>(extend_ven(*base_ven, train, vc).ven);
        if (!ad_ven_out.empty()) save_ven(*extended, ad_ven_out, provenance(cfg, &ds));
      }
      auto result = adapt(loaded.model, teacher, extended, LabeledSet::from_sequences(std::move(train)), base, ac);
      json meta = provenance(cfg, &ds);
      meta["role"] = "mimic";
      DistillConfig adapted = base;
      for (auto k : ac.new_kinds) {
        auto& kinds = adapted.occlusion.kinds;
        if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
      }
      meta["distill"] = adapted;
      meta["adapt"] = ac;
      meta["log"] = log_summary(result.log);
      save_encoder(result.mimic, ad_out, meta);
      print(ad_c, {{"out", ad_out}, {"log", meta["log"]}}, "saved " + ad_out);
    } else if (ev->parsed()) {
      const RunConfig cfg = ev_c.resolve();
      auto model = load_encoder(ev_model).model;
      ScenarioConfig scenario;
      if (!ev_scenario.empty()) {
        const auto all = read_scenarios(ev_scenario);
        if (all.size() != 1) throw ValidationError("evaluate takes exactly one scenario");
        scenario = all.front();
      }
      if (!ev_kinds.empty()) {
        scenario.eval_kinds = parse_kind_list(ev_kinds);
        scenario.name = ev_kinds;
      }
      if (!ev_restrict.empty()) scenario.restrict_to = occlusion_kind_from_string(ev_restrict);
      if (ev_flip) scenario.flip_mid_video = true;
      if (!ev_amount.empty()) scenario.amount_range_override = parse_range(ev_amount);
      if (ev_repeats) scenario.repeats = *ev_repeats;
      const auto ds = ev_d.open();
      const auto split = ev_d.split(ds, cfg.seed);
      auto report = run_protocol(model, ds, split, scenario, cfg.eval_ranges, cfg.seed);
      report.model_ids = {fs::path(ev_model).stem().string()};
      json out = report;
      out["provenance"] = provenance(cfg, &ds);
      if (!ev_out.empty()) write_json(ev_out, out);
      std::ostringstream human;
      human << "rank-1 " << report.rank_k[1] << "  rank-5 " << report.rank_k[5] << "  rank-20 " << report.rank_k[20]
            << "  TAR@1%FAR " << report.tar_at_far[0.01];
      if (scenario.repeats > 1) human << "  rank-1 std " << report.rank_k_std[1];
      print(ev_c, out, human.str());
    } else if (cmp->parsed()) {
      const RunConfig cfg = cmp_c.resolve();
      std::vector<std::pair<std::string, GaitEncoder>> owned;
      for (const auto& spec : cmp_models) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ValidationError("--model expects name=checkpoint, got '" + spec + "'");
        const auto path = spec.substr(eq + 1);
        if (!fs::exists(path)) throw ValidationError("missing checkpoint " + path);
        owned.emplace_back(spec.substr(0, eq), load_encoder(path).model);
      }
      std::vector<std::pair<std::string, GaitEncoder*>> models;
      for (auto& [name, m] : owned) models.emplace_back(name, &m);
      std::vector<ScenarioConfig> scenarios;
      for (const auto& f : cmp_scenarios) {
        for (auto& s : read_scenarios(f)) scenarios.push_back(std::move(s));
      }
      if (scenarios.empty()) {
        ScenarioConfig tb;
        tb.name = "top+bottom";
        tb.eval_kinds = {OcclusionKind::top, OcclusionKind::bottom};
        scenarios.push_back(tb);
      }
      const auto ds = cmp_d.open();
      const auto split = cmp_d.split(ds, cfg.seed);
      const auto reports = compare_methods(models, ds, split, scenarios, cfg.eval_ranges, cfg.seed);
      json out = {{"reports", reports}, {"provenance", provenance(cfg, &ds)}};
      write_json(fs::path(cmp_out) / "comparison.json", out);
      {
        std::ofstream csv(fs::path(cmp_out) / "comparison.csv");
        csv << comparison_csv(reports);
      }
      print(cmp_c, out, comparison_csv(reports));
    } else if (rep->parsed()) {
      std::vector<EvalReport> reports;
      for (const auto& f : rep_inputs) {
        for (auto& r : load_reports(f)) reports.push_back(std::move(r));
      }
      const auto files = render_report(reports, rep_out);
      json listing = json::array();
      std::string human;
      for (const auto& f : files) {
        listing.push_back(f.string());
        human += f.string() + "\n";
      }
      print(rep_c, {{"files", listing}}, human);
    }
  } catch (const ValidationError& e) {
    std::cerr << json{{"error", {{"type", "validation"}, {"message", e.what()}}}}.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"type", "runtime"}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  }
  return 0;
}
