#include "mimicgait/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace mimicgait {

using nlohmann::json;

std::vector<OcclusionKind> ScenarioConfig::active_kinds() const {
  if (restrict_to) return {*restrict_to};
  return eval_kinds;
}

void validate(const ScenarioConfig& s) {
  if (s.eval_kinds.empty()) throw ValidationError("scenario '" + s.name + "': eval_kinds must not be empty");
  if (s.restrict_to &&
      std::find(s.eval_kinds.begin(), s.eval_kinds.end(), *s.restrict_to) == s.eval_kinds.end()) {
    throw ValidationError("scenario '" + s.name + "': restrict_to must be one of eval_kinds");
  }
  if (s.amount_range_override) {
    const auto& r = *s.amount_range_override;
    if (!(r.lo > 0.0) || !(r.hi < 1.0) || r.hi < r.lo) {
      throw ValidationError("scenario '" + s.name + "': amount range override must lie inside (0, 1)");
    }
  }
  if (s.repeats < 1) throw ValidationError("scenario '" + s.name + "': repeats must be >= 1");
  if (s.flip_mid_video) {
    for (auto k : s.active_kinds()) {
      if (is_dynamic(k)) throw ValidationError("scenario '" + s.name + "': only consistent kinds can flip mid-video");
    }
  }
}

void to_json(json& j, const ScenarioConfig& s) {
  j = {{"name", s.name}, {"eval_kinds", join_kinds(s.eval_kinds)}, {"flip_mid_video", s.flip_mid_video},
       {"repeats", s.repeats}};
  j["restrict_to"] = s.restrict_to ? json(to_string(*s.restrict_to)) : json(nullptr);
  j["amount_range_override"] = s.amount_range_override ? json(*s.amount_range_override) : json(nullptr);
}

void from_json(const json& j, ScenarioConfig& s) {
  static const std::vector<std::string> known{"name", "eval_kinds", "restrict_to", "flip_mid_video",
                                              "amount_range_override", "repeats"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError("scenario: unknown key '" + key + "'");
    }
  }
  s = ScenarioConfig{};
  s.name = j.value("name", s.name);
  if (j.contains("eval_kinds")) s.eval_kinds = parse_kind_list(j.at("eval_kinds").get<std::string>());
  if (j.contains("restrict_to") && !j.at("restrict_to").is_null()) {
    s.restrict_to = occlusion_kind_from_string(j.at("restrict_to").get<std::string>());
  }
  s.flip_mid_video = j.value("flip_mid_video", false);
  if (j.contains("amount_range_override") && !j.at("amount_range_override").is_null()) {
    s.amount_range_override = j.at("amount_range_override").get<AmountRange>();
  }
  s.repeats = j.value("repeats", 1);
  validate(s);
}

namespace {

std::string metric_key(int k) { return "rank" + std::to_string(k); }

std::string far_key(double far) {
  std::ostringstream os;
  os << "tar@" << far;
  return os.str();
}

struct OccludedItem {
  SilhouetteSequence sequence;
  json record;
};

OccludedItem occlude_for_eval(const SilhouetteSequence& seq, const ScenarioConfig& scenario,
                              const OcclusionRanges& ranges, std::uint64_t seed) {
  const auto kinds = scenario.active_kinds();
  json rec = {{"subject_id", seq.subject_id()}, {"sequence_id", seq.sequence_id()}};
  const OcclusionSpec a = sample_spec(kinds, seed, ranges, seq.height(), seq.width());
  if (!scenario.flip_mid_video) {
    rec["spec"] = a;
    return {apply(seq, a).sequence, rec};
  }
  std::vector<OcclusionKind> others;
  for (auto k : kinds) {
    if (k != a.kind) others.push_back(k);
  }
  const OcclusionSpec b = sample_spec(others.empty() ? kinds : others, mix_seed(seed, 0xf11bu), ranges,
                                      seq.height(), seq.width());
  rec["spec"] = a;
  rec["second_spec"] = b;
  return {flip_mid_video(seq, a, b), rec};
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

SignatureSet signatures(GaitEncoder& model, const std::vector<SilhouetteSequence>& sequences) {
  SignatureSet set;
  auto emb = model.encode(sequences).contiguous();
  set.dim = static_cast<std::size_t>(emb.size(1));
  set.values.assign(emb.data_ptr<float>(), emb.data_ptr<float>() + emb.numel());
  for (const auto& s : sequences) {
    set.subjects.push_back(s.subject_id());
    set.sequence_ids.push_back(s.sequence_id());
  }
  return set;
}

EvalReport run_protocol(GaitEncoder& model, const Dataset& dataset, const ProtocolSplit& split,
                        const ScenarioConfig& scenario, const OcclusionRanges& ranges, std::uint64_t seed,
                        const std::vector<double>& fars) {
  validate(scenario);
  if (split.gallery.empty()) throw ValidationError("evaluation split has an empty gallery");
  EvalReport report;
  report.protocol_name = split.name;
  report.scenario = scenario;
  report.ranges = ranges;
  if (scenario.amount_range_override) report.ranges.amount = *scenario.amount_range_override;
  report.seed = seed;

  std::vector<SilhouetteSequence> gallery_src, probe_src;
  for (const auto& r : split.gallery) gallery_src.push_back(dataset.load(r));
  for (const auto& r : split.probes) probe_src.push_back(dataset.load(r));

  std::map<int, std::vector<double>> rank_runs;
  std::map<double, std::vector<double>> tar_runs;
  for (int rep = 0; rep < scenario.repeats; ++rep) {
    const auto rep_seed = mix_seed(seed, static_cast<std::uint64_t>(rep));
    std::vector<SilhouetteSequence> gallery, probes;
    auto occlude_all = [&](const std::vector<SilhouetteSequence>& src, std::vector<SilhouetteSequence>& dst,
                           std::uint64_t role, const char* role_name) {
      for (std::size_t i = 0; i < src.size(); ++i) {
        auto item = occlude_for_eval(src[i], scenario, report.ranges, mix_seed(mix_seed(rep_seed, role), i));
        item.record["role"] = role_name;
        item.record["repeat"] = rep;
        report.manifest.push_back(std::move(item.record));
        dst.push_back(std::move(item.sequence));
      }
    };
    occlude_all(gallery_src, gallery, 1, "gallery");
    occlude_all(probe_src, probes, 2, "probe");

    const auto g = signatures(model, gallery);
    const auto p = signatures(model, probes);
    auto ranked = rank_retrieval(p, g);
    for (const auto& [k, v] : ranked.rank_k) rank_runs[k].push_back(v);
    for (double far : fars) tar_runs[far].push_back(verification_tar(p, g, far));
    if (rep == 0) report.records = std::move(ranked.records);
  }
  for (const auto& [k, runs] : rank_runs) {
    report.rank_k[k] = mean(runs);
    report.rank_k_std[k] = stddev(runs);
  }
  report.rank1_per_repeat = rank_runs[1];
  for (const auto& [far, runs] : tar_runs) report.tar_at_far[far] = mean(runs);
  return report;
}

void attach_relative_performance(EvalReport& occluded, const EvalReport& holistic) {
  occluded.rp.clear();
  for (const auto& [k, op] : occluded.rank_k) {
    auto hp = holistic.rank_k.find(k);
    if (hp == holistic.rank_k.end()) continue;
    if (auto rp = relative_performance(op, hp->second)) occluded.rp[metric_key(k)] = *rp;
  }
  for (const auto& [far, op] : occluded.tar_at_far) {
    auto hp = holistic.tar_at_far.find(far);
    if (hp == holistic.tar_at_far.end()) continue;
    if (auto rp = relative_performance(op, hp->second)) occluded.rp[far_key(far)] = *rp;
  }
}

std::vector<EvalReport> compare_methods(const std::vector<std::pair<std::string, GaitEncoder*>>& models,
                                        const Dataset& dataset, const ProtocolSplit& split,
                                        const std::vector<ScenarioConfig>& scenarios, const OcclusionRanges& ranges,
                                        std::uint64_t seed) {
  std::vector<EvalReport> out;
  for (const auto& [name, model] : models) {
    ScenarioConfig holistic;
    holistic.name = "holistic";
    auto hp = run_protocol(*model, dataset, split, holistic, ranges, seed);
    hp.model_ids = {name};
    for (const auto& scenario : scenarios) {
      auto report = run_protocol(*model, dataset, split, scenario, ranges, seed);
      report.model_ids = {name};
      attach_relative_performance(report, hp);
      out.push_back(std::move(report));
    }
    out.push_back(std::move(hp));
  }
  return out;
}

void to_json(json& j, const EvalReport& r) {
  json rank = json::object(), rank_std = json::object(), tar = json::object();
  for (const auto& [k, v] : r.rank_k) rank[std::to_string(k)] = v;
  for (const auto& [k, v] : r.rank_k_std) rank_std[std::to_string(k)] = v;
  for (const auto& [f, v] : r.tar_at_far) tar[far_key(f).substr(4)] = v;
  json records = json::array();
  for (const auto& p : r.records) {
    records.push_back({{"sequence_id", p.sequence_id},
                       {"subject", p.subject},
                       {"best_subject", p.best_subject},
                       {"true_rank", p.true_rank},
                       {"best_distance", p.best_distance}});
  }
  j = {{"protocol", r.protocol_name},
       {"scenario", r.scenario},
       {"ranges", r.ranges},
       {"model_ids", r.model_ids},
       {"seed", r.seed},
       {"rank_k", rank},
       {"rank_k_std", rank_std},
       {"tar_at_far", tar},
       {"rp", r.rp},
       {"rank1_per_repeat", r.rank1_per_repeat},
       {"records", records},
       {"manifest", r.manifest}};
}

void from_json(const json& j, EvalReport& r) {
  r = EvalReport{};
  r.protocol_name = j.value("protocol", std::string());
  if (j.contains("scenario")) r.scenario = j.at("scenario").get<ScenarioConfig>();
  if (j.contains("ranges")) r.ranges = j.at("ranges").get<OcclusionRanges>();
  r.model_ids = j.value("model_ids", std::vector<std::string>{});
  r.seed = j.value("seed", std::uint64_t{0});
  const auto rank = j.value("rank_k", json::object()), rank_std = j.value("rank_k_std", json::object()),
             tar = j.value("tar_at_far", json::object());
  for (const auto& [k, v] : rank.items()) r.rank_k[std::stoi(k)] = v.get<double>();
  for (const auto& [k, v] : rank_std.items()) r.rank_k_std[std::stoi(k)] = v.get<double>();
  for (const auto& [k, v] : tar.items()) r.tar_at_far[std::stod(k)] = v.get<double>();
  r.rp = j.value("rp", std::map<std::string, double>{});
  r.rank1_per_repeat = j.value("rank1_per_repeat", std::vector<double>{});
  const auto records = j.value("records", json::array());
  for (const auto& p : records) {
    r.records.push_back({p.value("sequence_id", ""), p.value("subject", ""), p.value("best_subject", ""),
                         p.value("true_rank", 0), p.value("best_distance", 0.0)});
  }
  r.manifest = j.value("manifest", json::array());
}

std::string comparison_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "method,scenario,rank1,rank5,rank20,tar@0.01,rp_rank1,rp_rank5,rp_tar@0.01,rank1_std\n";
  auto get = [](const auto& m, const auto& key) -> std::string {
    auto it = m.find(key);
    if (it == m.end()) return "";
    std::ostringstream v;
    v << std::setprecision(6) << it->second;
    return v.str();
  };
  for (const auto& r : reports) {
    os << (r.model_ids.empty() ? "" : r.model_ids.front()) << ',' << r.scenario.name << ',' << get(r.rank_k, 1) << ','
       << get(r.rank_k, 5) << ',' << get(r.rank_k, 20) << ',' << get(r.tar_at_far, 0.01) << ','
       << get(r.rp, std::string("rank1")) << ',' << get(r.rp, std::string("rank5")) << ','
       << get(r.rp, std::string("tar@0.01")) << ',' << get(r.rank_k_std, 1) << '\n';
  }
  return os.str();
}

}  // namespace mimicgait
