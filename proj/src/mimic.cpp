#include "mimicgait/mimic.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>

namespace mimicgait {

using nlohmann::json;
namespace F = torch::nn::functional;

torch::Tensor mickd_loss(const torch::Tensor& mimic, const torch::Tensor& teacher, const torch::Tensor& labels,
                         double margin, const MickdFamilies& families) {
  const auto N = mimic.size(0);
  if (teacher.size(0) != N || labels.size(0) != N) throw ValidationError("mickd_loss: batch sizes differ");
  // candidates: the N mimic embeddings followed by the N teacher embeddings
  auto candidates = torch::cat({mimic, teacher.detach()}, 0);
  auto d = euclidean_distances(mimic, candidates);  // [N, 2N]

  auto cand_labels = torch::cat({labels, labels});
  auto same_id = labels.unsqueeze(1) == cand_labels.unsqueeze(0);
  auto idx = torch::arange(N);
  auto same_instance = idx.unsqueeze(1) == torch::cat({idx, idx}).unsqueeze(0);
  auto is_teacher = torch::cat({torch::zeros({N}, torch::kBool), torch::ones({N}, torch::kBool)}).unsqueeze(0);

  auto pos = torch::zeros({N, 2 * N}, torch::kBool);
  if (families.same_instance) pos |= same_instance & is_teacher;
  if (families.cross_teacher) pos |= same_id & ~same_instance & is_teacher;
  if (families.cross_mimic) pos |= same_id & ~same_instance & ~is_teacher;
  auto neg = ~same_id;

  if ((families.cross_teacher || families.cross_mimic) &&
      !(same_id & ~same_instance).any().item<bool>()) {
    static bool warned = false;
    if (!warned) {
      std::cerr << "warning: no identity has two instances in the batch; cross-instance families are inactive\n";
      warned = true;
    }
  }

  auto mask = (pos.unsqueeze(2) & neg.unsqueeze(1)).to(mimic.dtype());  // [N, 2N, 2N]
  const auto count = mask.sum();
  if (count.item<double>() == 0.0) return mimic.sum() * 0.0;
  auto hinge = torch::relu(d.unsqueeze(2) - d.unsqueeze(1) + margin);
  return (hinge * mask).sum() / count;
}

torch::Tensor l2kd_loss(const torch::Tensor& mimic, const torch::Tensor& teacher) {
  return (mimic - teacher.detach()).pow(2).sum(1).mean();
}

std::string to_string(DistillLoss loss) {
  switch (loss) {
    case DistillLoss::mickd: return "mickd";
    case DistillLoss::l2kd: return "l2kd";
    case DistillLoss::none: return "none";
  }
  return "unknown";
}

DistillLoss distill_loss_from_string(const std::string& name) {
  if (name == "mickd") return DistillLoss::mickd;
  if (name == "l2kd") return DistillLoss::l2kd;
  if (name == "none") return DistillLoss::none;
  throw ValidationError("unknown distillation loss '" + name + "' (expected mickd, l2kd or none)");
}

void to_json(json& j, const DistillConfig& c) {
  j = {{"train", c.train},
       {"loss", to_string(c.loss)},
       {"families", {{"same_instance", c.families.same_instance},
                     {"cross_teacher", c.families.cross_teacher},
                     {"cross_mimic", c.families.cross_mimic}}},
       {"xe", c.xe},
       {"xe_weight", c.xe_weight},
       {"use_ven", c.use_ven},
       {"warm_start", c.warm_start},
       {"baseline_margin", c.baseline_margin},
       {"kinds", join_kinds(c.occlusion.kinds)},
       {"ranges", c.occlusion.ranges}};
}

void from_json(const json& j, DistillConfig& c) {
  c = DistillConfig{};
  if (j.contains("train")) {
    c.train = j.at("train").get<TrainConfig>();
    if (!j.at("train").contains("margin")) c.train.margin = 0.05;
  }
  if (j.contains("loss")) c.loss = distill_loss_from_string(j.at("loss").get<std::string>());
  if (j.contains("families")) {
    const auto& f = j.at("families");
    c.families.same_instance = f.value("same_instance", true);
    c.families.cross_teacher = f.value("cross_teacher", true);
    c.families.cross_mimic = f.value("cross_mimic", true);
  }
  c.xe = j.value("xe", c.xe);
  c.xe_weight = j.value("xe_weight", c.xe_weight);
  c.use_ven = j.value("use_ven", c.use_ven);
  c.warm_start = j.value("warm_start", c.warm_start);
  c.baseline_margin = j.value("baseline_margin", c.baseline_margin);
  if (j.contains("kinds")) c.occlusion.kinds = parse_kind_list(j.at("kinds").get<std::string>());
  if (j.contains("ranges")) c.occlusion.ranges = j.at("ranges").get<OcclusionRanges>();
}

DistillResult continue_distill(const GaitEncoder& mimic, const GaitEncoder& teacher, const LabeledSet& data,
                               const DistillConfig& config) {
  validate(config.train);
  if (config.occlusion.kinds.empty()) throw ValidationError("distillation needs at least one occlusion kind");
  if (teacher.guided()) throw ValidationError("the teacher must be an unguided backbone");
  if (teacher.embedding_dim() != mimic.embedding_dim()) throw ValidationError("teacher and mimic embedding sizes differ");

  GaitEncoder student = mimic.clone();
  GaitEncoder frozen_teacher = teacher.clone();
  IdentityBatchSampler sampler(data.labels, config.train.batch_identities, config.train.seqs_per_identity);
  torch::manual_seed(mix_seed(config.train.seed, 0x4e43u));
  ClassifierNeck neck(student.embedding_dim(), data.num_classes());
  auto params = student.trainable_parameters();
  std::vector<torch::Tensor> state;
  if (config.xe) {
    for (auto& p : neck->parameters()) params.push_back(p);
    for (auto& b : neck->buffers()) state.push_back(b);
  }

  auto log = run_optimisation(params, state, config.train, [&](int it, std::map<std::string, double>& comps) {
    const auto batch_seed = mix_seed(config.train.seed, static_cast<std::uint64_t>(it));
    std::mt19937_64 rng(batch_seed);
    const auto items = sampler.draw(rng);
    // both sides of a pair share the augmentation; only the mimic side is occluded
    const auto holistic = augment_clips(sample_clips(data, items, config.train.clip, mix_seed(batch_seed, 1)),
                                        config.train.augment, mix_seed(batch_seed, 3));
    const auto occluded = occlude_clips(holistic, config.occlusion, mix_seed(batch_seed, 2));
    std::vector<int64_t> labels;
    for (auto i : items) labels.push_back(data.labels[i]);
    auto label_tensor = torch::tensor(labels, torch::kInt64);

    torch::Tensor gamma_t;
    {
      torch::NoGradGuard guard;
      gamma_t = frozen_teacher.forward(to_tensor(holistic));
    }
    auto gamma_m = student.forward(to_tensor(occluded));
    auto kd = config.loss == DistillLoss::l2kd ? l2kd_loss(gamma_m, gamma_t)
                                               : mickd_loss(gamma_m, gamma_t, label_tensor, config.train.margin, config.families);
    comps["kd"] = kd.item<double>();
    if (!config.xe) return kd;
    auto xe = F::cross_entropy(neck->forward(gamma_m), label_tensor);
    comps["xe"] = xe.item<double>();
    return kd + config.xe_weight * xe;
  });
  return {std::move(student), std::move(log)};
}

DistillResult distill(const GaitEncoder& teacher, std::shared_ptr<const FrozenVen> ven, const LabeledSet& data,
                      const DistillConfig& config) {
  if (config.use_ven && !ven) throw ValidationError("distillation with VEN guidance needs a frozen VEN");
  auto guide = config.use_ven ? std::move(ven) : nullptr;
  GaitEncoder student = config.warm_start ? teacher.without_ven().with_ven(guide)
                                          : GaitEncoder::create(teacher.config(), mix_seed(config.train.seed, 0xb0u), guide);
  if (config.loss == DistillLoss::none) {
    TrainConfig train = config.train;
    train.margin = config.baseline_margin;
    auto log = train_supervised(student, data, train, &config.occlusion);
    return {std::move(student), std::move(log)};
  }
  return continue_distill(student, teacher, data, config);
}

DistillResult adapt(const GaitEncoder& mimic, const GaitEncoder& teacher, std::shared_ptr<const FrozenVen> extended_ven,
                    const LabeledSet& data, const DistillConfig& base, const AdaptConfig& adapt_config) {
  auto kinds = base.occlusion.kinds;
  for (auto k : adapt_config.new_kinds) {
    if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
  }
  if (mimic.guided()) {
    if (!extended_ven) throw ValidationError("adapt: a guided mimic needs an extended VEN");
    for (auto k : kinds) {
      const auto& cs = extended_ven->class_set();
      if (std::find(cs.begin(), cs.end(), k) == cs.end()) {
        throw ValidationError("adapt: VEN class set does not cover kind '" + to_string(k) + "'");
      }
    }
  }
  DistillConfig config = base;
  config.occlusion.kinds = kinds;
  config.train.iterations = static_cast<int>(std::lround(adapt_config.budget_fraction * base.train.iterations));
  config.train.seed = mix_seed(base.train.seed, 0xada9u);
  GaitEncoder start = mimic.guided() ? mimic.with_ven(extended_ven) : mimic.clone();
  if (config.train.iterations == 0) return {std::move(start), TrainLog{}};
  if (config.loss == DistillLoss::none) {
    config.train.margin = config.baseline_margin;
    auto log = train_supervised(start, data, config.train, &config.occlusion);
    return {std::move(start), std::move(log)};
  }
  return continue_distill(start, teacher, data, config);
}

}  // namespace mimicgait
