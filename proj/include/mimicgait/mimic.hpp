#pragma once

#include <torch/torch.h>

#include <memory>
#include <vector>

#include "json.hpp"
#include "mimicgait/encoder.hpp"

namespace mimicgait {

/// Anchor-positive families of the correlational distillation loss. The
/// anchor is always a mimic embedding gamma_m^i.
struct MickdFamilies {
  bool same_instance = true;  // gamma_t^i
  bool cross_teacher = true;  // gamma_t^j, j != i, same identity
  bool cross_mimic = true;    // gamma_m^j, j != i, same identity
};

/// Mean over all valid triplets of [d(a,p) - d(a,n) + m]_+. Negatives are
/// mimic and teacher embeddings of other identities. Teacher embeddings are
/// detached, so no gradient reaches them.
torch::Tensor mickd_loss(const torch::Tensor& mimic, const torch::Tensor& teacher, const torch::Tensor& labels,
                         double margin, const MickdFamilies& families = {});

/// Mean squared distance between paired mimic and (detached) teacher embeddings.
torch::Tensor l2kd_loss(const torch::Tensor& mimic, const torch::Tensor& teacher);

enum class DistillLoss { mickd, l2kd, none };
std::string to_string(DistillLoss loss);
DistillLoss distill_loss_from_string(const std::string& name);

struct DistillConfig {
  TrainConfig train = [] {
    TrainConfig c;
    c.margin = 0.05;
    return c;
  }();
  DistillLoss loss = DistillLoss::mickd;
  MickdFamilies families;
  bool xe = false;  // extra cross-entropy through a BN neck
  double xe_weight = 1.0;
  bool use_ven = true;
  bool warm_start = true;  // start from the teacher's weights
  double baseline_margin = 0.2;  // triplet margin when retraining with loss none
  OcclusionPolicy occlusion{{OcclusionKind::top, OcclusionKind::bottom}, {}};
};

void to_json(nlohmann::json& j, const DistillConfig& c);
void from_json(const nlohmann::json& j, DistillConfig& c);

struct DistillResult {
  GaitEncoder mimic;
  TrainLog log;  // components "kd" (and "xe" when enabled)
};

/// Trains a mimic network against a frozen teacher. Each batch pairs a
/// holistic clip C (teacher side) with the same frames occluded by a freshly
/// drawn spec O (mimic side). With loss none the mimic is trained with
/// triplet + cross-entropy on occluded clips only, which is Baseline-2 (or
/// the occlusion-aware baseline when guided).
DistillResult distill(const GaitEncoder& teacher, std::shared_ptr<const FrozenVen> ven, const LabeledSet& data,
                      const DistillConfig& config);

/// Continues distillation of an existing mimic for config.train.iterations.
DistillResult continue_distill(const GaitEncoder& mimic, const GaitEncoder& teacher, const LabeledSet& data,
                               const DistillConfig& config);

struct AdaptConfig {
  std::vector<OcclusionKind> new_kinds{OcclusionKind::middle};
  double budget_fraction = 0.11;  // of the original distillation iterations
};

/// Swaps in `extended_ven` (whose class set must cover old and new kinds)
/// and continues distillation on the union of `base.occlusion.kinds` and the
/// new kinds for round(budget_fraction * base.train.iterations) steps.
DistillResult adapt(const GaitEncoder& mimic, const GaitEncoder& teacher, std::shared_ptr<const FrozenVen> extended_ven,
                    const LabeledSet& data, const DistillConfig& base, const AdaptConfig& adapt_config);

}  // namespace mimicgait
