#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "mimicgait/backbone.hpp"
#include "mimicgait/occlusion.hpp"
#include "mimicgait/training.hpp"

namespace mimicgait {

inline constexpr int64_t kVisibilityDim = 64;

/// How a clip is reduced to the single-channel image the network sees.
enum class VenInput {
  temporal_average,  // mean over valid frames, re-binarized at 128
  per_frame,         // every valid frame separately, features averaged
};

struct VenConfig {
  std::vector<OcclusionKind> class_set{OcclusionKind::none, OcclusionKind::top, OcclusionKind::bottom};
  double lambda_ce = 1.0;
  double lambda_r = 10.0;
  double learning_rate = 1e-4;
  int iterations = 2000;
  int batch_size = 32;
  ClipPolicy clip = ClipPolicy::uniform(20, 40);
  OcclusionRanges ranges;
  VenInput input = VenInput::temporal_average;
  std::uint64_t seed = 0;
};

/// Throws unless none is in the class set, classes are unique and lambdas
/// are non-negative with lambda_ce > 0.
void validate(const VenConfig& config);
void to_json(nlohmann::json& j, const VenConfig& c);
void from_json(const nlohmann::json& j, VenConfig& c);

struct VisibilityFeature {
  torch::Tensor delta;   // [B, 64]
  torch::Tensor logits;  // [B, C]
  torch::Tensor amount;  // [B]
};

class VenNetImpl : public torch::nn::Module {
 public:
  explicit VenNetImpl(int64_t num_classes);

  /// x: [B, 1, 64, 64].
  VisibilityFeature forward(const torch::Tensor& x);
  torch::Tensor features(const torch::Tensor& x);
  /// Output shapes after every stage, for a given input.
  std::vector<std::pair<std::string, std::vector<int64_t>>> shape_trace(const torch::Tensor& x);
  /// Parameters that survive to inference (conv stack and FC1).
  int64_t inference_parameter_count() const;
  int64_t num_classes() const { return num_classes_; }

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr};
  torch::nn::Linear fc1{nullptr}, cls_head{nullptr}, reg_head{nullptr};

 private:
  int64_t num_classes_;
};
TORCH_MODULE(VenNet);

/// Single-channel network input for a batch of clips: [B, 1, H, W] for
/// temporal_average, [B*T, 1, H, W] for per_frame.
torch::Tensor ven_input(const ClipTensor& clips, VenInput mode);

/// A trained VEN with no mutating interface. Parameters never require
/// gradients and every forward runs under NoGradGuard.
class FrozenVen {
 public:
  FrozenVen(VenNet net, VenConfig config);

  VisibilityFeature forward(const ClipTensor& clips) const;
  torch::Tensor guide_features(const ClipTensor& clips) const;
  VisibilityFeature forward(const SilhouetteSequence& seq) const;

  const std::vector<OcclusionKind>& class_set() const { return config_.class_set; }
  const VenConfig& config() const { return config_; }
  std::uint64_t parameter_hash() const;
  int64_t inference_parameter_count() const { return net_->inference_parameter_count(); }

  /// Deep copies of the parameters, keyed by name; for serialization.
  std::vector<std::pair<std::string, torch::Tensor>> state() const;
  static FrozenVen from_state(const std::vector<std::pair<std::string, torch::Tensor>>& state, VenConfig config);

 private:
  VenNet net_;
  VenConfig config_;
};

struct VenTrainResult {
  FrozenVen ven;
  TrainLog log;  // components "ce" and "regression"
};

/// Trains on clips occluded with kinds drawn uniformly from the class set
/// (none included).
VenTrainResult train_ven(const std::vector<SilhouetteSequence>& holistic, const VenConfig& config);

/// Grows the classifier to `config.class_set` (which must start with the
/// base class set), keeps every learned weight and fine-tunes on the
/// enlarged set.
VenTrainResult extend_ven(const FrozenVen& base, const std::vector<SilhouetteSequence>& holistic,
                          const VenConfig& config);

struct VenEvaluation {
  double accuracy = 0.0;
  double amount_mse = 0.0;
  double amount_pearson = 0.0;
  std::size_t samples = 0;
};

/// Held-out scoring on `samples_per_sequence` fresh occlusions per sequence.
VenEvaluation evaluate_ven(const FrozenVen& ven, const std::vector<SilhouetteSequence>& sequences,
                           int samples_per_sequence, std::uint64_t seed);

}  // namespace mimicgait
