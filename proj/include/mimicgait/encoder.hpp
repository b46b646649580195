#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <memory>
#include <vector>

#include "mimicgait/backbone.hpp"
#include "mimicgait/occlusion.hpp"
#include "mimicgait/training.hpp"
#include "mimicgait/ven.hpp"

namespace mimicgait {

/// A backbone, optionally guided by a frozen VEN through a linear injection
/// head: gamma = T([backbone(x), delta(x)]). Without a VEN, gamma is the
/// backbone output. The VEN is held by pointer and never registered with
/// the optimiser, so it cannot be trained through this class.
class GaitEncoder {
 public:
  GaitEncoder(BackboneConfig config, BackbonePtr backbone, std::shared_ptr<const FrozenVen> ven = nullptr);

  static GaitEncoder create(const BackboneConfig& config, std::uint64_t seed,
                            std::shared_ptr<const FrozenVen> ven = nullptr);

  torch::Tensor forward(const ClipTensor& clips);
  /// Evaluation-mode signatures [N, D] for whole sequences, without gradients.
  torch::Tensor encode(const std::vector<SilhouetteSequence>& sequences, std::size_t batch_size = 8);

  std::vector<torch::Tensor> trainable_parameters() const;
  int64_t embedding_dim() const { return backbone_->embedding_dim(); }
  bool guided() const { return ven_ != nullptr; }

  const BackboneConfig& config() const { return config_; }
  const BackbonePtr& backbone() const { return backbone_; }
  const torch::nn::Linear& injection() const { return injection_; }
  const std::shared_ptr<const FrozenVen>& ven() const { return ven_; }

  /// Deep copy of all trainable weights; the VEN is shared.
  GaitEncoder clone() const;
  /// Copy whose VEN is replaced (or added, with a fresh identity injection).
  GaitEncoder with_ven(std::shared_ptr<const FrozenVen> ven) const;
  /// Copy without VEN guidance.
  GaitEncoder without_ven() const;

  /// Hash over backbone and injection parameters.
  std::uint64_t hash() const;

 private:
  BackboneConfig config_;
  BackbonePtr backbone_;
  torch::nn::Linear injection_{nullptr};
  std::shared_ptr<const FrozenVen> ven_;
};

/// Identity on the backbone block, zeros on the VEN block.
void reset_injection(torch::nn::Linear& injection, int64_t embedding_dim);

/// Clips for the given items; clip i is drawn from `seed` mixed with i.
std::vector<SilhouetteSequence> sample_clips(const LabeledSet& data, const std::vector<std::size_t>& items,
                                             const ClipPolicy& policy, std::uint64_t seed);

/// Augments each clip with its own draw.
std::vector<SilhouetteSequence> augment_clips(const std::vector<SilhouetteSequence>& clips, const AugmentConfig& config,
                                              std::uint64_t seed);

/// Occludes each clip with its own spec drawn from `policy`.
std::vector<SilhouetteSequence> occlude_clips(const std::vector<SilhouetteSequence>& clips,
                                              const OcclusionPolicy& policy, std::uint64_t seed);

/// Batch-norm neck plus bias-free classifier used for the cross-entropy
/// term during training; discarded afterwards.
class ClassifierNeckImpl : public torch::nn::Module {
 public:
  ClassifierNeckImpl(int64_t embedding_dim, int64_t num_classes);
  torch::Tensor forward(const torch::Tensor& embeddings);

  torch::nn::BatchNorm1d bn{nullptr};
  torch::nn::Linear classifier{nullptr};
};
TORCH_MODULE(ClassifierNeck);

/// Triplet + cross-entropy training of every trainable encoder weight.
/// With `occlusion` set, each clip is occluded by an independent draw.
TrainLog train_supervised(GaitEncoder& model, const LabeledSet& data, const TrainConfig& config,
                          const OcclusionPolicy* occlusion = nullptr);

/// Teacher pretraining on holistic clips; the teacher is never guided.
TrainLog pretrain_teacher(GaitEncoder& teacher, const LabeledSet& holistic, const TrainConfig& config);

}  // namespace mimicgait
