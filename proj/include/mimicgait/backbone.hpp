#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "mimicgait/silhouette.hpp"

namespace mimicgait {

/// Zero-padded batch of clips: frames [B, T_max, H, W] in {0, 1} and a
/// validity mask [B, T_max]. Padding frames are marked invalid.
struct ClipTensor {
  torch::Tensor frames;
  torch::Tensor valid;

  int64_t batch() const { return frames.size(0); }
};

ClipTensor to_tensor(const std::vector<SilhouetteSequence>& sequences);

/// Gait encoder contract. forward() maps a clip batch to [B, D] signatures;
/// invalid frames must not influence the result.
class Backbone : public torch::nn::Module {
 public:
  virtual torch::Tensor forward(const torch::Tensor& frames, const torch::Tensor& valid) = 0;
  virtual int64_t embedding_dim() const = 0;
  virtual std::string arch_id() const = 0;
};
using BackbonePtr = std::shared_ptr<Backbone>;

struct BackboneConfig {
  std::string arch = "reference";  // or "pixel_stats"
  int64_t embedding_dim = 128;
  std::vector<int64_t> channels{8, 16, 32};
  int64_t parts = 4;
};

/// Per-frame conv stack, temporal max over valid frames, horizontal part
/// pooling and a linear head.
class ReferenceBackbone : public Backbone {
 public:
  explicit ReferenceBackbone(const BackboneConfig& config);
  torch::Tensor forward(const torch::Tensor& frames, const torch::Tensor& valid) override;
  int64_t embedding_dim() const override { return dim_; }
  std::string arch_id() const override { return "reference"; }

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, conv3_{nullptr};
  torch::nn::Linear head_{nullptr};
  int64_t parts_;
  int64_t dim_;
};

/// Deliberately trivial encoder: masked temporal mean of 8x8 pooled pixels
/// followed by a linear layer. Exists to exercise the pipeline against a
/// second architecture.
class PixelStatsBackbone : public Backbone {
 public:
  explicit PixelStatsBackbone(const BackboneConfig& config);
  torch::Tensor forward(const torch::Tensor& frames, const torch::Tensor& valid) override;
  int64_t embedding_dim() const override { return dim_; }
  std::string arch_id() const override { return "pixel_stats"; }

 private:
  torch::nn::Linear head_{nullptr};
  int64_t dim_;
};

/// Parameters are initialised from `seed`.
BackbonePtr make_backbone(const BackboneConfig& config, std::uint64_t seed);

void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);

/// Euclidean distances [N, M] computed from explicit differences so the
/// gradient stays finite at zero distance.
torch::Tensor euclidean_distances(const torch::Tensor& a, const torch::Tensor& b);

/// Batch-all triplet loss: mean of [d(a,p) - d(a,n) + m]_+ over every
/// (anchor, positive, negative) with label(a) = label(p), a != p and
/// label(n) != label(a). Zero (with a graph) when no triplet exists.
torch::Tensor triplet_loss(const torch::Tensor& embeddings, const torch::Tensor& labels, double margin);

/// Copies parameter values between two modules of identical structure.
void copy_parameters(const torch::nn::Module& from, torch::nn::Module& to);

/// FNV-1a over parameter names and raw bytes; used to prove freezing.
std::uint64_t parameter_hash(const torch::nn::Module& module);

}  // namespace mimicgait
