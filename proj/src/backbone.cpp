#include "mimicgait/backbone.hpp"

#include <algorithm>
#include <cstring>

namespace mimicgait {

namespace F = torch::nn::functional;

ClipTensor to_tensor(const std::vector<SilhouetteSequence>& sequences) {
  if (sequences.empty()) throw ValidationError("to_tensor: empty batch");
  const int H = sequences[0].height(), W = sequences[0].width();
  int t_max = 0;
  for (const auto& s : sequences) {
    if (s.height() != H || s.width() != W) throw ValidationError("to_tensor: mixed frame sizes in batch");
    t_max = std::max(t_max, s.length());
  }
  const auto B = static_cast<int64_t>(sequences.size());
  auto frames = torch::zeros({B, t_max, H, W}, torch::kUInt8);
  auto valid = torch::zeros({B, t_max}, torch::kFloat32);
  auto* fp = frames.data_ptr<std::uint8_t>();
  auto* vp = valid.data_ptr<float>();
  const std::size_t per_frame = static_cast<std::size_t>(H) * W;
  for (int64_t b = 0; b < B; ++b) {
    const auto& s = sequences[static_cast<std::size_t>(b)];
    std::memcpy(fp + static_cast<std::size_t>(b) * t_max * per_frame, s.pixels().data(), s.pixels().size());
    for (int t = 0; t < s.length(); ++t) vp[b * t_max + t] = s.valid(t) ? 1.0F : 0.0F;
  }
  return {frames.to(torch::kFloat32), valid};
}

ReferenceBackbone::ReferenceBackbone(const BackboneConfig& config)
    : parts_(config.parts), dim_(config.embedding_dim) {
  if (config.channels.size() != 3) throw ValidationError("reference backbone needs exactly 3 channel widths");
  const auto& c = config.channels;
  conv1_ = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(1, c[0], 3).padding(1)));
  conv2_ = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(c[0], c[1], 3).padding(1)));
  conv3_ = register_module("conv3", torch::nn::Conv2d(torch::nn::Conv2dOptions(c[1], c[2], 3).padding(1)));
  // 8 rows remain after pooling; each part contributes max and mean per channel
  if (8 % parts_ != 0) throw ValidationError("reference backbone: parts must divide 8");
  head_ = register_module("head", torch::nn::Linear(2 * c[2] * parts_, dim_));
}

torch::Tensor ReferenceBackbone::forward(const torch::Tensor& frames, const torch::Tensor& valid) {
  const auto B = frames.size(0), T = frames.size(1);
  auto x = frames.reshape({B * T, 1, frames.size(2), frames.size(3)});
  x = F::avg_pool2d(x, F::AvgPool2dFuncOptions(2));
  x = F::max_pool2d(torch::relu(conv1_(x)), F::MaxPool2dFuncOptions(2));
  x = F::max_pool2d(torch::relu(conv2_(x)), F::MaxPool2dFuncOptions(2));
  x = torch::relu(conv3_(x));
  const auto C = x.size(1), h = x.size(2), w = x.size(3);
  x = x.reshape({B, T, C, h, w});
  // activations are >= 0, so zeroing invalid frames removes them from the max
  x = (x * valid.reshape({B, T, 1, 1, 1})).amax(1);
  auto parts = x.reshape({B, C, parts_, (h / parts_) * w});
  auto pooled = torch::cat({parts.amax(-1), parts.mean(-1)}, 1);
  return head_(pooled.reshape({B, 2 * C * parts_}));
}

PixelStatsBackbone::PixelStatsBackbone(const BackboneConfig& config) : dim_(config.embedding_dim) {
  head_ = register_module("head", torch::nn::Linear(64, dim_));
}

torch::Tensor PixelStatsBackbone::forward(const torch::Tensor& frames, const torch::Tensor& valid) {
  const auto B = frames.size(0), T = frames.size(1);
  auto x = F::adaptive_avg_pool2d(frames.reshape({B * T, 1, frames.size(2), frames.size(3)}),
                                  F::AdaptiveAvgPool2dFuncOptions({8, 8}))
               .reshape({B, T, 64});
  const auto w = valid.unsqueeze(-1);
  auto mean = (x * w).sum(1) / w.sum(1).clamp_min(1.0);
  return head_(mean);
}

BackbonePtr make_backbone(const BackboneConfig& config, std::uint64_t seed) {
  if (config.embedding_dim < 1) throw ValidationError("embedding dimension must be positive");
  torch::manual_seed(seed);
  if (config.arch == "reference") return std::make_shared<ReferenceBackbone>(config);
  if (config.arch == "pixel_stats") return std::make_shared<PixelStatsBackbone>(config);
  throw ValidationError("unknown backbone architecture '" + config.arch + "'");
}

void to_json(nlohmann::json& j, const BackboneConfig& c) {
  j = {{"arch", c.arch}, {"embedding_dim", c.embedding_dim}, {"channels", c.channels}, {"parts", c.parts}};
}

void from_json(const nlohmann::json& j, BackboneConfig& c) {
  c = BackboneConfig{};
  c.arch = j.value("arch", c.arch);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.channels = j.value("channels", c.channels);
  c.parts = j.value("parts", c.parts);
}

torch::Tensor euclidean_distances(const torch::Tensor& a, const torch::Tensor& b) {
  auto diff = a.unsqueeze(1) - b.unsqueeze(0);
  return diff.pow(2).sum(-1).clamp_min(1e-12).sqrt();
}

torch::Tensor triplet_loss(const torch::Tensor& embeddings, const torch::Tensor& labels, double margin) {
  const auto N = embeddings.size(0);
  auto d = euclidean_distances(embeddings, embeddings);
  auto same = labels.unsqueeze(0) == labels.unsqueeze(1);
  auto not_self = ~torch::eye(N, torch::TensorOptions().dtype(torch::kBool));
  auto pos = same & not_self;
  auto neg = ~same;
  auto mask = (pos.unsqueeze(2) & neg.unsqueeze(1)).to(embeddings.dtype());
  const auto count = mask.sum();
  if (count.item<double>() == 0.0) return embeddings.sum() * 0.0;
  auto hinge = torch::relu(d.unsqueeze(2) - d.unsqueeze(1) + margin);
  return (hinge * mask).sum() / count;
}

void copy_parameters(const torch::nn::Module& from, torch::nn::Module& to) {
  torch::NoGradGuard guard;
  auto src = from.named_parameters(true);
  auto dst = to.named_parameters(true);
  if (src.size() != dst.size()) throw ValidationError("copy_parameters: module structures differ");
  for (auto& item : dst) {
    const auto* s = src.find(item.key());
    if (s == nullptr || !s->sizes().equals(item.value().sizes())) {
      throw ValidationError("copy_parameters: no matching source for '" + item.key() + "'");
    }
    item.value().copy_(*s);
  }
}

std::uint64_t parameter_hash(const torch::nn::Module& module) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& item : module.named_parameters(true)) {
    for (char ch : item.key()) h = (h ^ static_cast<unsigned char>(ch)) * 1099511628211ULL;
    auto t = item.value().detach().contiguous().to(torch::kCPU);
    const auto* bytes = static_cast<const unsigned char*>(t.data_ptr());
    const auto n = static_cast<std::size_t>(t.numel()) * t.element_size();
    for (std::size_t i = 0; i < n; ++i) h = (h ^ bytes[i]) * 1099511628211ULL;
  }
  return h;
}

}  // namespace mimicgait
