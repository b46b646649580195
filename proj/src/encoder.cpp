#include "mimicgait/encoder.hpp"

#include <random>

namespace mimicgait {

namespace F = torch::nn::functional;

void reset_injection(torch::nn::Linear& injection, int64_t embedding_dim) {
  torch::NoGradGuard guard;
  injection->weight.zero_();
  injection->weight.narrow(1, 0, embedding_dim).copy_(torch::eye(embedding_dim));
  injection->bias.zero_();
}

GaitEncoder::GaitEncoder(BackboneConfig config, BackbonePtr backbone, std::shared_ptr<const FrozenVen> ven)
    : config_(std::move(config)), backbone_(std::move(backbone)), ven_(std::move(ven)) {
  if (!backbone_) throw ValidationError("encoder needs a backbone");
  if (ven_) {
    const auto D = backbone_->embedding_dim();
    injection_ = torch::nn::Linear(D + kVisibilityDim, D);
    reset_injection(injection_, D);
  }
}

GaitEncoder GaitEncoder::create(const BackboneConfig& config, std::uint64_t seed,
                                std::shared_ptr<const FrozenVen> ven) {
  return {config, make_backbone(config, seed), std::move(ven)};
}

torch::Tensor GaitEncoder::forward(const ClipTensor& clips) {
  auto features = backbone_->forward(clips.frames, clips.valid);
  if (!ven_) return features;
  auto delta = ven_->guide_features(clips);
  auto joined = torch::cat({features, delta}, 1);
  if (joined.size(1) != injection_->weight.size(1)) throw ValidationError("injection head does not match feature size");
  return injection_->forward(joined);
}

torch::Tensor GaitEncoder::encode(const std::vector<SilhouetteSequence>& sequences, std::size_t batch_size) {
  torch::NoGradGuard guard;
  backbone_->eval();
  std::vector<torch::Tensor> out;
  for (std::size_t i = 0; i < sequences.size(); i += batch_size) {
    const auto end = std::min(sequences.size(), i + batch_size);
    std::vector<SilhouetteSequence> chunk(sequences.begin() + static_cast<std::ptrdiff_t>(i),
                                          sequences.begin() + static_cast<std::ptrdiff_t>(end));
    out.push_back(forward(to_tensor(chunk)));
  }
  backbone_->train();
  if (out.empty()) return torch::zeros({0, embedding_dim()});
  return torch::cat(out, 0);
}

std::vector<torch::Tensor> GaitEncoder::trainable_parameters() const {
  auto params = backbone_->parameters();
  if (injection_) {
    for (auto& p : injection_->parameters()) params.push_back(p);
  }
  return params;
}

GaitEncoder GaitEncoder::clone() const {
  GaitEncoder copy(config_, make_backbone(config_, 0), ven_);
  copy_parameters(*backbone_, *copy.backbone_);
  if (injection_) copy_parameters(*injection_, *copy.injection_);
  return copy;
}

GaitEncoder GaitEncoder::with_ven(std::shared_ptr<const FrozenVen> ven) const {
  GaitEncoder copy(config_, make_backbone(config_, 0), std::move(ven));
  copy_parameters(*backbone_, *copy.backbone_);
  if (injection_ && copy.injection_) copy_parameters(*injection_, *copy.injection_);
  return copy;
}

GaitEncoder GaitEncoder::without_ven() const {
  GaitEncoder copy(config_, make_backbone(config_, 0), nullptr);
  copy_parameters(*backbone_, *copy.backbone_);
  return copy;
}

std::uint64_t GaitEncoder::hash() const {
  auto h = parameter_hash(*backbone_);
  if (injection_) h = mix_seed(h, parameter_hash(*injection_));
  return h;
}

std::vector<SilhouetteSequence> sample_clips(const LabeledSet& data, const std::vector<std::size_t>& items,
                                             const ClipPolicy& policy, std::uint64_t seed) {
  std::vector<SilhouetteSequence> clips;
  clips.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    clips.push_back(sample_clip(data.sequences[items[i]], policy, mix_seed(seed, i)));
  }
  return clips;
}

std::vector<SilhouetteSequence> augment_clips(const std::vector<SilhouetteSequence>& clips, const AugmentConfig& config,
                                              std::uint64_t seed) {
  std::vector<SilhouetteSequence> out;
  out.reserve(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) out.push_back(augment(clips[i], config, mix_seed(seed, i)));
  return out;
}

std::vector<SilhouetteSequence> occlude_clips(const std::vector<SilhouetteSequence>& clips,
                                              const OcclusionPolicy& policy, std::uint64_t seed) {
  std::vector<SilhouetteSequence> out;
  out.reserve(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    out.push_back(apply(clips[i], policy.draw(mix_seed(seed, 0x0cc1u + i))).sequence);
  }
  return out;
}

ClassifierNeckImpl::ClassifierNeckImpl(int64_t embedding_dim, int64_t num_classes) {
  bn = register_module("bn", torch::nn::BatchNorm1d(embedding_dim));
  classifier = register_module("classifier", torch::nn::Linear(torch::nn::LinearOptions(embedding_dim, num_classes).bias(false)));
}

torch::Tensor ClassifierNeckImpl::forward(const torch::Tensor& embeddings) { return classifier(bn(embeddings)); }

TrainLog train_supervised(GaitEncoder& model, const LabeledSet& data, const TrainConfig& config,
                          const OcclusionPolicy* occlusion) {
  validate(config);
  IdentityBatchSampler sampler(data.labels, config.batch_identities, config.seqs_per_identity);
  torch::manual_seed(mix_seed(config.seed, 0x4e43u));
  ClassifierNeck neck(model.embedding_dim(), data.num_classes());
  auto params = model.trainable_parameters();
  for (auto& p : neck->parameters()) params.push_back(p);
  std::vector<torch::Tensor> state;
  for (auto& b : neck->buffers()) state.push_back(b);

  return run_optimisation(params, state, config, [&](int it, std::map<std::string, double>& comps) {
    const auto batch_seed = mix_seed(config.seed, static_cast<std::uint64_t>(it));
    std::mt19937_64 rng(batch_seed);
    const auto items = sampler.draw(rng);
    auto clips = augment_clips(sample_clips(data, items, config.clip, mix_seed(batch_seed, 1)), config.augment,
                               mix_seed(batch_seed, 3));
    if (occlusion != nullptr) clips = occlude_clips(clips, *occlusion, mix_seed(batch_seed, 2));
    std::vector<int64_t> labels;
    for (auto i : items) labels.push_back(data.labels[i]);
    auto label_tensor = torch::tensor(labels, torch::kInt64);

    auto emb = model.forward(to_tensor(clips));
    auto tri = triplet_loss(emb, label_tensor, config.margin);
    auto ce = F::cross_entropy(neck->forward(emb), label_tensor);
    comps["triplet"] = tri.item<double>();
    comps["ce"] = ce.item<double>();
    return config.triplet_weight * tri + config.ce_weight * ce;
  });
}

TrainLog pretrain_teacher(GaitEncoder& teacher, const LabeledSet& holistic, const TrainConfig& config) {
  if (teacher.guided()) throw ValidationError("the teacher is trained without VEN guidance");
  return train_supervised(teacher, holistic, config, nullptr);
}

}  // namespace mimicgait
