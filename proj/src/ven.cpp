#include "mimicgait/ven.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace mimicgait {

using nlohmann::json;
namespace F = torch::nn::functional;

void validate(const VenConfig& c) {
  if (std::find(c.class_set.begin(), c.class_set.end(), OcclusionKind::none) == c.class_set.end()) {
    throw ValidationError("VEN class set must contain 'none'");
  }
  if (std::set<OcclusionKind>(c.class_set.begin(), c.class_set.end()).size() != c.class_set.size()) {
    throw ValidationError("VEN class set has duplicate kinds");
  }
  if (!(c.lambda_ce > 0.0) || c.lambda_r < 0.0) throw ValidationError("VEN loss weights must satisfy lambda_ce > 0, lambda_r >= 0");
  if (c.batch_size < 1) throw ValidationError("VEN batch size must be positive");
}

void to_json(json& j, const VenConfig& c) {
  j = {{"class_set", join_kinds(c.class_set)},
       {"lambda_ce", c.lambda_ce},
       {"lambda_r", c.lambda_r},
       {"learning_rate", c.learning_rate},
       {"iterations", c.iterations},
       {"batch_size", c.batch_size},
       {"clip", c.clip},
       {"ranges", c.ranges},
       {"input", c.input == VenInput::temporal_average ? "temporal_average" : "per_frame"},
       {"seed", c.seed}};
}

void from_json(const json& j, VenConfig& c) {
  c = VenConfig{};
  if (j.contains("class_set")) c.class_set = parse_kind_list(j.at("class_set").get<std::string>());
  c.lambda_ce = j.value("lambda_ce", c.lambda_ce);
  c.lambda_r = j.value("lambda_r", c.lambda_r);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.iterations = j.value("iterations", c.iterations);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("clip")) c.clip = j.at("clip").get<ClipPolicy>();
  if (j.contains("ranges")) c.ranges = j.at("ranges").get<OcclusionRanges>();
  if (j.contains("input")) {
    const auto mode = j.at("input").get<std::string>();
    if (mode != "temporal_average" && mode != "per_frame") throw ValidationError("VEN input must be temporal_average or per_frame");
    c.input = mode == "per_frame" ? VenInput::per_frame : VenInput::temporal_average;
  }
  c.seed = j.value("seed", c.seed);
}

VenNetImpl::VenNetImpl(int64_t num_classes) : num_classes_(num_classes) {
  conv1 = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(1, 32, 3).padding(1)));
  conv2 = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(32, 64, 3).padding(1)));
  conv3 = register_module("conv3", torch::nn::Conv2d(torch::nn::Conv2dOptions(64, 128, 3).padding(1)));
  fc1 = register_module("fc1", torch::nn::Linear(128, kVisibilityDim));
  cls_head = register_module("cls_head", torch::nn::Linear(kVisibilityDim, num_classes));
  reg_head = register_module("reg_head", torch::nn::Linear(kVisibilityDim, 1));
}

torch::Tensor VenNetImpl::features(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 1 || x.size(2) != kFrameSize || x.size(3) != kFrameSize) {
    throw ValidationError("VEN expects [B, 1, 64, 64] input");
  }
  auto h = F::max_pool2d(torch::relu(conv1(x)), F::MaxPool2dFuncOptions(2));
  h = F::max_pool2d(torch::relu(conv2(h)), F::MaxPool2dFuncOptions(2));
  h = F::max_pool2d(torch::relu(conv3(h)), F::MaxPool2dFuncOptions(2));
  h = F::adaptive_avg_pool2d(h, F::AdaptiveAvgPool2dFuncOptions(1)).flatten(1);
  return torch::relu(fc1(h));
}

VisibilityFeature VenNetImpl::forward(const torch::Tensor& x) {
  auto delta = features(x);
  return {delta, cls_head(delta), reg_head(delta).squeeze(-1)};
}

std::vector<std::pair<std::string, std::vector<int64_t>>> VenNetImpl::shape_trace(const torch::Tensor& x) {
  std::vector<std::pair<std::string, std::vector<int64_t>>> trace;
  auto record = [&trace](const std::string& name, const torch::Tensor& t) { trace.emplace_back(name, t.sizes().vec()); };
  auto h = conv1(x);
  record("conv1", h);
  h = F::max_pool2d(torch::relu(h), F::MaxPool2dFuncOptions(2));
  record("pool1", h);
  h = conv2(h);
  record("conv2", h);
  h = F::max_pool2d(torch::relu(h), F::MaxPool2dFuncOptions(2));
  record("pool2", h);
  h = conv3(h);
  record("conv3", h);
  h = F::max_pool2d(torch::relu(h), F::MaxPool2dFuncOptions(2));
  record("pool3", h);
  h = F::adaptive_avg_pool2d(h, F::AdaptiveAvgPool2dFuncOptions(1)).flatten(1);
  record("avgpool", h);
  h = torch::relu(fc1(h));
  record("fc1", h);
  record("cls_head", cls_head(h));
  record("reg_head", reg_head(h));
  return trace;
}

int64_t VenNetImpl::inference_parameter_count() const {
  int64_t n = 0;
  for (const auto& item : named_parameters(true)) {
    if (item.key().rfind("cls_head", 0) == 0 || item.key().rfind("reg_head", 0) == 0) continue;
    n += item.value().numel();
  }
  return n;
}

torch::Tensor ven_input(const ClipTensor& clips, VenInput mode) {
  const auto B = clips.frames.size(0), T = clips.frames.size(1);
  const auto H = clips.frames.size(2), W = clips.frames.size(3);
  if (mode == VenInput::per_frame) return clips.frames.reshape({B * T, 1, H, W});
  const auto w = clips.valid.reshape({B, T, 1, 1});
  auto mean = (clips.frames * w).sum(1) / w.sum(1).clamp_min(1.0);
  // same rule as rebinarize on the 8-bit average
  return (mean * 255.0 >= 128.0 - 1e-4).to(torch::kFloat32).unsqueeze(1);
}

namespace {

VisibilityFeature run(VenNet& net, const ClipTensor& clips, VenInput mode) {
  auto x = ven_input(clips, mode);
  auto out = net->forward(x);
  if (mode == VenInput::temporal_average) return out;
  const auto B = clips.frames.size(0), T = clips.frames.size(1);
  const auto w = clips.valid.reshape({B, T, 1});
  const auto norm = w.sum(1).clamp_min(1.0);
  auto avg = [&](const torch::Tensor& t) { return (t.reshape({B, T, -1}) * w).sum(1) / norm; };
  return {avg(out.delta), avg(out.logits), avg(out.amount).squeeze(-1)};
}

struct VenBatch {
  ClipTensor clips;
  torch::Tensor classes;
  torch::Tensor amounts;
};

VenBatch make_batch(const std::vector<SilhouetteSequence>& holistic, const VenConfig& config, std::uint64_t seed,
                    int size) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, holistic.size() - 1);
  std::vector<SilhouetteSequence> clips;
  std::vector<int64_t> classes;
  std::vector<float> amounts;
  for (int i = 0; i < size; ++i) {
    const auto& seq = holistic[pick(rng)];
    const auto clip = sample_clip(seq, config.clip, rng());
    const auto spec = sample_spec(config.class_set, rng(), config.ranges, seq.height(), seq.width());
    auto occluded = apply(clip, spec);
    clips.push_back(std::move(occluded.sequence));
    classes.push_back(occluded.label.class_index(config.class_set));
    amounts.push_back(static_cast<float>(occluded.label.amount_target));
  }
  return {to_tensor(clips), torch::tensor(classes, torch::kInt64), torch::tensor(amounts, torch::kFloat32)};
}

VenTrainResult fit(VenNet net, const std::vector<SilhouetteSequence>& holistic, const VenConfig& config) {
  if (holistic.empty()) throw ValidationError("VEN training needs at least one sequence");
  TrainConfig tc;
  tc.optimizer = OptimizerKind::adam;
  tc.learning_rate = config.learning_rate;
  tc.weight_decay = 0.0;
  tc.iterations = config.iterations;
  net->train();
  std::vector<torch::Tensor> params;
  for (auto& p : net->parameters()) params.push_back(p);
  auto log = run_optimisation(params, {}, tc, [&](int it, std::map<std::string, double>& comps) {
    auto batch = make_batch(holistic, config, mix_seed(config.seed, static_cast<std::uint64_t>(it)), config.batch_size);
    auto out = run(net, batch.clips, config.input);
    auto ce = F::cross_entropy(out.logits, batch.classes);
    auto reg = F::mse_loss(out.amount, batch.amounts);
    comps["ce"] = ce.item<double>();
    comps["regression"] = reg.item<double>();
    return config.lambda_ce * ce + config.lambda_r * reg;
  });
  return {FrozenVen(net, config), std::move(log)};
}

}  // namespace

FrozenVen::FrozenVen(VenNet net, VenConfig config) : net_(std::move(net)), config_(std::move(config)) {
  validate(config_);
  if (net_->num_classes() != static_cast<int64_t>(config_.class_set.size())) {
    throw ValidationError("VEN head size does not match its class set");
  }
  net_->eval();
  for (auto& p : net_->parameters()) p.set_requires_grad(false);
}

VisibilityFeature FrozenVen::forward(const ClipTensor& clips) const {
  torch::NoGradGuard guard;
  auto net = net_;
  return run(net, clips, config_.input);
}

torch::Tensor FrozenVen::guide_features(const ClipTensor& clips) const { return forward(clips).delta; }

VisibilityFeature FrozenVen::forward(const SilhouetteSequence& seq) const { return forward(to_tensor({seq})); }

std::uint64_t FrozenVen::parameter_hash() const { return mimicgait::parameter_hash(*net_); }

std::vector<std::pair<std::string, torch::Tensor>> FrozenVen::state() const {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& item : net_->named_parameters(true)) out.emplace_back(item.key(), item.value().detach().clone());
  return out;
}

FrozenVen FrozenVen::from_state(const std::vector<std::pair<std::string, torch::Tensor>>& state, VenConfig config) {
  VenNet net(static_cast<int64_t>(config.class_set.size()));
  torch::NoGradGuard guard;
  auto params = net->named_parameters(true);
  if (params.size() != state.size()) throw ValidationError("VEN state does not match the architecture");
  for (const auto& [name, value] : state) {
    auto* p = params.find(name);
    if (p == nullptr || !p->sizes().equals(value.sizes())) throw ValidationError("VEN state: unexpected tensor '" + name + "'");
    p->copy_(value);
  }
  return {net, std::move(config)};
}

VenTrainResult train_ven(const std::vector<SilhouetteSequence>& holistic, const VenConfig& config) {
  validate(config);
  torch::manual_seed(config.seed);
  VenNet net(static_cast<int64_t>(config.class_set.size()));
  return fit(net, holistic, config);
}

VenTrainResult extend_ven(const FrozenVen& base, const std::vector<SilhouetteSequence>& holistic,
                          const VenConfig& config) {
  validate(config);
  const auto& old_set = base.class_set();
  for (auto k : old_set) {
    if (std::find(config.class_set.begin(), config.class_set.end(), k) == config.class_set.end()) {
      throw ValidationError("extended VEN class set must cover the original kind '" + to_string(k) + "'");
    }
  }
  torch::manual_seed(config.seed);
  VenNet net(static_cast<int64_t>(config.class_set.size()));
  {
  torch::NoGradGuard guard;
  auto params = net->named_parameters(true);
  for (const auto& [name, value] : base.state()) {
    if (name.rfind("cls_head", 0) != 0) {
      params[name].copy_(value);
      continue;
    }
    // classifier rows move to the position of their kind in the new set
    for (std::size_t old_row = 0; old_row < old_set.size(); ++old_row) {
      const auto new_row = std::find(config.class_set.begin(), config.class_set.end(), old_set[old_row]) - config.class_set.begin();
      params[name][new_row].copy_(value[static_cast<int64_t>(old_row)]);
    }
  }
  }
  return fit(net, holistic, config);
}

VenEvaluation evaluate_ven(const FrozenVen& ven, const std::vector<SilhouetteSequence>& sequences,
                           int samples_per_sequence, std::uint64_t seed) {
  const auto& cfg = ven.config();
  std::vector<double> predicted, target;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    std::vector<SilhouetteSequence> clips;
    std::vector<int64_t> classes;
    for (int s = 0; s < samples_per_sequence; ++s) {
      const auto item_seed = mix_seed(mix_seed(seed, i), static_cast<std::uint64_t>(s));
      const auto clip = sample_clip(sequences[i], cfg.clip, item_seed);
      const auto spec = sample_spec(cfg.class_set, mix_seed(item_seed, 1), cfg.ranges);
      auto occluded = apply(clip, spec);
      clips.push_back(occluded.sequence);
      classes.push_back(occluded.label.class_index(cfg.class_set));
      target.push_back(occluded.label.amount_target);
    }
    auto out = ven.forward(to_tensor(clips));
    auto pred = out.logits.argmax(1);
    for (int s = 0; s < samples_per_sequence; ++s) {
      correct += pred[s].item<int64_t>() == classes[static_cast<std::size_t>(s)] ? 1 : 0;
      predicted.push_back(out.amount[s].item<double>());
    }
  }
  VenEvaluation ev;
  ev.samples = target.size();
  if (ev.samples == 0) return ev;
  const double n = static_cast<double>(ev.samples);
  ev.accuracy = static_cast<double>(correct) / n;
  double mp = 0, mt = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    ev.amount_mse += (predicted[i] - target[i]) * (predicted[i] - target[i]) / n;
    mp += predicted[i] / n;
    mt += target[i] / n;
  }
  double cov = 0, vp = 0, vt = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    cov += (predicted[i] - mp) * (target[i] - mt);
    vp += (predicted[i] - mp) * (predicted[i] - mp);
    vt += (target[i] - mt) * (target[i] - mt);
  }
  ev.amount_pearson = vp > 0 && vt > 0 ? cov / std::sqrt(vp * vt) : 0.0;
  return ev;
}

}  // namespace mimicgait
