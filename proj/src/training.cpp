#include "mimicgait/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mimicgait {

using nlohmann::json;

void validate(const TrainConfig& c) {
  if (c.batch_identities < 2) throw ValidationError("train config: P (batch identities) must be >= 2");
  if (c.seqs_per_identity < 2) throw ValidationError("train config: K (sequences per identity) must be >= 2");
  if (!(c.margin > 0.0)) throw ValidationError("train config: margin must be > 0");
  if (!(c.learning_rate > 0.0)) throw ValidationError("train config: learning rate must be > 0");
  if (c.iterations < 0) throw ValidationError("train config: iterations must be >= 0");
  if (c.clip.lo < 1 || c.clip.hi < c.clip.lo) throw ValidationError("train config: bad clip length bounds");
  validate(c.augment);
}

void to_json(json& j, const ClipPolicy& c) {
  if (c.mode == ClipPolicy::Mode::fixed) {
    j = {{"mode", "fixed"}, {"n", c.lo}};
  } else {
    j = {{"mode", "uniform"}, {"lo", c.lo}, {"hi", c.hi}};
  }
}

void from_json(const json& j, ClipPolicy& c) {
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "fixed") {
    c = ClipPolicy::fixed(j.at("n").get<int>());
  } else if (mode == "uniform") {
    c = ClipPolicy::uniform(j.at("lo").get<int>(), j.at("hi").get<int>());
  } else {
    throw ValidationError("clip policy mode must be 'fixed' or 'uniform'");
  }
}

void to_json(json& j, const TrainConfig& c) {
  j = {{"optimizer", c.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
       {"learning_rate", c.learning_rate},
       {"momentum", c.momentum},
       {"weight_decay", c.weight_decay},
       {"iterations", c.iterations},
       {"batch_identities", c.batch_identities},
       {"seqs_per_identity", c.seqs_per_identity},
       {"clip", c.clip},
       {"augment", c.augment},
       {"margin", c.margin},
       {"triplet_weight", c.triplet_weight},
       {"ce_weight", c.ce_weight},
       {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  c = TrainConfig{};
  if (j.contains("optimizer")) {
    const auto o = j.at("optimizer").get<std::string>();
    if (o != "adam" && o != "sgd") throw ValidationError("optimizer must be 'adam' or 'sgd'");
    c.optimizer = o == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
  }
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.iterations = j.value("iterations", c.iterations);
  c.batch_identities = j.value("batch_identities", c.batch_identities);
  c.seqs_per_identity = j.value("seqs_per_identity", c.seqs_per_identity);
  if (j.contains("clip")) c.clip = j.at("clip").get<ClipPolicy>();
  if (j.contains("augment")) c.augment = j.at("augment").get<AugmentConfig>();
  c.margin = j.value("margin", c.margin);
  c.triplet_weight = j.value("triplet_weight", c.triplet_weight);
  c.ce_weight = j.value("ce_weight", c.ce_weight);
  c.seed = j.value("seed", c.seed);
}

LabeledSet LabeledSet::from_sequences(std::vector<SilhouetteSequence> sequences) {
  LabeledSet set;
  std::map<std::string, int64_t> index;
  for (const auto& s : sequences) index.emplace(s.subject_id(), 0);
  for (auto& [name, label] : index) {
    label = static_cast<int64_t>(set.class_names.size());
    set.class_names.push_back(name);
  }
  for (const auto& s : sequences) set.labels.push_back(index.at(s.subject_id()));
  set.sequences = std::move(sequences);
  return set;
}

LabeledSet LabeledSet::from_dataset(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  std::vector<SilhouetteSequence> seqs;
  seqs.reserve(indices.size());
  for (auto i : indices) seqs.push_back(dataset.load(i));
  return from_sequences(std::move(seqs));
}

IdentityBatchSampler::IdentityBatchSampler(const std::vector<int64_t>& labels, int identities_per_batch,
                                           int items_per_identity)
    : P_(identities_per_batch), K_(items_per_identity) {
  std::map<int64_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  for (auto& [label, items] : groups) by_label_.push_back(std::move(items));
  if (static_cast<int>(by_label_.size()) < P_) {
    throw ValidationError("training data has " + std::to_string(by_label_.size()) + " identities, fewer than P = " +
                          std::to_string(P_));
  }
}

std::vector<std::size_t> IdentityBatchSampler::draw(std::mt19937_64& rng) const {
  std::vector<std::size_t> ids(by_label_.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<std::size_t> batch;
  batch.reserve(static_cast<std::size_t>(P_) * K_);
  for (int p = 0; p < P_; ++p) {
    auto items = by_label_[ids[static_cast<std::size_t>(p)]];
    if (static_cast<int>(items.size()) >= K_) {
      std::shuffle(items.begin(), items.end(), rng);
      batch.insert(batch.end(), items.begin(), items.begin() + K_);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
      for (int k = 0; k < K_; ++k) batch.push_back(items[pick(rng)]);
    }
  }
  return batch;
}

void to_json(json& j, const TrainLog& log) {
  j = {{"loss", log.loss}, {"components", log.components}, {"learning_rate", log.learning_rate},
       {"restarts", log.restarts}};
}

void from_json(const json& j, TrainLog& log) {
  log.loss = j.at("loss").get<std::vector<double>>();
  log.components = j.at("components").get<std::map<std::string, std::vector<double>>>();
  log.learning_rate = j.at("learning_rate").get<double>();
  log.restarts = j.at("restarts").get<int>();
}

double head_mean(const std::vector<double>& v, std::size_t window) {
  const std::size_t n = std::min(window, v.size());
  if (n == 0) return 0.0;
  return std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n), 0.0) / static_cast<double>(n);
}

double tail_mean(const std::vector<double>& v, std::size_t window) {
  const std::size_t n = std::min(window, v.size());
  if (n == 0) return 0.0;
  return std::accumulate(v.end() - static_cast<std::ptrdiff_t>(n), v.end(), 0.0) / static_cast<double>(n);
}

namespace {

std::unique_ptr<torch::optim::Optimizer> make_optimizer(const std::vector<torch::Tensor>& params,
                                                        const TrainConfig& c, double lr) {
  if (c.optimizer == OptimizerKind::adam) {
    return std::make_unique<torch::optim::Adam>(params, torch::optim::AdamOptions(lr).weight_decay(c.weight_decay));
  }
  return std::make_unique<torch::optim::SGD>(
      params, torch::optim::SGDOptions(lr).momentum(c.momentum).weight_decay(c.weight_decay));
}

std::vector<torch::Tensor> snapshot(const std::vector<torch::Tensor>& tensors) {
  std::vector<torch::Tensor> out;
  out.reserve(tensors.size());
  for (const auto& t : tensors) out.push_back(t.detach().clone());
  return out;
}

void restore(const std::vector<torch::Tensor>& tensors, const std::vector<torch::Tensor>& saved) {
  torch::NoGradGuard guard;
  for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i].copy_(saved[i]);
}

constexpr int kMaxRestarts = 2;
constexpr double kExplosionFactor = 10.0;

}  // namespace

TrainLog run_optimisation(const std::vector<torch::Tensor>& parameters, const std::vector<torch::Tensor>& state,
                          const TrainConfig& config, const LossFn& loss_fn) {
  const auto saved_params = snapshot(parameters);
  const auto saved_state = snapshot(state);
  double lr = config.learning_rate;
  for (int attempt = 0;; ++attempt) {
    TrainLog log;
    log.learning_rate = lr;
    log.restarts = attempt;
    auto optimizer = make_optimizer(parameters, config, lr);
    bool exploded = false;
    for (int it = 0; it < config.iterations; ++it) {
      std::map<std::string, double> components;
      optimizer->zero_grad();
      auto loss = loss_fn(it, components);
      const double value = loss.item<double>();
      if (!std::isfinite(value) || (!log.loss.empty() && value > kExplosionFactor * std::max(log.loss.front(), 1e-3))) {
        exploded = true;
        break;
      }
      loss.backward();
      optimizer->step();
      log.loss.push_back(value);
      for (const auto& [k, v] : components) log.components[k].push_back(v);
    }
    if (!exploded || attempt == kMaxRestarts) {
      if (exploded) throw std::runtime_error("training diverged after " + std::to_string(kMaxRestarts) + " restarts");
      return log;
    }
    restore(parameters, saved_params);
    restore(state, saved_state);
    lr *= 0.1;
  }
}

}  // namespace mimicgait
