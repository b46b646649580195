#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "mimicgait/augment.hpp"
#include "mimicgait/silhouette.hpp"
#include "mimicgait/toy_dataset.hpp"

namespace mimicgait {

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::sgd;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int iterations = 1000;
  int batch_identities = 32;  // P
  int seqs_per_identity = 4;  // K
  ClipPolicy clip = ClipPolicy::uniform(20, 40);
  AugmentConfig augment;
  double margin = 0.2;
  double triplet_weight = 1.0;
  double ce_weight = 1.0;
  std::uint64_t seed = 0;
};

/// Throws ValidationError unless P >= 2, K >= 2, m > 0 and the rest is sane.
void validate(const TrainConfig& config);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const ClipPolicy& c);
void from_json(const nlohmann::json& j, ClipPolicy& c);

/// In-memory training data with dense integer labels.
struct LabeledSet {
  std::vector<SilhouetteSequence> sequences;
  std::vector<int64_t> labels;
  std::vector<std::string> class_names;  // label -> subject id

  static LabeledSet from_sequences(std::vector<SilhouetteSequence> sequences);
  static LabeledSet from_dataset(const Dataset& dataset, const std::vector<std::size_t>& indices);
  int64_t num_classes() const { return static_cast<int64_t>(class_names.size()); }
  std::size_t size() const { return sequences.size(); }
};

/// Draws P identities and K items per identity. Items of an identity are
/// drawn without replacement while enough exist, with replacement otherwise.
class IdentityBatchSampler {
 public:
  IdentityBatchSampler(const std::vector<int64_t>& labels, int identities_per_batch, int items_per_identity);
  std::vector<std::size_t> draw(std::mt19937_64& rng) const;
  int identities() const { return static_cast<int>(by_label_.size()); }

 private:
  std::vector<std::vector<std::size_t>> by_label_;
  int P_;
  int K_;
};

struct TrainLog {
  std::vector<double> loss;
  std::map<std::string, std::vector<double>> components;
  double learning_rate = 0.0;
  int restarts = 0;
};
void to_json(nlohmann::json& j, const TrainLog& log);
void from_json(const nlohmann::json& j, TrainLog& log);

/// Mean of the first / last `window` entries of a loss trace.
double head_mean(const std::vector<double>& values, std::size_t window);
double tail_mean(const std::vector<double>& values, std::size_t window);

using LossFn = std::function<torch::Tensor(int iteration, std::map<std::string, double>& components)>;

/// Plain optimisation loop over `config.iterations` steps. A loss that turns
/// non-finite or grows past 10x its first value restores the starting
/// parameters and restarts with the learning rate divided by 10 (twice at
/// most). `state` lists extra tensors (e.g. running statistics) restored
/// along with the parameters.
TrainLog run_optimisation(const std::vector<torch::Tensor>& parameters, const std::vector<torch::Tensor>& state,
                          const TrainConfig& config, const LossFn& loss_fn);

}  // namespace mimicgait
