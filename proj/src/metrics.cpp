#include "mimicgait/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <unordered_map>

#include "mimicgait/silhouette.hpp"

namespace mimicgait {

std::vector<double> distance_matrix(const SignatureSet& probes, const SignatureSet& gallery) {
  if (probes.dim != gallery.dim) throw ValidationError("probe and gallery signatures differ in dimension");
  std::vector<double> d(probes.size() * gallery.size());
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto p = probes.row(i);
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      const auto g = gallery.row(j);
      double s = 0;
      for (std::size_t k = 0; k < probes.dim; ++k) {
        const double diff = static_cast<double>(p[k]) - g[k];
        s += diff * diff;
      }
      d[i * gallery.size() + j] = std::sqrt(s);
    }
  }
  return d;
}

RankResult rank_retrieval(const SignatureSet& probes, const SignatureSet& gallery, const std::vector<int>& ranks) {
  if (gallery.size() == 0) throw ValidationError("rank retrieval: empty gallery");
  const auto d = distance_matrix(probes, gallery);

  std::vector<std::string> subjects;
  std::unordered_map<std::string, std::size_t> subject_index;
  std::vector<std::size_t> entry_subject(gallery.size());
  for (std::size_t j = 0; j < gallery.size(); ++j) {
    auto [it, inserted] = subject_index.emplace(gallery.subjects[j], subjects.size());
    if (inserted) subjects.push_back(gallery.subjects[j]);
    entry_subject[j] = it->second;
  }

  RankResult result;
  std::map<int, std::size_t> hits;
  for (int k : ranks) hits[k] = 0;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    std::vector<double> best(subjects.size(), std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      best[entry_subject[j]] = std::min(best[entry_subject[j]], d[i * gallery.size() + j]);
    }
    std::vector<std::size_t> order(subjects.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&best](std::size_t a, std::size_t b) { return best[a] < best[b]; });

    ProbeRecord rec;
    rec.sequence_id = probes.sequence_ids.empty() ? std::to_string(i) : probes.sequence_ids[i];
    rec.subject = probes.subjects[i];
    rec.best_subject = subjects[order[0]];
    rec.best_distance = best[order[0]];
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (subjects[order[r]] == rec.subject) {
        rec.true_rank = static_cast<int>(r) + 1;
        break;
      }
    }
    for (int k : ranks) {
      if (rec.true_rank > 0 && rec.true_rank <= k) ++hits[k];
    }
    result.records.push_back(std::move(rec));
  }
  for (int k : ranks) {
    result.rank_k[k] = probes.size() ? static_cast<double>(hits[k]) / static_cast<double>(probes.size()) : 0.0;
  }
  return result;
}

double tar_at_far(const std::vector<double>& genuine, std::vector<double> impostor, double far) {
  if (impostor.empty()) throw ValidationError("TAR@FAR: no impostor pairs");
  if (genuine.empty()) throw ValidationError("TAR@FAR: no genuine pairs");
  if (!(far > 0.0) || far > 1.0) throw ValidationError("TAR@FAR: FAR must be in (0, 1]");
  std::sort(impostor.begin(), impostor.end());
  const auto k = std::min(impostor.size() - 1, static_cast<std::size_t>(std::floor(far * static_cast<double>(impostor.size()) + 1e-9)));
  const double threshold = far >= 1.0 ? std::numeric_limits<double>::infinity() : impostor[k];
  const auto accepted = std::count_if(genuine.begin(), genuine.end(), [threshold](double v) { return v < threshold; });
  return static_cast<double>(accepted) / static_cast<double>(genuine.size());
}

double verification_tar(const SignatureSet& probes, const SignatureSet& gallery, double far) {
  const auto d = distance_matrix(probes, gallery);
  std::vector<double> genuine, impostor;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      (probes.subjects[i] == gallery.subjects[j] ? genuine : impostor).push_back(d[i * gallery.size() + j]);
    }
  }
  return tar_at_far(genuine, std::move(impostor), far);
}

std::optional<double> relative_performance(double op, double hp) {
  if (!(hp > 0.0)) {
    std::cerr << "warning: holistic performance is " << hp << "; relative performance is undefined\n";
    return std::nullopt;
  }
  return op / hp;
}

}  // namespace mimicgait
