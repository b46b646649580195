#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mimicgait {

/// Row-major signatures with their identity labels.
struct SignatureSet {
  std::vector<std::string> subjects;
  std::vector<std::string> sequence_ids;
  std::vector<float> values;
  std::size_t dim = 0;

  std::size_t size() const { return subjects.size(); }
  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

/// Euclidean distances, probes x gallery, row-major.
std::vector<double> distance_matrix(const SignatureSet& probes, const SignatureSet& gallery);

struct ProbeRecord {
  std::string sequence_id;
  std::string subject;
  std::string best_subject;
  int true_rank = 0;  // 1-based position of the true subject; 0 if not in the gallery
  double best_distance = 0.0;
};

struct RankResult {
  std::map<int, double> rank_k;
  std::vector<ProbeRecord> records;
};

inline const std::vector<int> kDefaultRanks{1, 5, 20};

/// Gallery subjects are ranked by their nearest entry; equal distances keep
/// the order in which subjects first appear in the gallery.
RankResult rank_retrieval(const SignatureSet& probes, const SignatureSet& gallery,
                          const std::vector<int>& ranks = kDefaultRanks);

/// Accept when d < t, with t the impostor distance at index floor(far * n)
/// of the ascending impostor list, so at most a `far` fraction of impostors
/// is accepted.
double tar_at_far(const std::vector<double>& genuine, std::vector<double> impostor, double far);

/// Every probe-gallery pair is genuine (same subject) or impostor.
double verification_tar(const SignatureSet& probes, const SignatureSet& gallery, double far = 0.01);

/// OP / HP; empty (with a warning on stderr) when HP is not positive.
std::optional<double> relative_performance(double op, double hp);

}  // namespace mimicgait
