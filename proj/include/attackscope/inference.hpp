#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "attackscope/matrix.hpp"

namespace attackscope {

// Symmetric n x n matrix of coefficients in [-1, 1]; undefined entries
// (zero-variance inputs) are stored as NaN and surface as nullopt.
class PairMatrix {
 public:
  PairMatrix() = default;
  PairMatrix(IpRange ips, std::vector<double> values) : ips_(ips), values_(std::move(values)) {}

  IpRange ips() const { return ips_; }
  std::size_t size() const { return ips_.size(); }
  // 0-based positions within ips().
  std::optional<double> at(std::size_t i, std::size_t j) const;
  double raw(std::size_t i, std::size_t j) const { return values_[i * size() + j]; }
  const std::vector<double>& values() const { return values_; }

 private:
  IpRange ips_;
  std::vector<double> values_;
};

using CorrelationMatrix = PairMatrix;
using SimilarityMatrix = PairMatrix;

// Pearson coefficient between the w_i(t) series of every pair of IPs in
// `region` (whole matrix when empty). `jobs` > 1 splits rows across threads.
CorrelationMatrix correlation_matrix(const AttackMatrix& matrix, IpRange region = {},
                                     unsigned jobs = 1);

// |{j : rho_ij >= rho_c}| per IP; undefined entries never qualify.
std::vector<std::size_t> threshold_cluster(const CorrelationMatrix& corr, double rho_c = 0.7);

struct IpSummary {
  IpIndex ip = 1;
  std::uint64_t total_attacks = 0;            // M
  std::optional<double> mean_interval;        // <tau>, seconds; needs M >= 2
  std::optional<std::size_t> cluster_size;
};

// M and <tau> from the raw records for every IP of the matrix; cluster sizes
// are attached when `cluster_sizes` covers the matrix's IPs.
std::vector<IpSummary> summary_stats(std::span<const FlowRecord> records,
                                     const AttackMatrix& matrix,
                                     std::span<const std::size_t> cluster_sizes = {});

// Markov state transition probability matrix of one state sequence.
struct Mstpm {
  IpIndex ip = 1;
  std::vector<int> states;                 // sorted distinct states
  std::vector<std::uint64_t> counts;       // k x k transition counts, row-major
  std::vector<double> probs;               // k x k, row = P(next | current)
  std::vector<bool> row_defined;           // false for states never left

  std::size_t size() const { return states.size(); }
  // Transition probability between two state values; 0 if either is missing
  // or the row is undefined.
  double prob(int from, int to) const;
};

Mstpm build_mstpm(const StateSequence& sequence);
Mstpm build_mstpm(std::span<const int> states, IpIndex ip = 1);

// Pearson coefficient of the two matrices flattened row-major over the sorted
// union of their states. States missing from one matrix contribute zeros;
// rows undefined in either matrix are skipped. nullopt when fewer than two
// entries remain or either vector is constant.
std::optional<double> mstpm_similarity(const Mstpm& a, const Mstpm& b);

SimilarityMatrix similarity_matrix(std::span<const Mstpm> mstpms, IpRange ips, unsigned jobs = 1);

// Rank statistic: fraction of (within, cross) pairs where the within-group
// similarity is larger (ties count one half). Undefined entries are skipped.
struct Discrimination {
  double auc = 0.0;
  std::size_t within_pairs = 0;
  std::size_t cross_pairs = 0;
  std::size_t undefined_pairs = 0;
};

// `group` gives a label per position of `sim`.
Discrimination within_cross_discrimination(const SimilarityMatrix& sim, std::span<const int> group);

// TSV with header `ip` followed by the IP indices; undefined entries print "nan".
void write_pair_matrix_tsv(std::ostream& out, const PairMatrix& m);

// JSON array of {ip, states, probs}; undefined rows are null.
void write_mstpm_json(std::ostream& out, std::span<const Mstpm> mstpms);

}  // namespace attackscope
