#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attackscope/matrix.hpp"
#include "attackscope/patterns.hpp"

namespace attackscope {

struct EntropyEstimate {
  double value = 0.0;          // bits per symbol
  std::size_t n_states = 0;    // distinct states observed
  std::size_t length = 0;
  std::string estimator_id = "lz-match-length";
  bool reliable = true;        // false below 16 symbols
};

// Match-length entropy rate: E = log2(n) / mean(L_i), where L_i is the
// length of the shortest substring starting at i that does not occur in
// s[0, i). A single-symbol sequence gives E = 0.
EntropyEstimate estimate_entropy(std::span<const int> states);

struct FanoSolution {
  double pi_max = 1.0;
  bool clipped = false;  // E was moved into [0, log2 N]
};

// Root in [1/N, 1] of E = H(P) + (1 - P) log2(N - 1) by bisection.
// E below -slack or N < 1 raises ValidationError.
FanoSolution solve_fano(double entropy, std::size_t n_states, double slack = 0.1);

// Right-hand side of the Fano equation.
double fano_entropy(double pi, std::size_t n_states);

struct SectionPredictability {
  std::size_t index = 0;
  double entropy = 0.0;
  std::size_t n_states = 0;
  double pi_max = 1.0;
  double ground_fraction = 0.0;  // share of X = -1 states
  bool clipped = false;
};

enum class IpGroup { Deterministic, Stochastic, Unassigned };

struct IpPredictability {
  IpIndex ip = 1;
  IpGroup group = IpGroup::Unassigned;
  std::vector<SectionPredictability> sections;
  std::optional<double> mean_pi_max;
  double ground_fraction = 0.0;  // over the retained sections
  bool ground_flag = false;      // ground_fraction above the threshold
  std::size_t skipped_sections = 0;
  std::string excluded_reason;   // non-empty when the IP has no result
};

struct GroupSummary {
  std::optional<double> mean_pi_max;
  double mean_ground_fraction = 0.0;
  std::size_t ip_count = 0;
  bool ground_flag = false;
};

struct PredictabilityParams {
  std::size_t min_section_states = 16;
  bool global_alphabet = false;        // N_S from the whole IP sequence instead of the section
  double ground_flag_threshold = 0.9;
  double slack = 0.1;
};

struct PredictabilityReport {
  double h = 0.0;        // section length, hours
  double delta_t = 0.0;
  std::size_t states_per_section = 0;
  std::size_t section_count = 0;
  bool fine_resolution = false;  // delta_t < 100 s: ground-state inflation likely
  std::vector<IpPredictability> per_ip;
  GroupSummary deterministic, stochastic, overall;
};

std::vector<IpGroup> groups_from_segmentation(const BlockSegmentation& seg, std::size_t ip_count);

PredictabilityReport predictability_profile(const AttackMatrix& matrix, double h,
                                            std::span<const IpGroup> groups,
                                            const PredictabilityParams& params = {},
                                            unsigned jobs = 1);

PredictabilityReport predictability_profile(const AttackMatrix& matrix, double h,
                                            const BlockSegmentation& classification,
                                            const PredictabilityParams& params = {},
                                            unsigned jobs = 1);

}  // namespace attackscope
