#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "attackscope/types.hpp"

namespace attackscope {

using Count = std::uint32_t;

// Dense IP x time-bin grid of attack counts w_i(t). Rows are addressed by
// the 1-based IP index; bin b covers [t0 + b*delta_t, t0 + (b+1)*delta_t).
class AttackMatrix {
 public:
  AttackMatrix() = default;
  AttackMatrix(double delta_t, double t0, std::size_t n_ips, std::size_t n_bins);

  double delta_t() const { return delta_t_; }
  double t0() const { return t0_; }
  std::size_t n_ips() const { return n_ips_; }
  std::size_t n_bins() const { return n_bins_; }

  Count at(IpIndex ip, std::size_t bin) const { return counts_[offset(ip) + bin]; }
  Count& at(IpIndex ip, std::size_t bin) { return counts_[offset(ip) + bin]; }

  std::span<const Count> row(IpIndex ip) const {
    return {counts_.data() + offset(ip), n_bins_};
  }
  std::span<Count> row(IpIndex ip) { return {counts_.data() + offset(ip), n_bins_}; }

  std::uint64_t total() const;
  std::uint64_t row_total(IpIndex ip) const;
  IpRange all_ips() const { return {1, static_cast<IpIndex>(n_ips_)}; }

  friend bool operator==(const AttackMatrix&, const AttackMatrix&) = default;

 private:
  std::size_t offset(IpIndex ip) const { return (ip - 1) * n_bins_; }

  double delta_t_ = 1.0;
  double t0_ = 0.0;
  std::size_t n_ips_ = 0;
  std::size_t n_bins_ = 0;
  std::vector<Count> counts_;
};

enum class OutOfRangePolicy { Reject, Drop };

struct BinOptions {
  // Bin origin. Defaults to the first record's timestamp.
  std::optional<double> t0;
  // Observation length; n_bins = ceil(duration / delta_t). When absent the
  // grid extends just far enough to hold the last record.
  std::optional<double> duration;
  OutOfRangePolicy out_of_range = OutOfRangePolicy::Reject;
};

struct BinResult {
  AttackMatrix matrix;
  std::size_t dropped = 0;  // records outside the grid (Drop policy only)
};

BinResult bin_attacks(std::span<const FlowRecord> records, double delta_t,
                      std::size_t ip_count, const BinOptions& options = {});

struct RebinResult {
  AttackMatrix matrix;
  std::uint64_t dropped = 0;  // attacks in the trailing partial group
};

RebinResult rebin(const AttackMatrix& matrix, std::size_t factor);

// Coarse-grained per-IP sequence X(t); -1 encodes w(t) = 0.
struct StateSequence {
  IpIndex ip = 1;
  std::vector<int> states;
  double delta_t = 1.0;
};

// Nearest integer to log10(w), ties away from zero; w = 0 maps to -1.
int coarse_state(Count w);

std::vector<StateSequence> coarse_grain(const AttackMatrix& matrix);
StateSequence coarse_grain_row(const AttackMatrix& matrix, IpIndex ip);

struct SectionSet {
  double section_length_hours = 0.0;
  std::size_t states_per_section = 0;
  std::size_t dropped_states = 0;
  std::vector<StateSequence> sections;
};

SectionSet section_split(const StateSequence& sequence, double hours);

// Matrix CSV: one row per IP, one column per bin, no header.
void write_matrix_csv(std::ostream& out, const AttackMatrix& matrix);

// Binary form: little-endian header {f64 delta_t, f64 t0, u64 n_ips,
// u64 n_bins} followed by n_ips*n_bins u32 counts in row-major order.
void write_matrix_binary(std::ostream& out, const AttackMatrix& matrix);
AttackMatrix read_matrix_binary(std::istream& in);

// State CSV: `ip,x_0,x_1,...` per IP.
void write_states_csv(std::ostream& out, std::span<const StateSequence> sequences);

}  // namespace attackscope
