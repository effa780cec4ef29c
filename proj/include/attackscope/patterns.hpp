#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attackscope/matrix.hpp"

namespace attackscope {

struct WallParams {
  double max_delay = 1.0;       // max gap (s) between consecutive hits of one wall
  double min_coverage = 0.95;   // fraction of the wall's IP span hit exactly m times
  double min_span = 0.25;       // shortest wall, as a fraction of ip_count
  IpIndex max_skip = 8;         // IPs a wall may jump over (lost or filtered records)
};

struct WallEvent {
  double start_time = 0.0;
  double end_time = 0.0;
  IpRange ip_range;
  std::size_t multiplicity = 1;
  double per_ip_delay = 0.0;  // median delay between first hits of adjacent IPs
  bool ordered = true;        // first hits strictly increase with IP index
  double coverage = 0.0;      // share of ip_range hit exactly m times
  std::vector<std::size_t> members;  // indices into the input records
};

// Walls in time-sorted records: longest chains of hits whose IP index never
// decreases, with steps of at most max_delay seconds and max_skip + 1 IPs,
// spanning at least min_span of the IP space and hitting >= min_coverage of
// the IPs in that span exactly m times each.
std::vector<WallEvent> detect_walls(std::span<const FlowRecord> records, std::size_t ip_count,
                                    const WallParams& params = {});

struct StrippedRecords {
  std::vector<FlowRecord> records;          // records not claimed by any wall
  std::vector<std::size_t> original_index;  // position of each in the input
};

StrippedRecords strip_walls(std::span<const FlowRecord> records,
                            std::span<const WallEvent> walls);

struct SweepParams {
  double dwell_gap = 2.0;       // hits on one IP closer than this form one dwell
  double dwell_merge = 0.5;     // join dwells whose gap is below this times their summed span
  double min_rate = 1.0;        // s/IP; faster advances are walls
  double max_rate = 2000.0;     // s/IP; longest first step considered
  double min_fraction = 0.5;    // a track must span this fraction of the range
  std::size_t min_track_ips = 0;  // absolute minimum; overrides min_fraction when > 0
  double max_residual = 0.25;   // rms residual of the time-vs-IP fit, in units of the rate
  double endpoint_residual = 0.02;  // endpoint tolerance floor, in units of the rate
  double group_tolerance = 0.1;  // relative rate difference for tracks of one pattern
  bool both_directions = false;  // also trace descending sweeps
};

struct SweepPattern {
  IpRange ip_range;
  double sweep_rate = 0.0;          // s/IP, least-squares slope
  double per_ip_attack_rate = 0.0;  // attacks/s while dwelling on an IP
  double start_time = 0.0;
  int direction = +1;
  std::size_t track_count = 0;
  double rms_residual = 0.0;        // worst track, seconds
  std::vector<std::size_t> members;  // indices into the input records
};

std::vector<SweepPattern> detect_sweeps(std::span<const FlowRecord> records, IpRange ip_range,
                                        const SweepParams& params = {});

// Per-IP share of records whose index is in `claimed` (IPs without records: 0).
std::vector<double> deterministic_fraction(std::span<const FlowRecord> records,
                                           std::size_t ip_count,
                                           std::span<const std::size_t> claimed);

enum class PatternClass { Deterministic, Stochastic, Mixed };
std::string to_string(PatternClass c);

struct BlockParams {
  double amplitude_threshold = 0.5;  // decades of median log10(w + 0.1)
  double deterministic_min = 0.8;
  double stochastic_max = 0.2;
};

struct IpBlock {
  IpRange ip_range;
  double amplitude = 0.0;   // median over the block of per-IP median log10(w + 0.1)
  int amplitude_class = 0;  // nearest integer of amplitude
  PatternClass pattern_class = PatternClass::Stochastic;
  int pattern_id = -1;      // dominant sweep pattern, -1 if none
};

struct BlockSegmentation {
  std::vector<IpBlock> blocks;
};

// Per-IP median of log10(w + 0.1) over all bins.
std::vector<double> median_log_amplitude(const AttackMatrix& matrix);

// Change-point segmentation along the IP axis. A boundary falls between
// adjacent IPs whose median amplitudes differ by more than the threshold or
// whose pattern class or dominant sweep pattern differ. `det_fraction` and
// `pattern_of` may be empty (all stochastic, no pattern).
BlockSegmentation segment_ip_blocks(const AttackMatrix& matrix,
                                    std::span<const double> det_fraction = {},
                                    std::span<const int> pattern_of = {},
                                    const BlockParams& params = {});

// Dominant sweep pattern per IP (index into `sweeps`, -1 if none).
std::vector<int> dominant_pattern(std::span<const FlowRecord> records, std::size_t ip_count,
                                  std::span<const SweepPattern> sweeps);

}  // namespace attackscope
