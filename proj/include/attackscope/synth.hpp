#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "attackscope/types.hpp"

namespace attackscope {

// Portable pseudo-random source: std::mt19937_64 (bit-exact by the C++
// standard) with all transforms defined here rather than through the
// implementation-defined <random> distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();                 // [0, 1), 53-bit
  double exponential(double rate);  // mean 1/rate
  double normal();                  // Box-Muller
  std::size_t below(std::size_t n); // uniform integer in [0, n)

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Constant-speed scan. Each lane visits the range in IP order, dwelling
// `sweep_rate` seconds per IP. Lane k is phase-shifted by k*lane_phase_spread.
struct SweepLayer {
  IpRange range;
  double sweep_rate = 8.0;          // seconds per IP
  double per_ip_attack_rate = 0.0;  // attacks/s while dwelling; 0 = one per dwell
  std::size_t lane_count = 1;
  double lane_phase_spread = 0.0;   // seconds between consecutive lanes
  double start_time = 0.0;
  std::size_t passes = 0;           // 0 = repeat cyclically until the end
  int direction = +1;
};

// Near-instantaneous burst hitting every IP of the range in index order.
struct WallLayer {
  IpRange range;                    // empty = whole IP space
  std::vector<double> times;        // wall start times
  double period = 0.0;              // if > 0, adds first_time + k*period
  double first_time = 0.0;
  std::size_t multiplicity = 1;     // attacks per IP
  double per_ip_delay = 0.01;       // seconds between first hits of adjacent IPs
  double delay_jitter = 0.0;        // relative, uniform in [-j, +j]
  std::vector<double> delay_choices;  // if set, each step draws one of these
};

enum class DriveModel { ConstantRate, PoissonDrive, HeavyTailDrive, ConcentratedBursts };

// Region-wide drive W(t) allocated to IPs by fixed weights.
struct StochasticLayer {
  IpRange range;
  DriveModel model = DriveModel::PoissonDrive;
  double mean_drive = 1.0;   // <W> per drive bin (bursts per bin for ConcentratedBursts)
  double drive_bin = 10.0;   // seconds
  double cv = 1.0;           // HeavyTailDrive: std/mean of the bin intensity
  double weight_spread_decades = 0.0;  // per-IP weights log-spaced over this many decades
  std::size_t burst_size = 10;
  double burst_spread = 1.0;  // seconds over which one burst lands
};

using LayerSpec = std::variant<SweepLayer, WallLayer, StochasticLayer>;

struct PatternLayer {
  std::string name;
  LayerSpec spec;
};

// Ground-truth annotation of an IP region (never seen by detectors).
struct RegionLabel {
  std::string name;
  IpRange range;
  bool deterministic = false;
};

struct Scenario {
  std::uint64_t seed = 1;
  double duration = 86400.0;
  std::size_t ip_count = 491;
  std::vector<PatternLayer> layers;
  std::vector<RegionLabel> regions;
};

struct LayerSummary {
  std::string name;
  std::string type;
  IpRange range;
  std::size_t record_count = 0;
  double true_rate = 0.0;  // sweep s/IP, wall s/IP, stochastic attacks/s
  std::size_t multiplicity = 0;
  std::vector<double> wall_times;
};

struct GeneratedTraffic {
  std::vector<FlowRecord> records;       // sorted by (t, ip)
  std::vector<std::uint16_t> layer_of;   // sidecar: layer index per record
  std::vector<LayerSummary> layers;
};

// Union of all layers, time-sorted. Identical scenarios give identical output.
GeneratedTraffic generate(const Scenario& scenario);

void validate(const Scenario& scenario);

// Canned scenario echoing the published IP-space layout: slow sweeps on
// 19-31, heavy-tailed stochastic drive on 35-47, fast sweeps at 8/3/6 s per IP
// on 51-130/131-191/192-246, sparse stochastic background elsewhere, and
// periodic walls over the background block 247-491.
Scenario fig1_composite(std::uint64_t seed = 1, double duration = 172800.0);

Scenario parse_scenario_json(std::istream& in);
std::string scenario_to_json(const Scenario& scenario);

// labels.json: per-layer tags, true rates and wall times, region labels and
// the per-record layer index.
void write_labels_json(std::ostream& out, const Scenario& scenario,
                       const GeneratedTraffic& traffic);

// Records whose layer index is in `layers`.
std::vector<FlowRecord> select_layers(const GeneratedTraffic& traffic,
                                      const std::vector<std::size_t>& layers);

}  // namespace attackscope
