#pragma once

#include <optional>
#include <span>
#include <vector>

#include "attackscope/matrix.hpp"

namespace attackscope {

// Cross-IP statistics of one time bin within a region.
struct SpatialPoint {
  std::size_t bin = 0;
  double mean = 0.0;          // w_IP = n / N
  double sigma = 0.0;         // population std across the region's IPs
  std::uint64_t total = 0;    // n
  std::size_t region_size = 0;  // N
  bool zero_one = true;       // every count in the bin is 0 or 1
};

std::vector<SpatialPoint> spatial_stats(const AttackMatrix& matrix, IpRange region);

// Lower envelope for sparse 0/1 spreads: sqrt(1/4 - (w - 1/2)^2), w in [0, 1].
double homogeneous_bound(double mean);

// Upper envelope when all attacks land on one IP: sqrt(N - 1) * w.
double concentrated_bound(double mean, std::size_t region_size);

// Position of sigma between the evenly spread configuration (0) and the
// single-target configuration (1) for the point's n and N, clipped to [0, 1].
// Absent when n = 0.
std::optional<double> concentration_index(const SpatialPoint& point);

// Population std of a count vector.
double population_std(std::span<const double> values);

}  // namespace attackscope
