#include "attackscope/spatial.hpp"

#include <algorithm>
#include <cmath>

#include "attackscope/error.hpp"

namespace attackscope {

namespace {
constexpr const char* kModule = "spatial_concentration";
}

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

std::vector<SpatialPoint> spatial_stats(const AttackMatrix& matrix, IpRange region) {
  if (region.empty() || region.first < 1 || region.last > matrix.n_ips()) {
    throw ValidationError(kModule, "region " + to_string(region) +
                                       " is empty or outside the matrix");
  }
  const std::size_t N = region.size();
  std::vector<SpatialPoint> points(matrix.n_bins());
  for (std::size_t b = 0; b < points.size(); ++b) {
    points[b].bin = b;
    points[b].region_size = N;
  }
  for (IpIndex ip = region.first; ip <= region.last; ++ip) {
    auto row = matrix.row(ip);
    for (std::size_t b = 0; b < row.size(); ++b) {
      points[b].total += row[b];
      if (row[b] > 1) points[b].zero_one = false;
    }
  }
  std::vector<double> dev(matrix.n_bins(), 0.0);
  for (auto& p : points) p.mean = static_cast<double>(p.total) / static_cast<double>(N);
  for (IpIndex ip = region.first; ip <= region.last; ++ip) {
    auto row = matrix.row(ip);
    for (std::size_t b = 0; b < row.size(); ++b) {
      const double d = row[b] - points[b].mean;
      dev[b] += d * d;
    }
  }
  for (std::size_t b = 0; b < points.size(); ++b) {
    points[b].sigma = std::sqrt(dev[b] / static_cast<double>(N));
  }
  return points;
}

double homogeneous_bound(double mean) {
  if (!(mean >= 0.0 && mean <= 1.0)) {
    throw DomainError(kModule, "homogeneous bound is defined for 0 <= w_IP <= 1");
  }
  return std::sqrt(std::max(0.0, 0.25 - (mean - 0.5) * (mean - 0.5)));
}

double concentrated_bound(double mean, std::size_t region_size) {
  if (region_size < 2) {
    throw ValidationError(kModule, "concentrated bound needs a region of >= 2 IPs");
  }
  if (!(mean >= 0)) throw DomainError(kModule, "mean must be non-negative");
  return std::sqrt(static_cast<double>(region_size - 1)) * mean;
}

std::optional<double> concentration_index(const SpatialPoint& point) {
  if (point.total == 0 || point.region_size == 0) return std::nullopt;
  const std::size_t N = point.region_size;
  const std::uint64_t n = point.total;

  std::vector<double> even(N, static_cast<double>(n / N));
  for (std::size_t i = 0; i < n % N; ++i) even[i] += 1.0;
  std::vector<double> single(N, 0.0);
  single[0] = static_cast<double>(n);

  const double lo = population_std(even);
  const double hi = population_std(single);
  if (hi - lo <= 1e-12 * std::max(1.0, hi)) return 0.0;
  return std::clamp((point.sigma - lo) / (hi - lo), 0.0, 1.0);
}

}  // namespace attackscope
