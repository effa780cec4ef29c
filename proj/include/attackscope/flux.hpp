#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attackscope/matrix.hpp"

namespace attackscope {

// Temporal flux statistics of one IP region. All moments are population
// moments over every bin of the matrix.
struct FluxStats {
  IpRange region;
  std::vector<double> mean_flux;  // <w_i>, one entry per IP in region
  std::vector<double> std_flux;   // sigma_i
  std::vector<double> drive;      // W(t) = sum over region of w_i(t)
  double mean_drive = 0.0;        // <W>
  double std_drive = 0.0;         // sigma_ext
  std::size_t time_units = 0;     // T
  std::size_t active_units = 0;   // bins with W == 1
};

FluxStats flux_stats(const AttackMatrix& matrix, IpRange region);

// sigma = sqrt(<w> + (sigma_ext^2/<W>^2 - 1/<W>) <w>^2)
double theoretical_sigma(double mean_flux, double mean_drive, double std_drive);

struct FluxPoint {
  double mean = 0.0;
  double sigma = 0.0;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;  // in log10 units
  std::size_t points = 0;
  std::size_t excluded = 0;   // points with a nonpositive coordinate
};

// Least squares on (log10 mean, log10 sigma). Throws FitError with fewer
// than two usable points.
SlopeFit fit_loglog_slope(std::span<const FluxPoint> points);

std::vector<FluxPoint> flux_points(const FluxStats& stats);

// Background of 0/1 drive: <w> = t_active / T, sigma = sqrt(<w> - <w>^2).
double sparse_background_sigma(std::size_t t_active, std::size_t time_units);

struct WallAdjusted {
  double mean = 0.0;   // <w'> = (t_active + t_wall) / T
  double sigma = 0.0;  // sqrt(<w'> - <w'>^2)
  // log10 sigma' / log10 <w'> as a single-point ratio. Undefined at <w'> in {0, 1}.
  std::optional<double> ratio_slope;
  // d log10 sigma' / d log10 <w'> = (1 - 2<w'>) / (2 (1 - <w'>)).
  std::optional<double> local_slope;
  // local_slope <= 1/2; undefined at <w'> in {0, 1}.
  std::optional<bool> slope_bound_holds;
};

WallAdjusted wall_adjusted_sigma(std::size_t t_active, std::size_t t_wall,
                                 std::size_t time_units);

enum class DriveClass { ConstantOrPoisson, StronglyFluctuating, Deterministic, Unscaled };

std::string to_string(DriveClass c);

struct DriveTolerances {
  double deterministic_cv = 1e-6;  // sigma/<w> below this for every IP
  double slope_band = 0.1;
};

DriveClass classify_drive(const std::optional<SlopeFit>& fit, const FluxStats& stats,
                          const DriveTolerances& tol = {});

struct RegionFluxReport {
  FluxStats stats;
  std::optional<SlopeFit> fit;
  DriveClass drive_class = DriveClass::Unscaled;
};

// flux_stats + fit (when at least two usable points) + classify_drive.
RegionFluxReport analyze_region_flux(const AttackMatrix& matrix, IpRange region,
                                     const DriveTolerances& tol = {});

}  // namespace attackscope
