#include "attackscope/flux.hpp"

#include <cmath>

#include "attackscope/error.hpp"

namespace attackscope {

namespace {
constexpr const char* kModule = "flux_fluctuation";
}

FluxStats flux_stats(const AttackMatrix& matrix, IpRange region) {
  if (region.empty() || region.first < 1 || region.last > matrix.n_ips()) {
    throw ValidationError(kModule, "region " + to_string(region) +
                                       " is empty or outside the matrix");
  }
  if (matrix.n_bins() == 0) {
    throw ValidationError(kModule, "matrix has no time bins");
  }
  FluxStats s;
  s.region = region;
  s.time_units = matrix.n_bins();
  s.drive.assign(matrix.n_bins(), 0.0);
  const double T = static_cast<double>(matrix.n_bins());

  for (IpIndex ip = region.first; ip <= region.last; ++ip) {
    auto row = matrix.row(ip);
    double sum = 0, sum_sq = 0;
    for (std::size_t b = 0; b < row.size(); ++b) {
      const double w = row[b];
      sum += w;
      sum_sq += w * w;
      s.drive[b] += w;
    }
    const double mean = sum / T;
    s.mean_flux.push_back(mean);
    s.std_flux.push_back(std::sqrt(std::max(0.0, sum_sq / T - mean * mean)));
  }

  double sum = 0, sum_sq = 0;
  for (double W : s.drive) {
    sum += W;
    sum_sq += W * W;
    if (W == 1.0) ++s.active_units;
  }
  s.mean_drive = sum / T;
  s.std_drive = std::sqrt(std::max(0.0, sum_sq / T - s.mean_drive * s.mean_drive));
  return s;
}

double theoretical_sigma(double mean_flux, double mean_drive, double std_drive) {
  if (!(mean_drive > 0)) {
    throw DomainError(kModule, "mean drive <W> must be positive");
  }
  const double radicand =
      mean_flux + (std_drive * std_drive / (mean_drive * mean_drive) - 1.0 / mean_drive) *
                      mean_flux * mean_flux;
  if (radicand < 0) {
    throw DomainError(kModule, "negative radicand in flux-fluctuation relation; "
                               "inputs are inconsistent");
  }
  return std::sqrt(radicand);
}

std::vector<FluxPoint> flux_points(const FluxStats& stats) {
  std::vector<FluxPoint> pts;
  pts.reserve(stats.mean_flux.size());
  for (std::size_t i = 0; i < stats.mean_flux.size(); ++i) {
    pts.push_back({stats.mean_flux[i], stats.std_flux[i]});
  }
  return pts;
}

SlopeFit fit_loglog_slope(std::span<const FluxPoint> points) {
  SlopeFit fit;
  double sx = 0, sy = 0;
  std::vector<std::pair<double, double>> xy;
  for (const auto& p : points) {
    if (!(p.mean > 0) || !(p.sigma > 0)) {
      ++fit.excluded;
      continue;
    }
    xy.emplace_back(std::log10(p.mean), std::log10(p.sigma));
    sx += xy.back().first;
    sy += xy.back().second;
  }
  fit.points = xy.size();
  if (fit.points < 2) {
    throw FitError(kModule, "log-log fit needs at least two points with positive "
                            "mean and sigma");
  }
  const double n = static_cast<double>(fit.points);
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (auto [x, y] : xy) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx <= 0) {
    throw FitError(kModule, "log-log fit is degenerate: all points share one mean");
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0;
  for (auto [x, y] : xy) {
    const double r = y - (fit.intercept + fit.slope * x);
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / n);
  return fit;
}

double sparse_background_sigma(std::size_t t_active, std::size_t time_units) {
  if (time_units == 0 || t_active > time_units) {
    throw ValidationError(kModule, "need 0 <= t_active <= T and T > 0");
  }
  const double w = static_cast<double>(t_active) / static_cast<double>(time_units);
  return std::sqrt(std::max(0.0, w - w * w));
}

WallAdjusted wall_adjusted_sigma(std::size_t t_active, std::size_t t_wall,
                                 std::size_t time_units) {
  if (time_units == 0 || t_active + t_wall > time_units) {
    throw ValidationError(kModule, "need t_active + t_wall <= T and T > 0");
  }
  WallAdjusted out;
  out.mean = static_cast<double>(t_active + t_wall) / static_cast<double>(time_units);
  out.sigma = std::sqrt(std::max(0.0, out.mean - out.mean * out.mean));
  if (out.mean > 0 && out.mean < 1) {
    out.ratio_slope = std::log10(out.sigma) / std::log10(out.mean);
    out.local_slope = (1.0 - 2.0 * out.mean) / (2.0 * (1.0 - out.mean));
    out.slope_bound_holds = *out.local_slope <= 0.5;
  }
  return out;
}

std::string to_string(DriveClass c) {
  switch (c) {
    case DriveClass::ConstantOrPoisson: return "constant_or_poisson";
    case DriveClass::StronglyFluctuating: return "strongly_fluctuating";
    case DriveClass::Deterministic: return "deterministic";
    case DriveClass::Unscaled: return "unscaled";
  }
  return "unscaled";
}

DriveClass classify_drive(const std::optional<SlopeFit>& fit, const FluxStats& stats,
                          const DriveTolerances& tol) {
  bool any_active = false;
  bool all_flat = true;
  for (std::size_t i = 0; i < stats.mean_flux.size(); ++i) {
    if (stats.mean_flux[i] <= 0) continue;
    any_active = true;
    if (stats.std_flux[i] / stats.mean_flux[i] >= tol.deterministic_cv) {
      all_flat = false;
      break;
    }
  }
  if (any_active && all_flat) return DriveClass::Deterministic;
  if (!fit) return DriveClass::Unscaled;
  if (std::abs(fit->slope - 0.5) <= tol.slope_band) return DriveClass::ConstantOrPoisson;
  if (std::abs(fit->slope - 1.0) <= tol.slope_band) return DriveClass::StronglyFluctuating;
  return DriveClass::Unscaled;
}

RegionFluxReport analyze_region_flux(const AttackMatrix& matrix, IpRange region,
                                     const DriveTolerances& tol) {
  RegionFluxReport report;
  report.stats = flux_stats(matrix, region);
  auto pts = flux_points(report.stats);
  try {
    report.fit = fit_loglog_slope(pts);
  } catch (const FitError&) {
    report.fit.reset();
  }
  report.drive_class = classify_drive(report.fit, report.stats, tol);
  return report;
}

}  // namespace attackscope
