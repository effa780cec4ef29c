#include <doctest.h>

#include <cmath>
#include <random>

#include "attackscope/error.hpp"
#include "attackscope/flux.hpp"
#include "attackscope/synth.hpp"

using namespace attackscope;

namespace {
AttackMatrix matrix_from_rows(const std::vector<std::vector<Count>>& rows, double dt = 1.0) {
  AttackMatrix m(dt, 0.0, rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t b = 0; b < rows[i].size(); ++b) m.at(static_cast<IpIndex>(i + 1), b) = rows[i][b];
  }
  return m;
}

AttackMatrix generated(const StochasticLayer& layer, std::size_t ips, std::size_t bins, std::uint64_t seed) {
  Scenario sc;
  sc.seed = seed;
  sc.ip_count = ips;
  sc.duration = layer.drive_bin * static_cast<double>(bins);
  sc.layers.push_back({"drive", layer});
  auto recs = generate(sc).records;
  return bin_attacks(recs, layer.drive_bin, ips, {.t0 = 0.0, .duration = sc.duration}).matrix;
}
}  // namespace

TEST_SUITE("flux_fluctuation") {
  TEST_CASE("constant series") {
    auto s = flux_stats(matrix_from_rows({{2, 2, 2}}), {1, 1});
    CHECK(s.mean_flux[0] == 2.0);
    CHECK(s.std_flux[0] == 0.0);
    CHECK(s.drive == std::vector<double>{2, 2, 2});
    CHECK(s.std_drive == 0.0);
  }

  TEST_CASE("two alternating IPs") {
    auto s = flux_stats(matrix_from_rows({{1, 0}, {0, 1}}), {1, 2});
    CHECK(s.mean_drive == 1.0);
    CHECK(s.std_drive == 0.0);
    CHECK(s.mean_flux == std::vector<double>{0.5, 0.5});
    CHECK(s.std_flux == std::vector<double>{0.5, 0.5});
    CHECK(s.active_units == 2);
  }

  TEST_CASE("empty or outside region") {
    auto m = matrix_from_rows({{1, 2}});
    CHECK_THROWS_AS(flux_stats(m, {2, 1}), ValidationError);
    CHECK_THROWS_AS(flux_stats(m, {1, 2}), ValidationError);
  }

  TEST_CASE("Poisson drive: variance matches the mean") {
    StochasticLayer l;
    l.range = {1, 10};
    l.model = DriveModel::PoissonDrive;
    l.mean_drive = 6.0;
    auto m = generated(l, 10, 20000, 21);
    auto s = flux_stats(m, {1, 10});
    double sum = 0;
    for (double w : s.mean_flux) sum += w;
    CHECK(sum == doctest::Approx(s.mean_drive).epsilon(1e-12));
    const double ratio = s.std_drive * s.std_drive / s.mean_drive;
    CHECK(ratio > 0.9);
    CHECK(ratio < 1.1);
  }

  TEST_CASE("theoretical sigma") {
    CHECK(theoretical_sigma(4, 100, 10) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(theoretical_sigma(4, 100, 0) == doctest::Approx(std::sqrt(3.84)).epsilon(1e-15));
    for (double w : {0.01, 0.3, 2.0, 17.0}) {
      for (double W : {0.5, 3.0, 250.0}) {
        CHECK(theoretical_sigma(w, W, std::sqrt(W)) == doctest::Approx(std::sqrt(w)).epsilon(1e-12));
      }
    }
    CHECK_THROWS_AS(theoretical_sigma(1, 0, 1), DomainError);
    CHECK_THROWS_AS(theoretical_sigma(200, 100, 0), DomainError);
  }

  TEST_CASE("multinomial allocation follows the relation") {
    // Independent oracle: draw W ~ Poisson, split it multinomially.
    std::mt19937_64 gen(5);
    const std::vector<double> p{0.05, 0.1, 0.15, 0.3, 0.4};
    const double mean_W = 40;
    std::poisson_distribution<int> drive(mean_W);
    const std::size_t T = 100000;
    std::vector<std::vector<Count>> rows(p.size(), std::vector<Count>(T, 0));
    std::discrete_distribution<int> pick(p.begin(), p.end());
    for (std::size_t t = 0; t < T; ++t) {
      const int W = drive(gen);
      for (int k = 0; k < W; ++k) ++rows[static_cast<std::size_t>(pick(gen))][t];
    }
    auto s = flux_stats(matrix_from_rows(rows), {1, 5});
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double th = theoretical_sigma(s.mean_flux[i], s.mean_drive, s.std_drive);
      CHECK(std::abs(s.std_flux[i] - th) / th < 0.05);
    }
  }

  TEST_CASE("log-log slope is exact on power laws") {
    std::vector<FluxPoint> half, unit;
    for (double w = 0.01; w < 1000; w *= 1.7) {
      half.push_back({w, std::sqrt(w)});
      unit.push_back({w, w});
    }
    CHECK(fit_loglog_slope(half).slope == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(fit_loglog_slope(unit).slope - 1.0) < 1e-12);
    half.push_back({0.0, 1.0});
    half.push_back({1.0, 0.0});
    auto f = fit_loglog_slope(half);
    CHECK(f.excluded == 2);
    CHECK(std::abs(f.slope - 0.5) < 1e-12);
    std::vector<FluxPoint> one{{1, 1}, {0, 0}};
    CHECK_THROWS_AS(fit_loglog_slope(one), FitError);
  }

  TEST_CASE("Poisson region slope and class") {
    StochasticLayer l;
    l.range = {1, 30};
    l.model = DriveModel::PoissonDrive;
    l.mean_drive = 30.0;
    l.weight_spread_decades = 2.0;
    auto m = generated(l, 30, 20000, 8);
    auto rep = analyze_region_flux(m, {1, 30});
    REQUIRE(rep.fit);
    CHECK(rep.fit->slope >= 0.45);
    CHECK(rep.fit->slope <= 0.55);
    CHECK(rep.drive_class == DriveClass::ConstantOrPoisson);
  }

  TEST_CASE("heavy-tailed drive gives unit slope") {
    StochasticLayer l;
    l.range = {1, 30};
    l.model = DriveModel::HeavyTailDrive;
    l.mean_drive = 300.0;
    l.cv = 3.0;
    l.weight_spread_decades = 1.0;
    auto m = generated(l, 30, 10000, 4);
    auto rep = analyze_region_flux(m, {1, 30});
    REQUIRE(rep.fit);
    CHECK(rep.fit->slope >= 0.9);
    CHECK(rep.fit->slope <= 1.1);
    CHECK(rep.drive_class == DriveClass::StronglyFluctuating);
  }

  TEST_CASE("constant sweep region is deterministic") {
    Scenario sc;
    sc.duration = 20000;
    sc.ip_count = 20;
    SweepLayer s;
    s.range = {1, 20};
    s.sweep_rate = 5;
    s.lane_count = 20;
    s.lane_phase_spread = 10;  // every IP hit once per 10 s
    s.start_time = 0.5;
    sc.layers.push_back({"sweep", s});
    auto recs = generate(sc).records;
    auto m = bin_attacks(recs, 10.0, 20, {.t0 = 0.0, .duration = sc.duration}).matrix;
    auto rep = analyze_region_flux(m, {1, 20});
    CHECK(rep.drive_class == DriveClass::Deterministic);
    CHECK_FALSE(rep.fit.has_value());
  }

  TEST_CASE("sparse background sigma") {
    CHECK(sparse_background_sigma(0, 100) == 0.0);
    CHECK(sparse_background_sigma(50, 100) == 0.5);
    for (std::size_t t : {1u, 10u, 500u, 9000u}) {
      CHECK(sparse_background_sigma(t, 10000) <= std::sqrt(t / 10000.0));
    }
    CHECK_THROWS_AS(sparse_background_sigma(5, 4), ValidationError);

    std::mt19937_64 gen(13);
    std::bernoulli_distribution hit(0.01);
    std::vector<Count> row(100000);
    std::size_t active = 0;
    for (auto& c : row) {
      c = hit(gen);
      active += c;
    }
    auto s = flux_stats(matrix_from_rows({row}), {1, 1});
    CHECK(std::abs(s.std_flux[0] - sparse_background_sigma(active, row.size())) /
              s.std_flux[0] < 0.05);
  }

  TEST_CASE("wall-adjusted sigma") {
    auto a = wall_adjusted_sigma(37, 0, 1000);
    CHECK(a.sigma == doctest::Approx(sparse_background_sigma(37, 1000)));
    auto b = wall_adjusted_sigma(10, 990, 100000);
    CHECK(b.mean == doctest::Approx(0.01));
    CHECK(b.sigma == doctest::Approx(std::sqrt(0.0099)));
    // The single-point log ratio sits above one half; the local slope below.
    REQUIRE(b.ratio_slope);
    CHECK(*b.ratio_slope > 0.5);
    REQUIRE(b.local_slope);
    CHECK(*b.local_slope <= 0.5);
    for (std::size_t k = 1; k < 1000; k += 7) {
      auto w = wall_adjusted_sigma(k / 2, k - k / 2, 1000);
      REQUIRE(w.slope_bound_holds);
      CHECK(*w.slope_bound_holds);
    }
    CHECK_FALSE(wall_adjusted_sigma(0, 0, 10).slope_bound_holds);
    CHECK_FALSE(wall_adjusted_sigma(5, 5, 10).slope_bound_holds);
    CHECK_THROWS_AS(wall_adjusted_sigma(6, 5, 10), ValidationError);
  }
}
