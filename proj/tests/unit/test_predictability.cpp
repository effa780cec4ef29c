#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "attackscope/error.hpp"
#include "attackscope/predictability.hpp"
#include "attackscope/synth.hpp"

using namespace attackscope;

namespace {
// Quadratic-time reference: shortest substring starting at i absent from s[0, i).
double brute_lz(const std::vector<int>& s) {
  const std::size_t n = s.size();
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = 1;
    for (; i + k <= n; ++k) {
      bool found = false;
      for (std::size_t j = 0; j + k <= i && !found; ++j) {
        found = std::equal(s.begin() + static_cast<std::ptrdiff_t>(j),
                           s.begin() + static_cast<std::ptrdiff_t>(j + k),
                           s.begin() + static_cast<std::ptrdiff_t>(i));
      }
      if (!found) break;
    }
    sum += static_cast<double>(k);
  }
  return std::log2(static_cast<double>(n)) / (sum / static_cast<double>(n));
}
}  // namespace

TEST_SUITE("predictability") {
  TEST_CASE("entropy of a constant sequence is zero") {
    auto e = estimate_entropy(std::vector<int>(500, -1));
    CHECK(e.value == 0.0);
    CHECK(e.n_states == 1);
    CHECK(e.reliable);
    CHECK_FALSE(estimate_entropy(std::vector<int>{0, 1, 0}).reliable);
  }

  TEST_CASE("match lengths agree with a brute-force scan") {
    std::mt19937_64 gen(12);
    for (int trial = 0; trial < 60; ++trial) {
      const std::size_t n = 2 + gen() % 120;
      const int k = 2 + static_cast<int>(gen() % 4);
      std::vector<int> s(n);
      for (auto& x : s) x = static_cast<int>(gen() % static_cast<unsigned>(k)) - 1;
      if (trial % 3 == 0) {
        for (std::size_t i = 0; i < n; ++i) s[i] = (i % 5 == 0 || gen() % 9 == 0) ? 1 : 0;
      }
      auto e = estimate_entropy(s);
      if (e.n_states > 1) CHECK(e.value == doctest::Approx(brute_lz(s)).epsilon(1e-12));
    }
  }

  TEST_CASE("uniform i.i.d. symbols over four states") {
    std::mt19937_64 gen(21);
    std::vector<int> s(100000);
    for (auto& x : s) x = static_cast<int>(gen() % 4);
    auto e = estimate_entropy(s);
    CHECK(e.n_states == 4);
    CHECK(e.value >= 1.9);
    CHECK(e.value <= 2.1);
  }

  TEST_CASE("alternating sequence is nearly free of entropy") {
    std::vector<int> s(10000);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<int>(i % 2);
    CHECK(estimate_entropy(s).value < 0.1);
  }

  TEST_CASE("entropy stays near log2 N") {
    std::mt19937_64 gen(8);
    for (int k : {2, 3, 5}) {
      std::vector<int> s(2000);
      for (auto& x : s) x = static_cast<int>(gen() % static_cast<unsigned>(k));
      auto e = estimate_entropy(s);
      CHECK(e.value <= std::log2(static_cast<double>(e.n_states)) + 0.1);
    }
  }

  TEST_CASE("Fano closure") {
    CHECK(solve_fano(0.0, 5).pi_max == 1.0);
    CHECK(solve_fano(std::log2(7.0), 7).pi_max == doctest::Approx(1.0 / 7).epsilon(1e-12));
    CHECK(std::abs(solve_fano(1.0, 2).pi_max - 0.5) < 1e-9);
    CHECK(solve_fano(0.3, 1).pi_max == 1.0);
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
      const std::size_t n = 2 + gen() % 11;
      const double e = u(gen) * std::log2(static_cast<double>(n));
      const auto f = solve_fano(e, n);
      CHECK(f.pi_max >= 1.0 / static_cast<double>(n));
      CHECK(f.pi_max <= 1.0);
      CHECK(std::abs(fano_entropy(f.pi_max, n) - e) < 1e-6);
      CHECK_FALSE(f.clipped);
    }
    double prev = 1.0;
    for (double e = 0.0; e <= 3.0; e += 0.05) {
      const double p = solve_fano(e, 8).pi_max;
      CHECK(p <= prev);
      prev = p;
    }
  }

  TEST_CASE("Fano clipping and errors") {
    auto hi = solve_fano(2.05, 4);
    CHECK(hi.clipped);
    CHECK(hi.pi_max == 0.25);
    auto lo = solve_fano(-0.05, 4);
    CHECK(lo.clipped);
    CHECK(lo.pi_max == 1.0);
    CHECK_THROWS_AS(solve_fano(-0.5, 4), ValidationError);
    CHECK_THROWS_AS(solve_fano(1.0, 0), ValidationError);
  }

  TEST_CASE("profile: deterministic sweeps beat stochastic traffic") {
    Scenario sc;
    sc.seed = 3;
    sc.ip_count = 40;
    sc.duration = 6 * 86400.0;
    SweepLayer s;
    s.range = {1, 20};
    s.sweep_rate = 5;
    s.lane_count = 20;
    s.lane_phase_spread = 10;
    s.start_time = 0.5;
    sc.layers.push_back({"sweep", s});
    StochasticLayer h;
    h.range = {21, 40};
    h.model = DriveModel::HeavyTailDrive;
    h.mean_drive = 4.0;
    h.cv = 2.0;
    sc.layers.push_back({"noise", h});
    auto recs = generate(sc).records;
    auto m = bin_attacks(recs, 1000.0, 40, {.t0 = 0.0, .duration = sc.duration}).matrix;
    std::vector<IpGroup> g(40, IpGroup::Stochastic);
    std::fill(g.begin(), g.begin() + 20, IpGroup::Deterministic);
    auto rep = predictability_profile(m, 48, g);
    CHECK(rep.states_per_section == 172);
    CHECK(rep.section_count == 3);
    REQUIRE(rep.deterministic.mean_pi_max);
    REQUIRE(rep.stochastic.mean_pi_max);
    CHECK(*rep.deterministic.mean_pi_max > *rep.stochastic.mean_pi_max);
    CHECK(rep.deterministic.ip_count == 20);
    for (const auto& ip : rep.per_ip) {
      for (const auto& sec : ip.sections) {
        CHECK(sec.pi_max >= 1.0 / static_cast<double>(sec.n_states) - 1e-12);
        CHECK(sec.pi_max <= 1.0);
      }
    }
  }

  TEST_CASE("profile: sparse traffic is flagged for ground-state dominance") {
    Scenario sc;
    sc.ip_count = 10;
    sc.duration = 4 * 86400.0;
    StochasticLayer l;
    l.range = {1, 10};
    l.mean_drive = 10 * 1e-4 * 10;  // 1e-4 attacks/s per IP
    sc.layers.push_back({"sparse", l});
    auto m = bin_attacks(generate(sc).records, 100.0, 10, {.t0 = 0.0, .duration = sc.duration}).matrix;
    auto rep = predictability_profile(m, 24, std::vector<IpGroup>(10, IpGroup::Stochastic));
    REQUIRE(rep.stochastic.mean_pi_max);
    CHECK(rep.stochastic.mean_ground_fraction > 0.9);
    CHECK(rep.stochastic.ground_flag);
    CHECK(*rep.stochastic.mean_pi_max > 0.9);
    CHECK_FALSE(rep.fine_resolution);
  }

  TEST_CASE("profile: short sections exclude IPs with a reason") {
    AttackMatrix m(1000.0, 0.0, 3, 100);
    auto rep = predictability_profile(m, 1.0, std::vector<IpGroup>{});
    for (const auto& ip : rep.per_ip) {
      CHECK_FALSE(ip.mean_pi_max.has_value());
      CHECK_FALSE(ip.excluded_reason.empty());
    }
    CHECK_FALSE(rep.overall.mean_pi_max.has_value());
    CHECK_THROWS_AS(predictability_profile(m, 0.0, std::vector<IpGroup>{}), ValidationError);
  }

  TEST_CASE("groups from a segmentation") {
    BlockSegmentation seg;
    seg.blocks.push_back({{1, 2}, 0, 0, PatternClass::Deterministic, 0});
    seg.blocks.push_back({{3, 3}, 0, 0, PatternClass::Mixed, -1});
    seg.blocks.push_back({{4, 5}, 0, 0, PatternClass::Stochastic, -1});
    auto g = groups_from_segmentation(seg, 5);
    CHECK(g[0] == IpGroup::Deterministic);
    CHECK(g[2] == IpGroup::Unassigned);
    CHECK(g[4] == IpGroup::Stochastic);
  }
}
