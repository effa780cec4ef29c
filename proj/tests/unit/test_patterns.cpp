#include <doctest.h>

#include <cmath>

#include "attackscope/error.hpp"
#include "attackscope/patterns.hpp"
#include "attackscope/synth.hpp"

using namespace attackscope;

namespace {
Scenario base(std::size_t ips, double duration, std::uint64_t seed = 1) {
  Scenario sc;
  sc.seed = seed;
  sc.ip_count = ips;
  sc.duration = duration;
  return sc;
}

WallLayer wall(std::vector<double> times, std::size_t m = 1, double delay = 0.01) {
  WallLayer w;
  w.times = std::move(times);
  w.multiplicity = m;
  w.per_ip_delay = delay;
  return w;
}

StochasticLayer poisson(IpRange r, double per_bin, double bin = 10.0) {
  StochasticLayer s;
  s.range = r;
  s.model = DriveModel::PoissonDrive;
  s.mean_drive = per_bin;
  s.drive_bin = bin;
  return s;
}

SweepLayer sweep(IpRange r, double rate, std::size_t lanes, double spread, double start = 0.5) {
  SweepLayer s;
  s.range = r;
  s.sweep_rate = rate;
  s.lane_count = lanes;
  s.lane_phase_spread = spread;
  s.start_time = start;
  return s;
}
}  // namespace

TEST_SUITE("pattern_detection") {
  TEST_CASE("single wall over 491 IPs") {
    auto sc = base(491, 1000);
    sc.layers.push_back({"wall", wall({100.0})});
    auto recs = generate(sc).records;
    auto walls = detect_walls(recs, 491);
    REQUIRE(walls.size() == 1);
    CHECK(walls[0].multiplicity == 1);
    CHECK(walls[0].per_ip_delay == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(walls[0].ordered);
    CHECK(walls[0].start_time == doctest::Approx(100.0));
    CHECK(walls[0].ip_range == IpRange{1, 491});
    CHECK(walls[0].coverage == 1.0);
    CHECK(walls[0].members.size() == 491);
  }

  TEST_CASE("five hits per IP") {
    auto sc = base(491, 1000);
    sc.layers.push_back({"wall5", wall({10.0, 600.0}, 5)});
    auto walls = detect_walls(generate(sc).records, 491);
    REQUIRE(walls.size() == 2);
    for (const auto& w : walls) {
      CHECK(w.multiplicity == 5);
      CHECK(w.per_ip_delay == doctest::Approx(0.01).epsilon(1e-6));
    }
  }

  TEST_CASE("walls inside busy traffic") {
    auto sc = base(491, 20000, 3);
    sc.layers.push_back({"bg", poisson({1, 491}, 30.0)});
    sc.layers.push_back({"sweep", sweep({51, 130}, 8, 40, 16)});
    WallLayer w = wall({1234.5, 7000.25, 15000.0, 19998.0});
    w.delay_choices = {0.008, 0.01, 0.012};
    sc.layers.push_back({"walls", w});
    auto recs = generate(sc).records;
    auto walls = detect_walls(recs, 491);
    REQUIRE(walls.size() == 4);
    for (const auto& x : walls) {
      CHECK(x.multiplicity == 1);
      CHECK(std::abs(x.per_ip_delay - 0.01) <= 0.002);
    }
    CHECK(walls[0].start_time == doctest::Approx(1234.5));
    // The last wall runs past the end of the window: only its first IPs are seen.
    CHECK(walls[3].ip_range.first == 1);
    CHECK(walls[3].ip_range.last < 250);
    CHECK(walls[3].ip_range.last > 150);
  }

  TEST_CASE("a wall fragment below the minimum span is ignored") {
    auto sc = base(491, 2000, 3);
    sc.layers.push_back({"bg", poisson({1, 491}, 30.0)});
    sc.layers.push_back({"walls", wall({1999.2})});
    CHECK(detect_walls(generate(sc).records, 491).empty());
  }

  TEST_CASE("walls confined to part of the IP space") {
    auto sc = base(491, 5000, 8);
    sc.layers.push_back({"bg", poisson({1, 491}, 10.0)});
    sc.layers.push_back({"sweep", sweep({192, 246}, 6, 33, 10)});
    WallLayer w = wall({1000.0, 3000.0});
    w.range = {247, 491};
    sc.layers.push_back({"walls", w});
    auto walls = detect_walls(generate(sc).records, 491);
    REQUIRE(walls.size() == 2);
    CHECK(walls[0].ip_range == IpRange{247, 491});
    CHECK(walls[1].ip_range == IpRange{247, 491});
    CHECK(walls[0].coverage == 1.0);
  }

  TEST_CASE("Poisson traffic has no walls") {
    auto sc = base(491, 20000, 5);
    sc.layers.push_back({"bg", poisson({1, 491}, 100.0)});
    CHECK(detect_walls(generate(sc).records, 491).empty());
  }

  TEST_CASE("sweep rates are recovered exactly without noise") {
    struct Case {
      IpRange r;
      double rate;
      std::size_t lanes;
      double spread;
    };
    for (const Case& c : {Case{{51, 130}, 8, 40, 16}, Case{{131, 191}, 3, 12, 15.25},
                          Case{{192, 246}, 6, 33, 10}}) {
      auto sc = base(491, 20000);
      sc.layers.push_back({"sweep", sweep(c.r, c.rate, c.lanes, c.spread)});
      auto recs = generate(sc).records;
      auto found = detect_sweeps(recs, c.r);
      REQUIRE(found.size() == 1);
      CHECK(std::abs(found[0].sweep_rate - c.rate) < 1e-6);
      CHECK(found[0].ip_range == c.r);
      CHECK(found[0].direction == 1);
      CHECK(found[0].per_ip_attack_rate == doctest::Approx(1.0 / c.rate));
      CHECK(found[0].track_count > 10);
    }
  }

  TEST_CASE("single pass sweep") {
    auto sc = base(200, 5000);
    auto s = sweep({51, 130}, 8, 1, 0, 100);
    s.passes = 1;
    sc.layers.push_back({"once", s});
    auto recs = generate(sc).records;
    REQUIRE(recs.size() == 80);
    auto found = detect_sweeps(recs, {51, 130});
    REQUIRE(found.size() == 1);
    CHECK(found[0].track_count == 1);
    CHECK(found[0].start_time == 100.0);
    CHECK(std::abs(found[0].sweep_rate - 8) < 1e-9);
  }

  TEST_CASE("slow sweep dwells at about one attack per second") {
    auto sc = base(40, 40000);
    auto s = sweep({19, 31}, 600, 2, 3900, 0.25);
    s.per_ip_attack_rate = 1.0;
    sc.layers.push_back({"slow", s});
    auto found = detect_sweeps(generate(sc).records, {19, 31});
    REQUIRE(found.size() == 1);
    CHECK(found[0].sweep_rate == doctest::Approx(600.0));
    CHECK(found[0].per_ip_attack_rate == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("descending sweeps when asked") {
    auto sc = base(100, 5000);
    auto s = sweep({10, 60}, 4, 1, 0, 10);
    s.direction = -1;
    s.passes = 2;
    sc.layers.push_back({"down", s});
    auto recs = generate(sc).records;
    CHECK(detect_sweeps(recs, {10, 60}).empty());
    SweepParams p;
    p.both_directions = true;
    auto found = detect_sweeps(recs, {10, 60}, p);
    REQUIRE(found.size() == 1);
    CHECK(found[0].direction == -1);
    CHECK(found[0].sweep_rate == doctest::Approx(4.0));
  }

  TEST_CASE("walls are not sweeps") {
    auto sc = base(491, 1000);
    sc.layers.push_back({"wall", wall({5.0, 200.0, 400.0})});
    auto recs = generate(sc).records;
    CHECK(detect_sweeps(recs, {1, 491}).empty());
    SweepParams p;
    p.min_track_ips = 5;
    CHECK(detect_sweeps(recs, {1, 491}, p).empty());
  }

  TEST_CASE("strip walls and deterministic fraction") {
    auto sc = base(50, 1000);
    sc.layers.push_back({"bg", poisson({1, 50}, 5.0)});
    sc.layers.push_back({"wall", wall({300.0})});
    auto gen = generate(sc);
    auto walls = detect_walls(gen.records, 50);
    REQUIRE(walls.size() == 1);
    auto st = strip_walls(gen.records, walls);
    CHECK(st.records.size() == gen.records.size() - 50);
    for (std::size_t i = 0; i < st.records.size(); ++i) {
      CHECK(gen.records[st.original_index[i]] == st.records[i]);
    }
    auto frac = deterministic_fraction(gen.records, 50, walls[0].members);
    for (IpIndex ip = 1; ip <= 50; ++ip) {
      std::size_t total = 0;
      for (const auto& r : gen.records) total += r.ip == ip;
      CHECK(frac[ip - 1] == doctest::Approx(1.0 / static_cast<double>(total)));
    }
  }

  TEST_CASE("segmentation recovers an amplitude boundary") {
    auto sc = base(100, 50000, 9);
    sc.layers.push_back({"loud", poisson({1, 40}, 40 * 30.0)});
    sc.layers.push_back({"quiet", poisson({41, 100}, 60 * 1.0)});
    auto recs = generate(sc).records;
    auto m = bin_attacks(recs, 10.0, 100, {.t0 = 0.0, .duration = sc.duration}).matrix;
    auto seg = segment_ip_blocks(m);
    REQUIRE(seg.blocks.size() == 2);
    CHECK(std::abs(static_cast<int>(seg.blocks[0].ip_range.last) - 40) <= 2);
    CHECK(seg.blocks[0].amplitude_class == 1);
    CHECK(seg.blocks[1].amplitude_class == 0);
    CHECK(seg.blocks[0].pattern_class == PatternClass::Stochastic);
  }

  TEST_CASE("homogeneous traffic is one block") {
    auto sc = base(60, 20000, 2);
    sc.layers.push_back({"bg", poisson({1, 60}, 60 * 2.0)});
    auto m = bin_attacks(generate(sc).records, 10.0, 60, {.t0 = 0.0, .duration = sc.duration}).matrix;
    auto seg = segment_ip_blocks(m);
    REQUIRE(seg.blocks.size() == 1);
    CHECK(seg.blocks[0].ip_range == IpRange{1, 60});
  }

  TEST_CASE("overlay region on background gives one block per region") {
    auto sc = base(120, 30000, 4);
    sc.layers.push_back({"bg1", poisson({1, 40}, 40 * 0.01)});
    sc.layers.push_back({"sweep", sweep({41, 80}, 5, 20, 10)});
    sc.layers.push_back({"bg2", poisson({81, 120}, 40 * 0.01)});
    auto gen = generate(sc);
    auto m = bin_attacks(gen.records, 10.0, 120, {.t0 = 0.0, .duration = sc.duration}).matrix;
    auto sweeps = detect_sweeps(gen.records, {1, 120}, {.min_track_ips = 8});
    REQUIRE(sweeps.size() == 1);
    auto frac = deterministic_fraction(gen.records, 120, sweeps[0].members);
    auto pid = dominant_pattern(gen.records, 120, sweeps);
    auto seg = segment_ip_blocks(m, frac, pid);
    REQUIRE(seg.blocks.size() == 3);
    CHECK(seg.blocks[1].ip_range == IpRange{41, 80});
    CHECK(seg.blocks[1].pattern_class == PatternClass::Deterministic);
    CHECK(seg.blocks[1].pattern_id == 0);
    CHECK(seg.blocks[0].pattern_class == PatternClass::Stochastic);
  }

  TEST_CASE("segmentation rejects bad input") {
    AttackMatrix one(1.0, 0.0, 1, 4);
    CHECK_THROWS_AS(segment_ip_blocks(one), ValidationError);
    AttackMatrix two(1.0, 0.0, 2, 4);
    std::vector<double> frac{0.5};
    CHECK_THROWS_AS(segment_ip_blocks(two, frac), ValidationError);
  }
}
