// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "attackscope/flux.hpp"
#include "attackscope/patterns.hpp"
#include "attackscope/predictability.hpp"
#include "attackscope/report.hpp"
#include "attackscope/spatial.hpp"
#include "attackscope/synth.hpp"

using namespace attackscope;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Skip };
constexpr int kSkipped = 77;

struct Outcome {
  Verdict verdict;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

AttackMatrix generated(const std::vector<PatternLayer>& layers, std::size_t ips, double duration, double dt,
                       std::uint64_t seed) {
  Scenario sc;
  sc.seed = seed;
  sc.ip_count = ips;
  sc.duration = duration;
  sc.layers = layers;
  auto recs = generate(sc).records;
  return bin_attacks(recs, dt, ips, {.t0 = 0.0, .duration = duration}).matrix;
}

StochasticLayer drive_layer(DriveModel model, IpRange r, double mean, double cv, double spread) {
  StochasticLayer l;
  l.range = r;
  l.model = model;
  l.mean_drive = mean;
  l.cv = cv;
  l.weight_spread_decades = spread;
  l.drive_bin = 10.0;
  return l;
}

SweepLayer sweep_layer(IpRange r, double rate, std::size_t lanes, double spread) {
  SweepLayer s;
  s.range = r;
  s.sweep_rate = rate;
  s.lane_count = lanes;
  s.lane_phase_spread = spread;
  s.start_time = 0.5;
  return s;
}

// 1: Fano closure and endpoints.
Outcome fano_closure() {
  const auto t = std::chrono::steady_clock::now();
  std::mt19937_64 gen(2024);
  double worst = 0, worst_end = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + gen() % 11;
    const double e = std::uniform_real_distribution<double>(0, std::log2(static_cast<double>(n)))(gen);
    const auto sol = solve_fano(e, n);
    worst = std::max(worst, std::abs(fano_entropy(sol.pi_max, n) - e));
  }
  for (std::size_t n = 2; n <= 12; ++n) {
    worst_end = std::max(worst_end, std::abs(solve_fano(0.0, n).pi_max - 1.0));
    worst_end = std::max(worst_end, std::abs(solve_fano(std::log2(static_cast<double>(n)), n).pi_max -
                                             1.0 / static_cast<double>(n)));
  }
  const double secs = seconds_since(t);
  const bool ok = worst <= 1e-6 && worst_end <= 1e-9 && secs < 1.0;
  return {ok ? Verdict::Pass : Verdict::Fail,
          "max |E' - E| = " + fmt("%.3g", worst) + ", endpoint error " + fmt("%.3g", worst_end) + ", " +
              fmt("%.3f", secs) + " s"};
}

struct FluxSetup {
  AttackMatrix poisson;
};

AttackMatrix poisson_region() {
  return generated({{"poisson", drive_layer(DriveModel::PoissonDrive, {1, 50}, 30.0, 1.0, 1.0)}}, 50, 1e6, 10.0, 101);
}

// 2: flux-fluctuation regimes on 50 IPs x 1e5 bins.
Outcome flux_regimes(FluxSetup& keep) {
  const auto t = std::chrono::steady_clock::now();
  const std::size_t bins = 100000;
  const double dt = 10.0, duration = dt * bins;
  keep.poisson = poisson_region();
  const auto p = analyze_region_flux(keep.poisson, {1, 50});
  const auto heavy_m = generated(
      {{"heavy", drive_layer(DriveModel::HeavyTailDrive, {1, 50}, 60.0, 3.0, 1.0)}}, 50, duration, dt, 102);
  const auto h = analyze_region_flux(heavy_m, {1, 50});
  const auto sweep_m = generated({{"sweep", sweep_layer({1, 50}, 5.0, 50, 10.0)}}, 50, duration, dt, 103);
  const auto s = analyze_region_flux(sweep_m, {1, 50});
  const double secs = seconds_since(t);
  const double ps = p.fit ? p.fit->slope : NAN, hs = h.fit ? h.fit->slope : NAN;
  const bool ok = ps >= 0.45 && ps <= 0.55 && hs >= 0.9 && hs <= 1.1 && s.drive_class == DriveClass::Deterministic &&
                  secs < 30.0;
  return {ok ? Verdict::Pass : Verdict::Fail,
          "poisson slope " + fmt("%.4f", ps) + ", heavy-tail slope " + fmt("%.4f", hs) + ", sweep " +
              to_string(s.drive_class) + ", " + fmt("%.1f", secs) + " s"};
}

// 3: per-IP sigma under multinomial allocation of a Poisson drive.
Outcome multinomial_sigma(FluxSetup& keep) {
  if (keep.poisson.n_ips() == 0) keep.poisson = poisson_region();
  const auto st = flux_stats(keep.poisson, {1, 50});
  double worst = 0;
  for (std::size_t i = 0; i < st.mean_flux.size(); ++i) {
    const double th = theoretical_sigma(st.mean_flux[i], st.mean_drive, st.std_drive);
    worst = std::max(worst, std::abs(st.std_flux[i] - th) / th);
  }
  return {worst < 0.05 ? Verdict::Pass : Verdict::Fail,
          "max relative error " + fmt("%.4f", worst) + " over 50 IPs, " + std::to_string(st.time_units) + " bins"};
}

// 4: spatial bounds on 1e4 synthetic sparse bins.
Outcome spatial_bounds() {
  const std::size_t n_ips = 40, bins = 10000;
  AttackMatrix m(10.0, 0.0, n_ips, bins);
  std::mt19937_64 gen(404);
  for (std::size_t b = 0; b < bins; ++b) {
    switch (b % 3) {
      case 0: {  // 0/1 counts at a random density
        const double q = std::uniform_real_distribution<double>(0, 1)(gen);
        for (IpIndex ip = 1; ip <= n_ips; ++ip) m.at(ip, b) = std::bernoulli_distribution(q)(gen) ? 1 : 0;
        break;
      }
      case 1: {  // everything on one IP
        m.at(static_cast<IpIndex>(1 + gen() % n_ips), b) = static_cast<Count>(1 + gen() % 200);
        break;
      }
      default: {  // a few small counts
        for (IpIndex ip = 1; ip <= n_ips; ++ip) m.at(ip, b) = gen() % 8 == 0 ? static_cast<Count>(gen() % 5) : 0;
      }
    }
  }
  std::size_t below = 0, above = 0, off_line = 0, concentrated = 0;
  for (const auto& p : spatial_stats(m, {1, static_cast<IpIndex>(n_ips)})) {
    const double upper = concentrated_bound(p.mean, p.region_size);
    if (p.zero_one && p.mean <= 1.0 && p.sigma < homogeneous_bound(p.mean) - 1e-9) ++below;
    if (p.sigma > upper + 1e-9) ++above;
    if (p.bin % 3 == 1) {
      ++concentrated;
      if (std::abs(p.sigma - upper) > 1e-9) ++off_line;
    }
  }
  const bool ok = below == 0 && above == 0 && off_line == 0;
  return {ok ? Verdict::Pass : Verdict::Fail,
          std::to_string(bins) + " bins: " + std::to_string(below) + " below the lower bound, " +
              std::to_string(above) + " above the upper bound, " + std::to_string(off_line) + " of " +
              std::to_string(concentrated) + " concentrated bins off the upper line"};
}

// 5: sweep and wall recovery.
Outcome pattern_recovery() {
  struct Case {
    IpRange r;
    double rate;
    std::size_t lanes;
    double spread;
  };
  const Case cases[] = {{{131, 191}, 3, 12, 15.25}, {{192, 246}, 6, 33, 10}, {{51, 130}, 8, 40, 16}};
  double noisy_err = 0, clean_err = 0;
  bool found_all = true;
  for (const auto& c : cases) {
    for (bool noise : {false, true}) {
      Scenario sc;
      sc.seed = 55;
      sc.ip_count = 491;
      sc.duration = 20000;
      sc.layers.push_back({"sweep", sweep_layer(c.r, c.rate, c.lanes, c.spread)});
      if (noise) sc.layers.push_back({"bg", drive_layer(DriveModel::PoissonDrive, {1, 491}, 10.0, 1.0, 0.0)});
      const auto recs = generate(sc).records;
      SweepParams sp;
      sp.min_track_ips = 8;
      const auto found = detect_sweeps(recs, c.r, sp);
      const auto hit = std::find_if(found.begin(), found.end(), [&](const SweepPattern& s) {
        return std::abs(s.sweep_rate - c.rate) < 1.0 && s.ip_range.first <= c.r.first + 2 &&
               s.ip_range.last + 2 >= c.r.last;
      });
      if (hit == found.end()) {
        found_all = false;
        continue;
      }
      (noise ? noisy_err : clean_err) = std::max(noise ? noisy_err : clean_err, std::abs(hit->sweep_rate - c.rate));
    }
  }

  bool walls_ok = true;
  std::string wall_detail;
  for (std::size_t m : {std::size_t{1}, std::size_t{5}}) {
    Scenario sc;
    sc.seed = 60 + m;
    sc.ip_count = 491;
    sc.duration = 20000;
    sc.layers.push_back({"bg", drive_layer(DriveModel::PoissonDrive, {1, 491}, 20.0, 1.0, 0.0)});
    WallLayer w;
    w.times = {1500.0, 6200.5, 11000.0, 17777.0};
    w.multiplicity = m;
    w.per_ip_delay = 0.01;
    w.delay_choices = {0.008, 0.01, 0.012};
    sc.layers.push_back({"walls", w});
    const auto walls = detect_walls(generate(sc).records, 491);
    double worst_delay = 0;
    bool mult = true;
    for (const auto& x : walls) {
      mult = mult && x.multiplicity == m;
      worst_delay = std::max(worst_delay, std::abs(x.per_ip_delay - 0.01) / 0.01);
    }
    walls_ok = walls_ok && walls.size() == w.times.size() && mult && worst_delay <= 0.2;
    wall_detail += ", m=" + std::to_string(m) + ": " + std::to_string(walls.size()) + " of " +
                   std::to_string(w.times.size()) + " walls, delay error " + fmt("%.3f", worst_delay);
  }
  const bool ok = found_all && noisy_err <= 0.5 && clean_err <= 1e-6 && walls_ok;
  return {ok ? Verdict::Pass : Verdict::Fail,
          std::string("sweeps 3/6/8 s/IP ") + (found_all ? "found" : "NOT all found") + ", noisy rate error " +
              fmt("%.3g", noisy_err) + ", noise-free " + fmt("%.3g", clean_err) + wall_detail};
}

// 6: within- vs cross-pattern MSTPM similarity on the composite scenario.
Outcome mstpm_discrimination(const ReportBundle& b) {
  if (!b.inference || !b.inference->discrimination) return {Verdict::Fail, "no discrimination result"};
  const auto& d = *b.inference->discrimination;
  return {d.auc >= 0.95 && b.inference->delta_t == 10.0 ? Verdict::Pass : Verdict::Fail,
          "delta_t " + fmt("%g", b.inference->delta_t) + " s, P(within > cross) = " + fmt("%.4f", d.auc) + " over " +
              std::to_string(d.within_pairs) + " x " + std::to_string(d.cross_pairs) + " pairs"};
}

const PredictabilityReport* find_report(const ReportBundle& b, double dt, double h) {
  for (const auto& r : *b.predictability) {
    if (r.delta_t == dt && r.h == h) return &r;
  }
  return nullptr;
}

// 7: predictability ordering and the ground-state flag.
Outcome predictability_ordering(const ReportBundle& b) {
  if (!b.predictability) return {Verdict::Fail, "no predictability result"};
  const double h = *std::max_element(b.config.h.begin(), b.config.h.end());
  const auto* coarse = find_report(b, 1000.0, h);
  const auto* fine = find_report(b, 100.0, h);
  if (!coarse || !fine) return {Verdict::Fail, "missing delta_t 1000 or 100 profile"};
  const double d = coarse->deterministic.mean_pi_max.value_or(NAN);
  const double r = coarse->stochastic.mean_pi_max.value_or(NAN);
  const auto& g = fine->stochastic;
  const bool ok = d > r && g.mean_ground_fraction > 0.9 && g.ground_flag;
  return {ok ? Verdict::Pass : Verdict::Fail,
          "delta_t 1000 s, h " + fmt("%g", h) + ": D " + fmt("%.4f", d) + " vs R " + fmt("%.4f", r) +
              "; delta_t 100 s sparse group ground fraction " + fmt("%.4f", g.mean_ground_fraction) +
              (g.ground_flag ? " (flagged)" : " (not flagged)")};
}

// 8: the honeypot dataset, when one is supplied.
Outcome dataset_criterion(const std::string& path, const fs::path& work) {
  if (path.empty()) return {Verdict::Skip, "not applicable: no dataset supplied (--dataset or ATTACKSCOPE_DATASET)"};
  RunConfig c;
  c.inputs = {path};
  c.delta_t = {1000.0};
  c.out_dir = (work / "dataset").string();
  const auto b = run_pipeline(c, {Stage::Patterns, Stage::Predictability});
  const auto span = record_span(b.records);
  const double days = span.duration() / 86400.0;
  const double h = *std::max_element(c.h.begin(), c.h.end());
  const auto* rep = find_report(b, 1000.0, h);
  const double all = rep ? rep->overall.mean_pi_max.value_or(NAN) : NAN;
  const double r = rep ? rep->stochastic.mean_pi_max.value_or(NAN) : NAN;
  const bool ok = b.ip_count == 491 && days > 15 && std::abs(all - 0.93) <= 0.03 && r > 0.85;
  return {ok ? Verdict::Pass : Verdict::Fail,
          std::to_string(b.ip_count) + " IPs over " + fmt("%.1f", days) + " days, mean Pi_max " + fmt("%.4f", all) +
              ", stochastic group " + fmt("%.4f", r)};
}

// 9: two full runs give identical manifests.
Outcome determinism(const fs::path& a, const fs::path& b) {
  const auto ha = sha256_file((a / "manifest.json").string());
  const auto hb = sha256_file((b / "manifest.json").string());
  return {ha == hb ? Verdict::Pass : Verdict::Fail,
          "manifest sha256 " + ha.substr(0, 16) + (ha == hb ? " == " : " != ") + hb.substr(0, 16)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attackscope acceptance suite"};
  std::string work_dir, dataset;
  std::uint64_t seed = 1;
  int only = 0;
  app.add_option("--work", work_dir, "scratch directory for pipeline outputs");
  app.add_option("--only", only, "run a single criterion (1-9)")->check(CLI::Range(1, 9));
  app.add_option("--dataset", dataset, "honeypot flow file")->envname("ATTACKSCOPE_DATASET");
  app.add_option("--seed", seed, "composite scenario seed");
  CLI11_PARSE(app, argc, argv);

  const fs::path work = work_dir.empty() ? fs::temp_directory_path() / "attackscope_acceptance" : fs::path(work_dir);
  fs::remove_all(work);
  fs::create_directories(work);

  int failures = 0, skips = 0;
  auto report = [&](int n, const char* name, const std::function<Outcome()>& run) {
    if (only && n != only) return;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {Verdict::Fail, std::string("error: ") + error_json(e)};
    }
    const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "SKIP";
    if (o.verdict == Verdict::Fail) ++failures;
    if (o.verdict == Verdict::Skip) ++skips;
    std::printf("criterion %d %s: %s (%s)\n", n, tag, name, o.detail.c_str());
    std::fflush(stdout);
  };

  FluxSetup flux;
  report(1, "Fano closure", fano_closure);
  report(2, "flux-fluctuation regimes", [&] { return flux_regimes(flux); });
  report(3, "multinomial sigma", [&] { return multinomial_sigma(flux); });
  report(4, "spatial bounds", spatial_bounds);
  report(5, "sweep and wall recovery", pattern_recovery);

  RunConfig c;
  c.scenario = "fig1";
  c.seed = seed;
  c.out_dir = (work / "run_a").string();
  std::optional<ReportBundle> bundle;
  std::string pipeline_error;
  if (!only || only == 6 || only == 7) {
    try {
      bundle = run_pipeline(c);
      bundle->records = {};
      bundle->matrices.clear();
    } catch (const std::exception& e) {
      pipeline_error = error_json(e);
    }
  }
  auto need_bundle = [&](const std::function<Outcome(const ReportBundle&)>& f) {
    return [&, f] { return bundle ? f(*bundle) : Outcome{Verdict::Fail, "pipeline failed: " + pipeline_error}; };
  };
  report(6, "MSTPM discrimination", need_bundle(mstpm_discrimination));
  report(7, "predictability ordering", need_bundle(predictability_ordering));
  report(8, "honeypot dataset", [&] { return dataset_criterion(dataset, work); });
  report(9, "determinism", [&] {
    if (!fs::exists(fs::path(c.out_dir) / "manifest.json")) run_pipeline(c);
    RunConfig again = c;
    again.out_dir = (work / "run_b").string();
    run_pipeline(again);
    return determinism(c.out_dir, again.out_dir);
  });

  fs::remove_all(work);
  if (only) return failures ? 1 : skips ? kSkipped : 0;
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
