#include "attackscope/synth.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

#include <json.hpp>

#include "attackscope/error.hpp"
#include "attackscope/flow_ingest.hpp"

namespace attackscope {

namespace {

constexpr const char* kModule = "synth_generator";

struct Event {
  double t;
  IpIndex ip;
  std::uint16_t layer;
};

[[noreturn]] void layer_error(std::size_t index, const std::string& name,
                              const std::string& what) {
  throw ValidationError(kModule, "layer '" + name + "' (#" + std::to_string(index) +
                                     "): " + what);
}

void check_range(const IpRange& r, std::size_t ip_count, std::size_t index,
                 const std::string& name) {
  if (r.empty() || r.first < 1 || r.last > ip_count) {
    layer_error(index, name, "ip_range " + to_string(r) + " not within [1, " +
                                 std::to_string(ip_count) + "]");
  }
}

IpRange effective_range(const WallLayer& w, std::size_t ip_count) {
  return w.range.empty() ? IpRange{1, static_cast<IpIndex>(ip_count)} : w.range;
}

std::vector<double> wall_times(const WallLayer& w, double duration) {
  std::vector<double> times = w.times;
  if (w.period > 0) {
    for (double t = w.first_time; t < duration; t += w.period) times.push_back(t);
  }
  std::sort(times.begin(), times.end());
  return times;
}

void emit(std::vector<Event>& out, double t, IpIndex ip, std::uint16_t layer,
          double duration) {
  t = round_to_microseconds(t);
  if (t >= 0 && t < duration) out.push_back({t, ip, layer});
}

void gen_sweep(const SweepLayer& s, double duration, std::uint16_t layer,
               std::vector<Event>& out) {
  const std::size_t n = s.range.size();
  const double period = static_cast<double>(n) * s.sweep_rate;
  const bool multi = s.per_ip_attack_rate > 0 && s.sweep_rate * s.per_ip_attack_rate >= 1;
  const auto per_dwell =
      multi ? static_cast<std::size_t>(std::floor(s.sweep_rate * s.per_ip_attack_rate + 1e-9))
            : std::size_t{1};

  auto run_pass = [&](double pass_start) {
    for (std::size_t p = 0; p < n; ++p) {
      const IpIndex ip = s.direction >= 0 ? s.range.first + static_cast<IpIndex>(p)
                                          : s.range.last - static_cast<IpIndex>(p);
      const double dwell = pass_start + static_cast<double>(p) * s.sweep_rate;
      for (std::size_t a = 0; a < per_dwell; ++a) {
        const double t = dwell + static_cast<double>(a) / (multi ? s.per_ip_attack_rate : 1.0);
        if (t >= s.start_time) emit(out, t, ip, layer, duration);
      }
    }
  };

  for (std::size_t k = 0; k < s.lane_count; ++k) {
    const double phase = s.start_time + static_cast<double>(k) * s.lane_phase_spread;
    if (s.passes > 0) {
      for (std::size_t j = 0; j < s.passes; ++j) {
        run_pass(phase + static_cast<double>(j) * period);
      }
      continue;
    }
    // Cyclic: the lane is already in motion at start_time.
    auto j = static_cast<long long>(std::floor((s.start_time - phase) / period)) - 1;
    for (;; ++j) {
      const double pass_start = phase + static_cast<double>(j) * period;
      if (pass_start >= duration) break;
      if (pass_start + period <= s.start_time) continue;
      run_pass(pass_start);
    }
  }
}

void gen_wall(const WallLayer& w, std::size_t ip_count, double duration,
              std::uint16_t layer, Rng& rng, std::vector<Event>& out) {
  const IpRange range = effective_range(w, ip_count);
  const double intra = w.per_ip_delay / static_cast<double>(w.multiplicity);
  const double min_step = intra * static_cast<double>(w.multiplicity - 1) + 1e-6;
  for (double start : wall_times(w, duration)) {
    double first = start;
    for (IpIndex ip = range.first; ip <= range.last; ++ip) {
      for (std::size_t a = 0; a < w.multiplicity; ++a) {
        emit(out, first + static_cast<double>(a) * intra, ip, layer, duration);
      }
      double step = w.per_ip_delay;
      if (!w.delay_choices.empty()) step = w.delay_choices[rng.below(w.delay_choices.size())];
      if (w.delay_jitter > 0) step *= 1.0 + w.delay_jitter * (2.0 * rng.uniform() - 1.0);
      first += std::max(step, min_step);
    }
  }
}

void gen_stochastic(const StochasticLayer& s, double duration, std::uint16_t layer,
                    Rng& rng, std::vector<Event>& out) {
  const std::size_t n = s.range.size();
  std::vector<double> cumulative(n);
  double acc = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const double frac = n > 1 ? static_cast<double>(p) / static_cast<double>(n - 1) : 0.0;
    acc += std::pow(10.0, s.weight_spread_decades * frac);
    cumulative[p] = acc;
  }
  auto pick_ip = [&]() -> IpIndex {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    auto p = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        it - cumulative.begin(), static_cast<std::ptrdiff_t>(n - 1)));
    return s.range.first + static_cast<IpIndex>(p);
  };

  const double lognormal_s2 = std::log1p(s.cv * s.cv);
  const double lognormal_s = std::sqrt(lognormal_s2);
  const auto n_bins = static_cast<std::size_t>(std::ceil(duration / s.drive_bin));

  for (std::size_t b = 0; b < n_bins; ++b) {
    const double lo = static_cast<double>(b) * s.drive_bin;
    const double hi = lo + s.drive_bin;
    switch (s.model) {
      case DriveModel::ConstantRate: {
        const auto count = static_cast<long long>(std::floor(static_cast<double>(b + 1) * s.mean_drive)) -
                           static_cast<long long>(std::floor(static_cast<double>(b) * s.mean_drive));
        for (long long i = 0; i < count; ++i) {
          emit(out, lo + rng.uniform() * s.drive_bin, pick_ip(), layer, duration);
        }
        break;
      }
      case DriveModel::PoissonDrive:
      case DriveModel::HeavyTailDrive: {
        double intensity = s.mean_drive;
        if (s.model == DriveModel::HeavyTailDrive) {
          intensity *= std::exp(lognormal_s * rng.normal() - 0.5 * lognormal_s2);
        }
        const double rate = intensity / s.drive_bin;
        if (rate <= 0) break;
        for (double t = lo + rng.exponential(rate); t < hi; t += rng.exponential(rate)) {
          emit(out, t, pick_ip(), layer, duration);
        }
        break;
      }
      case DriveModel::ConcentratedBursts: {
        const double rate = s.mean_drive / s.drive_bin;
        for (double t = lo + rng.exponential(rate); t < hi; t += rng.exponential(rate)) {
          const IpIndex target = pick_ip();
          for (std::size_t a = 0; a < s.burst_size; ++a) {
            emit(out, t + rng.uniform() * s.burst_spread, target, layer, duration);
          }
        }
        break;
      }
    }
  }
}

std::string layer_type(const LayerSpec& spec) {
  return std::visit(
      [](const auto& l) -> std::string {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, SweepLayer>) return "sweep";
        if constexpr (std::is_same_v<T, WallLayer>) return "wall";
        return "stochastic";
      },
      spec);
}

}  // namespace

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::exponential(double rate) { return -std::log1p(-uniform()) / rate; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t Rng::below(std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void validate(const Scenario& sc) {
  if (!(sc.duration > 0) || !std::isfinite(sc.duration)) {
    throw ValidationError(kModule, "scenario duration must be positive");
  }
  if (sc.ip_count == 0) throw ValidationError(kModule, "scenario needs ip_count >= 1");
  if (sc.layers.size() > 0xffff) throw ValidationError(kModule, "too many layers");
  for (std::size_t i = 0; i < sc.layers.size(); ++i) {
    const auto& layer = sc.layers[i];
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, SweepLayer>) {
            check_range(l.range, sc.ip_count, i, layer.name);
            if (!(l.sweep_rate > 0)) layer_error(i, layer.name, "sweep_rate must be > 0");
            if (l.per_ip_attack_rate < 0)
              layer_error(i, layer.name, "per_ip_attack_rate must be >= 0");
            if (l.lane_count == 0) layer_error(i, layer.name, "lane_count must be >= 1");
            if (l.lane_phase_spread < 0)
              layer_error(i, layer.name, "lane_phase_spread must be >= 0");
            if (l.direction != 1 && l.direction != -1)
              layer_error(i, layer.name, "direction must be +1 or -1");
          } else if constexpr (std::is_same_v<T, WallLayer>) {
            if (!l.range.empty()) check_range(l.range, sc.ip_count, i, layer.name);
            if (l.multiplicity == 0) layer_error(i, layer.name, "multiplicity must be >= 1");
            if (!(l.per_ip_delay > 0)) layer_error(i, layer.name, "per_ip_delay must be > 0");
            if (l.delay_jitter < 0 || l.delay_jitter >= 1)
              layer_error(i, layer.name, "delay_jitter must be in [0, 1)");
            for (double d : l.delay_choices)
              if (!(d > 0)) layer_error(i, layer.name, "delay_choices must be > 0");
            if (l.times.empty() && !(l.period > 0))
              layer_error(i, layer.name, "wall needs explicit times or a period");
          } else {
            check_range(l.range, sc.ip_count, i, layer.name);
            if (!(l.mean_drive > 0)) layer_error(i, layer.name, "mean_drive must be > 0");
            if (!(l.drive_bin > 0)) layer_error(i, layer.name, "drive_bin must be > 0");
            if (l.model == DriveModel::HeavyTailDrive && !(l.cv > 0))
              layer_error(i, layer.name, "cv must be > 0");
            if (l.model == DriveModel::ConcentratedBursts && l.burst_size == 0)
              layer_error(i, layer.name, "burst_size must be >= 1");
            if (l.weight_spread_decades < 0)
              layer_error(i, layer.name, "weight_spread_decades must be >= 0");
          }
        },
        layer.spec);
  }
}

GeneratedTraffic generate(const Scenario& sc) {
  validate(sc);
  std::vector<Event> events;
  GeneratedTraffic out;
  for (std::size_t i = 0; i < sc.layers.size(); ++i) {
    const auto layer = static_cast<std::uint16_t>(i);
    Rng rng(splitmix64(sc.seed ^ splitmix64(i + 1)));
    const std::size_t before = events.size();
    LayerSummary summary;
    summary.name = sc.layers[i].name;
    summary.type = layer_type(sc.layers[i].spec);
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, SweepLayer>) {
            gen_sweep(l, sc.duration, layer, events);
            summary.range = l.range;
            summary.true_rate = l.sweep_rate;
          } else if constexpr (std::is_same_v<T, WallLayer>) {
            gen_wall(l, sc.ip_count, sc.duration, layer, rng, events);
            summary.range = effective_range(l, sc.ip_count);
            summary.true_rate = l.per_ip_delay;
            summary.multiplicity = l.multiplicity;
            for (double t : wall_times(l, sc.duration)) {
              if (t < sc.duration) summary.wall_times.push_back(t);
            }
          } else {
            gen_stochastic(l, sc.duration, layer, rng, events);
            summary.range = l.range;
            summary.true_rate = l.mean_drive / l.drive_bin *
                                (l.model == DriveModel::ConcentratedBursts
                                     ? static_cast<double>(l.burst_size)
                                     : 1.0);
          }
        },
        sc.layers[i].spec);
    summary.record_count = events.size() - before;
    out.layers.push_back(std::move(summary));
  }

  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.ip != b.ip) return a.ip < b.ip;
    return a.layer < b.layer;
  });
  out.records.reserve(events.size());
  out.layer_of.reserve(events.size());
  for (const auto& e : events) {
    out.records.push_back({e.ip, e.t});
    out.layer_of.push_back(e.layer);
  }
  return out;
}

std::vector<FlowRecord> select_layers(const GeneratedTraffic& traffic,
                                      const std::vector<std::size_t>& layers) {
  std::vector<FlowRecord> out;
  for (std::size_t i = 0; i < traffic.records.size(); ++i) {
    if (std::find(layers.begin(), layers.end(), traffic.layer_of[i]) != layers.end()) {
      out.push_back(traffic.records[i]);
    }
  }
  return out;
}

Scenario fig1_composite(std::uint64_t seed, double duration) {
  Scenario sc;
  sc.seed = seed;
  sc.duration = duration;
  sc.ip_count = 491;

  // Sparse stochastic background under every IP without an overlay.
  const double background_rate = 1.5e-4;  // attacks/s per IP
  const IpRange background[] = {{1, 18}, {32, 34}, {48, 50}, {247, 491}};
  for (const auto& r : background) {
    StochasticLayer s;
    s.range = r;
    s.model = DriveModel::PoissonDrive;
    s.drive_bin = 10.0;
    s.mean_drive = background_rate * s.drive_bin * static_cast<double>(r.size());
    sc.layers.push_back({"background_" + to_string(r), s});
    sc.regions.push_back({"background", r, false});
  }

  SweepLayer slow;
  slow.range = {19, 31};
  slow.sweep_rate = 600.0;
  slow.per_ip_attack_rate = 1.0;
  slow.lane_count = 2;
  slow.lane_phase_spread = 13 * 600.0 / 2;
  slow.start_time = 0.25;
  sc.layers.push_back({"slow_sweep_19_31", slow});
  sc.regions.push_back({"slow_sweep", slow.range, true});

  StochasticLayer heavy;
  heavy.range = {35, 47};
  heavy.model = DriveModel::HeavyTailDrive;
  heavy.drive_bin = 10.0;
  heavy.mean_drive = 100.0;
  heavy.cv = 3.0;
  heavy.weight_spread_decades = 0.5;
  sc.layers.push_back({"heavy_tail_35_47", heavy});
  sc.regions.push_back({"heavy_tail", heavy.range, false});

  struct Fast {
    IpRange range;
    double rate;
    std::size_t lanes;
  };
  // Lanes tile each pass period; lane spacing stays above the sweep rate.
  const Fast fast[] = {{{51, 130}, 8.0, 40}, {{131, 191}, 3.0, 12}, {{192, 246}, 6.0, 33}};
  for (const auto& f : fast) {
    SweepLayer s;
    s.range = f.range;
    s.sweep_rate = f.rate;
    s.lane_count = f.lanes;
    s.lane_phase_spread = static_cast<double>(f.range.size()) * f.rate / static_cast<double>(f.lanes);
    s.start_time = 0.5;
    const std::string tag = std::to_string(static_cast<int>(f.rate));
    sc.layers.push_back({"sweep_" + tag + "s_" + to_string(f.range), s});
    sc.regions.push_back({"sweep_" + tag + "s", f.range, true});
  }

  WallLayer walls;
  walls.range = {247, 491};
  walls.period = duration / 4;
  walls.first_time = std::round(0.117 * duration) + 0.123;
  walls.multiplicity = 1;
  walls.per_ip_delay = 0.01;
  walls.delay_choices = {0.008, 0.01, 0.012};
  sc.layers.push_back({"walls", walls});
  return sc;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::json;

IpRange range_from(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  return parse_ip_range(j.at(key).get<std::string>());
}

DriveModel drive_from(const std::string& s) {
  if (s == "constant") return DriveModel::ConstantRate;
  if (s == "poisson") return DriveModel::PoissonDrive;
  if (s == "heavy_tail") return DriveModel::HeavyTailDrive;
  if (s == "bursts") return DriveModel::ConcentratedBursts;
  throw ValidationError(kModule, "unknown drive model '" + s + "'");
}

std::string drive_name(DriveModel m) {
  switch (m) {
    case DriveModel::ConstantRate: return "constant";
    case DriveModel::PoissonDrive: return "poisson";
    case DriveModel::HeavyTailDrive: return "heavy_tail";
    case DriveModel::ConcentratedBursts: return "bursts";
  }
  return "poisson";
}

}  // namespace

Scenario parse_scenario_json(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(kModule, std::string("scenario JSON: ") + e.what());
  }
  try {
    Scenario sc;
    sc.seed = doc.value("seed", std::uint64_t{1});
    sc.duration = doc.value("duration", 86400.0);
    sc.ip_count = doc.value("ip_count", std::size_t{491});
    for (const auto& jl : doc.value("layers", json::array())) {
      PatternLayer layer;
      layer.name = jl.value("name", "layer" + std::to_string(sc.layers.size()));
      const std::string type = jl.at("type").get<std::string>();
      if (type == "sweep") {
        SweepLayer s;
        s.range = range_from(jl, "ip_range");
        s.sweep_rate = jl.value("sweep_rate", s.sweep_rate);
        s.per_ip_attack_rate = jl.value("per_ip_attack_rate", s.per_ip_attack_rate);
        s.lane_count = jl.value("lane_count", s.lane_count);
        s.lane_phase_spread = jl.value("lane_phase_spread", s.lane_phase_spread);
        s.start_time = jl.value("start_time", s.start_time);
        s.passes = jl.value("passes", s.passes);
        s.direction = jl.value("direction", s.direction);
        layer.spec = s;
      } else if (type == "wall") {
        WallLayer w;
        w.range = range_from(jl, "ip_range");
        w.times = jl.value("times", std::vector<double>{});
        w.period = jl.value("period", w.period);
        w.first_time = jl.value("first_time", w.first_time);
        w.multiplicity = jl.value("multiplicity", w.multiplicity);
        w.per_ip_delay = jl.value("per_ip_delay", w.per_ip_delay);
        w.delay_jitter = jl.value("delay_jitter", w.delay_jitter);
        w.delay_choices = jl.value("delay_choices", std::vector<double>{});
        layer.spec = w;
      } else if (type == "stochastic") {
        StochasticLayer s;
        s.range = range_from(jl, "ip_range");
        s.model = drive_from(jl.value("drive", std::string("poisson")));
        s.mean_drive = jl.value("mean_drive", s.mean_drive);
        s.drive_bin = jl.value("drive_bin", s.drive_bin);
        s.cv = jl.value("cv", s.cv);
        s.weight_spread_decades = jl.value("weight_spread_decades", s.weight_spread_decades);
        s.burst_size = jl.value("burst_size", s.burst_size);
        s.burst_spread = jl.value("burst_spread", s.burst_spread);
        layer.spec = s;
      } else {
        throw ValidationError(kModule, "layer '" + layer.name + "': unknown type '" + type + "'");
      }
      sc.layers.push_back(std::move(layer));
    }
    for (const auto& jr : doc.value("regions", json::array())) {
      sc.regions.push_back({jr.value("name", std::string("region")), range_from(jr, "ip_range"),
                            jr.value("deterministic", false)});
    }
    validate(sc);
    return sc;
  } catch (const json::exception& e) {
    throw ParseError(kModule, std::string("scenario JSON: ") + e.what());
  }
}

std::string scenario_to_json(const Scenario& sc) {
  json doc;
  doc["seed"] = sc.seed;
  doc["duration"] = sc.duration;
  doc["ip_count"] = sc.ip_count;
  doc["layers"] = json::array();
  for (const auto& layer : sc.layers) {
    json jl;
    jl["name"] = layer.name;
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, SweepLayer>) {
            jl["type"] = "sweep";
            jl["ip_range"] = to_string(l.range);
            jl["sweep_rate"] = l.sweep_rate;
            jl["per_ip_attack_rate"] = l.per_ip_attack_rate;
            jl["lane_count"] = l.lane_count;
            jl["lane_phase_spread"] = l.lane_phase_spread;
            jl["start_time"] = l.start_time;
            jl["passes"] = l.passes;
            jl["direction"] = l.direction;
          } else if constexpr (std::is_same_v<T, WallLayer>) {
            jl["type"] = "wall";
            if (!l.range.empty()) jl["ip_range"] = to_string(l.range);
            jl["times"] = l.times;
            jl["period"] = l.period;
            jl["first_time"] = l.first_time;
            jl["multiplicity"] = l.multiplicity;
            jl["per_ip_delay"] = l.per_ip_delay;
            jl["delay_jitter"] = l.delay_jitter;
            jl["delay_choices"] = l.delay_choices;
          } else {
            jl["type"] = "stochastic";
            jl["ip_range"] = to_string(l.range);
            jl["drive"] = drive_name(l.model);
            jl["mean_drive"] = l.mean_drive;
            jl["drive_bin"] = l.drive_bin;
            jl["cv"] = l.cv;
            jl["weight_spread_decades"] = l.weight_spread_decades;
            jl["burst_size"] = l.burst_size;
            jl["burst_spread"] = l.burst_spread;
          }
        },
        layer.spec);
    doc["layers"].push_back(jl);
  }
  doc["regions"] = json::array();
  for (const auto& r : sc.regions) {
    doc["regions"].push_back(
        {{"name", r.name}, {"ip_range", to_string(r.range)}, {"deterministic", r.deterministic}});
  }
  return doc.dump(2);
}

void write_labels_json(std::ostream& out, const Scenario& sc, const GeneratedTraffic& traffic) {
  json head;
  head["seed"] = sc.seed;
  head["duration"] = sc.duration;
  head["ip_count"] = sc.ip_count;
  head["layers"] = json::array();
  for (std::size_t i = 0; i < traffic.layers.size(); ++i) {
    const auto& l = traffic.layers[i];
    json jl{{"index", i},
            {"name", l.name},
            {"type", l.type},
            {"ip_range", to_string(l.range)},
            {"record_count", l.record_count},
            {"true_rate", l.true_rate}};
    if (l.type == "wall") {
      jl["multiplicity"] = l.multiplicity;
      jl["wall_times"] = l.wall_times;
    }
    head["layers"].push_back(jl);
  }
  head["regions"] = json::array();
  for (const auto& r : sc.regions) {
    head["regions"].push_back(
        {{"name", r.name}, {"ip_range", to_string(r.range)}, {"deterministic", r.deterministic}});
  }
  // The per-record tag array can hold millions of entries; stream it.
  std::string text = head.dump(1);
  text.pop_back();  // closing brace
  while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.pop_back();
  out << text << ",\n \"record_layers\": [";
  for (std::size_t i = 0; i < traffic.layer_of.size(); ++i) {
    if (i) out << ',';
    if (i % 64 == 0) out << "\n  ";
    out << traffic.layer_of[i];
  }
  out << "\n ]\n}\n";
}

}  // namespace attackscope
