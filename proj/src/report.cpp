#include "attackscope/report.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "attackscope/error.hpp"
#include "attackscope/format.hpp"

namespace attackscope {

namespace {

constexpr const char* kModule = "cli_report";
namespace fs = std::filesystem;
using nlohmann::json;

json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return round9(v);
}

json num(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

std::string dt_tag(double dt) { return format_number(dt); }

class OutDir {
 public:
  explicit OutDir(ReportBundle& b) : bundle_(b), root_(b.config.out_dir) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw IoError(kModule, "cannot create output directory", root_.string());
  }

  // Opens out_dir/name for writing and records it in the bundle.
  std::ofstream open(const std::string& name) {
    const fs::path p = root_ / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(kModule, "cannot write output file", p.string());
    if (std::find(bundle_.files.begin(), bundle_.files.end(), name) == bundle_.files.end()) {
      bundle_.files.push_back(name);
    }
    return out;
  }

  void write(const std::string& name, const std::string& text) {
    auto out = open(name);
    out << text;
    close(out, name);
  }

  void close(std::ofstream& out, const std::string& name) {
    out.close();
    if (!out) throw IoError(kModule, "failed writing output file", (root_ / name).string());
  }

 private:
  ReportBundle& bundle_;
  fs::path root_;
};

std::string ends_with_bin(const std::string& path) {
  return path.size() > 4 && path.compare(path.size() - 4, 4, ".bin") == 0 ? path : "";
}

const AttackMatrix& matrix_at(ReportBundle& b, double dt) {
  if (auto it = b.matrices.find(dt); it != b.matrices.end()) return it->second;
  if (!b.records.empty() || b.matrices.empty()) {
    BinOptions opt;
    opt.t0 = b.t0;
    opt.duration = b.duration;
    auto res = bin_attacks(b.records, dt, b.ip_count, opt);
    return b.matrices.emplace(dt, std::move(res.matrix)).first->second;
  }
  // Matrix-only input: coarsen by an integer factor.
  const AttackMatrix& base = b.matrices.begin()->second;
  const double ratio = dt / base.delta_t();
  const double factor = std::round(ratio);
  if (factor < 1 || std::abs(ratio - factor) > 1e-9) {
    throw ValidationError(kModule, "delta_t " + dt_tag(dt) + " is not a multiple of the input matrix's " +
                                       dt_tag(base.delta_t()));
  }
  auto res = rebin(base, static_cast<std::size_t>(factor));
  return b.matrices.emplace(dt, std::move(res.matrix)).first->second;
}

void require_records(const ReportBundle& b, const char* stage) {
  if (b.records.empty()) {
    throw ValidationError(kModule, std::string(stage) + " needs flow records, not a binned matrix");
  }
}

std::vector<IpGroup> ip_groups(const ReportBundle& b) {
  if (!b.patterns) return {};
  return groups_from_segmentation(b.patterns->segmentation, b.ip_count);
}

json range_json(const IpRange& r) { return to_string(r); }

// ---------------------------------------------------------------------------
// Stages

void run_patterns(ReportBundle& b, OutDir& out) {
  require_records(b, "patterns");
  PatternAnalysis pa;
  const auto& tol = b.config.tol;
  pa.walls = detect_walls(b.records, b.ip_count, tol.walls);
  const auto stripped = strip_walls(b.records, pa.walls);
  pa.sweeps = detect_sweeps(stripped.records, {1, static_cast<IpIndex>(b.ip_count)}, tol.sweeps);
  std::vector<std::size_t> claimed;
  for (auto& s : pa.sweeps) {
    for (auto& m : s.members) m = stripped.original_index[m];
    claimed.insert(claimed.end(), s.members.begin(), s.members.end());
  }
  pa.det_fraction = deterministic_fraction(b.records, b.ip_count, claimed);
  pa.pattern_of = dominant_pattern(b.records, b.ip_count, pa.sweeps);
  pa.segmentation = segment_ip_blocks(matrix_at(b, b.config.primary_delta_t()), pa.det_fraction,
                                      pa.pattern_of, tol.blocks);

  json doc;
  doc["walls"] = json::array();
  for (const auto& w : pa.walls) {
    doc["walls"].push_back({{"start_time", num(w.start_time)},
                            {"end_time", num(w.end_time)},
                            {"ip_range", range_json(w.ip_range)},
                            {"multiplicity", w.multiplicity},
                            {"per_ip_delay", num(w.per_ip_delay)},
                            {"ordered", w.ordered},
                            {"coverage", num(w.coverage)},
                            {"records", w.members.size()}});
  }
  doc["sweeps"] = json::array();
  for (const auto& s : pa.sweeps) {
    doc["sweeps"].push_back({{"ip_range", range_json(s.ip_range)},
                             {"sweep_rate", num(s.sweep_rate)},
                             {"per_ip_attack_rate", num(s.per_ip_attack_rate)},
                             {"start_time", num(s.start_time)},
                             {"direction", s.direction},
                             {"track_count", s.track_count},
                             {"rms_residual", num(s.rms_residual)},
                             {"records", s.members.size()}});
  }
  doc["segmentation"] = json::array();
  for (const auto& blk : pa.segmentation.blocks) {
    doc["segmentation"].push_back({{"ip_range", range_json(blk.ip_range)},
                                   {"amplitude", num(blk.amplitude)},
                                   {"amplitude_class", blk.amplitude_class},
                                   {"pattern_class", to_string(blk.pattern_class)},
                                   {"pattern_id", blk.pattern_id}});
  }
  doc["delta_t"] = num(b.config.primary_delta_t());
  out.write("patterns.json", doc.dump(2) + "\n");
  b.patterns = std::move(pa);
}

void choose_regions(ReportBundle& b) {
  b.regions.clear();
  if (!b.config.regions.empty()) {
    for (const auto& r : b.config.regions) {
      if (r.last > b.ip_count) {
        throw ValidationError(kModule, "region " + to_string(r) + " exceeds the " +
                                           std::to_string(b.ip_count) + " IPs of the data");
      }
      b.regions.push_back({to_string(r), r});
    }
    return;
  }
  if (b.patterns) {
    for (const auto& blk : b.patterns->segmentation.blocks) {
      b.regions.push_back({"block_" + to_string(blk.ip_range), blk.ip_range});
    }
    return;
  }
  b.regions.push_back({"all", {1, static_cast<IpIndex>(b.ip_count)}});
}

void run_flux(ReportBundle& b, OutDir& out) {
  const auto& m = matrix_at(b, b.config.primary_delta_t());
  std::vector<RegionFluxReport> reports;
  json doc;
  doc["delta_t"] = num(m.delta_t());
  doc["regions"] = json::array();
  for (const auto& r : b.regions) {
    auto rep = analyze_region_flux(m, r.range, b.config.tol.drive);
    json fit = nullptr;
    if (rep.fit) {
      fit = {{"slope", num(rep.fit->slope)},
             {"intercept", num(rep.fit->intercept)},
             {"rms_residual", num(rep.fit->rms_residual)},
             {"points", rep.fit->points},
             {"excluded", rep.fit->excluded}};
    }
    doc["regions"].push_back({{"name", r.name},
                              {"ip_range", range_json(r.range)},
                              {"mean_drive", num(rep.stats.mean_drive)},
                              {"std_drive", num(rep.stats.std_drive)},
                              {"time_units", rep.stats.time_units},
                              {"active_units", rep.stats.active_units},
                              {"fit", fit},
                              {"drive_class", to_string(rep.drive_class)}});
    reports.push_back(std::move(rep));
  }
  out.write("fluxfluct.json", doc.dump(2) + "\n");
  b.flux = std::move(reports);
}

void run_spatial(ReportBundle& b, OutDir& out) {
  const auto& m = matrix_at(b, b.config.primary_delta_t());
  std::vector<SpatialRegion> regions;
  json doc;
  doc["delta_t"] = num(m.delta_t());
  doc["regions"] = json::array();
  for (const auto& r : b.regions) {
    SpatialRegion sr{r, spatial_stats(m, r.range)};
    std::size_t zero_one = 0, below = 0, above = 0, occupied = 0;
    double ci_sum = 0;
    for (const auto& p : sr.points) {
      if (p.total == 0) continue;
      ++occupied;
      if (p.zero_one) {
        ++zero_one;
        if (p.sigma < homogeneous_bound(p.mean) - 1e-9) ++below;
      }
      if (p.region_size >= 2 && p.sigma > concentrated_bound(p.mean, p.region_size) + 1e-9) ++above;
      if (auto ci = concentration_index(p)) ci_sum += *ci;
    }
    doc["regions"].push_back({{"name", r.name},
                              {"ip_range", range_json(r.range)},
                              {"bins", sr.points.size()},
                              {"occupied_bins", occupied},
                              {"zero_one_bins", zero_one},
                              {"below_homogeneous_bound", below},
                              {"above_concentrated_bound", above},
                              {"mean_concentration_index",
                               occupied ? num(ci_sum / static_cast<double>(occupied)) : json(nullptr)}});
    regions.push_back(std::move(sr));
  }
  out.write("spatial.json", doc.dump(2) + "\n");
  b.spatial = std::move(regions);
}

void run_inference(ReportBundle& b, OutDir& out) {
  const auto& m = matrix_at(b, b.config.primary_delta_t());
  InferenceAnalysis inf;
  inf.delta_t = m.delta_t();
  inf.correlation = correlation_matrix(m, {}, b.config.jobs);
  inf.cluster_sizes = threshold_cluster(inf.correlation, b.config.rho_c);
  if (!b.records.empty()) inf.summary = summary_stats(b.records, m, inf.cluster_sizes);
  for (const auto& seq : coarse_grain(m)) inf.mstpms.push_back(build_mstpm(seq));
  inf.similarity = similarity_matrix(inf.mstpms, m.all_ips(), b.config.jobs);

  std::vector<int> group;
  if (b.scenario && !b.scenario->regions.empty()) {
    group.assign(b.ip_count, -1);
    std::map<std::string, int> ids;
    for (const auto& r : b.scenario->regions) {
      const int id = ids.emplace(r.name, static_cast<int>(ids.size())).first->second;
      for (IpIndex ip = r.range.first; ip <= r.range.last && ip <= b.ip_count; ++ip) group[ip - 1] = id;
    }
    inf.grouping = "scenario_regions";
  } else if (b.patterns) {
    group.assign(b.ip_count, -1);
    int id = 0;
    for (const auto& blk : b.patterns->segmentation.blocks) {
      for (IpIndex ip = blk.ip_range.first; ip <= blk.ip_range.last; ++ip) group[ip - 1] = id;
      ++id;
    }
    inf.grouping = "segmentation";
  }
  if (!group.empty() && std::find(group.begin(), group.end(), -1) == group.end()) {
    inf.discrimination = within_cross_discrimination(inf.similarity, group);
  }

  {
    auto f = out.open("correlation.tsv");
    write_pair_matrix_tsv(f, inf.correlation);
    out.close(f, "correlation.tsv");
  }
  {
    auto f = out.open("mstpm.json");
    write_mstpm_json(f, inf.mstpms);
    out.close(f, "mstpm.json");
  }
  {
    auto f = out.open("summary.tsv");
    f << "ip\ttotal_attacks\tmean_interval\tcluster_size\n";
    for (std::size_t k = 0; k < b.ip_count; ++k) {
      f << k + 1 << '\t';
      if (k < inf.summary.size()) {
        f << inf.summary[k].total_attacks << '\t'
          << (inf.summary[k].mean_interval ? format_number(*inf.summary[k].mean_interval) : "nan");
      } else {
        f << m.row_total(static_cast<IpIndex>(k + 1)) << "\tnan";
      }
      f << '\t' << inf.cluster_sizes[k] << '\n';
    }
    out.close(f, "summary.tsv");
  }
  json doc{{"delta_t", num(inf.delta_t)}, {"rho_c", num(b.config.rho_c)}, {"ips", b.ip_count}};
  std::size_t undefined = 0;
  for (double v : inf.correlation.values()) undefined += std::isnan(v);
  doc["undefined_correlations"] = undefined;
  if (inf.discrimination) {
    const auto& d = *inf.discrimination;
    doc["discrimination"] = {{"grouping", inf.grouping},
                             {"auc", num(d.auc)},
                             {"within_pairs", d.within_pairs},
                             {"cross_pairs", d.cross_pairs},
                             {"undefined_pairs", d.undefined_pairs}};
  } else {
    doc["discrimination"] = nullptr;
  }
  out.write("inference.json", doc.dump(2) + "\n");
  b.inference = std::move(inf);
  emit_plot_data(b, PlotKind::Similarity);
}

const char* group_name(IpGroup g) {
  switch (g) {
    case IpGroup::Deterministic: return "D";
    case IpGroup::Stochastic: return "R";
    default: return "-";
  }
}

json group_json(const GroupSummary& g) {
  return {{"mean_pi_max", num(g.mean_pi_max)},
          {"mean_ground_fraction", num(g.mean_ground_fraction)},
          {"ip_count", g.ip_count},
          {"ground_flag", g.ground_flag}};
}

void run_predictability(ReportBundle& b, OutDir& out) {
  const auto groups = ip_groups(b);
  std::vector<PredictabilityReport> reports;
  json doc = json::array();
  for (double dt : b.config.delta_t) {
    const auto& m = matrix_at(b, dt);
    for (double h : b.config.h) {
      auto rep = predictability_profile(m, h, groups, b.config.tol.predictability, b.config.jobs);
      json per_ip = json::array();
      for (const auto& ip : rep.per_ip) {
        json sections = json::array();
        for (const auto& s : ip.sections) {
          sections.push_back({{"index", s.index},
                              {"entropy", num(s.entropy)},
                              {"n_states", s.n_states},
                              {"pi_max", num(s.pi_max)},
                              {"ground_fraction", num(s.ground_fraction)},
                              {"clipped", s.clipped}});
        }
        json e{{"ip", ip.ip},
               {"group", group_name(ip.group)},
               {"mean_pi_max", num(ip.mean_pi_max)},
               {"ground_fraction", num(ip.ground_fraction)},
               {"ground_flag", ip.ground_flag},
               {"skipped_sections", ip.skipped_sections},
               {"sections", sections}};
        if (!ip.excluded_reason.empty()) e["excluded_reason"] = ip.excluded_reason;
        per_ip.push_back(std::move(e));
      }
      doc.push_back({{"delta_t", num(dt)},
                     {"h", num(h)},
                     {"states_per_section", rep.states_per_section},
                     {"section_count", rep.section_count},
                     {"fine_resolution", rep.fine_resolution},
                     {"estimator", "lz-match-length"},
                     {"groups",
                      {{"D", group_json(rep.deterministic)},
                       {"R", group_json(rep.stochastic)},
                       {"all", group_json(rep.overall)}}},
                     {"per_ip", std::move(per_ip)}});
      reports.push_back(std::move(rep));
    }
  }
  out.write("predictability.json", doc.dump() + "\n");
  b.predictability = std::move(reports);
}

void load(ReportBundle& b, OutDir& out) {
  const RunConfig& c = b.config;
  if (!c.scenario.empty()) {
    Scenario sc;
    if (c.scenario == "fig1") {
      sc = fig1_composite(c.seed.value_or(1), c.duration.value_or(172800.0));
    } else {
      std::ifstream in(c.scenario);
      if (!in) throw IoError(kModule, "cannot open scenario file", c.scenario);
      sc = parse_scenario_json(in);
      if (c.seed) sc.seed = *c.seed;
      if (c.duration) sc.duration = *c.duration;
    }
    auto traffic = generate(sc);
    b.records = std::move(traffic.records);
    traffic.records = {};
    {
      auto f = out.open("records.csv");
      write_flow_records(f, b.records);
      out.close(f, "records.csv");
    }
    {
      auto f = out.open("labels.json");
      traffic.records.clear();
      write_labels_json(f, sc, traffic);
      out.close(f, "labels.json");
    }
    out.write("scenario.json", scenario_to_json(sc) + "\n");
    b.ip_count = sc.ip_count;
    b.t0 = 0.0;
    b.duration = sc.duration;
    b.scenario = std::move(sc);
    return;
  }
  if (c.inputs.empty()) throw ValidationError(kModule, "no --input file and no --scenario given");
  if (c.inputs.size() == 1 && !ends_with_bin(c.inputs[0]).empty()) {
    std::ifstream in(c.inputs[0], std::ios::binary);
    if (!in) throw IoError("spatiotemporal_matrix", "cannot open input file", c.inputs[0]);
    AttackMatrix m = read_matrix_binary(in);
    b.ip_count = m.n_ips();
    b.t0 = m.t0();
    b.matrices.emplace(m.delta_t(), std::move(m));
    return;
  }
  for (const auto& path : c.inputs) {
    auto part = read_flow_file(path);
    b.records.insert(b.records.end(), part.begin(), part.end());
  }
  sort_records(b.records);
  const auto span = record_span(b.records);
  b.ip_count = c.ip_count.value_or(span.max_ip);
  if (b.ip_count == 0) throw ValidationError(kModule, "input holds no records");
  if (span.max_ip > b.ip_count) {
    throw ValidationError(kModule, "records reach ip " + std::to_string(span.max_ip) +
                                       " beyond ip_count " + std::to_string(b.ip_count));
  }
  b.t0 = span.first_t;
}

std::string plot_prerequisite(PlotKind k) {
  switch (k) {
    case PlotKind::Heatmap: return "bin";
    case PlotKind::FluxFluct: return "fluxfluct";
    case PlotKind::Spatial: return "spatial";
    case PlotKind::Similarity: return "infer";
    case PlotKind::Predictability: return "predict";
  }
  return "";
}

}  // namespace

// ---------------------------------------------------------------------------

void RunConfig::validate() const {
  if (scenario.empty() && inputs.empty()) {
    throw ValidationError(kModule, "config needs an input file or a scenario");
  }
  if (delta_t.empty()) throw ValidationError(kModule, "at least one delta_t is required");
  for (double dt : delta_t) {
    if (!(dt > 0) || !std::isfinite(dt)) throw ValidationError(kModule, "delta_t must be > 0");
  }
  if (analysis_delta_t && !(*analysis_delta_t > 0)) {
    throw ValidationError(kModule, "analysis delta_t must be > 0");
  }
  for (double x : h) {
    if (!(x > 0) || !std::isfinite(x)) throw ValidationError(kModule, "h must be > 0");
  }
  if (!(rho_c >= -1 && rho_c <= 1)) throw ValidationError(kModule, "rho_c must lie in [-1, 1]");
  if (duration && !(*duration > 0)) throw ValidationError(kModule, "duration must be > 0");
  for (const auto& r : regions) {
    if (r.empty() || r.first < 1) throw ValidationError(kModule, "empty region " + to_string(r));
  }
  if (out_dir.empty()) throw ValidationError(kModule, "output directory must be set");
}

double RunConfig::primary_delta_t() const {
  if (analysis_delta_t) return *analysis_delta_t;
  return *std::min_element(delta_t.begin(), delta_t.end());
}

RunConfig parse_run_config(std::istream& in, RunConfig c) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(kModule, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError(kModule, "config must be a JSON object");
  try {
    auto numbers = [&](const char* key, std::vector<double>& dst) {
      if (!j.contains(key)) return;
      dst.clear();
      if (j[key].is_array()) {
        for (const auto& v : j[key]) dst.push_back(v.get<double>());
      } else {
        dst.push_back(j[key].get<double>());
      }
    };
    if (j.contains("input")) {
      c.inputs.clear();
      if (j["input"].is_array()) {
        for (const auto& v : j["input"]) c.inputs.push_back(v.get<std::string>());
      } else {
        c.inputs.push_back(j["input"].get<std::string>());
      }
    }
    if (j.contains("scenario")) c.scenario = j["scenario"].get<std::string>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("duration")) c.duration = j["duration"].get<double>();
    if (j.contains("ip_count")) c.ip_count = j["ip_count"].get<std::size_t>();
    numbers("delta_t", c.delta_t);
    if (j.contains("analysis_delta_t")) c.analysis_delta_t = j["analysis_delta_t"].get<double>();
    numbers("h", c.h);
    if (j.contains("rho_c")) c.rho_c = j["rho_c"].get<double>();
    if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
    if (j.contains("jobs")) c.jobs = j["jobs"].get<unsigned>();
    if (j.contains("region")) {
      c.regions.clear();
      const auto& r = j["region"];
      if (r.is_array()) {
        for (const auto& v : r) c.regions.push_back(parse_ip_range(v.get<std::string>()));
      } else {
        c.regions.push_back(parse_ip_range(r.get<std::string>()));
      }
    }
    if (j.contains("tolerances")) {
      const auto& t = j["tolerances"];
      auto& tol = c.tol;
      for (const auto& [key, v] : t.items()) {
        if (key == "wall_max_delay") tol.walls.max_delay = v.get<double>();
        else if (key == "wall_min_coverage") tol.walls.min_coverage = v.get<double>();
        else if (key == "wall_min_span") tol.walls.min_span = v.get<double>();
        else if (key == "wall_max_skip") tol.walls.max_skip = v.get<IpIndex>();
        else if (key == "dwell_gap") tol.sweeps.dwell_gap = v.get<double>();
        else if (key == "sweep_min_rate") tol.sweeps.min_rate = v.get<double>();
        else if (key == "sweep_max_rate") tol.sweeps.max_rate = v.get<double>();
        else if (key == "sweep_min_track_ips") tol.sweeps.min_track_ips = v.get<std::size_t>();
        else if (key == "sweep_max_residual") tol.sweeps.max_residual = v.get<double>();
        else if (key == "sweep_both_directions") tol.sweeps.both_directions = v.get<bool>();
        else if (key == "amplitude_threshold") tol.blocks.amplitude_threshold = v.get<double>();
        else if (key == "deterministic_min") tol.blocks.deterministic_min = v.get<double>();
        else if (key == "stochastic_max") tol.blocks.stochastic_max = v.get<double>();
        else if (key == "deterministic_cv") tol.drive.deterministic_cv = v.get<double>();
        else if (key == "slope_band") tol.drive.slope_band = v.get<double>();
        else if (key == "min_section_states") tol.predictability.min_section_states = v.get<std::size_t>();
        else if (key == "global_alphabet") tol.predictability.global_alphabet = v.get<bool>();
        else if (key == "ground_flag_threshold") tol.predictability.ground_flag_threshold = v.get<double>();
        else if (key == "entropy_slack") tol.predictability.slack = v.get<double>();
        else throw ValidationError(kModule, "unknown tolerance '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(kModule, std::string("bad config value: ") + e.what());
  }
  return c;
}

std::vector<FlowRecord> read_flow_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("flow_ingest", "cannot open input file", path);
  return parse_flow_records(in);
}

ReportBundle run_pipeline(const RunConfig& config) {
  return run_pipeline(config, {Stage::Patterns, Stage::Flux, Stage::Spatial, Stage::Inference,
                               Stage::Predictability, Stage::Heatmap});
}

ReportBundle run_pipeline(const RunConfig& config, const std::vector<Stage>& stages) {
  config.validate();
  ReportBundle b;
  b.config = config;
  std::sort(b.config.delta_t.begin(), b.config.delta_t.end());
  b.config.delta_t.erase(std::unique(b.config.delta_t.begin(), b.config.delta_t.end()),
                         b.config.delta_t.end());
  OutDir out(b);
  load(b, out);
  auto want = [&](Stage s) { return std::find(stages.begin(), stages.end(), s) != stages.end(); };

  if (want(Stage::Records) && !b.records.empty() &&
      std::find(b.files.begin(), b.files.end(), "records.csv") == b.files.end()) {
    auto f = out.open("records.csv");
    write_flow_records(f, b.records);
    out.close(f, "records.csv");
  }
  if (want(Stage::Matrices)) {
    for (double dt : b.config.delta_t) {
      const auto& m = matrix_at(b, dt);
      const std::string stem = "matrix_dt" + dt_tag(dt);
      {
        auto f = out.open(stem + ".csv");
        write_matrix_csv(f, m);
        out.close(f, stem + ".csv");
      }
      auto f = out.open(stem + ".bin");
      write_matrix_binary(f, m);
      out.close(f, stem + ".bin");
    }
  }
  if (want(Stage::Patterns)) run_patterns(b, out);
  choose_regions(b);
  if (want(Stage::Flux)) {
    run_flux(b, out);
    emit_plot_data(b, PlotKind::FluxFluct);
  }
  if (want(Stage::Spatial)) {
    run_spatial(b, out);
    emit_plot_data(b, PlotKind::Spatial);
  }
  if (want(Stage::Inference)) run_inference(b, out);
  if (want(Stage::Predictability)) {
    run_predictability(b, out);
    emit_plot_data(b, PlotKind::Predictability);
  }
  if (want(Stage::Heatmap)) emit_plot_data(b, PlotKind::Heatmap);
  write_manifest(b);
  return b;
}

PlotKind parse_plot_kind(const std::string& name) {
  for (auto k : {PlotKind::Heatmap, PlotKind::FluxFluct, PlotKind::Spatial, PlotKind::Similarity,
                 PlotKind::Predictability}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError(kModule, "unknown plot kind '" + name + "'");
}

std::string to_string(PlotKind kind) {
  switch (kind) {
    case PlotKind::Heatmap: return "heatmap";
    case PlotKind::FluxFluct: return "fluxfluct";
    case PlotKind::Spatial: return "spatial";
    case PlotKind::Similarity: return "similarity";
    case PlotKind::Predictability: return "predictability";
  }
  return "";
}

std::string emit_plot_data(ReportBundle& b, PlotKind kind) {
  auto missing = [&](const std::string& what) {
    const auto pre = plot_prerequisite(kind);
    throw MissingAnalysis(kModule, to_string(kind) + " plot needs " + what + "; run `" + pre + "` first",
                          pre);
  };
  OutDir out(b);
  switch (kind) {
    case PlotKind::Heatmap: {
      if (b.matrices.empty() && b.records.empty()) missing("a binned matrix");
      const double dt = b.config.delta_t.empty() ? b.matrices.rbegin()->first
                                                 : *std::max_element(b.config.delta_t.begin(),
                                                                     b.config.delta_t.end());
      const auto& m = matrix_at(b, dt);
      const std::string name = "heatmap.tsv";
      auto f = out.open(name);
      f << "ip\tbin\tlog10_w_plus_0.1\n";
      for (IpIndex ip = 1; ip <= m.n_ips(); ++ip) {
        const auto row = m.row(ip);
        for (std::size_t t = 0; t < row.size(); ++t) {
          f << ip << '\t' << t << '\t' << format_number(std::log10(row[t] + 0.1)) << '\n';
        }
      }
      out.close(f, name);
      return name;
    }
    case PlotKind::FluxFluct: {
      if (!b.flux) missing("flux-fluctuation results");
      const std::string name = "fluxfluct_scatter.tsv";
      auto f = out.open(name);
      f << "region\tip\tmean\tsigma\n";
      for (std::size_t k = 0; k < b.flux->size(); ++k) {
        const auto& st = (*b.flux)[k].stats;
        for (std::size_t i = 0; i < st.mean_flux.size(); ++i) {
          if (!(st.mean_flux[i] > 0) || !(st.std_flux[i] > 0)) continue;
          f << to_string(st.region) << '\t' << st.region.first + i << '\t'
            << format_number(st.mean_flux[i]) << '\t' << format_number(st.std_flux[i]) << '\n';
        }
      }
      out.close(f, name);
      return name;
    }
    case PlotKind::Spatial: {
      if (!b.spatial) missing("spatial concentration results");
      const std::string name = "spatial_scatter.tsv";
      auto f = out.open(name);
      f << "region\tbin\tmean\tsigma\tn\tN\tzero_one\thomogeneous_bound\tconcentrated_bound\tconcentration_index\n";
      for (const auto& sr : *b.spatial) {
        const auto tag = to_string(sr.region.range);
        for (const auto& p : sr.points) {
          const double hb = p.mean <= 1.0 ? homogeneous_bound(p.mean) : std::nan("");
          const double cb = p.region_size >= 2 ? concentrated_bound(p.mean, p.region_size) : std::nan("");
          f << tag << '\t' << p.bin << '\t' << format_number(p.mean) << '\t' << format_number(p.sigma)
            << '\t' << p.total << '\t' << p.region_size << '\t' << (p.zero_one ? 1 : 0) << '\t'
            << format_number(hb) << '\t' << format_number(cb) << '\t'
            << format_number(concentration_index(p).value_or(std::nan(""))) << '\n';
        }
      }
      out.close(f, name);
      return name;
    }
    case PlotKind::Similarity: {
      if (!b.inference) missing("MSTPM similarities");
      const std::string name = "similarity.tsv";
      auto f = out.open(name);
      write_pair_matrix_tsv(f, b.inference->similarity);
      out.close(f, name);
      return name;
    }
    case PlotKind::Predictability: {
      if (!b.predictability) missing("predictability results");
      const std::string name = "predictability_curves.tsv";
      auto f = out.open(name);
      f << "delta_t\th\tgroup\tmean_pi_max\tmean_ground_fraction\tip_count\tground_flag\n";
      for (const auto& rep : *b.predictability) {
        const std::pair<const char*, const GroupSummary*> rows[] = {
            {"D", &rep.deterministic}, {"R", &rep.stochastic}, {"all", &rep.overall}};
        for (const auto& [g, s] : rows) {
          f << format_number(rep.delta_t) << '\t' << format_number(rep.h) << '\t' << g << '\t'
            << format_number(s->mean_pi_max.value_or(std::nan(""))) << '\t'
            << format_number(s->mean_ground_fraction) << '\t' << s->ip_count << '\t'
            << (s->ground_flag ? 1 : 0) << '\n';
        }
      }
      out.close(f, name);
      return name;
    }
  }
  return "";
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr)) {
    throw Error(kModule, "SHA-256 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return hex.str();
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(kModule, "cannot read file for hashing", path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return hex.str();
}

void write_manifest(ReportBundle& b) {
  std::vector<std::string> files = b.files;
  files.erase(std::remove(files.begin(), files.end(), "manifest.json"), files.end());
  std::sort(files.begin(), files.end());
  const fs::path root(b.config.out_dir);
  json list = json::array();
  for (const auto& name : files) {
    const auto p = (root / name).string();
    list.push_back({{"path", name}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p)}});
  }
  const auto& c = b.config;
  json cfg{{"scenario", c.scenario},
           {"inputs", c.inputs},
           {"seed", c.seed ? json(*c.seed) : json(nullptr)},
           {"delta_t", json::array()},
           {"analysis_delta_t", num(c.primary_delta_t())},
           {"h", json::array()},
           {"rho_c", num(c.rho_c)},
           {"regions", json::array()}};
  for (double v : c.delta_t) cfg["delta_t"].push_back(num(v));
  for (double v : c.h) cfg["h"].push_back(num(v));
  for (const auto& r : c.regions) cfg["regions"].push_back(to_string(r));
  json doc{{"tool", "attackscope"}, {"config", cfg}, {"files", list}};
  OutDir out(b);
  out.write("manifest.json", doc.dump(2) + "\n");
}

std::string error_json(const std::exception& e) {
  json err{{"message", e.what()}};
  if (const auto* ae = dynamic_cast<const Error*>(&e)) {
    err["module"] = ae->module();
    err["kind"] = ae->kind();
    if (const auto* pe = dynamic_cast<const ParseError*>(ae); pe && pe->line()) err["line"] = pe->line();
    if (const auto* io = dynamic_cast<const IoError*>(ae)) err["path"] = io->path();
    if (const auto* ma = dynamic_cast<const MissingAnalysis*>(ae)) err["prerequisite"] = ma->prerequisite();
  } else {
    err["module"] = kModule;
    err["kind"] = "internal_error";
  }
  return json{{"error", err}}.dump();
}

}  // namespace attackscope
