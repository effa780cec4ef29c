#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "attackscope/error.hpp"
#include "attackscope/flow_ingest.hpp"
#include "attackscope/report.hpp"

namespace as = attackscope;
namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> inputs;
  std::vector<double> delta_t;
  std::optional<double> analysis_delta_t;
  std::vector<std::string> regions;
  std::vector<double> h;
  std::optional<double> rho_c;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::optional<std::size_t> ip_count;
  std::string out;
  std::string scenario;
  std::optional<unsigned> jobs;
  double flow_timeout = 60.0;
  double flow_lifetime = 300.0;
  std::vector<std::string> plots;
};

void add_common(CLI::App* cmd, Flags& f, bool analysis) {
  cmd->add_option("--config", f.config, "JSON run configuration")->envname("ATTACKSCOPE_CONFIG");
  cmd->add_option("--input", f.inputs, "input file(s)")->envname("ATTACKSCOPE_INPUT");
  cmd->add_option("--out", f.out, "output directory")->envname("ATTACKSCOPE_OUT");
  cmd->add_option("--scenario", f.scenario, "scenario JSON file or 'fig1'")->envname("ATTACKSCOPE_SCENARIO");
  cmd->add_option("--seed", f.seed, "generator seed")->envname("ATTACKSCOPE_SEED");
  cmd->add_option("--duration", f.duration, "generated duration in seconds")->envname("ATTACKSCOPE_DURATION");
  cmd->add_option("--ip-count", f.ip_count, "size of the IP space")->envname("ATTACKSCOPE_IP_COUNT");
  cmd->add_option("--jobs", f.jobs, "max worker threads")->envname("ATTACKSCOPE_JOBS");
  if (!analysis) return;
  cmd->add_option("--delta-t", f.delta_t, "bin width(s) in seconds")->delimiter(',')->envname("ATTACKSCOPE_DELTA_T");
  cmd->add_option("--analysis-delta-t", f.analysis_delta_t, "bin width for flux, spatial, patterns and inference")
      ->envname("ATTACKSCOPE_ANALYSIS_DELTA_T");
  cmd->add_option("--region", f.regions, "IP region a..b (repeatable)")->envname("ATTACKSCOPE_REGION");
  cmd->add_option("--h", f.h, "section length(s) in hours")->delimiter(',')->envname("ATTACKSCOPE_H");
  cmd->add_option("--rho-c", f.rho_c, "correlation threshold")->envname("ATTACKSCOPE_RHO_C");
}

as::RunConfig build_config(const Flags& f) {
  as::RunConfig c;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw as::IoError("cli_report", "cannot open config file", f.config);
    c = as::parse_run_config(in, c);
  }
  if (!f.inputs.empty()) c.inputs = f.inputs;
  if (!f.scenario.empty()) c.scenario = f.scenario;
  if (f.seed) c.seed = f.seed;
  if (f.duration) c.duration = f.duration;
  if (f.ip_count) c.ip_count = f.ip_count;
  if (!f.delta_t.empty()) c.delta_t = f.delta_t;
  if (f.analysis_delta_t) c.analysis_delta_t = f.analysis_delta_t;
  if (!f.h.empty()) c.h = f.h;
  if (f.rho_c) c.rho_c = *f.rho_c;
  if (!f.out.empty()) c.out_dir = f.out;
  if (f.jobs) c.jobs = *f.jobs;
  if (!f.regions.empty()) {
    c.regions.clear();
    for (const auto& r : f.regions) c.regions.push_back(as::parse_ip_range(r));
  }
  for (const auto& path : c.inputs) {
    if (!fs::exists(path)) throw as::IoError("flow_ingest", "input file not found", path);
  }
  return c;
}

bool matrix_input(const as::RunConfig& c) {
  return c.scenario.empty() && c.inputs.size() == 1 && c.inputs[0].size() > 4 &&
         c.inputs[0].compare(c.inputs[0].size() - 4, 4, ".bin") == 0;
}

void print_summary(const as::ReportBundle& b) {
  nlohmann::json j{{"out", b.config.out_dir}, {"files", b.files}};
  std::cout << j.dump() << '\n';
}

void run_stages(const Flags& f, std::vector<as::Stage> stages, bool with_patterns) {
  const auto c = build_config(f);
  if (with_patterns && !matrix_input(c)) stages.insert(stages.begin(), as::Stage::Patterns);
  print_summary(as::run_pipeline(c, stages));
}

void run_sessionize(const Flags& f) {
  if (f.inputs.empty()) throw as::ValidationError("flow_ingest", "sessionize needs --input");
  as::SessionizeParams p{f.flow_timeout, f.flow_lifetime};
  p.validate();
  std::vector<as::PacketEvent> events;
  for (const auto& path : f.inputs) {
    std::ifstream in(path);
    if (!in) throw as::IoError("flow_ingest", "cannot open input file", path);
    auto part = as::parse_packet_events(in);
    events.insert(events.end(), part.begin(), part.end());
  }
  as::ReportBundle b;
  b.config.out_dir = f.out.empty() ? b.config.out_dir : f.out;
  fs::create_directories(b.config.out_dir);
  const auto path = (fs::path(b.config.out_dir) / "records.csv").string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw as::IoError("flow_ingest", "cannot write output file", path);
  as::write_flow_records(out, as::sessionize(events, p));
  out.close();
  b.files.push_back("records.csv");
  as::write_manifest(b);
  print_summary(b);
}

std::string prerequisite_file(as::PlotKind k) {
  switch (k) {
    case as::PlotKind::Heatmap: return "heatmap.tsv";
    case as::PlotKind::FluxFluct: return "fluxfluct_scatter.tsv";
    case as::PlotKind::Spatial: return "spatial_scatter.tsv";
    case as::PlotKind::Similarity: return "similarity.tsv";
    case as::PlotKind::Predictability: return "predictability_curves.tsv";
  }
  return "";
}

std::string prerequisite_command(as::PlotKind k) {
  switch (k) {
    case as::PlotKind::Heatmap: return "bin";
    case as::PlotKind::FluxFluct: return "fluxfluct";
    case as::PlotKind::Spatial: return "spatial";
    case as::PlotKind::Similarity: return "infer";
    case as::PlotKind::Predictability: return "predict";
  }
  return "";
}

// Checks an output directory against its manifest and lists the plot files.
int run_report(const Flags& f) {
  const fs::path dir = f.out.empty() ? fs::path(as::RunConfig{}.out_dir) : fs::path(f.out);
  const auto manifest_path = (dir / "manifest.json").string();
  std::ifstream in(manifest_path);
  if (!in) throw as::IoError("cli_report", "no manifest in output directory", manifest_path);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw as::ParseError("cli_report", std::string("manifest is not valid JSON: ") + e.what());
  }
  std::map<std::string, bool> listed;
  nlohmann::json files = nlohmann::json::array();
  bool all_ok = true;
  for (const auto& e : manifest.at("files")) {
    const auto name = e.at("path").get<std::string>();
    const auto p = (dir / name).string();
    const bool ok = fs::exists(p) && as::sha256_file(p) == e.at("sha256").get<std::string>();
    all_ok = all_ok && ok;
    listed[name] = ok;
    files.push_back({{"path", name}, {"hash_ok", ok}});
  }
  std::vector<as::PlotKind> kinds;
  if (f.plots.empty()) {
    for (const auto& [name, ok] : listed) {
      for (auto k : {as::PlotKind::Heatmap, as::PlotKind::FluxFluct, as::PlotKind::Spatial,
                     as::PlotKind::Similarity, as::PlotKind::Predictability}) {
        if (name == prerequisite_file(k)) kinds.push_back(k);
      }
    }
  } else {
    for (const auto& p : f.plots) kinds.push_back(as::parse_plot_kind(p));
  }
  nlohmann::json plots = nlohmann::json::object();
  for (auto k : kinds) {
    const auto file = prerequisite_file(k);
    if (!listed.count(file)) {
      throw as::MissingAnalysis("cli_report",
                                as::to_string(k) + " plot data not found in " + dir.string() +
                                    "; run `" + prerequisite_command(k) + "` first",
                                prerequisite_command(k));
    }
    plots[as::to_string(k)] = file;
  }
  std::cout << nlohmann::json{{"out", dir.string()}, {"manifest_ok", all_ok}, {"files", files}, {"plots", plots}}
                   .dump()
            << '\n';
  if (!all_ok) {
    throw as::ValidationError("cli_report", "manifest hashes do not match the files in " + dir.string());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attackscope: honeypot attack-traffic analysis"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help and exit");
  Flags f;

  auto* ingest = app.add_subcommand("ingest", "parse flow records into canonical records.csv");
  add_common(ingest, f, false);
  auto* sess = app.add_subcommand("sessionize", "group packet events into flow records");
  sess->add_option("--input", f.inputs, "packet event file(s)")->required()->envname("ATTACKSCOPE_INPUT");
  sess->add_option("--out", f.out, "output directory")->envname("ATTACKSCOPE_OUT");
  sess->add_option("--flow-timeout", f.flow_timeout, "max packet gap within a flow (s)")
      ->envname("ATTACKSCOPE_FLOW_TIMEOUT");
  sess->add_option("--flow-lifetime", f.flow_lifetime, "max flow lifetime (s)")
      ->envname("ATTACKSCOPE_FLOW_LIFETIME");
  auto* bin = app.add_subcommand("bin", "bin records into attack matrices");
  auto* flux = app.add_subcommand("fluxfluct", "flux-fluctuation analysis per region");
  auto* spatial = app.add_subcommand("spatial", "spatial concentration per region");
  auto* patterns = app.add_subcommand("patterns", "wall and sweep detection, IP block segmentation");
  auto* infer = app.add_subcommand("infer", "correlations, clusters and MSTPM similarity");
  auto* predict = app.add_subcommand("predict", "entropy and predictability profiles");
  auto* all = app.add_subcommand("all", "run every analysis stage");
  for (auto* cmd : {bin, flux, spatial, patterns, infer, predict, all}) add_common(cmd, f, true);
  auto* gen = app.add_subcommand("generate", "generate synthetic traffic from a scenario");
  add_common(gen, f, false);
  auto* report = app.add_subcommand("report", "verify an output directory and list its plot data");
  report->add_option("--out", f.out, "output directory")->envname("ATTACKSCOPE_OUT");
  report->add_option("--plot", f.plots, "plot kind(s) that must be present")->envname("ATTACKSCOPE_PLOT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    nlohmann::json err{{"error", {{"module", "cli_report"}, {"kind", "usage_error"}, {"message", e.what()}}}};
    std::cerr << err.dump() << '\n';
    return 2;
  }

  using S = as::Stage;
  try {
    if (*ingest) run_stages(f, {S::Records}, false);
    else if (*sess) run_sessionize(f);
    else if (*bin) run_stages(f, {S::Matrices, S::Heatmap}, false);
    else if (*flux) run_stages(f, {S::Flux}, f.regions.empty());
    else if (*spatial) run_stages(f, {S::Spatial}, f.regions.empty());
    else if (*patterns) run_stages(f, {S::Patterns}, false);
    else if (*infer) run_stages(f, {S::Inference}, true);
    else if (*predict) run_stages(f, {S::Predictability}, true);
    else if (*gen) run_stages(f, {}, false);
    else if (*report) return run_report(f);
    else if (*all) {
      run_stages(f, {S::Flux, S::Spatial, S::Inference, S::Predictability, S::Heatmap}, true);
    }
  } catch (const std::exception& e) {
    std::cerr << as::error_json(e) << '\n';
    return 1;
  }
  return 0;
}
