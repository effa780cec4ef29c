#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "attackscope/flow_ingest.hpp"
#include "attackscope/flux.hpp"
#include "attackscope/inference.hpp"
#include "attackscope/matrix.hpp"
#include "attackscope/patterns.hpp"
#include "attackscope/predictability.hpp"
#include "attackscope/spatial.hpp"
#include "attackscope/synth.hpp"

namespace attackscope {

struct Tolerances {
  WallParams walls;
  SweepParams sweeps{.min_track_ips = 8};
  BlockParams blocks;
  DriveTolerances drive;
  PredictabilityParams predictability;
};

struct RunConfig {
  std::vector<std::string> inputs;   // flow CSVs, or one matrix .bin
  std::string scenario;              // "fig1" or a scenario JSON path; empty = inputs only
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;    // fig1 only
  std::optional<std::size_t> ip_count;
  std::vector<double> delta_t{10.0, 100.0, 1000.0};
  std::optional<double> analysis_delta_t;  // flux, spatial, inference; default min(delta_t)
  std::vector<IpRange> regions;      // empty = segmentation blocks
  std::vector<double> h{6.0, 12.0, 24.0, 48.0};
  double rho_c = 0.7;
  std::string out_dir = "attackscope_out";
  unsigned jobs = 1;
  Tolerances tol;

  void validate() const;
  double primary_delta_t() const;
};

// Overlays keys of a JSON config document onto `base`.
RunConfig parse_run_config(std::istream& in, RunConfig base = {});

// Records writes the canonical records.csv; Matrices writes matrix_dt<dt>.{csv,bin} per delta_t.
enum class Stage { Records, Matrices, Patterns, Flux, Spatial, Inference, Predictability, Heatmap };

struct AnalysisRegion {
  std::string name;
  IpRange range;
};

struct PatternAnalysis {
  std::vector<WallEvent> walls;
  std::vector<SweepPattern> sweeps;   // members index the bundle's records
  std::vector<double> det_fraction;
  std::vector<int> pattern_of;
  BlockSegmentation segmentation;
};

struct SpatialRegion {
  AnalysisRegion region;
  std::vector<SpatialPoint> points;
};

struct InferenceAnalysis {
  double delta_t = 0.0;
  CorrelationMatrix correlation;
  std::vector<std::size_t> cluster_sizes;
  std::vector<IpSummary> summary;
  std::vector<Mstpm> mstpms;
  SimilarityMatrix similarity;
  std::optional<Discrimination> discrimination;
  std::string grouping;  // source of the group labels
};

struct ReportBundle {
  RunConfig config;
  std::vector<FlowRecord> records;
  std::optional<Scenario> scenario;
  std::size_t ip_count = 0;
  std::optional<double> t0, duration;
  std::map<double, AttackMatrix> matrices;
  std::vector<AnalysisRegion> regions;
  std::optional<PatternAnalysis> patterns;
  std::optional<std::vector<RegionFluxReport>> flux;
  std::optional<std::vector<SpatialRegion>> spatial;
  std::optional<InferenceAnalysis> inference;
  std::optional<std::vector<PredictabilityReport>> predictability;
  std::vector<std::string> files;  // written, relative to out_dir
};

// Loads inputs or generates the scenario, writes the canonical records (and
// labels for generated traffic), then runs `stages` in dependency order and
// writes every report, plot file and manifest.json into config.out_dir.
ReportBundle run_pipeline(const RunConfig& config, const std::vector<Stage>& stages);
ReportBundle run_pipeline(const RunConfig& config);

enum class PlotKind { Heatmap, FluxFluct, Spatial, Similarity, Predictability };

PlotKind parse_plot_kind(const std::string& name);
std::string to_string(PlotKind kind);

// Writes one TSV (one-line header) and returns its path relative to out_dir.
// Raises MissingAnalysis naming the command that produces the analysis.
std::string emit_plot_data(ReportBundle& bundle, PlotKind kind);

// manifest.json over bundle.files: path, byte count and SHA-256 per file.
void write_manifest(ReportBundle& bundle);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

// {"error": {"module", "kind", "message", ...}} for a library error.
std::string error_json(const std::exception& e);

std::vector<FlowRecord> read_flow_file(const std::string& path);

}  // namespace attackscope
