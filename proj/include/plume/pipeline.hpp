#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plume/metrics.hpp"
#include "plume/network.hpp"
#include "plume/sim.hpp"
#include "plume/trainer.hpp"

namespace plume::cli {

// Corpus sweep: inflow angles on a half-open degree grid crossed with
// inclusive speed steps, mirroring the sampling the solver domain targets.
struct GenerateConfig {
  double angle_start_deg = 180.0;
  double angle_stop_deg = 270.0;  // exclusive
  double angle_step_deg = 10.0;
  double speed_start = 1.0;
  double speed_stop = 5.0;  // inclusive
  double speed_step = 1.0;
  int count = -1;            // truncate the sweep when >= 0
  bool shared_city = false;  // one city layout for the whole corpus
  bool export_images = false;

  void validate() const;
  std::vector<std::pair<double, double>> sweep() const;  // (phi_deg, speed)
};

struct EvaluateConfig {
  int input_steps = 5;
  int horizon = 15;
  double threshold = 0.5;

  void validate() const;
};

// Merged configuration: defaults, then config file, then command line.
struct RunConfig {
  std::uint64_t seed = 0;
  sim::SimConfig sim;
  sim::CityConfig city;
  sim::SourceSpec source;
  net::ModelConfig model;
  train::TrainConfig train;
  GenerateConfig generate;
  EvaluateConfig evaluate;

  void validate() const;
};

// Parses a config file's JSON text over the defaults; unknown keys are
// rejected everywhere.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config_file(const std::string& path);

// Applies one `section.key=value` command-line override.
void apply_override(RunConfig& cfg, const std::string& dotted_key,
                    const std::string& value);

// Effective-config echo for startup logging.
std::string dump_run_config(const RunConfig& cfg);

std::string config_fingerprint(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Subcommand bodies (the CLI binary is a thin flag parser over these)
// ---------------------------------------------------------------------------

struct GenerateOutcome {
  std::vector<std::string> files;       // sequence containers, in write order
  std::vector<std::string> manifest;    // one line per sequence
};

GenerateOutcome run_generate(const RunConfig& cfg, const std::string& out_dir);

struct TrainOutcome {
  std::string checkpoint_path;
  std::string log_path;
  train::TrainHistory history;
};

TrainOutcome run_train(const RunConfig& cfg, const std::vector<std::string>& data_files,
                       const std::string& out_dir);

struct PredictOutcome {
  std::string predictions_path;
  std::vector<std::string> image_paths;
};

PredictOutcome run_predict(const RunConfig& cfg, const std::string& checkpoint_path,
                           const std::string& sequence_path, int t0,
                           const std::string& out_dir);

struct EvaluateOutcome {
  std::string csv_path;
  std::string json_path;
  metrics::MetricReport report;
};

EvaluateOutcome run_evaluate(const RunConfig& cfg, const std::string& checkpoint_path,
                             const std::vector<std::string>& data_files,
                             const std::string& out_dir);

// Scores a stored predictions file against its source sequence; the result
// matches run_evaluate on the same checkpoint and window.
EvaluateOutcome run_evaluate_predictions(const RunConfig& cfg,
                                         const std::string& predictions_path,
                                         const std::string& sequence_path,
                                         const std::string& out_dir);

// Sequence files under `dir` in deterministic (sorted) order.
std::vector<std::string> list_sequence_files(const std::string& dir);

}  // namespace plume::cli
