#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nscm/config.hpp"
#include "nscm/dynamics.hpp"
#include "nscm/mcvstem.hpp"
#include "nscm/nn.hpp"
#include "nscm/sim.hpp"

namespace nscm {

// Command-line overrides applied on top of the config file. Empty fields keep
// the file's values.
struct StageOverrides {
  std::string out;
  // "a1,a2,...;e1,e2,..." replaces the search grids; either side may be empty
  // to keep the configured one.
  std::string grid;
  std::vector<std::string> policies;
  bool has_seed = false;
  uint64_t seed = 0;
  bool emit_plots = false;
};

// One pipeline invocation, fully resolved: the benchmark model and sampling
// box, the metric search setup, network hyperparameters, the Monte-Carlo
// experiment, and where every artifact lives. All randomness derives from
// `seed` through named substreams, so the same config and seed produce
// byte-identical artifacts on every rerun.
struct PipelineConfig {
  std::string model_name;
  MetricMode mode = MetricMode::Estimation;
  std::string out_dir;
  uint64_t seed = 0;
  bool emit_plots = false;

  SystemModel model;
  StateBox box;

  // Search configuration; samples are drawn by the sample stage. A negative
  // l_m request means "estimate the budget from a derivative-free search".
  McvStemConfig search;
  double lm_request = 0.0;
  int num_samples = 50;

  MlpArchitecture arch;
  TrainingConfig training;
  // Informational test-error target echoed by the train stage when positive.
  double error_target = 0.0;

  ExperimentConfig experiment;
  std::vector<std::string> policies;

  // Verification budgets.
  int lipschitz_pairs = 1000;
  int predict_samples = 10000;
  int ou_runs = 900;

  // Resolved artifact paths.
  std::string samples_csv, samples_meta, jsurface_csv;
  std::string checkpoint, curves_csv;
  std::string comparison_csv, comparison_json, trace_prefix;
  std::string verify_json;
  std::string ncm_samples_csv, ncm_samples_meta, ncm_checkpoint;
};

// Parses the config file and builds the model. Sections: [pipeline] selects
// the model (rocket needs a coefficient file, scalar is built in), the metric
// mode, output directory and master seed; [mcvstem], [network], [experiment]
// and [verify] feed the corresponding stages; [artifacts] overrides
// individual file locations (relative paths land under the output
// directory). Unknown models, missing referenced files and malformed values
// raise ConfigError.
PipelineConfig load_pipeline(const std::string& config_path,
                             const StageOverrides& overrides = {});

// Built-in single-state benchmark dx = (a x + b x^3) dt + u dt + g dW with
// measurement y = c x + d xi, configured by the [scalar] section. Small
// enough that every stage finishes in seconds.
SystemModel scalar_benchmark(const Config& cfg);
StateBox scalar_box(const Config& cfg);

// Stage bodies. Missing input artifacts raise ConfigError; evaluation and
// certificate failures raise the corresponding Error subclass.

// Draws evaluation points, searches the (alpha, eps) grid, and persists the
// winning sample set plus the objective surface.
void run_sample(const PipelineConfig& cfg);

// Fits the network to the stored sample set and persists the checkpoint and
// epoch curves. A diverged fit still writes both, then throws TrainingError.
void run_train(const PipelineConfig& cfg);

// Re-checks the stored artifacts: recorded model bounds, the checkpoint's
// normalization against its certificate, the prediction cap, the
// metric-derivative budget, feasibility of the stored metric set, and a
// closed-form diffusion oracle. Writes one JSON row per check and returns
// false when any of them failed.
bool run_verify(const PipelineConfig& cfg);

// Runs the configured policies against shared noise and writes the
// comparison table (plus per-run traces with emit_plots). first_policy_only
// restricts the list to its head, which gives the cheap smoke path.
void run_compare(const PipelineConfig& cfg, bool first_policy_only);

// Dispatch for the command-line tool: sample | train | verify | simulate |
// compare. Returns the process exit code (0 ok, 1 failed verification).
int run_stage(const PipelineConfig& cfg, const std::string& stage);

}  // namespace nscm
