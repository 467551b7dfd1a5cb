#pragma once

#include <string>
#include <vector>

#include <nscm/dynamics.hpp>
#include <nscm/lmi.hpp>
#include <nscm/sdp.hpp>

namespace nscm {

// Which contraction family the sampled metric certifies: Basic bounds the
// squared distance between two noisy trajectories of the uncontrolled system,
// Control the tracking error under the metric feedback law, Estimation the
// observer error under the metric output-injection gain.
enum class MetricMode { Basic, Control, Estimation };

const char* to_string(MetricMode mode);
MetricMode metric_mode_from_name(const std::string& name);

// Disturbance-dependent constants of the mean-square stability bounds. The
// alpha_g family multiplies the metric-derivative Lipschitz constant into the
// contraction condition; the c family scales the steady-state error. The
// second channel (alpha_g2, c2) is used by the estimation family only, where
// measurement noise enters through the injection gain.
struct BoundConstants {
  double alpha_g = 0.0;
  double alpha_g2 = 0.0;
  double c = 0.0;
  double c2 = 0.0;
};

// g_a and g_b are Frobenius-norm bounds on the diffusion inputs of the mode:
// Basic takes the two trajectory diffusions, Control the closed-loop
// diffusion (g_b ignored), Estimation the process diffusion and the
// measurement channel product cbar*dbar.
BoundConstants bound_constants(MetricMode mode, double g_a, double g_b,
                               double l_m, double eps);
// Convenience overload reading the relevant bounds from the model: Basic and
// Control use g_c (Basic applies it to both trajectories), Estimation uses
// g_e and c_bar * d_bar.
BoundConstants bound_constants(MetricMode mode, const ModelBounds& bounds,
                               double l_m, double eps);

// Objective weights for J = c1 * chi + c2 * nu + c3 * P.
struct ObjectiveWeights {
  double c1 = 1.0;
  double c2 = 0.0;
  double c3 = 0.0;
};

// Weights that make J an upper bound surrogate for the steady-state error.
// For estimation the error bound (c*chi + c2*chi*nu^2) / (2*alpha) is
// dominated by J^3 / (3*sqrt(3*c)), which is what the cubic weights minimize;
// a noiseless measurement (c2 = 0) zeroes the nu penalty. For control the
// bound c*chi / (2*alpha) is linear in chi already.
ObjectiveWeights estimation_weights(double c_e1, double c_e2, double alpha);
ObjectiveWeights control_weights(double c_c, double alpha);

// One sampled evaluation point. x is the state the metric is attached to, and
// partner the second argument of the difference factorization: the target
// state for Control, the actual state for Estimation (x being the estimate).
// Basic ignores partner and differentiates at x. u_d is the target input
// (Control only).
struct SamplePoint {
  Vector x;
  Vector partner;
  Vector u_d;
  double t = 0.0;
};

// Uniform draw of evaluation points over the box. Control and Estimation draw
// x and partner independently; Basic sets partner = x. Times are taken from
// the box's parameter block when present (mapped through the model schedule),
// zero otherwise.
std::vector<SamplePoint> draw_samples(const SystemModel& model, const StateBox& box,
                                      MetricMode mode, int count, uint64_t seed);

struct McvStemConfig {
  MetricMode mode = MetricMode::Basic;
  // Negative weight = derive from the mode's bound constants at each grid
  // point (control_weights / estimation_weights); Basic derives the chi
  // weight from its own c constant the same way.
  ObjectiveWeights weights{-1.0, -1.0, 0.0};
  double l_m = 0.0;
  std::vector<double> alphas;
  std::vector<double> epsilons;
  std::vector<SamplePoint> samples;
  WdotSpec wdot;
  // 0 = one coupled program over all samples; otherwise samples are solved in
  // groups of chunk_size and renormalized onto the worst-case scalars, which
  // widens chi but keeps every recovered metric certified by its own group.
  int chunk_size = 0;
  SdpTolerances sdp;
};

// Log-spaced default search grids.
std::vector<double> default_alpha_grid();
std::vector<double> default_eps_grid();

struct MetricSample {
  Vector x;
  Vector partner;
  Vector u_d;
  double t = 0.0;
  Matrix wbar;
  Matrix metric;
};

// Optimizer of the sampled convex program at one (alpha, eps): the shared
// scalars, the per-sample normalized inverse metrics Wbar_i with eigenvalues
// in [1, chi], and the recovered metrics. bound is the steady-state
// mean-squared-error bound at the optimizer and mbar the operator-norm cap of
// the learning target field.
struct MetricSampleSet {
  MetricMode mode = MetricMode::Basic;
  double nu = 0.0;
  double nu_c = 0.0;
  double chi = 0.0;
  double alpha = 0.0;
  double eps = 0.0;
  double l_m = 0.0;
  double objective = 0.0;
  double bound = 0.0;
  double mbar = 0.0;
  std::vector<MetricSample> samples;
};

struct SampleResult {
  SolveStatus status = SolveStatus::Degraded;
  MetricSampleSet set;
  std::string note;
};

// Assembles the coupled program for one (alpha, eps): per-sample contraction
// blocks from the mode's family, the metric bound blocks, scalar positivity,
// the nu^3 <= nu_c cone (Estimation), and the s >= nu^2 witness needed by the
// quadratic effort cost (c3 > 0). Exposed for tests.
LmiProblem assemble_problem(const McvStemConfig& config, const SystemModel& model,
                            double alpha, double eps);

// Solves the coupled program. A non-optimal status is reported in the result,
// not thrown; the set is only populated on success.
SampleResult sample_metrics(const McvStemConfig& config, const SystemModel& model,
                            double alpha, double eps);

struct LineSearchResult {
  MetricSampleSet best;
  // J over the grid, alphas x epsilons; +inf marks grid points without a
  // certificate.
  Matrix surface;
  std::vector<double> alphas;
  std::vector<double> epsilons;
};

// Minimizes J over the (alpha, eps) grid. Grid points solve concurrently;
// ties break toward the lexicographically smallest (alpha, eps). Throws
// EvaluationError when no grid point admits a metric.
LineSearchResult line_search(const McvStemConfig& config, const SystemModel& model);

// Lemma-level conversions from the normalized variables. recover_metric
// returns M (control: nu * Wbar^{-1}; estimation: (Wbar / nu)^{-1}; basic as
// control). nn_target returns the matrix the network learns: M for Control
// and Basic, W = Wbar / nu for Estimation.
Matrix recover_metric(const Matrix& wbar, double nu, MetricMode mode);
Matrix nn_target(const Matrix& wbar, double nu, MetricMode mode);

// Steady-state mean-squared-error bound at the optimizer: c * chi / (2 alpha)
// for Basic and Control, (c * chi + c2 * chi * nu^2) / (2 alpha) for
// Estimation.
double steady_state_bound(MetricMode mode, const BoundConstants& constants,
                          double nu, double chi, double alpha);

// Largest pairwise variation of the nearest-neighbour divided differences of
// a sampled matrix field: an empirical Lipschitz constant of its derivative.
double fd_derivative_lipschitz(const std::vector<Vector>& xs,
                               const std::vector<Matrix>& fields);

// Guesses the metric-derivative Lipschitz constant for a config that does not
// have one yet: runs the search with l_m = 0, measures the sampled target
// field's divided-difference Lipschitz constant, and inflates it 2x.
double estimate_lm(const McvStemConfig& config, const SystemModel& model);

// Empirical spectral-norm bound on the measurement difference factorization,
// taken over sampled (x, xhat) pairs and inflated 10%.
double estimate_cbar(const SystemModel& model, const StateBox& box, uint64_t seed,
                     int num_pairs = 10000);

// Persistence: one CSV row per sample (t, x, partner, u_d, upper-triangular
// Wbar entries) plus a JSON sidecar with the shared scalars. Files written
// from the same set are byte-identical.
void write_sample_set(const MetricSampleSet& set, const std::string& csv_path,
                      const std::string& meta_path);
MetricSampleSet read_sample_set(const std::string& csv_path,
                                const std::string& meta_path);

// J-surface CSV (rows = alpha, columns = eps) for plotting.
void write_jsurface(const LineSearchResult& result, const std::string& path);

}  // namespace nscm
