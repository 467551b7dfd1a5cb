#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nscm/dynamics.hpp>
#include <nscm/mcvstem.hpp>
#include <nscm/nn.hpp>

namespace nscm {

using ControlLaw = std::function<Vector(const Vector& x, double t)>;

// One Euler-Maruyama rollout on a uniform grid. States cover every grid
// point; inputs the applied controls (empty for autonomous systems);
// measurements y_k = h(x_k) + D xi_k / sqrt(dt) at every grid point when the
// model has outputs. A path that hits the blow-up guard is truncated and
// flagged rather than an error: diverging baselines are an expected outcome.
struct SdePath {
  double dt = 0.0;
  std::vector<double> time;
  std::vector<Vector> states;
  std::vector<Vector> inputs;
  std::vector<Vector> measurements;
  uint64_t seed = 0;
  bool diverged = false;

  int steps() const { return static_cast<int>(states.size()) - 1; }
};

// x_{k+1} = x_k + (f + B u) dt + G sqrt(dt) xi_k. The diffusion is Gc by
// default, Ge when estimation_noise is set; a missing diffusion callback
// means a deterministic drift. Noise substreams derive from the seed alone,
// so two policies stepped over paths with the same seed see identical
// realizations.
SdePath euler_maruyama(const SystemModel& model, const ControlLaw& control,
                       const Vector& x0, double horizon, double dt, uint64_t seed,
                       bool estimation_noise = false, double blow_up = 1e6);

// Sampled-metric lookup with nearest-neighbor or inverse-square-distance
// weighting over all samples; features are the state plus the schedule
// parameters at the query time, matching the network's inputs.
struct MetricTable {
  Matrix features;               // one column per sample
  std::vector<Matrix> metrics;   // recovered metric M per sample
  MetricMode mode = MetricMode::Basic;
  bool interpolate = false;
};

MetricTable make_metric_table(const MetricSampleSet& set, const SystemModel& model,
                              bool interpolate = false);

// Exactly one of net/table set. metric_at returns the metric M used by the
// feedback and observer laws: the table stores M directly, a network predicts
// the mode's learning target (M for control, W for estimation, inverted here).
struct MetricSource {
  const SnMlp* net = nullptr;
  const MetricTable* table = nullptr;
};

Matrix metric_at(const MetricSource& source, const SystemModel& model, const Vector& x,
                 double t);

// u = u_d - B(x,t)^T M (x - x_d).
Vector nscm_control(const MetricSource& source, const SystemModel& model, const Vector& x,
                    const Vector& x_d, const Vector& u_d, double t);

// Euler step of the observer dxhat = f(xhat,t) + M C_L^T (y - h(xhat,t)),
// with C_L the measurement factorization at (xhat, xhat).
Vector nscm_estimate_step(const MetricSource& source, const SystemModel& model,
                          const Vector& xhat, const Vector& y, double t, double dt);

// A^T X + X A + Q = 0 by dense Kronecker elimination; sized for small state
// dimensions.
Matrix solve_lyapunov(const Matrix& a, const Matrix& q);

// A^T P + P A - P B R^-1 B^T P + Q = 0 by Newton-Kleinman iteration, seeded
// with a Lyapunov-based stabilizing gain (Bass shift) when A itself is not
// stable. converged means the residual tolerance (1e-8) was met.
struct CareResult {
  Matrix p;
  double residual = 0.0;
  bool converged = false;
};

CareResult solve_care(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r);

enum class PolicyRole { Controller, Estimator };

// Riccati-at-every-step baseline. A failed solve is flagged and the last
// successful gain is held (zero feedback before any success).
class SdrePolicy {
 public:
  SdrePolicy(const SystemModel& model, PolicyRole role, Matrix q = Matrix(),
             Matrix r = Matrix());

  Vector control(const Vector& x, const Vector& x_d, const Vector& u_d, double t);
  Vector estimate_step(const Vector& xhat, const Vector& y, double t, double dt);

  int flagged_steps() const { return flagged_; }

 private:
  const SystemModel* model_;
  PolicyRole role_;
  Matrix q_, r_;
  Matrix gain_;
  bool have_gain_ = false;
  int flagged_ = 0;
};

// Continuous-discrete extended Kalman filter state. flagged counts
// regularized (near-singular) innovation covariances.
struct EkfState {
  Vector xhat;
  Matrix cov;
  int flagged = 0;
};

// Predicts xhat/cov over dt with covariances G G^T (estimation diffusion) and
// updates with the measurement y taken at t + dt, noise covariance
// D D^T / dt. Joseph-form update keeps the covariance symmetric PSD.
EkfState ekf_step(const SystemModel& model, const EkfState& state, const Vector& y,
                  double t, double dt);

enum class PolicyKind { NscmNet, MetricTable, Sdre, Ekf, NcmNet };

const char* to_string(PolicyKind kind);
const char* to_string(PolicyRole role);
PolicyKind policy_kind_from_name(const std::string& name);
PolicyRole policy_role_from_name(const std::string& name);

// One entrant in a comparison. The network/table must match the role's
// learning target; bound is the steady-state guarantee to check the empirical
// error against (0 disables the check). ncm-net is stepped exactly like
// nscm-net: the difference lives in how its checkpoint was produced.
struct PolicySpec {
  std::string name;
  PolicyKind kind = PolicyKind::NscmNet;
  PolicyRole role = PolicyRole::Estimator;
  const SnMlp* net = nullptr;
  const MetricTable* table = nullptr;
  Matrix q, r;  // sdre weights; empty means identity
  double bound = 0.0;
};

struct ExperimentConfig {
  double horizon = 10.0;
  double dt = 1e-3;
  int runs = 50;
  uint64_t seed = 0;
  Vector x0;
  Vector xhat0;                        // estimator start (defaults to x0)
  std::function<Vector(double)> x_d;   // controller target trajectory
  std::function<Vector(double)> u_d;   // controller feedforward
  double blow_up = 1e6;
};

struct RunStat {
  double steady_mse = 0.0;
  bool diverged = false;
};

// Monte-Carlo summary for one policy. sq_error holds one row per run of the
// squared error over the grid (NaN past a divergence); steady_mse averages
// the final 20% of the horizon over non-diverged runs.
struct SimulationReport {
  std::string policy;
  PolicyKind kind = PolicyKind::NscmNet;
  PolicyRole role = PolicyRole::Estimator;
  double steady_mse = 0.0;
  double bound = 0.0;
  bool violates = false;
  int diverged_runs = 0;
  int flagged_steps = 0;
  double seconds = 0.0;
  std::vector<RunStat> runs;
  std::vector<double> time;
  Matrix sq_error;

  std::vector<double> mean_sq_error() const;  // over non-diverged runs
};

// Runs every policy over the same R seeded rollouts (common random numbers:
// the noise realizations of run r are shared by all policies). Policies must
// agree on the role. Per-run divergence is recorded and the aggregate still
// produced.
std::vector<SimulationReport> run_comparison(const SystemModel& model,
                                             const ExperimentConfig& experiment,
                                             const std::vector<PolicySpec>& policies);

// Aggregate table, one row per policy. Runtime is deliberately omitted from
// the written artifacts so reruns with one seed are byte-identical.
void write_comparison_csv(const std::vector<SimulationReport>& reports,
                          const std::string& path);
void write_comparison_json(const std::vector<SimulationReport>& reports,
                           const ExperimentConfig& experiment, const std::string& path);

// Per-policy trace: time, mean squared error over non-diverged runs, then one
// column per run.
void write_trace_csv(const SimulationReport& report, const std::string& path);

}  // namespace nscm
