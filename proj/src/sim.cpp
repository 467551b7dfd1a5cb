#include <nscm/sim.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <thread>
#include <utility>

#include <json.hpp>

#include <nscm/csv.hpp>

namespace nscm {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

bool finite_and_bounded(const Vector& v, double blow_up) {
  return v.allFinite() && v.norm() <= blow_up;
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double max_real_eig(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

double real_eig_radius(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().real().cwiseAbs().maxCoeff();
}

}  // namespace

SdePath euler_maruyama(const SystemModel& model, const ControlLaw& control,
                       const Vector& x0, double horizon, double dt, uint64_t seed,
                       bool estimation_noise, double blow_up) {
  demand(model.n > 0 && bool(model.f), "euler_maruyama: model needs a state and a drift");
  demand(static_cast<int>(x0.size()) == model.n, "euler_maruyama: x0 dimension mismatch");
  demand(dt > 0.0 && horizon >= dt, "euler_maruyama: need horizon >= dt > 0");

  const MatrixMap& diffusion = estimation_noise ? model.Ge : model.Gc;
  const int dw = estimation_noise ? model.d1 : model.dc;
  const bool drive = bool(diffusion) && dw > 0;
  const bool measured = model.ny > 0 && bool(model.h);
  const bool meas_noise = measured && bool(model.D) && model.d2 > 0;
  const bool driven = model.m > 0 && bool(control);
  const int steps = static_cast<int>(std::llround(horizon / dt));
  demand(steps >= 1, "euler_maruyama: horizon shorter than one step");

  GaussianStream process(seed, "sde-process");
  GaussianStream measure(seed, "sde-measure");
  const double root_dt = std::sqrt(dt);

  SdePath path;
  path.dt = dt;
  path.seed = seed;
  path.time.reserve(steps + 1);
  path.states.reserve(steps + 1);
  path.states.push_back(x0);
  path.time.push_back(0.0);

  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    const Vector& x = path.states.back();
    if (measured) {
      Vector y = model.h(x, t);
      if (meas_noise) y += model.D(x, t) * measure.vector(model.d2) / root_dt;
      path.measurements.push_back(std::move(y));
    }
    if (k == steps) break;

    Vector drift = model.f(x, t);
    if (driven) {
      Vector u = control(x, t);
      demand(static_cast<int>(u.size()) == model.m,
             "euler_maruyama: control law returned wrong input dimension");
      drift += model.B(x, t) * u;
      path.inputs.push_back(std::move(u));
    }
    Vector next = x + dt * drift;
    if (drive) next += diffusion(x, t) * (root_dt * process.vector(dw));
    if (!finite_and_bounded(next, blow_up)) {
      path.diverged = true;
      break;
    }
    path.states.push_back(std::move(next));
    path.time.push_back((k + 1) * dt);
  }
  return path;
}

MetricTable make_metric_table(const MetricSampleSet& set, const SystemModel& model,
                              bool interpolate) {
  demand(!set.samples.empty(), "make_metric_table: empty sample set");
  const int n = model.n;
  const int d = n + model.param_dim;
  MetricTable table;
  table.mode = set.mode;
  table.interpolate = interpolate;
  table.features.resize(d, static_cast<int>(set.samples.size()));
  table.metrics.reserve(set.samples.size());
  for (size_t i = 0; i < set.samples.size(); ++i) {
    const MetricSample& s = set.samples[i];
    demand(static_cast<int>(s.x.size()) == n, "make_metric_table: sample dimension mismatch");
    table.features.col(static_cast<int>(i)).head(n) = s.x;
    if (model.param_dim > 0)
      table.features.col(static_cast<int>(i)).tail(model.param_dim) =
          model.param_features(s.t);
    table.metrics.push_back(s.metric);
  }
  return table;
}

Matrix metric_at(const MetricSource& source, const SystemModel& model, const Vector& x,
                 double t) {
  const bool has_net = source.net != nullptr;
  const bool has_table = source.table != nullptr;
  if (has_net == has_table)
    throw ConfigError("metric_at: exactly one of network and table must be set");

  if (has_net) {
    Matrix pred = symmetrize(predict_metric(*source.net, x, model.param_features(t)));
    if (source.net->mode == MetricMode::Estimation) return symmetrize(pred.inverse());
    return pred;
  }

  const MetricTable& table = *source.table;
  Vector query(model.n + model.param_dim);
  query.head(model.n) = x;
  if (model.param_dim > 0) query.tail(model.param_dim) = model.param_features(t);
  demand(query.size() == table.features.rows(), "metric_at: table feature dimension mismatch");

  const int count = static_cast<int>(table.metrics.size());
  if (!table.interpolate) {
    int best = 0;
    double best_d = (table.features.col(0) - query).squaredNorm();
    for (int i = 1; i < count; ++i) {
      const double di = (table.features.col(i) - query).squaredNorm();
      if (di < best_d) {
        best_d = di;
        best = i;
      }
    }
    return table.metrics[best];
  }

  Matrix acc = Matrix::Zero(table.metrics[0].rows(), table.metrics[0].cols());
  double total = 0.0;
  for (int i = 0; i < count; ++i) {
    const double d2 = (table.features.col(i) - query).squaredNorm();
    if (d2 < 1e-18) return table.metrics[i];
    const double w = 1.0 / d2;
    acc += w * table.metrics[i];
    total += w;
  }
  return acc / total;
}

Vector nscm_control(const MetricSource& source, const SystemModel& model, const Vector& x,
                    const Vector& x_d, const Vector& u_d, double t) {
  demand(model.m > 0 && bool(model.B), "nscm_control: model has no input channel");
  demand(x.size() == x_d.size() && static_cast<int>(x.size()) == model.n,
         "nscm_control: state dimension mismatch");
  demand(static_cast<int>(u_d.size()) == model.m, "nscm_control: input dimension mismatch");
  const Matrix m = metric_at(source, model, x, t);
  return u_d - model.B(x, t).transpose() * (m * (x - x_d));
}

Vector nscm_estimate_step(const MetricSource& source, const SystemModel& model,
                          const Vector& xhat, const Vector& y, double t, double dt) {
  demand(model.ny > 0 && bool(model.h), "nscm_estimate_step: model has no measurement");
  demand(static_cast<int>(xhat.size()) == model.n && static_cast<int>(y.size()) == model.ny,
         "nscm_estimate_step: dimension mismatch");
  demand(dt > 0.0, "nscm_estimate_step: dt must be positive");
  const Matrix m = metric_at(source, model, xhat, t);
  const Matrix cl = sdc_measurement_factorize(model, xhat, xhat, t).A;
  const Vector innovation = y - model.h(xhat, t);
  const Vector xdot = model.f(xhat, t) + m * (cl.transpose() * innovation);
  return xhat + dt * xdot;
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
  const int n = static_cast<int>(a.rows());
  demand(a.cols() == n && q.rows() == n && q.cols() == n,
         "solve_lyapunov: non-conforming matrices");
  Matrix k = Matrix::Zero(n * n, n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int row = j * n + i;
      for (int c = 0; c < n; ++c) k(row, j * n + c) += a(c, i);
      for (int l = 0; l < n; ++l) k(row, l * n + i) += a(l, j);
    }
  }
  Vector rhs(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) rhs[j * n + i] = -q(i, j);
  const Eigen::FullPivLU<Matrix> lu(k);
  Vector sol = lu.solve(rhs);
  // Residual correction buys back the digits a stiff spectrum costs.
  for (int pass = 0; pass < 2; ++pass) {
    const Vector defect = rhs - k * sol;
    if (defect.norm() <= 1e-14 * (1.0 + rhs.norm())) break;
    sol += lu.solve(defect);
  }
  Matrix x(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) x(i, j) = sol[j * n + i];
  const double defect = (a.transpose() * x + x * a + q).norm();
  if (!x.allFinite() || defect > 1e-6 * (1.0 + q.norm()))
    throw EvaluationError("solve_lyapunov: equation is singular or ill-conditioned");
  return symmetrize(x);
}

CareResult solve_care(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.cols());
  demand(a.cols() == n && q.rows() == n && q.cols() == n, "solve_care: bad A/Q dimensions");
  demand(b.size() == 0 || b.rows() == n, "solve_care: bad B dimensions");
  demand(m == 0 || (r.rows() == m && r.cols() == m), "solve_care: bad R dimensions");

  Eigen::LLT<Matrix> r_llt;
  Matrix s = Matrix::Zero(n, n);
  if (m > 0) {
    r_llt.compute(r);
    demand(r_llt.info() == Eigen::Success, "solve_care: R must be positive definite");
    s = b * r_llt.solve(b.transpose());
  }

  auto residual_of = [&](const Matrix& p) {
    return (a.transpose() * p + p * a - p * s * p + q).norm();
  };

  CareResult result;
  result.p = Matrix::Zero(n, n);
  result.residual = residual_of(result.p);

  Matrix gain = Matrix::Zero(m, n);
  if (m > 0 && max_real_eig(a) >= 0.0) {
    // Bass shift: (A + beta I) Pb + Pb (A + beta I)^T = 2 B R^-1 B^T with beta
    // beyond every eigenvalue's magnitude gives a stabilizing K = R^-1 B^T
    // Pb^-1 for controllable pairs; anything less leaves the iteration
    // unseeded. Keeping beta tight keeps the seed gain mild.
    const double beta = real_eig_radius(a) + 1.0;
    try {
      const Matrix shifted = (a + beta * Matrix::Identity(n, n)).transpose();
      const Matrix pb = solve_lyapunov(shifted, -2.0 * s);
      Eigen::FullPivLU<Matrix> lu(pb);
      if (!lu.isInvertible()) return result;
      gain = r_llt.solve(b.transpose() * lu.inverse());
    } catch (const EvaluationError&) {
      return result;
    }
  }

  bool have_iterate = false;
  int stalled = 0;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 60; ++it) {
    const Matrix acl = a - (m > 0 ? (b * gain).eval() : Matrix::Zero(n, n));
    if (max_real_eig(acl) >= 0.0) break;
    Matrix qk = q;
    if (m > 0) qk += gain.transpose() * r * gain;
    Matrix p;
    try {
      p = solve_lyapunov(acl, qk);
    } catch (const EvaluationError&) {
      break;
    }
    if (m > 0) gain = r_llt.solve(b.transpose() * p);
    const double res = residual_of(p);
    if (!have_iterate || res < result.residual) {
      result.p = p;
      result.residual = res;
      have_iterate = true;
    }
    if (res <= 1e-14 * std::max(1.0, p.norm())) break;
    stalled = res >= 0.9 * prev ? stalled + 1 : 0;
    if (stalled >= 3) break;
    prev = res;
  }
  // Absolute for well-scaled problems; a huge P (barely controllable modes)
  // caps what double precision can express, so the tolerance grows with it.
  result.converged =
      have_iterate && result.residual <= 1e-8 * std::max(1.0, result.p.norm());
  return result;
}

SdrePolicy::SdrePolicy(const SystemModel& model, PolicyRole role, Matrix q, Matrix r)
    : model_(&model), role_(role), q_(std::move(q)), r_(std::move(r)) {
  demand(model.n > 0, "SdrePolicy: model needs a state");
  if (q_.size() == 0) q_ = Matrix::Identity(model.n, model.n);
  if (role_ == PolicyRole::Controller) {
    demand(model.m > 0 && bool(model.B), "SdrePolicy: controller needs an input channel");
    if (r_.size() == 0) r_ = Matrix::Identity(model.m, model.m);
  } else {
    demand(model.ny > 0 && bool(model.h), "SdrePolicy: estimator needs a measurement");
    if (r_.size() == 0) r_ = Matrix::Identity(model.ny, model.ny);
  }
}

Vector SdrePolicy::control(const Vector& x, const Vector& x_d, const Vector& u_d, double t) {
  demand(role_ == PolicyRole::Controller, "SdrePolicy: control() on an estimator");
  const Matrix a = sdc_factorize(*model_, x, x_d, u_d, t).A;
  const Matrix b = model_->B(x, t);
  const CareResult care = solve_care(a, b, q_, r_);
  if (care.converged) {
    gain_ = r_.llt().solve(b.transpose() * care.p);
    have_gain_ = true;
  } else {
    ++flagged_;
  }
  if (!have_gain_) return u_d;
  return u_d - gain_ * (x - x_d);
}

Vector SdrePolicy::estimate_step(const Vector& xhat, const Vector& y, double t, double dt) {
  demand(role_ == PolicyRole::Estimator, "SdrePolicy: estimate_step() on a controller");
  demand(dt > 0.0, "SdrePolicy: dt must be positive");
  const Matrix a = sdc_factorize(*model_, xhat, xhat, Vector::Zero(model_->m), t).A;
  const Matrix cl = sdc_measurement_factorize(*model_, xhat, xhat, t).A;
  const CareResult care = solve_care(a.transpose(), cl.transpose(), q_, r_);
  if (care.converged) {
    gain_ = r_.llt().solve(cl * care.p).transpose();
    have_gain_ = true;
  } else {
    ++flagged_;
  }
  Vector xdot = model_->f(xhat, t);
  if (have_gain_) xdot += gain_ * (y - model_->h(xhat, t));
  return xhat + dt * xdot;
}

EkfState ekf_step(const SystemModel& model, const EkfState& state, const Vector& y,
                  double t, double dt) {
  const int n = model.n;
  const int ny = model.ny;
  demand(ny > 0 && bool(model.h), "ekf_step: model has no measurement");
  demand(static_cast<int>(state.xhat.size()) == n && state.cov.rows() == n &&
             state.cov.cols() == n,
         "ekf_step: state dimension mismatch");
  demand(static_cast<int>(y.size()) == ny, "ekf_step: measurement dimension mismatch");
  demand(dt > 0.0, "ekf_step: dt must be positive");

  const Matrix a = model.f_jac ? model.f_jac(state.xhat, t) : jacobian(model.f, state.xhat, t);
  Matrix qc = Matrix::Zero(n, n);
  if (model.Ge && model.d1 > 0) {
    const Matrix g = model.Ge(state.xhat, t);
    qc = g * g.transpose();
  }
  const Vector xpred = state.xhat + dt * model.f(state.xhat, t);
  const Matrix ppred =
      symmetrize(state.cov + dt * (a * state.cov + state.cov * a.transpose() + qc));

  const double tn = t + dt;
  const Matrix c = model.h_jac ? model.h_jac(xpred, tn) : jacobian(model.h, xpred, tn);
  Matrix rd = Matrix::Zero(ny, ny);
  if (model.D && model.d2 > 0) {
    const Matrix d = model.D(xpred, tn);
    rd = d * d.transpose() / dt;
  }

  EkfState next;
  next.flagged = state.flagged;
  Matrix innov_cov = symmetrize(c * ppred * c.transpose() + rd);
  Eigen::SelfAdjointEigenSolver<Matrix> es(innov_cov);
  const double floor = 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff());
  if (es.eigenvalues().minCoeff() <= floor) {
    innov_cov += 1e-9 * Matrix::Identity(ny, ny);
    ++next.flagged;
  }
  const Matrix k = innov_cov.llt().solve(c * ppred).transpose();
  next.xhat = xpred + k * (y - model.h(xpred, tn));
  const Matrix ikc = Matrix::Identity(n, n) - k * c;
  next.cov = symmetrize(ikc * ppred * ikc.transpose() + k * rd * k.transpose());
  return next;
}

const char* to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::NscmNet: return "nscm-net";
    case PolicyKind::MetricTable: return "metric-table";
    case PolicyKind::Sdre: return "sdre";
    case PolicyKind::Ekf: return "ekf";
    case PolicyKind::NcmNet: return "ncm-net";
  }
  return "unknown";
}

const char* to_string(PolicyRole role) {
  return role == PolicyRole::Controller ? "controller" : "estimator";
}

PolicyKind policy_kind_from_name(const std::string& name) {
  if (name == "nscm-net") return PolicyKind::NscmNet;
  if (name == "metric-table") return PolicyKind::MetricTable;
  if (name == "sdre") return PolicyKind::Sdre;
  if (name == "ekf") return PolicyKind::Ekf;
  if (name == "ncm-net") return PolicyKind::NcmNet;
  throw ConfigError("unknown policy kind: " + name);
}

PolicyRole policy_role_from_name(const std::string& name) {
  if (name == "controller") return PolicyRole::Controller;
  if (name == "estimator") return PolicyRole::Estimator;
  throw ConfigError("unknown policy role: " + name);
}

std::vector<double> SimulationReport::mean_sq_error() const {
  const int cols = static_cast<int>(sq_error.cols());
  std::vector<double> mean(cols, kNan);
  int live = 0;
  for (const RunStat& stat : runs)
    if (!stat.diverged) ++live;
  if (live == 0) return mean;
  for (int k = 0; k < cols; ++k) {
    double acc = 0.0;
    for (size_t r = 0; r < runs.size(); ++r)
      if (!runs[r].diverged) acc += sq_error(static_cast<int>(r), k);
    mean[k] = acc / live;
  }
  return mean;
}

namespace {

bool uses_metric(PolicyKind kind) {
  return kind == PolicyKind::NscmNet || kind == PolicyKind::NcmNet ||
         kind == PolicyKind::MetricTable;
}

void validate_policies(const SystemModel& model, const ExperimentConfig& experiment,
                       const std::vector<PolicySpec>& policies) {
  if (policies.empty()) throw ConfigError("run_comparison: no policies given");
  const PolicyRole role = policies.front().role;
  for (const PolicySpec& p : policies) {
    if (p.role != role)
      throw ConfigError("run_comparison: policies must share one role");
    if (p.kind == PolicyKind::Ekf && p.role != PolicyRole::Estimator)
      throw ConfigError("run_comparison: ekf is an estimator");
    if (uses_metric(p.kind)) {
      const bool is_net = p.kind != PolicyKind::MetricTable;
      if (is_net && p.net == nullptr)
        throw ConfigError("run_comparison: policy '" + p.name + "' has no network");
      if (!is_net && p.table == nullptr)
        throw ConfigError("run_comparison: policy '" + p.name + "' has no metric table");
      const MetricMode mode = is_net ? p.net->mode : p.table->mode;
      if (role == PolicyRole::Estimator && mode != MetricMode::Estimation)
        throw ConfigError("run_comparison: policy '" + p.name +
                          "' carries a non-estimation metric");
      if (role == PolicyRole::Controller && mode == MetricMode::Estimation)
        throw ConfigError("run_comparison: policy '" + p.name +
                          "' carries an estimation metric");
    }
  }
  if (role == PolicyRole::Controller) {
    demand(model.m > 0 && bool(model.B), "run_comparison: controller role needs inputs");
    if (!experiment.x_d || !experiment.u_d)
      throw ConfigError("run_comparison: controller role needs x_d and u_d");
  } else {
    demand(model.ny > 0 && bool(model.h), "run_comparison: estimator role needs measurements");
  }
  demand(experiment.runs >= 1, "run_comparison: need at least one run");
  demand(experiment.dt > 0.0 && experiment.horizon >= experiment.dt,
         "run_comparison: need horizon >= dt > 0");
  demand(static_cast<int>(experiment.x0.size()) == model.n,
         "run_comparison: x0 dimension mismatch");
}

struct RunOutcome {
  Vector sq;
  bool diverged = false;
  int flagged = 0;
  double seconds = 0.0;
};

// Squared tracking/estimation error of one policy over one rollout. The grid
// has steps+1 points; entries past a divergence stay NaN.
RunOutcome estimator_outcome(const SystemModel& model, const ExperimentConfig& experiment,
                             const PolicySpec& policy, const SdePath& path,
                             const Vector& xhat0) {
  const auto started = std::chrono::steady_clock::now();
  const int steps = static_cast<int>(std::llround(experiment.horizon / experiment.dt));
  RunOutcome out;
  out.sq = Vector::Constant(steps + 1, kNan);

  Vector xhat = xhat0;
  out.sq[0] = (xhat - path.states[0]).squaredNorm();

  MetricSource source;
  if (policy.kind == PolicyKind::MetricTable) source.table = policy.table;
  else if (uses_metric(policy.kind)) source.net = policy.net;

  SdrePolicy sdre = policy.kind == PolicyKind::Sdre
                        ? SdrePolicy(model, PolicyRole::Estimator, policy.q, policy.r)
                        : SdrePolicy(model, PolicyRole::Estimator);
  EkfState ekf{xhat, Matrix::Identity(model.n, model.n), 0};

  const int limit = path.steps();
  for (int k = 0; k < limit; ++k) {
    const double t = k * experiment.dt;
    switch (policy.kind) {
      case PolicyKind::NscmNet:
      case PolicyKind::NcmNet:
      case PolicyKind::MetricTable:
        xhat = nscm_estimate_step(source, model, xhat, path.measurements[k], t,
                                  experiment.dt);
        break;
      case PolicyKind::Sdre:
        xhat = sdre.estimate_step(xhat, path.measurements[k], t, experiment.dt);
        break;
      case PolicyKind::Ekf:
        ekf = ekf_step(model, ekf, path.measurements[k + 1], t, experiment.dt);
        xhat = ekf.xhat;
        break;
    }
    if (!finite_and_bounded(xhat, experiment.blow_up)) {
      out.diverged = true;
      break;
    }
    out.sq[k + 1] = (xhat - path.states[k + 1]).squaredNorm();
  }
  if (path.diverged) out.diverged = true;
  out.flagged = policy.kind == PolicyKind::Sdre ? sdre.flagged_steps() : ekf.flagged;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                    .count();
  return out;
}

RunOutcome controller_outcome(const SystemModel& model, const ExperimentConfig& experiment,
                              const PolicySpec& policy, uint64_t run_seed) {
  const auto started = std::chrono::steady_clock::now();
  const int steps = static_cast<int>(std::llround(experiment.horizon / experiment.dt));
  RunOutcome out;
  out.sq = Vector::Constant(steps + 1, kNan);

  MetricSource source;
  if (policy.kind == PolicyKind::MetricTable) source.table = policy.table;
  else if (uses_metric(policy.kind)) source.net = policy.net;

  SdrePolicy sdre = policy.kind == PolicyKind::Sdre
                        ? SdrePolicy(model, PolicyRole::Controller, policy.q, policy.r)
                        : SdrePolicy(model, PolicyRole::Controller);

  ControlLaw law;
  if (policy.kind == PolicyKind::Sdre) {
    law = [&](const Vector& x, double t) {
      return sdre.control(x, experiment.x_d(t), experiment.u_d(t), t);
    };
  } else {
    law = [&](const Vector& x, double t) {
      return nscm_control(source, model, x, experiment.x_d(t), experiment.u_d(t), t);
    };
  }

  const SdePath path = euler_maruyama(model, law, experiment.x0, experiment.horizon,
                                      experiment.dt, run_seed, false, experiment.blow_up);
  for (int k = 0; k <= path.steps(); ++k)
    out.sq[k] = (path.states[k] - experiment.x_d(path.time[k])).squaredNorm();
  out.diverged = path.diverged;
  out.flagged = policy.kind == PolicyKind::Sdre ? sdre.flagged_steps() : 0;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                    .count();
  return out;
}

std::vector<RunOutcome> run_once(const SystemModel& model, const ExperimentConfig& experiment,
                                 const std::vector<PolicySpec>& policies, int run) {
  const uint64_t run_seed = substream_seed(experiment.seed, "sim-run",
                                           static_cast<uint64_t>(run));
  std::vector<RunOutcome> outcomes;
  outcomes.reserve(policies.size());
  if (policies.front().role == PolicyRole::Estimator) {
    const SdePath path = euler_maruyama(model, ControlLaw(), experiment.x0,
                                        experiment.horizon, experiment.dt, run_seed, true,
                                        experiment.blow_up);
    const Vector xhat0 = experiment.xhat0.size() > 0 ? experiment.xhat0 : experiment.x0;
    demand(xhat0.size() == experiment.x0.size(), "run_comparison: xhat0 dimension mismatch");
    for (const PolicySpec& policy : policies)
      outcomes.push_back(estimator_outcome(model, experiment, policy, path, xhat0));
  } else {
    for (const PolicySpec& policy : policies)
      outcomes.push_back(controller_outcome(model, experiment, policy, run_seed));
  }
  return outcomes;
}

}  // namespace

std::vector<SimulationReport> run_comparison(const SystemModel& model,
                                             const ExperimentConfig& experiment,
                                             const std::vector<PolicySpec>& policies) {
  validate_policies(model, experiment, policies);
  const int steps = static_cast<int>(std::llround(experiment.horizon / experiment.dt));
  const int runs = experiment.runs;

  std::vector<std::vector<RunOutcome>> all(runs);
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(runs)));
  std::vector<std::future<void>> futures;
  futures.reserve(workers);
  std::atomic<int> cursor{0};
  for (int w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&]() {
      for (int r = cursor.fetch_add(1); r < runs; r = cursor.fetch_add(1))
        all[r] = run_once(model, experiment, policies, r);
    }));
  }
  for (auto& f : futures) f.get();

  const int window_start = static_cast<int>(std::ceil(0.8 * steps));
  const int window = steps + 1 - window_start;

  std::vector<SimulationReport> reports;
  reports.reserve(policies.size());
  for (size_t p = 0; p < policies.size(); ++p) {
    SimulationReport report;
    report.policy = policies[p].name.empty() ? to_string(policies[p].kind)
                                             : policies[p].name;
    report.kind = policies[p].kind;
    report.role = policies[p].role;
    report.bound = policies[p].bound;
    report.time.resize(steps + 1);
    for (int k = 0; k <= steps; ++k) report.time[k] = k * experiment.dt;
    report.sq_error.resize(runs, steps + 1);
    report.runs.resize(runs);

    double acc = 0.0;
    int live = 0;
    for (int r = 0; r < runs; ++r) {
      const RunOutcome& out = all[r][p];
      report.sq_error.row(r) = out.sq.transpose();
      report.flagged_steps += out.flagged;
      report.seconds += out.seconds;
      RunStat& stat = report.runs[r];
      stat.diverged = out.diverged;
      if (out.diverged) {
        stat.steady_mse = kNan;
        ++report.diverged_runs;
        continue;
      }
      stat.steady_mse = out.sq.tail(window).mean();
      acc += stat.steady_mse;
      ++live;
    }
    report.steady_mse = live > 0 ? acc / live : kNan;
    report.violates = report.bound > 0.0 && !(report.steady_mse <= report.bound);
    reports.push_back(std::move(report));
  }
  return reports;
}

void write_comparison_csv(const std::vector<SimulationReport>& reports,
                          const std::string& path) {
  CsvWriter csv(path);
  csv.header({"policy", "kind", "role", "steady_mse", "bound", "violates", "diverged_runs",
              "flagged_steps"});
  for (const SimulationReport& r : reports) {
    csv.stream() << r.policy << ',' << to_string(r.kind) << ',' << to_string(r.role) << ','
                 << r.steady_mse << ',' << r.bound << ',' << (r.violates ? 1 : 0) << ','
                 << r.diverged_runs << ',' << r.flagged_steps << '\n';
  }
}

void write_comparison_json(const std::vector<SimulationReport>& reports,
                           const ExperimentConfig& experiment, const std::string& path) {
  nlohmann::json doc;
  doc["horizon"] = experiment.horizon;
  doc["dt"] = experiment.dt;
  doc["runs"] = experiment.runs;
  doc["seed"] = experiment.seed;
  nlohmann::json rows = nlohmann::json::array();
  for (const SimulationReport& r : reports) {
    nlohmann::json row;
    row["policy"] = r.policy;
    row["kind"] = to_string(r.kind);
    row["role"] = to_string(r.role);
    // NaN has no JSON encoding; null marks an aggregate with no surviving runs.
    row["steady_mse"] = std::isfinite(r.steady_mse) ? nlohmann::json(r.steady_mse)
                                                    : nlohmann::json();
    row["bound"] = r.bound;
    row["violates"] = r.violates;
    row["diverged_runs"] = r.diverged_runs;
    row["flagged_steps"] = r.flagged_steps;
    nlohmann::json runs = nlohmann::json::array();
    for (const RunStat& stat : r.runs) {
      nlohmann::json one;
      one["steady_mse"] = std::isfinite(stat.steady_mse) ? nlohmann::json(stat.steady_mse)
                                                         : nlohmann::json();
      one["diverged"] = stat.diverged;
      runs.push_back(std::move(one));
    }
    row["run_stats"] = std::move(runs);
    rows.push_back(std::move(row));
  }
  doc["policies"] = std::move(rows);
  std::ofstream out(path);
  if (!out) throw Error("cannot open output file: " + path);
  out << doc.dump(2) << '\n';
}

void write_trace_csv(const SimulationReport& report, const std::string& path) {
  CsvWriter csv(path);
  std::vector<std::string> names = {"time", "mean"};
  for (size_t r = 0; r < report.runs.size(); ++r)
    names.push_back("run_" + std::to_string(r));
  csv.header(names);
  const std::vector<double> mean = report.mean_sq_error();
  std::vector<double> row(report.runs.size() + 2);
  for (int k = 0; k < static_cast<int>(report.time.size()); ++k) {
    row[0] = report.time[k];
    row[1] = mean[k];
    for (size_t r = 0; r < report.runs.size(); ++r)
      row[r + 2] = report.sq_error(static_cast<int>(r), k);
    csv.row(row);
  }
}

}  // namespace nscm
