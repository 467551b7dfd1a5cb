#include "nscm/dynamics.hpp"

#include <cmath>
#include <vector>

namespace nscm {

Vector SystemModel::param_features(double t) const {
  if (param_dim == 0 || !params) return Vector(0);
  Vector p = params(t);
  if (p.size() != param_dim)
    throw EvaluationError("params(t) returned wrong dimension");
  return p;
}

double SystemModel::param_time(const Vector& p) const {
  if (!time_of_params) return 0.0;
  return time_of_params(p);
}

StateBox::StateBox(Vector lo_in, Vector hi_in)
    : StateBox(std::move(lo_in), std::move(hi_in), Vector(0), Vector(0)) {}

StateBox::StateBox(Vector lo_in, Vector hi_in, Vector p_lo_in, Vector p_hi_in)
    : lo(std::move(lo_in)), hi(std::move(hi_in)), p_lo(std::move(p_lo_in)),
      p_hi(std::move(p_hi_in)) {
  if (lo.size() != hi.size() || p_lo.size() != p_hi.size())
    throw ConfigError("state box limit dimensions do not match");
  for (int i = 0; i < lo.size(); ++i)
    if (!(lo[i] <= hi[i]))
      throw ConfigError("state box has lower limit above upper limit at axis " +
                        std::to_string(i));
  for (int i = 0; i < p_lo.size(); ++i)
    if (!(p_lo[i] <= p_hi[i]))
      throw ConfigError("parameter box has lower limit above upper limit at axis " +
                        std::to_string(i));
}

Vector StateBox::sample_state(GaussianStream& rng) const {
  Vector x(lo.size());
  for (int i = 0; i < lo.size(); ++i) x[i] = rng.uniform(lo[i], hi[i]);
  return x;
}

Vector StateBox::sample_params(GaussianStream& rng) const {
  Vector p(p_lo.size());
  for (int i = 0; i < p_lo.size(); ++i) p[i] = rng.uniform(p_lo[i], p_hi[i]);
  return p;
}

bool StateBox::contains(const Vector& x) const {
  if (x.size() != lo.size()) return false;
  for (int i = 0; i < lo.size(); ++i)
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  return true;
}

Matrix jacobian(const StateMap& map, const Vector& x, double t) {
  const Vector fx = map(x, t);
  const int rows = static_cast<int>(fx.size());
  const int cols = static_cast<int>(x.size());
  Matrix J(rows, cols);
  Vector xp = x, xm = x;
  for (int j = 0; j < cols; ++j) {
    const double step = 1e-6 * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + step;
    xm[j] = x[j] - step;
    const Vector fp = map(xp, t);
    const Vector fm = map(xm, t);
    if (fp.size() != rows || fm.size() != rows)
      throw EvaluationError("map returned inconsistent dimension during jacobian");
    J.col(j) = (fp - fm) / (2.0 * step);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  if (!J.allFinite())
    throw EvaluationError("jacobian is not finite at t=" + std::to_string(t));
  return J;
}

void gauss_legendre_01(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  demand(order >= 1, "quadrature order must be >= 1");
  nodes.assign(order, 0.0);
  weights.assign(order, 0.0);
  // Newton iteration on Legendre polynomials over [-1, 1], then the affine
  // map to [0, 1]. Roots are symmetric; solve the upper half.
  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      if (order == 1) p1 = x;
      for (int k = 2; k <= order; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double pn = (order == 1) ? x : p1;
      pp = order * (x * pn - p0) / (x * x - 1.0);
      if (order == 1) pp = 1.0;
      double dx = pn / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = 0.5 * (1.0 - x);
    nodes[order - 1 - i] = 0.5 * (1.0 + x);
    const double w = 1.0 / ((1.0 - x * x) * pp * pp);
    weights[i] = w;
    weights[order - 1 - i] = w;
  }
}

namespace {

// Integrates the Jacobian of `map` along the segment x_d -> x with composite
// Gauss-Legendre quadrature using `panels` equal panels.
Matrix segment_jacobian_integral(const StateMap& map, const MatrixMap& jac,
                                 const Vector& x, const Vector& x_d, double t,
                                 int order, int panels) {
  std::vector<double> nodes, weights;
  gauss_legendre_01(order, nodes, weights);
  const int n = static_cast<int>(x.size());
  Matrix A = Matrix::Zero(map(x, t).size(), n);
  const double h = 1.0 / panels;
  for (int p = 0; p < panels; ++p) {
    for (int k = 0; k < order; ++k) {
      const double c = (p + nodes[k]) * h;
      const Vector q = c * x + (1.0 - c) * x_d;
      const Matrix J = jac ? jac(q, t) : jacobian(map, q, t);
      A.noalias() += (weights[k] * h) * J;
    }
  }
  return A;
}

SdcResult factorize(const StateMap& map, const MatrixMap& jac, const Vector& x,
                    const Vector& x_d, double t, int order, double tol) {
  demand(x.size() == x_d.size(), "sdc endpoints have different dimensions");
  const Vector dx = x - x_d;
  if (dx.norm() == 0.0) {
    Matrix J = jac ? jac(x, t) : jacobian(map, x, t);
    return {J, 0.0};
  }
  const Vector df = map(x, t) - map(x_d, t);
  if (!df.allFinite())
    throw EvaluationError("drift difference is not finite in sdc factorization");
  const double scale = 1.0 + df.norm();
  SdcResult best;
  best.residual = std::numeric_limits<double>::infinity();
  // Kinked integrands (e.g. |x|-type aero terms) defeat single-panel
  // Gauss-Legendre; composite refinement restores quadratic convergence.
  for (int panels = 1; panels <= 8192; panels *= 2) {
    Matrix A = segment_jacobian_integral(map, jac, x, x_d, t, order, panels);
    const double residual = (A * dx - df).norm();
    if (residual < best.residual) best = {A, residual};
    if (best.residual <= tol * scale) break;
  }
  return best;
}

}  // namespace

SdcResult sdc_factorize(const SystemModel& model, const Vector& x, const Vector& x_d,
                        const Vector& u_d, double t, int quad_order, double tol) {
  demand(static_cast<int>(x.size()) == model.n, "state dimension mismatch in sdc_factorize");
  StateMap fbar;
  if (u_d.size() == 0 || u_d.isZero(0.0)) {
    fbar = model.f;
  } else {
    demand(static_cast<int>(u_d.size()) == model.m, "input dimension mismatch in sdc_factorize");
    const StateMap& f = model.f;
    const MatrixMap& B = model.B;
    Vector ud = u_d;
    fbar = [&f, &B, ud](const Vector& q, double tt) -> Vector {
      return f(q, tt) + B(q, tt) * ud;
    };
    // The shifted drift has no closed-form Jacobian in general; fall back to
    // finite differences even when f_jac exists, since B(q,t) u_d varies too.
    return factorize(fbar, MatrixMap(), x, x_d, t, quad_order, tol);
  }
  return factorize(fbar, model.f_jac, x, x_d, t, quad_order, tol);
}

SdcResult sdc_measurement_factorize(const SystemModel& model, const Vector& x,
                                    const Vector& xhat, double t, int quad_order,
                                    double tol) {
  demand(static_cast<int>(x.size()) == model.n,
         "state dimension mismatch in sdc_measurement_factorize");
  return factorize(model.h, model.h_jac, x, xhat, t, quad_order, tol);
}

void validate_bounds(const SystemModel& model, const StateBox& box, uint64_t seed,
                     int num_samples) {
  GaussianStream rng(seed, "validate-bounds");
  for (int i = 0; i < num_samples; ++i) {
    const Vector x = box.sample_state(rng);
    const Vector p = box.param_dim() > 0 ? box.sample_params(rng) : Vector(0);
    const double t = box.param_dim() > 0 ? model.param_time(p) : 0.0;
    if (model.Gc && model.Gc(x, t).norm() > model.bounds.g_c + 1e-12)
      throw EvaluationError("g_c bound violated at a sampled state");
    if (model.Ge && model.Ge(x, t).norm() > model.bounds.g_e + 1e-12)
      throw EvaluationError("g_e bound violated at a sampled state");
    if (model.D && model.D(x, t).norm() > model.bounds.d_bar + 1e-12)
      throw EvaluationError("d_bar bound violated at a sampled state");
  }
}

}  // namespace nscm
