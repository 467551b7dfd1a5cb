#pragma once

#include <functional>

#include "nscm/common.hpp"
#include "nscm/rng.hpp"

namespace nscm {

using StateMap = std::function<Vector(const Vector&, double)>;
using MatrixMap = std::function<Matrix(const Vector&, double)>;

// Uniform norm bounds used by the stochastic contraction constants. g_c, g_e
// and d_bar bound the Frobenius norms of the diffusion/measurement-noise
// matrices over the operating region; c_bar bounds the spectral norm of the
// measurement factorization C(x, xhat, t).
struct ModelBounds {
  double g_c = 0.0;
  double g_e = 0.0;
  double d_bar = 0.0;
  double c_bar = 0.0;
};

// Continuous-time Ito model
//   dx = f(x,t) dt + B(x,t) u dt + G(x,t) dW,   y = h(x,t) + D(x,t) xi
// with separate diffusion maps for the controlled (Gc) and estimated (Ge)
// scenarios. f_jac / h_jac are optional analytic Jacobians; when absent,
// finite differences are used. params(t) exposes scheduling features (e.g.
// Mach number) that metric models receive alongside the state.
struct SystemModel {
  int n = 0;   // state dimension
  int m = 0;   // input dimension
  int ny = 0;  // measurement dimension
  int dc = 0;  // control-scenario Wiener dimension
  int d1 = 0;  // estimation-scenario Wiener dimension
  int d2 = 0;  // measurement-noise dimension

  StateMap f;
  MatrixMap B;
  MatrixMap Gc;
  MatrixMap Ge;
  StateMap h;
  MatrixMap D;
  MatrixMap f_jac;
  MatrixMap h_jac;

  ModelBounds bounds;

  int param_dim = 0;
  std::function<Vector(double)> params;
  std::function<double(const Vector&)> time_of_params;

  Vector param_features(double t) const;
  double param_time(const Vector& p) const;
};

// Axis-aligned sampling region for states plus an optional parameter box
// (time, Mach number, target state/input, ...). Construction validates
// lo <= hi component-wise.
struct StateBox {
  Vector lo, hi;
  Vector p_lo, p_hi;

  StateBox() = default;
  StateBox(Vector lo_in, Vector hi_in);
  StateBox(Vector lo_in, Vector hi_in, Vector p_lo_in, Vector p_hi_in);

  int dim() const { return static_cast<int>(lo.size()); }
  int param_dim() const { return static_cast<int>(p_lo.size()); }

  Vector sample_state(GaussianStream& rng) const;
  Vector sample_params(GaussianStream& rng) const;
  bool contains(const Vector& x) const;
};

// State-dependent-coefficient factorization result:
//   A (x - x_d) = fbar(x, t) - fbar(x_d, t)
// residual is the norm of the defect in that identity at the evaluation
// point, checked against tol * (1 + ||fbar(x) - fbar(x_d)||).
struct SdcResult {
  Matrix A;
  double residual = 0.0;
};

// Central-difference Jacobian with per-axis step 1e-6 * (1 + |x_i|).
Matrix jacobian(const StateMap& map, const Vector& x, double t);

// Line-integral SDC factorization of the shifted drift
//   fbar(q, t) = f(q, t) + B(q, t) u_d
// along the segment from x_d to x, evaluated with Gauss-Legendre quadrature
// of the given order. If the residual exceeds tol * (1 + ||fbar(x) -
// fbar(x_d)||), the segment is split into progressively more panels before
// giving up (the residual is reported either way). A degenerate segment
// (x == x_d) returns the Jacobian at x.
SdcResult sdc_factorize(const SystemModel& model, const Vector& x, const Vector& x_d,
                        const Vector& u_d, double t, int quad_order = 10,
                        double tol = 1e-10);

// Same construction for the measurement map h between xhat and x; calling it
// with x == xhat yields the measurement Jacobian at xhat.
SdcResult sdc_measurement_factorize(const SystemModel& model, const Vector& x,
                                    const Vector& xhat, double t, int quad_order = 10,
                                    double tol = 1e-10);

// Gauss-Legendre nodes/weights on [0, 1]; exposed for tests.
void gauss_legendre_01(int order, std::vector<double>& nodes, std::vector<double>& weights);

// Checks that the recorded bounds dominate sampled norms of Gc/Ge/D over the
// box; throws EvaluationError otherwise. Used by verification stages.
void validate_bounds(const SystemModel& model, const StateBox& box, uint64_t seed,
                     int num_samples = 1000);

}  // namespace nscm
