#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nscm/dynamics.hpp"
#include "nscm/rocket.hpp"

using namespace nscm;

namespace {

Config rocket_config() {
  return Config::from_file(std::string(NSCM_CONFIG_DIR) + "/rocket.cfg");
}

// Independent quadrature oracle: dense trapezoidal integration of the
// finite-difference Jacobian along the segment x_d -> x.
Matrix trapezoid_sdc(const StateMap& f, const Vector& x, const Vector& x_d, double t,
                     int points) {
  Matrix A = Matrix::Zero(x.size(), x.size());
  for (int k = 0; k < points; ++k) {
    const double c0 = static_cast<double>(k) / points;
    const double c1 = static_cast<double>(k + 1) / points;
    const Matrix j0 = jacobian(f, c0 * x + (1 - c0) * x_d, t);
    const Matrix j1 = jacobian(f, c1 * x + (1 - c1) * x_d, t);
    A += 0.5 * (j0 + j1) / points;
  }
  return A;
}

SystemModel scalar_cubic_model() {
  SystemModel m;
  m.n = 1;
  m.m = 1;
  m.f = [](const Vector& x, double) -> Vector {
    Vector v(1);
    v[0] = -x[0] * x[0] * x[0];
    return v;
  };
  m.B = [](const Vector&, double) -> Matrix { return Matrix::Identity(1, 1); };
  return m;
}

}  // namespace

TEST_CASE("gauss-legendre weights integrate polynomials exactly") {
  for (int order : {1, 2, 5, 10, 20}) {
    std::vector<double> nodes, weights;
    gauss_legendre_01(order, nodes, weights);
    double wsum = 0;
    for (double w : weights) wsum += w;
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-14));
    // Exact for degree <= 2*order - 1: check x^(2*order-1).
    const int deg = 2 * order - 1;
    double q = 0;
    for (int k = 0; k < order; ++k) q += weights[k] * std::pow(nodes[k], deg);
    CHECK(q == doctest::Approx(1.0 / (deg + 1)).epsilon(1e-12));
  }
}

TEST_CASE("jacobian of a polynomial map") {
  StateMap f = [](const Vector& x, double) -> Vector {
    Vector v(2);
    v[0] = x[0] * x[0];
    v[1] = x[0] * x[1];
    return v;
  };
  Vector x(2);
  x << 1.0, 2.0;
  Matrix J = jacobian(f, x, 0.0);
  CHECK(J(0, 0) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(J(0, 1) == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(J(1, 0) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(J(1, 1) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("linear drift factorizes exactly") {
  Matrix A0(2, 2);
  A0 << -1.0, 2.0, 0.5, -3.0;
  SystemModel m;
  m.n = 2;
  m.m = 1;
  m.f = [A0](const Vector& x, double) -> Vector { return A0 * x; };
  m.B = [](const Vector&, double) -> Matrix { return Matrix::Ones(2, 1); };
  Vector x(2), xd(2);
  x << 0.7, -0.4;
  xd << -1.0, 0.3;
  auto res = sdc_factorize(m, x, xd, Vector::Zero(1), 0.0);
  CHECK((res.A - A0).norm() < 1e-8);
  CHECK(res.residual < 1e-10);

  // Constant-B models stay exact with a nonzero reference input.
  Vector ud(1);
  ud << 0.8;
  auto res2 = sdc_factorize(m, x, xd, ud, 0.0);
  CHECK((res2.A - A0).norm() < 1e-6);
  const Vector lhs = res2.A * (x - xd);
  const Vector rhs = (m.f(x, 0.0) + m.B(x, 0.0) * ud) - (m.f(xd, 0.0) + m.B(xd, 0.0) * ud);
  CHECK((lhs - rhs).norm() < 1e-8);
}

TEST_CASE("cubic drift against the closed form") {
  SystemModel m = scalar_cubic_model();
  Vector x(1), xd(1);
  x << 1.3;
  xd << 0.0;
  auto res = sdc_factorize(m, x, xd, Vector(0), 0.0);
  // A(x) = integral of -3(c x)^2 dc = -x^2.
  CHECK(res.A(0, 0) == doctest::Approx(-x[0] * x[0]).epsilon(1e-9));
  CHECK(res.residual < 1e-9);
}

TEST_CASE("degenerate segment returns the jacobian") {
  SystemModel m = scalar_cubic_model();
  Vector x(1);
  x << 0.9;
  auto res = sdc_factorize(m, x, x, Vector(0), 0.0);
  CHECK(res.A(0, 0) == doctest::Approx(-3.0 * 0.81).epsilon(1e-7));
  CHECK(res.residual == 0.0);
}

TEST_CASE("factorization identity holds on random draws") {
  Config cfg = rocket_config();
  SystemModel rocket = rocket_benchmark(cfg);
  StateBox box = rocket_box(cfg);
  GaussianStream rng(2024, "sdc-draws");
  for (int i = 0; i < 200; ++i) {
    const Vector x = box.sample_state(rng);
    const Vector xd = box.sample_state(rng);
    const double t = rng.uniform(0.0, 100.0);
    auto res = sdc_factorize(rocket, x, xd, Vector::Zero(1), t);
    const Vector defect = res.A * (x - xd) - (rocket.f(x, t) - rocket.f(xd, t));
    const double rel = defect.norm() / (1.0 + (rocket.f(x, t) - rocket.f(xd, t)).norm());
    CHECK(rel < 1e-8);
  }
}

TEST_CASE("swapping endpoints transposes the segment consistently") {
  Config cfg = rocket_config();
  SystemModel rocket = rocket_benchmark(cfg);
  Vector x(2), xd(2);
  x << 0.3, -0.8;
  xd << -0.2, 0.5;
  auto ab = sdc_factorize(rocket, x, xd, Vector::Zero(1), 3.0);
  auto ba = sdc_factorize(rocket, xd, x, Vector::Zero(1), 3.0);
  // The line integral is direction-independent.
  CHECK((ab.A - ba.A).norm() < 1e-9);
}

TEST_CASE("rocket SDC matches a dense trapezoid oracle") {
  Config cfg = rocket_config();
  SystemModel rocket = rocket_benchmark(cfg);
  Vector x(2), xd(2);
  x << 0.45, 1.2;
  xd << -0.3, -0.7;
  const double t = 60.0;
  auto res = sdc_factorize(rocket, x, xd, Vector::Zero(1), t);
  Matrix oracle = trapezoid_sdc(rocket.f, x, xd, t, 10000);
  CHECK((res.A - oracle).norm() < 1e-6);
}

TEST_CASE("rocket measurement factorization") {
  Config cfg = rocket_config();
  SystemModel rocket = rocket_benchmark(cfg);
  Vector x(2), xhat(2);
  x << 0.2, 0.4;
  xhat << -0.1, 1.0;
  const double t = 40.0;
  auto res = sdc_measurement_factorize(rocket, x, xhat, t);
  const Vector defect = res.A * (x - xhat) - (rocket.h(x, t) - rocket.h(xhat, t));
  CHECK(defect.norm() < 1e-8);
  // Degenerate call yields the measurement Jacobian.
  auto loc = sdc_measurement_factorize(rocket, xhat, xhat, t);
  CHECK((loc.A - rocket.h_jac(xhat, t)).norm() < 1e-9);
}

TEST_CASE("rocket analytic jacobians match finite differences") {
  Config cfg = rocket_config();
  SystemModel rocket = rocket_benchmark(cfg);
  GaussianStream rng(5, "jac");
  StateBox box = rocket_box(cfg);
  for (int i = 0; i < 50; ++i) {
    const Vector x = box.sample_state(rng);
    const double t = rng.uniform(0.0, 100.0);
    const Matrix fd = jacobian(rocket.f, x, t);
    const Matrix an = rocket.f_jac(x, t);
    CHECK((fd - an).norm() / (1.0 + an.norm()) < 1e-6);
    const Matrix hd = jacobian(rocket.h, x, t);
    const Matrix hn = rocket.h_jac(x, t);
    CHECK((hd - hn).norm() / (1.0 + hn.norm()) < 1e-6);
  }
}

TEST_CASE("rocket default configuration") {
  Config cfg = rocket_config();
  SystemModel rocket = rocket_benchmark(cfg);
  CHECK(rocket.n == 2);
  CHECK(rocket.m == 1);
  CHECK(rocket.ny == 2);

  const Vector zero = Vector::Zero(2);
  CHECK((rocket.Gc(zero, 0.0) - 0.06 * Matrix::Identity(2, 2)).norm() == 0.0);
  CHECK((rocket.Ge(zero, 0.0) - 0.03 * Matrix::Identity(2, 2)).norm() == 0.0);
  CHECK((rocket.D(zero, 0.0) - 0.03 * Matrix::Identity(2, 2)).norm() == 0.0);

  CHECK(rocket.params(0.0)[0] == doctest::Approx(2.0));
  CHECK(rocket.params(100.0)[0] == doctest::Approx(4.0));
  CHECK(rocket.params(1e9)[0] == doctest::Approx(4.0));
  Vector mach(1);
  mach << 3.0;
  CHECK(rocket.params(rocket.param_time(mach))[0] == doctest::Approx(3.0));

  // Zero state is an equilibrium of the drift; the actuation column is not
  // degenerate there.
  CHECK(rocket.f(zero, 0.0).norm() == 0.0);
  CHECK(rocket.f(zero, 50.0).allFinite());
  CHECK(rocket.B(zero, 0.0).norm() > 1e-3);

  validate_bounds(rocket, rocket_box(cfg), 99);
}

TEST_CASE("rocket config with a missing coefficient fails") {
  Config cfg = rocket_config();
  Config broken = Config::from_string("[rocket]\nan = 1.0\n");
  CHECK_THROWS_AS(rocket_benchmark(broken), ConfigError);
}

TEST_CASE("state box validation") {
  Vector lo(2), hi(2);
  lo << 0.0, 0.0;
  hi << -1.0, 1.0;
  CHECK_THROWS_AS(StateBox(lo, hi), ConfigError);
  hi << 1.0, 1.0;
  StateBox box(lo, hi);
  GaussianStream rng(1, "box");
  for (int i = 0; i < 100; ++i) CHECK(box.contains(box.sample_state(rng)));
}
