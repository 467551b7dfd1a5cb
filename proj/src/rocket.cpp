#include "nscm/rocket.hpp"

#include <cmath>

namespace nscm {
namespace {

struct RocketCoefficients {
  double an, bn, cn, dn;
  double am, bm, cm, dm;
  double ka, kq, kz;
  double mach_initial, mach_final, mach_ramp_time;
  double gc_scale, ge_scale, d_scale;
};

RocketCoefficients read_coefficients(const Config& cfg) {
  RocketCoefficients c{};
  c.an = cfg.number("rocket.an");
  c.bn = cfg.number("rocket.bn");
  c.cn = cfg.number("rocket.cn");
  c.dn = cfg.number("rocket.dn");
  c.am = cfg.number("rocket.am");
  c.bm = cfg.number("rocket.bm");
  c.cm = cfg.number("rocket.cm");
  c.dm = cfg.number("rocket.dm");
  c.ka = cfg.number("rocket.ka");
  c.kq = cfg.number("rocket.kq");
  c.kz = cfg.number("rocket.kz");
  c.mach_initial = cfg.number("rocket.mach_initial");
  c.mach_final = cfg.number("rocket.mach_final");
  c.mach_ramp_time = cfg.number("rocket.mach_ramp_time");
  c.gc_scale = cfg.number("rocket.gc_scale");
  c.ge_scale = cfg.number("rocket.ge_scale");
  c.d_scale = cfg.number("rocket.d_scale");
  if (c.mach_ramp_time <= 0.0)
    throw ConfigError("rocket.mach_ramp_time must be positive");
  return c;
}

double mach_at(const RocketCoefficients& c, double t) {
  double s = t / c.mach_ramp_time;
  s = std::min(1.0, std::max(0.0, s));
  return c.mach_initial + (c.mach_final - c.mach_initial) * s;
}

double cn_poly(const RocketCoefficients& c, double a, double mach) {
  return c.an * a * a * a + c.bn * a * std::abs(a) + c.cn * (2.0 - mach / 3.0) * a;
}

double cm_poly(const RocketCoefficients& c, double a, double mach) {
  return c.am * a * a * a + c.bm * a * std::abs(a) + c.cm * (-7.0 + 8.0 * mach / 3.0) * a;
}

double dcn_da(const RocketCoefficients& c, double a, double mach) {
  return 3.0 * c.an * a * a + 2.0 * c.bn * std::abs(a) + c.cn * (2.0 - mach / 3.0);
}

double dcm_da(const RocketCoefficients& c, double a, double mach) {
  return 3.0 * c.am * a * a + 2.0 * c.bm * std::abs(a) + c.cm * (-7.0 + 8.0 * mach / 3.0);
}

}  // namespace

SystemModel rocket_benchmark(const Config& cfg) {
  const RocketCoefficients c = read_coefficients(cfg);

  SystemModel model;
  model.n = 2;
  model.m = 1;
  model.ny = 2;
  model.dc = 2;
  model.d1 = 2;
  model.d2 = 2;

  model.f = [c](const Vector& x, double t) -> Vector {
    const double mach = mach_at(c, t);
    Vector dx(2);
    dx[0] = c.ka * mach * cn_poly(c, x[0], mach) * std::cos(x[0]) + x[1];
    dx[1] = c.kq * mach * mach * cm_poly(c, x[0], mach);
    return dx;
  };

  model.f_jac = [c](const Vector& x, double t) -> Matrix {
    const double mach = mach_at(c, t);
    const double a = x[0];
    Matrix J(2, 2);
    J(0, 0) = c.ka * mach *
              (dcn_da(c, a, mach) * std::cos(a) - cn_poly(c, a, mach) * std::sin(a));
    J(0, 1) = 1.0;
    J(1, 0) = c.kq * mach * mach * dcm_da(c, a, mach);
    J(1, 1) = 0.0;
    return J;
  };

  model.B = [c](const Vector& x, double t) -> Matrix {
    const double mach = mach_at(c, t);
    Matrix B(2, 1);
    B(0, 0) = c.ka * mach * c.dn * std::cos(x[0]);
    B(1, 0) = c.kq * mach * mach * c.dm;
    return B;
  };

  model.h = [c](const Vector& x, double t) -> Vector {
    const double mach = mach_at(c, t);
    Vector y(2);
    y[0] = x[1];
    y[1] = c.kz * mach * mach * cn_poly(c, x[0], mach);
    return y;
  };

  model.h_jac = [c](const Vector& x, double t) -> Matrix {
    const double mach = mach_at(c, t);
    Matrix H(2, 2);
    H(0, 0) = 0.0;
    H(0, 1) = 1.0;
    H(1, 0) = c.kz * mach * mach * dcn_da(c, x[0], mach);
    H(1, 1) = 0.0;
    return H;
  };

  model.Gc = [c](const Vector&, double) -> Matrix {
    return c.gc_scale * Matrix::Identity(2, 2);
  };
  model.Ge = [c](const Vector&, double) -> Matrix {
    return c.ge_scale * Matrix::Identity(2, 2);
  };
  model.D = [c](const Vector&, double) -> Matrix {
    return c.d_scale * Matrix::Identity(2, 2);
  };

  model.bounds.g_c = c.gc_scale * std::sqrt(2.0);
  model.bounds.g_e = c.ge_scale * std::sqrt(2.0);
  model.bounds.d_bar = c.d_scale * std::sqrt(2.0);
  // c_bar is filled in by the sampling stage (estimated over the box).

  model.param_dim = 1;
  model.params = [c](double t) -> Vector {
    Vector p(1);
    p[0] = mach_at(c, t);
    return p;
  };
  model.time_of_params = [c](const Vector& p) -> double {
    const double span = c.mach_final - c.mach_initial;
    if (span == 0.0) return 0.0;
    return c.mach_ramp_time * (p[0] - c.mach_initial) / span;
  };

  return model;
}

StateBox rocket_box(const Config& cfg) {
  return StateBox(cfg.vector("box.state_lo"), cfg.vector("box.state_hi"),
                  cfg.vector("box.param_lo"), cfg.vector("box.param_hi"));
}

}  // namespace nscm
