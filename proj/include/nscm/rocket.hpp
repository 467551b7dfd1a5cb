#pragma once

#include "nscm/config.hpp"
#include "nscm/dynamics.hpp"

namespace nscm {

// Missile longitudinal dynamics benchmark. State is
//   x = [ angle of attack (rad), pitch rate (rad per time unit) ]
// with tail-fin deflection input and measurements
//   y = [ pitch rate, normalized normal force ].
// The aerodynamic force/moment coefficients are cubic/quadratic polynomials
// in the angle of attack with Mach-scheduled linear terms:
//   Cn = an a^3 + bn a|a| + cn (2 - M/3) a          (+ dn delta via B)
//   Cm = am a^3 + bm a|a| + cm (-7 + 8M/3) a        (+ dm delta via B)
//   d(alpha)/dt = ka M Cn cos(alpha) + q
//   d(q)/dt     = kq M^2 Cm
//   y2          = kz M^2 Cn
// Mach ramps linearly from mach_initial to mach_final over mach_ramp_time.
// All coefficients are read from the [rocket] section of the config; missing
// keys raise ConfigError. configs/rocket.cfg documents the units and the
// provenance of the default values.
SystemModel rocket_benchmark(const Config& cfg);

// Sampling region from the [box] section (state_lo/state_hi plus the Mach
// parameter range param_lo/param_hi).
StateBox rocket_box(const Config& cfg);

}  // namespace nscm
