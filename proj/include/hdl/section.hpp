#pragma once

// Poincare sections for the two-degree classical system and the first-return
// map. A section is an affine condition on (theta, r); returns are located on
// the integration grid and refined to ~1e-12 in the section residual by a
// Newton iteration on a single partial step, which places the crossing time
// well inside 1e-11.

#include <cmath>
#include <stdexcept>
#include <string>

#include "hdl/integrate.hpp"

namespace hdl {

struct TangentialCrossing : std::runtime_error {
  double rate;
  explicit TangentialCrossing(double gdot)
      : std::runtime_error("section crossing is tangential (g' = " +
                           std::to_string(gdot) + ")"),
        rate(gdot) {}
};

struct NoReturn : std::runtime_error {
  double t_max;
  explicit NoReturn(double t)
      : std::runtime_error("no section return within t = " + std::to_string(t)),
        t_max(t) {}
};

// g(x) = ntheta . theta - value (wrapped to (-pi, pi], so ntheta must be an
// integer vector) or nr . r - value; direction is the required sign of dg/dt
// at an accepted crossing. Exactly one of the two normals may be nonzero.
struct Section {
  Vec<2> ntheta{};
  Vec<2> nr{};
  double value = 0;
  int direction = +1;

  bool angle_like() const { return ntheta[0] != 0 || ntheta[1] != 0; }

  double g(const State<2>& x) const {
    if (angle_like()) return angle_diff(ntheta[0] * x[0] + ntheta[1] * x[1], value);
    return nr[0] * x[2] + nr[1] * x[3] - value;
  }

  double gdot(const MechanicalSystem<2>& sys, const State<2>& x) const {
    if (angle_like()) return ntheta[0] * x[2] + ntheta[1] * x[3];
    Vec<2> gv = sys.gradV(x);
    return -(nr[0] * gv[0] + nr[1] * gv[1]);
  }
};

inline Section theta_section(std::size_t index, double value, int direction = +1) {
  Section s;
  s.ntheta[index] = 1.0;
  s.value = reduce_angle(value);
  s.direction = direction;
  return s;
}

inline Section action_section(std::size_t index, double value, int direction = +1) {
  Section s;
  s.nr[index] = 1.0;
  s.value = value;
  s.direction = direction;
  return s;
}

struct SectionHit {
  State<2> state;
  double t;     // signed return time
  double rate;  // dg/dt at the crossing
};

// First crossing with the prescribed direction after leaving the section.
// time_sign = -1 integrates backward and finds the previous such crossing
// (the inverse return map). If z starts on the section, transversality there
// is checked before departing.
inline SectionHit poincare_map(const MechanicalSystem<2>& sys, const Section& sec,
                               State<2> z, double t_max = 200.0, double h = 5e-4,
                               int time_sign = +1) {
  if (h <= 0 || t_max <= 0) throw std::invalid_argument("poincare_map: bad h or t_max");
  const double hs = time_sign > 0 ? h : -h;
  double w = sec.g(z);
  if (std::abs(w) < 1e-9) {
    double rate = sec.gdot(sys, z);
    if (std::abs(rate) < 1e-6) throw TangentialCrossing(rate);
  }

  // accept a sign change of g through zero (not through the angle wrap) with
  // the right orientation in forward time
  const double guard = 2.0;
  auto crossing = [&](double w0, double w1) {
    double lo = w0, hi = w1;
    if (time_sign < 0) std::swap(lo, hi);  // forward-time order
    if (sec.direction > 0) return lo < 0 && hi >= 0 && hi - lo < guard;
    return lo > 0 && hi <= 0 && lo - hi < guard;
  };

  // must first see the pre-crossing side, so a start on the section does not
  // retrigger immediately
  bool armed;
  if (time_sign > 0)
    armed = sec.direction > 0 ? w < -1e-8 : w > 1e-8;
  else
    armed = sec.direction > 0 ? w > 1e-8 : w < -1e-8;

  const std::size_t n_max = std::size_t(std::ceil(t_max / h));
  State<2> prev = z;
  for (std::size_t k = 0; k < n_max; ++k) {
    prev = z;
    double w_prev = w;
    strang_step(sys, z, hs);
    w = sec.g(z);
    if (armed && crossing(w_prev, w)) {
      // refine from the checkpoint with one partial step
      double dt = hs * w_prev / (w_prev - w);
      State<2> y = prev;
      for (int it = 0; it < 60; ++it) {
        y = prev;
        strang_step(sys, y, dt);
        double res = sec.g(y);
        if (std::abs(res) < 1e-13) break;
        double rate = sec.gdot(sys, y);
        if (rate == 0) break;
        double step = -res / rate;
        // keep the correction inside the bracketing step
        if (std::abs(step) > std::abs(hs)) step = step > 0 ? std::abs(hs) : -std::abs(hs);
        dt += step;
      }
      double rate = sec.gdot(sys, y);
      if (std::abs(rate) < 1e-6) throw TangentialCrossing(rate);
      return {y, double(k) * hs + dt, rate};
    }
    if (!armed) {
      if (time_sign > 0)
        armed = sec.direction > 0 ? w < -1e-8 : w > 1e-8;
      else
        armed = sec.direction > 0 ? w > 1e-8 : w < -1e-8;
    }
  }
  throw NoReturn(t_max);
}

}  // namespace hdl
