#pragma once

// Periodic orbits of the classical system by section shooting. An orbit is a
// fixed point of the chart return map on an energy level; the chart absorbs
// the energy constraint, so Newton runs on two unknowns. Floquet data comes
// from the monodromy over one period plus a finite-difference cross-check of
// the section return map.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "hdl/section.hpp"

namespace hdl {

using HomologyClass = std::array<int, 2>;

struct NewtonDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct WrongHomology : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SpectrumInconsistent : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ChartDomain : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Two-coordinate chart of {section} intersected with {C = e}.
//   angle section on index d:  u = (theta_other, r_other), r_d from the energy
//   action section r_d = 0:    u = (theta_d, r_other), theta_other from the
//                              energy by a local solve around `hint`
struct SectionChart {
  Section sec;
  double energy = 0;
  std::size_t idx = 0;  // the pinned component
  double hint = 0;      // theta_other seed for the action kind

  const MechanicalSystem<2>* sys = nullptr;

  std::size_t other() const { return 1 - idx; }

  State<2> embed(const Vec<2>& u) const {
    State<2> x{};
    if (sec.angle_like()) {
      x[idx] = sec.value;
      x[other()] = u[0];
      double uu = sys->V(x);
      double k2 = 2 * (energy - uu) - u[1] * u[1];
      if (k2 < 0) throw ChartDomain("chart: energy level does not reach the section");
      x[2 + other()] = u[1];
      x[2 + idx] = sec.direction * std::sqrt(k2);
      return x;
    }
    // r_idx = 0; solve theta_other so the point sits on the level
    x[idx] = u[0];
    x[2 + idx] = 0.0;
    x[2 + other()] = u[1];
    double th = hint;
    bool ok = false;
    for (int it = 0; it < 80; ++it) {
      x[other()] = th;
      double res = sys->energy(x) - energy;
      if (std::abs(res) < 1e-13) {
        ok = true;
        break;
      }
      Vec<2> gv = sys->gradV(x);
      double slope = gv[other()];
      if (std::abs(slope) < 1e-12) break;
      double step = -res / slope;
      if (std::abs(step) > 0.5) step = step > 0 ? 0.5 : -0.5;
      th += step;
    }
    if (!ok) throw ChartDomain("chart: no level point near the hint");
    x[other()] = th;
    return x;
  }

  Vec<2> project(const State<2>& x) const {
    if (sec.angle_like()) return {{x[other()], x[2 + other()]}};
    return {{x[idx], x[2 + other()]}};
  }
};

struct PeriodicOrbit {
  State<2> anchor{};  // on the section, angles in [0, 2pi)
  double period = 0;
  double energy = 0;
  HomologyClass c{0, 0};
  Section section{};
  double h = 5e-4;  // integration grid the orbit was converged on
  std::complex<double> lambda{1, 0};
  bool hyperbolic = false;
  bool orientable = false;
  double residual = 0;

  PhasePoint<2> anchor_point() const { return to_phase_point(anchor); }
};

struct FloquetInfo {
  std::complex<double> lambda{1, 0};  // |lambda| >= 1 representative
  bool hyperbolic = false;
  bool orientable = false;
  double unit_pair_defect = 0;   // char. polynomial at the double root 1
  double reciprocity_defect = 0; // palindromic-coefficient defect
  double section_check = 0;      // |mu_u - lambda| / |lambda| from the 2x2 map
  Mat<2> return_map{};           // d(full-period chart return)
  Vec<2> dir_u{}, dir_s{};       // unstable / stable chart directions
};

struct OrbitOpts {
  double h = 5e-4;
  double t_max = 200.0;
  std::size_t iters = 60;
  double tol = 1e-10;
  double fd_step = 1e-6;
  const Section* section = nullptr;  // override (continuation keeps one section)
};

namespace detail {

inline std::size_t dominant_index(HomologyClass c) {
  return std::abs(c[0]) >= std::abs(c[1]) ? 0 : 1;
}

inline State<2> phase_velocity(const MechanicalSystem<2>& sys, const State<2>& x) {
  Vec<2> g = sys.gradV(x);
  return {{x[2], x[3], -g[0], -g[1]}};
}

// Eigenvector of the monodromy for a known simple eigenvalue, by shifted
// inverse iteration. The shift offset keeps the solve regular; three passes
// are plenty at the separation this is used for.
inline Vec<4> monodromy_eigvec(const Mat<4>& m, double mu) {
  Mat<4> a = m;
  double shift = mu + std::max(1.0, std::abs(mu)) * 1e-9;
  for (std::size_t i = 0; i < 4; ++i) a(i, i) -= shift;
  Vec<4> v{{0.48, -0.31, 0.66, 0.49}};
  for (int it = 0; it < 3; ++it) {
    Vec<4> w;
    try {
      w = solve(a, v);
    } catch (const std::runtime_error&) {
      break;  // shift landed on the eigenvalue: v is already aligned
    }
    double nw = norm(w);
    if (!std::isfinite(nw) || nw == 0) break;
    v = (1.0 / nw) * w;
  }
  return v;
}

// chart displacement over one period: |c_d| returns for angle sections, one
// return for librations; subtracts the homology offset of the free coordinate.
// A class that does not wind the pinned angle can still pass through the
// section once per period (a libration spanning the pinned value), so
// c_d = 0 also means one directed return
template <class Chart>
inline Vec<2> period_defect(const Chart& chart, const MechanicalSystem<2>& sys,
                            const Vec<2>& u, HomologyClass c, double t_max, double h,
                            double* period_out = nullptr) {
  State<2> x = chart.embed(u);
  std::size_t returns = 1;
  double offset = 0;
  if (chart.sec.angle_like()) {
    returns = std::max<std::size_t>(1, std::size_t(std::abs(c[chart.idx])));
    offset = two_pi * c[chart.other()];
  }
  double t = 0;
  State<2> y = x;
  for (std::size_t k = 0; k < returns; ++k) {
    auto hit = poincare_map(sys, chart.sec, y, t_max, h);
    y = hit.state;
    t += hit.t;
  }
  if (period_out) *period_out = t;
  Vec<2> v = chart.project(y);
  Vec<2> u0 = chart.project(x);
  return {{v[0] - u0[0] - offset, v[1] - u0[1]}};
}

}  // namespace detail

// Floquet multipliers and section eigen-directions for a converged orbit.
// The 4x4 monodromy of a symplectic autonomous flow on an energy level has
// spectrum {lambda, 1/lambda, 1, 1}; both structural facts are verified from
// the characteristic polynomial before the multiplier is reported.
inline FloquetInfo floquet(const PeriodicOrbit& orbit, const TrigPotential& U,
                           double coupling = 1.0) {
  MechanicalSystem<2> sys{U, coupling};
  auto ts = tangent_flow(sys, orbit.anchor, orbit.period, orbit.h);
  const Mat<4>& m = ts.jacobian;
  Mat<4> m2 = m * m;
  Mat<4> m3 = m2 * m;
  double c1 = trace(m);
  double c2 = 0.5 * (c1 * c1 - trace(m2));
  double c3 = (c1 * c1 * c1 - 3.0 * c1 * trace(m2) + 2.0 * trace(m3)) / 6.0;
  double c4 = det(m);
  double s = c1 - 2.0;
  // every coefficient formula cancels intermediates of size |s|^2 (det and
  // the Newton-identity traces), so defects are judged relative to that
  // scale; near-separatrix orbits reach lambda ~ 1e6 and an absolute gate
  // would reject them on rounding noise alone
  double scale2 = std::max(1.0, s * s);

  FloquetInfo out;
  out.reciprocity_defect = std::max(std::abs(c4 - 1.0), std::abs(c3 - c1)) / scale2;
  // (x-1)^2 (x^2 - s x + 1) = x^4 - (s+2) x^3 + (2s+2) x^2 - (s+2) x + 1
  double p1 = 1.0 - c1 + c2 - c3 + c4;
  double dp1 = 4.0 - 3.0 * c1 + 2.0 * c2 - c3;
  out.unit_pair_defect = std::max(std::abs(p1), std::abs(dp1)) / scale2;
  // c2 carries lambda^2-sized terms, so its defect is judged on its own scale
  if (out.reciprocity_defect > 1e-6 ||
      std::abs(c2 - (2 * s + 2)) / std::max(1.0, std::abs(c2)) > 1e-5)
    throw SpectrumInconsistent("monodromy spectrum is not {l, 1/l, 1, 1}");

  const double margin = 1e-3;
  if (s > 2.0) {
    double l = 0.5 * (s + std::sqrt(s * s - 4.0));
    out.lambda = l;
    out.hyperbolic = l >= 1.0 + margin;
    out.orientable = true;
  } else if (s < -2.0) {
    double l = 0.5 * (s - std::sqrt(s * s - 4.0));
    out.lambda = l;
    out.hyperbolic = -l >= 1.0 + margin;
    out.orientable = false;
  } else {
    out.lambda = std::complex<double>(0.5 * s, std::sqrt(std::max(0.0, 1.0 - 0.25 * s * s)));
    out.hyperbolic = false;
    out.orientable = false;
  }

  SectionChart chart{orbit.section, orbit.energy, 0, 0, &sys};
  chart.idx = orbit.section.angle_like()
                  ? (orbit.section.ntheta[0] != 0 ? 0 : 1)
                  : (orbit.section.nr[0] != 0 ? 0 : 1);
  chart.hint = orbit.anchor[chart.other()];
  Vec<2> u0 = chart.project(orbit.anchor);

  if (std::abs(s) <= 1e4) {
    // cross-check against the differentiated chart return map
    Mat<2> dp;
    for (std::size_t j = 0; j < 2; ++j) {
      Vec<2> up = u0, um = u0;
      up[j] += 1e-6;
      um[j] -= 1e-6;
      Vec<2> fp = detail::period_defect(chart, sys, up, orbit.c, 200.0, orbit.h);
      Vec<2> fm = detail::period_defect(chart, sys, um, orbit.c, 200.0, orbit.h);
      for (std::size_t i = 0; i < 2; ++i) dp(i, j) = (fp[i] - fm[i]) / 2e-6 + (i == j);
    }
    out.return_map = dp;
    double tr = dp(0, 0) + dp(1, 1);
    double dd = dp(0, 0) * dp(1, 1) - dp(0, 1) * dp(1, 0);
    double disc = tr * tr - 4.0 * dd;
    if (disc > 0) {
      double mu_u = 0.5 * (tr + (tr > 0 ? 1 : -1) * std::sqrt(disc));
      double mu_s = dd / mu_u;
      if (std::abs(mu_s) > std::abs(mu_u)) std::swap(mu_u, mu_s);
      out.section_check = std::abs(mu_u - out.lambda) / std::max(1.0, std::abs(out.lambda));
      auto eigvec = [&](double mu) {
        Vec<2> v{{dp(0, 1), mu - dp(0, 0)}};
        double nv = norm(v);
        if (nv < 1e-12) {
          v = {{mu - dp(1, 1), dp(1, 0)}};
          nv = norm(v);
        }
        if (nv < 1e-12) return Vec<2>{{1.0, 0.0}};
        return (1.0 / nv) * v;
      };
      out.dir_u = eigvec(mu_u);
      out.dir_s = eigvec(mu_s);
    } else {
      out.section_check = std::abs(std::complex<double>(0.5 * tr, 0.5 * std::sqrt(-disc)) -
                                   out.lambda) /
                          std::max(1.0, std::abs(out.lambda));
    }
    return out;
  }

  // beyond |s| ~ 1e4 a 1e-6 finite-difference probe of the return map is
  // amplified out of the fixed point's linear neighbourhood, so the section
  // directions come from the monodromy eigenvectors: remove the flow
  // component to land tangent to the section, then project to the chart
  double lam = out.lambda.real();
  State<2> vel = detail::phase_velocity(sys, orbit.anchor);
  auto section_dir = [&](double mu) {
    Vec<4> v = detail::monodromy_eigvec(m, mu);
    std::size_t pin = orbit.section.angle_like() ? chart.idx : 2 + chart.idx;
    if (std::abs(vel[pin]) < 1e-12)
      throw SpectrumInconsistent("flow is tangent to the section at the anchor");
    double a = v[pin] / vel[pin];
    for (std::size_t i = 0; i < 4; ++i) v[i] -= a * vel[i];
    Vec<2> d = orbit.section.angle_like()
                   ? Vec<2>{{v[chart.other()], v[2 + chart.other()]}}
                   : Vec<2>{{v[chart.idx], v[2 + chart.other()]}};
    double nd = norm(d);
    if (nd < 1e-12)
      throw SpectrumInconsistent("monodromy eigenvector collapses on the section chart");
    return (1.0 / nd) * d;
  };
  out.dir_u = section_dir(lam);
  out.dir_s = section_dir(1.0 / lam);
  out.section_check = 0.0;
  return out;
}

namespace detail {

// Libration through a turning point, solved by its time-reversal symmetry:
// a point of Fix(R) = {r = 0} flows back to Fix(R) in half a period, so the
// orbit is one root of a scalar condition along the level curve {V = e}.
// The full return map of a wide libration amplifies guess errors by its
// multiplier (1e5 and beyond near a separatrix), which no finite-difference
// shooting Jacobian survives; the half-period condition only sees sqrt of
// that.
inline PeriodicOrbit libration_by_symmetry(const MechanicalSystem<2>& sys,
                                           const TrigPotential& U, SectionChart chart,
                                           HomologyClass c, double e, const State<2>& guess,
                                           const OrbitOpts& opts, double coupling) {
  auto level_point = [&](Vec<2> th) {
    for (int it = 0; it < 80; ++it) {
      State<2> x{{th[0], th[1], 0.0, 0.0}};
      double res = sys.V(x) - e;
      if (std::abs(res) < 1e-13) return th;
      Vec<2> gm = sys.gradV(x);
      double g2 = gm[0] * gm[0] + gm[1] * gm[1];
      if (g2 < 1e-16) break;
      th = th - (res / g2) * gm;
    }
    throw NewtonDiverged("level projection stalled near a critical point");
  };
  Vec<2> th0 = level_point({{guess[0], guess[1]}});
  Vec<2> tang;
  {
    State<2> base{{th0[0], th0[1], 0.0, 0.0}};
    Vec<2> gv = sys.gradV(base);
    double gn = norm(gv);
    if (gn < 1e-12) throw NewtonDiverged("level tangent undefined at a critical point");
    tang = {{-gv[1] / gn, gv[0] / gn}};
  }

  // the orbit leaves the turning point toward sec.direction, so the next
  // turning point is the opposite-signed crossing of {r_idx = 0}
  Section far = chart.sec;
  far.direction = -chart.sec.direction;

  double t_half = 0;
  auto shoot = [&](double s) {
    Vec<2> th = level_point({{th0[0] + s * tang[0], th0[1] + s * tang[1]}});
    State<2> x0{{th[0], th[1], 0.0, 0.0}};
    auto hit = poincare_map(sys, far, x0, opts.t_max, opts.h);
    t_half = hit.t;
    return hit.state[2 + chart.other()];
  };

  double s = 0.0;
  double f = shoot(s);
  double fn = std::abs(f);
  double t_best = t_half;
  const double fd = 1e-7;
  for (std::size_t it = 0; fn > opts.tol && it < opts.iters; ++it) {
    double fp = shoot(s + fd);
    double fm = shoot(s - fd);
    double slope = (fp - fm) / (2 * fd);
    if (!(std::abs(slope) > 1e-14))
      throw NewtonDiverged("flat half-period condition");
    double step = -f / slope;
    double lam = 1.0;
    bool improved = false;
    for (int half = 0; half < 30; ++half) {
      double st = s + lam * step;
      try {
        double ft = shoot(st);
        if (std::abs(ft) < fn) {
          s = st;
          f = ft;
          fn = std::abs(ft);
          t_best = t_half;
          improved = true;
          break;
        }
      } catch (const std::runtime_error&) {
        // fall through to a smaller step
      }
      lam *= 0.5;
    }
    if (!improved) throw NewtonDiverged("no descent along the half-period condition");
  }
  if (fn > opts.tol)
    throw NewtonDiverged("half-period residual stalled at " + std::to_string(fn));

  Vec<2> thc = level_point({{th0[0] + s * tang[0], th0[1] + s * tang[1]}});
  PeriodicOrbit orbit;
  orbit.section = chart.sec;
  orbit.energy = e;
  orbit.c = c;
  orbit.h = opts.h;
  orbit.residual = fn;
  orbit.anchor = {{reduce_angle(thc[0]), reduce_angle(thc[1]), 0.0, 0.0}};
  orbit.period = 2.0 * t_best;

  State<2> closed = flow_mechanical(sys, orbit.anchor, orbit.period, opts.h);
  for (int i = 0; i < 2; ++i) {
    double turns = (closed[i] - orbit.anchor[i]) / two_pi;
    long w = std::lround(turns);
    if (std::abs(turns - double(w)) > 1e-6 || w != c[i])
      throw WrongHomology("closed orbit lift winds " + std::to_string(turns) +
                          " on component " + std::to_string(i));
  }

  FloquetInfo fl = floquet(orbit, U, coupling);
  orbit.lambda = fl.lambda;
  orbit.hyperbolic = fl.hyperbolic;
  orbit.orientable = fl.orientable;
  return orbit;
}

}  // namespace detail

// Newton shooting for the orbit of homology class c on the level C = e.
// Class (0, 0) needs a libration guess; nonzero classes default to the
// free-motion orbit through theta = 0.
inline PeriodicOrbit find_periodic_orbit(const TrigPotential& U, HomologyClass c, double e,
                                         const State<2>& guess, const OrbitOpts& opts = {},
                                         double coupling = 1.0) {
  MechanicalSystem<2> sys{U, coupling};
  SectionChart chart;
  chart.sys = &sys;
  chart.energy = e;
  if (opts.section) {
    chart.sec = *opts.section;
    chart.idx = chart.sec.angle_like() ? (chart.sec.ntheta[0] != 0 ? 0 : 1)
                                       : (chart.sec.nr[0] != 0 ? 0 : 1);
  } else if (c[0] == 0 && c[1] == 0) {
    int dir = sys.gradV(guess)[0] <= 0 ? +1 : -1;  // dr_2/dt = -dV/dtheta_2
    chart.sec = action_section(0, 0.0, dir);
    chart.idx = 0;
  } else {
    std::size_t d = detail::dominant_index(c);
    chart.sec = theta_section(d, guess[d], c[d] > 0 ? +1 : -1);
    chart.idx = d;
  }
  chart.hint = guess[chart.other()];

  // a class-(0,0) guess on Fix(R) = {r = 0} is a turning point; route it
  // through the reversible solver, which stays conditioned where the plain
  // return map is not
  if (c[0] == 0 && c[1] == 0 && !chart.sec.angle_like() &&
      std::abs(guess[2]) + std::abs(guess[3]) < 1e-6)
    return detail::libration_by_symmetry(sys, U, chart, c, e, guess, opts, coupling);

  Vec<2> u = chart.project(guess);
  double period = 0;
  Vec<2> f;
  try {
    f = detail::period_defect(chart, sys, u, c, opts.t_max, opts.h, &period);
  } catch (const ChartDomain& ex) {
    throw NewtonDiverged(std::string("initial guess leaves the chart: ") + ex.what());
  }

  double fn = norm_inf(f);
  for (std::size_t it = 0; fn > opts.tol && it < opts.iters; ++it) {
    Mat<2> J;
    for (std::size_t j = 0; j < 2; ++j) {
      Vec<2> up = u, um = u;
      up[j] += opts.fd_step;
      um[j] -= opts.fd_step;
      Vec<2> fp, fm;
      try {
        fp = detail::period_defect(chart, sys, up, c, opts.t_max, opts.h);
        fm = detail::period_defect(chart, sys, um, c, opts.t_max, opts.h);
      } catch (const std::runtime_error&) {
        throw NewtonDiverged("shooting Jacobian left the chart domain");
      }
      for (std::size_t i = 0; i < 2; ++i) J(i, j) = (fp[i] - fm[i]) / (2 * opts.fd_step);
    }
    Vec<2> du;
    try {
      du = solve(J, f);
    } catch (const std::runtime_error&) {
      throw NewtonDiverged("singular shooting Jacobian");
    }
    // damped update: insist on decrease
    double lam = 1.0;
    bool improved = false;
    for (int half = 0; half < 30; ++half) {
      Vec<2> ut = u - lam * du;
      try {
        Vec<2> ft = detail::period_defect(chart, sys, ut, c, opts.t_max, opts.h, &period);
        if (norm_inf(ft) < fn) {
          u = ut;
          f = ft;
          fn = norm_inf(ft);
          improved = true;
          break;
        }
      } catch (const std::runtime_error&) {
        // fall through to a smaller step
      }
      lam *= 0.5;
    }
    if (!improved) throw NewtonDiverged("no descent along the Newton direction");
  }
  if (fn > opts.tol) throw NewtonDiverged("residual stalled at " + std::to_string(fn));

  PeriodicOrbit orbit;
  orbit.section = chart.sec;
  orbit.energy = e;
  orbit.c = c;
  orbit.h = opts.h;
  orbit.residual = fn;
  State<2> anchor = chart.embed(u);
  anchor[0] = reduce_angle(anchor[0]);
  anchor[1] = reduce_angle(anchor[1]);
  orbit.anchor = anchor;
  detail::period_defect(chart, sys, chart.project(anchor), c, opts.t_max, opts.h, &period);
  orbit.period = period;

  // homology of the full-period lift
  State<2> closed = flow_mechanical(sys, anchor, period, opts.h);
  for (int i = 0; i < 2; ++i) {
    double turns = (closed[i] - anchor[i]) / two_pi;
    long w = std::lround(turns);
    if (std::abs(turns - double(w)) > 1e-6 || w != c[i])
      throw WrongHomology("closed orbit lift winds " + std::to_string(turns) +
                          " on component " + std::to_string(i));
  }

  FloquetInfo fl = floquet(orbit, U, coupling);
  orbit.lambda = fl.lambda;
  orbit.hyperbolic = fl.hyperbolic;
  orbit.orientable = fl.orientable;
  return orbit;
}

inline PeriodicOrbit find_periodic_orbit(const TrigPotential& U, HomologyClass c, double e,
                                         const OrbitOpts& opts = {}, double coupling = 1.0) {
  if (c[0] == 0 && c[1] == 0)
    throw std::invalid_argument("class (0,0) needs an explicit libration guess");
  double cn = std::sqrt(double(c[0]) * c[0] + double(c[1]) * c[1]);
  State<2> guess{{0.0, 0.0, std::sqrt(2 * std::max(e, 1e-12)) * c[0] / cn,
                  std::sqrt(2 * std::max(e, 1e-12)) * c[1] / cn}};
  return find_periodic_orbit(U, c, e, guess, opts, coupling);
}

// Re-converge an orbit on a finer grid (or another section) without changing
// identity; used before seeding manifolds so the fixed point matches the map.
inline PeriodicOrbit polish_orbit(const PeriodicOrbit& orbit, const TrigPotential& U,
                                  double h, double coupling = 1.0) {
  OrbitOpts opts;
  opts.h = h;
  opts.section = &orbit.section;
  return find_periodic_orbit(U, orbit.c, orbit.energy, orbit.anchor, opts, coupling);
}

}  // namespace hdl
