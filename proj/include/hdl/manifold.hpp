#pragma once

// Stable/unstable manifold curves of a hyperbolic orbit inside its section,
// and transverse homoclinic points as intersections of those curves. Curves
// are grown from a short seed segment along the Floquet direction by iterating
// the return map (the inverse map for the stable side) with arclength-driven
// refinement. Emitted states are projected onto the energy level; the raw
// defect removed by that projection is recorded.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "hdl/annulus.hpp"

namespace hdl {

struct FoldTooSharp : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoIntersection : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OnlyTangential : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ManifoldSide { stable, unstable };

struct ManifoldCurve {
  ManifoldSide side = ManifoldSide::unstable;
  int branch = +1;
  Section section{};
  double energy = 0;
  std::vector<Vec<2>> chart;      // ordered outward from the orbit
  std::vector<State<2>> states;   // embedded, on the energy level
  double arclength = 0;
  double max_raw_defect = 0;      // energy defect removed by the projection
  bool truncated = false;         // growth stopped early (lost return)
};

struct ManifoldOpts {
  double d0 = 1e-7;       // seed offset along the Floquet direction
  double ds = 2e-2;       // target chart spacing between output points
  double max_turn = 0.25; // radians between consecutive segments
  std::size_t max_points = 20000;
  std::size_t max_depth = 42;  // bisection depth per output gap
  double t_max = 200.0;
  double h = 1e-3;  // curve growth tolerates a coarser grid than shooting
};

namespace detail {

// pull the embedded representative back onto the level set by scaling r
inline double project_to_level(const MechanicalSystem<2>& sys, State<2>& x, double e) {
  double defect = sys.energy(x) - e;
  double k2 = dot(Vec<2>{{x[2], x[3]}}, Vec<2>{{x[2], x[3]}});
  double want = k2 - 2 * defect;
  if (want <= 0 || k2 == 0) return std::abs(defect);
  double f = std::sqrt(want / k2);
  x[2] *= f;
  x[3] *= f;
  return std::abs(defect);
}

struct CurveGrower {
  const MechanicalSystem<2>& sys;
  SectionChart chart;
  HomologyClass c;
  int time_sign;
  const ManifoldOpts& opts;
  Vec<2> p0, p1;  // fundamental segment endpoints in the chart
  double energy;
  std::size_t n_returns;

  double max_raw_defect = 0;
  std::map<double, State<2>> memo;  // parameters are dyadic, so keys are exact

  // one application of the (possibly inverse) full-period return map
  State<2> apply(State<2> x) {
    for (std::size_t k = 0; k < n_returns; ++k)
      x = poincare_map(sys, chart.sec, x, opts.t_max, opts.h, time_sign).state;
    max_raw_defect = std::max(max_raw_defect, project_to_level(sys, x, energy));
    return x;
  }

  // global parameter t = level + s: the point P^level((1-s) p0 + s p1);
  // each parameter maps its own t-1 ancestor once, so growth is one return
  // per distinct parameter rather than one per level
  State<2> eval(double t) {
    if (t <= 1.0) {
      Vec<2> q = (1 - t) * p0 + t * p1;
      return chart.embed(q);
    }
    auto it = memo.find(t);
    if (it != memo.end()) return it->second;
    State<2> x = apply(eval(t - 1.0));
    memo.emplace(t, x);
    return x;
  }
};

}  // namespace detail

// Grow the manifold curve of a hyperbolic orbit out to chart arclength L.
inline ManifoldCurve manifold_curve(const PeriodicOrbit& orbit, const TrigPotential& U,
                                    ManifoldSide side, int branch, double L,
                                    const ManifoldOpts& opts = {}, double coupling = 1.0) {
  if (!orbit.hyperbolic) throw std::invalid_argument("manifold of a non-hyperbolic orbit");
  if (branch != 1 && branch != -1) throw std::invalid_argument("branch must be +1 or -1");

  MechanicalSystem<2> sys{U, coupling};
  PeriodicOrbit base = orbit.h == opts.h
                           ? orbit
                           : polish_orbit(orbit, U, opts.h, coupling);
  FloquetInfo fl = floquet(base, U, coupling);
  if (!fl.hyperbolic) throw std::invalid_argument("orbit lost hyperbolicity on this grid");

  SectionChart chart;
  chart.sys = &sys;
  chart.sec = base.section;
  chart.energy = base.energy;
  chart.idx = chart.sec.angle_like() ? (chart.sec.ntheta[0] != 0 ? 0 : 1)
                                     : (chart.sec.nr[0] != 0 ? 0 : 1);
  chart.hint = base.anchor[chart.other()];

  Vec<2> u_star = chart.project(base.anchor);
  Vec<2> v = side == ManifoldSide::unstable ? fl.dir_u : fl.dir_s;
  int time_sign = side == ManifoldSide::unstable ? +1 : -1;

  detail::CurveGrower grower{sys, chart, base.c, time_sign, opts,
                             {},  {},    base.energy,
                             chart.sec.angle_like()
                                 ? std::max<std::size_t>(1, std::size_t(std::abs(base.c[chart.idx])))
                                 : 1};
  grower.p0 = u_star + (branch * opts.d0) * v;
  State<2> x1 = grower.apply(chart.embed(grower.p0));
  grower.p1 = chart.project(x1);

  // parameter list with cached curve points
  struct Node {
    double t;
    Vec<2> u;
    State<2> x;
  };
  std::vector<Node> nodes;
  auto make = [&](double t) {
    State<2> x = grower.eval(t);
    return Node{t, chart.project(x), x};
  };
  nodes.push_back({0.0, grower.p0, chart.embed(grower.p0)});
  nodes.push_back({1.0, grower.p1, x1});

  ManifoldCurve out;
  out.side = side;
  out.branch = branch;
  out.section = chart.sec;
  out.energy = base.energy;

  double length = 0;
  std::size_t i = 0;
  std::size_t depth_budget_hits = 0;
  while (length < L && nodes.size() < opts.max_points) {
    if (i + 1 >= nodes.size()) {
      // extend by one more level: map the fundamental segment forward
      double t_last = nodes.back().t;
      if (t_last > 60) break;  // safety: arclength target unreachable
      try {
        nodes.push_back(make(t_last + 1.0));
      } catch (const std::runtime_error&) {
        out.truncated = true;
        break;
      }
      continue;
    }
    const Node& a = nodes[i];
    const Node& b = nodes[i + 1];
    Vec<2> d = b.u - a.u;
    double gap = norm(d);
    bool need_split = gap > opts.ds;
    if (!need_split && i + 2 < nodes.size()) {
      Vec<2> d2 = nodes[i + 2].u - b.u;
      double cosang = dot(d, d2) / (norm(d) * norm(d2) + 1e-300);
      if (cosang < std::cos(opts.max_turn) && gap > 1e-9) need_split = true;
    }
    if (need_split) {
      double span = b.t - a.t;
      if (span < std::ldexp(1.0, -int(opts.max_depth))) {
        ++depth_budget_hits;
        if (gap > 10 * opts.ds)
          throw FoldTooSharp("refinement depth exhausted with gap " + std::to_string(gap));
        // give up on this gap, accept the chord
      } else {
        try {
          Node mid = make(0.5 * (a.t + b.t));
          nodes.insert(nodes.begin() + i + 1, mid);
          continue;
        } catch (const std::runtime_error&) {
          out.truncated = true;
          break;
        }
      }
    }
    length += gap;
    ++i;
  }

  if (length < L) out.truncated = true;
  out.chart.reserve(i + 1);
  out.states.reserve(i + 1);
  for (std::size_t k = 0; k <= i && k < nodes.size(); ++k) {
    out.chart.push_back(nodes[k].u);
    out.states.push_back(nodes[k].x);
  }
  out.arclength = length;
  out.max_raw_defect = grower.max_raw_defect;
  return out;
}

struct HomoclinicOpts {
  double L = 12.0;
  ManifoldOpts curve{};
  double angle_min = 1e-4;
  double sep_tol = 1e-3;
  double exclude_radius = 1e-3;  // ignore the trivial meeting at the orbit
};

namespace detail {

// both chart kinds carry an angle in component 0; fold it into the 2pi window
// centered at the orbit so curves with different winding histories can meet
inline std::vector<Vec<2>> wrap_chart(const std::vector<Vec<2>>& pts, double center) {
  std::vector<Vec<2>> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    out[i] = {{center + angle_diff(pts[i][0], center), pts[i][1]}};
  return out;
}

inline bool segments_cross(const Vec<2>& a0, const Vec<2>& a1, const Vec<2>& b0,
                           const Vec<2>& b1, double& s, double& t) {
  Mat<2> A;
  A(0, 0) = a1[0] - a0[0];
  A(0, 1) = -(b1[0] - b0[0]);
  A(1, 0) = a1[1] - a0[1];
  A(1, 1) = -(b1[1] - b0[1]);
  Vec<2> rhs{{b0[0] - a0[0], b0[1] - a0[1]}};
  double dd = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
  if (std::abs(dd) < 1e-18) return false;
  s = (rhs[0] * A(1, 1) - A(0, 1) * rhs[1]) / dd;
  t = (A(0, 0) * rhs[1] - rhs[0] * A(1, 0)) / dd;
  return s >= 0 && s < 1 && t >= 0 && t < 1;
}

// Intersect a set of unstable curves with a set of stable curves inside one
// section and energy level. Shared by homoclinic (one orbit) and heteroclinic
// (two orbits) detection; `exclude` lists the orbit chart points whose
// trivial neighborhood meetings are ignored.
inline std::vector<HomoclinicWitness> intersect_curve_sets(
    MechanicalSystem<2>& sys, const std::vector<ManifoldCurve>& wu,
    const std::vector<ManifoldCurve>& ws, double wrap_center,
    const std::vector<Vec<2>>& exclude, double energy, const Section& section,
    const HomoclinicOpts& opts) {
  std::vector<HomoclinicWitness> hits;
  bool saw_tangential = false;
  for (const auto& cu : wu)
    for (const auto& cs : ws) {
      auto pu = wrap_chart(cu.chart, wrap_center);
      auto ps = wrap_chart(cs.chart, wrap_center);
      for (std::size_t a = 0; a + 1 < pu.size(); ++a) {
        if (std::abs(pu[a + 1][0] - pu[a][0]) > 3.0) continue;  // window seam
        for (std::size_t b = 0; b + 1 < ps.size(); ++b) {
          if (std::abs(ps[b + 1][0] - ps[b][0]) > 3.0) continue;
          double s, t;
          if (!segments_cross(pu[a], pu[a + 1], ps[b], ps[b + 1], s, t)) continue;
          Vec<2> p = (1 - s) * pu[a] + s * pu[a + 1];
          bool near_orbit = false;
          for (const auto& ex : exclude)
            if (norm(p - Vec<2>{{wrap_center + angle_diff(ex[0], wrap_center), ex[1]}}) <
                opts.exclude_radius)
              near_orbit = true;
          if (near_orbit) continue;
          Vec<2> du = pu[a + 1] - pu[a];
          Vec<2> dv = ps[b + 1] - ps[b];
          double cross = du[0] * dv[1] - du[1] * dv[0];
          double ang = std::asin(std::min(
              1.0, std::abs(cross) / (norm(du) * norm(dv) + 1e-300)));
          if (ang < opts.angle_min) {
            saw_tangential = true;
            continue;
          }
          HomoclinicWitness w;
          w.energy = energy;
          w.section = section;
          w.chart_point = p;
          // the endpoints are on-curve states, so the chord is on the manifold
          // to second order; the level projection removes the quadratic defect
          for (int k = 0; k < 4; ++k)
            w.state[k] = (1 - s) * cu.states[a][k] + s * cu.states[a + 1][k];
          w.state[0] = reduce_angle(w.state[0]);
          w.state[1] = reduce_angle(w.state[1]);
          project_to_level(sys, w.state, energy);
          w.angle = ang;
          w.branch_u = cu.branch;
          w.branch_s = cs.branch;
          hits.push_back(w);
        }
      }
    }

  if (hits.empty()) {
    if (saw_tangential) throw OnlyTangential("every curve intersection is tangential");
    throw NoIntersection("no stable/unstable intersection within the explored arclength");
  }

  std::sort(hits.begin(), hits.end(), [](const HomoclinicWitness& a,
                                         const HomoclinicWitness& b) {
    return a.angle > b.angle;
  });
  std::vector<HomoclinicWitness> out;
  for (auto& w : hits) {
    bool fresh = true;
    for (const auto& kept : out)
      if (norm(w.chart_point - kept.chart_point) < opts.sep_tol) {
        fresh = false;
        break;
      }
    if (fresh) {
      w.pair_id = int(out.size());
      out.push_back(w);
    }
  }
  return out;
}

inline Vec<2> orbit_chart_point(MechanicalSystem<2>& sys, const PeriodicOrbit& orbit) {
  SectionChart chart;
  chart.sys = &sys;
  chart.sec = orbit.section;
  chart.energy = orbit.energy;
  chart.idx = chart.sec.angle_like() ? (chart.sec.ntheta[0] != 0 ? 0 : 1)
                                     : (chart.sec.nr[0] != 0 ? 0 : 1);
  chart.hint = orbit.anchor[chart.other()];
  return chart.project(orbit.anchor);
}

}  // namespace detail

// Transverse intersections of the unstable and stable curves of one orbit,
// both branches against both branches, geometrically distinct points tagged
// with distinct pair ids.
inline std::vector<HomoclinicWitness> find_homoclinic(const PeriodicOrbit& orbit,
                                                      const TrigPotential& U,
                                                      const HomoclinicOpts& opts = {},
                                                      double coupling = 1.0) {
  std::vector<ManifoldCurve> wu, ws;
  for (int br : {+1, -1}) {
    wu.push_back(manifold_curve(orbit, U, ManifoldSide::unstable, br, opts.L, opts.curve,
                                coupling));
    ws.push_back(manifold_curve(orbit, U, ManifoldSide::stable, br, opts.L, opts.curve,
                                coupling));
  }
  MechanicalSystem<2> sys{U, coupling};
  Vec<2> u_star = detail::orbit_chart_point(sys, orbit);
  return detail::intersect_curve_sets(sys, wu, ws, u_star[0], {u_star}, orbit.energy,
                                      orbit.section, opts);
}

// Transverse intersections W^u(a) against W^s(b) for two orbits sharing a
// section and an energy level (a chain edge, one way). The symmetric edge is
// the same call with the orbits swapped.
inline std::vector<HomoclinicWitness> find_heteroclinic(const PeriodicOrbit& a,
                                                        const PeriodicOrbit& b,
                                                        const TrigPotential& U,
                                                        const HomoclinicOpts& opts = {},
                                                        double coupling = 1.0) {
  if (std::abs(a.energy - b.energy) > 1e-9)
    throw std::invalid_argument("heteroclinic orbits must share an energy level");
  if (std::abs(a.section.value - b.section.value) > 1e-12 ||
      a.section.direction != b.section.direction ||
      norm(a.section.ntheta - b.section.ntheta) + norm(a.section.nr - b.section.nr) != 0)
    throw std::invalid_argument("heteroclinic orbits must share a section");
  std::vector<ManifoldCurve> wu, ws;
  for (int br : {+1, -1}) {
    wu.push_back(manifold_curve(a, U, ManifoldSide::unstable, br, opts.L, opts.curve,
                                coupling));
    ws.push_back(manifold_curve(b, U, ManifoldSide::stable, br, opts.L, opts.curve,
                                coupling));
  }
  MechanicalSystem<2> sys{U, coupling};
  Vec<2> ua = detail::orbit_chart_point(sys, a);
  Vec<2> ub = detail::orbit_chart_point(sys, b);
  return detail::intersect_curve_sets(sys, wu, ws, ua[0], {ua, ub}, a.energy, a.section,
                                      opts);
}

}  // namespace hdl
