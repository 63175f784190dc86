#pragma once

// Lifting classical families to invariant cylinders of the three-degree
// system on the shell H = e_tot: a classical orbit at energy e, crossed with
// the free angle and the constant action r1 = +-sqrt(2(e_tot - e)), is an
// invariant 2-torus, and a one-parameter family of them is a cylinder. Three
// shapes appear: signed cylinders over a rotation family that stays below
// e_tot, a ramified cylinder whose leaf parameter is the signed r1 itself so
// it crosses r1 = 0 through the orbit at e = e_tot, and singular cylinders
// over a separatrix annulus, whose leaves pass energy through the radical
// pointwise because the base families straddle turning points. The action
// rescale sigma_a connects shells: it is the group action under which the
// slow system's flow over sqrt(n) t matches the unit-coupling flow over t.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdl/chain.hpp"
#include "hdl/singular.hpp"

namespace hdl {

struct RadicandNegative : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoneFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// sigma_a: angles fixed, actions scaled by a. Energies pick up a^2 provided
// the coupling does too; apply_rescale keeps that bookkeeping straight.
struct RescaleMap {
  double factor = 1.0;

  State<3> operator()(State<3> x) const {
    for (int i = 3; i < 6; ++i) x[i] *= factor;
    return x;
  }
  PhasePoint<3> operator()(PhasePoint<3> p) const {
    for (int i = 0; i < 3; ++i) p.r[i] *= factor;
    return p;
  }
  RescaleMap inverse() const { return {1.0 / factor}; }
};

// One invariant leaf: the base orbit at classical energy e times the free
// circle, pinned at r1 = +-sqrt(2(e_tot - e)). Anchors are a phi1-major grid
// (all of row phi1 = 0 first), so action projections read the leading row.
struct Torus2 {
  std::string cyl;            // label of the owning cylinder
  double param = 0;           // leaf coordinate along the cylinder
  bool action_param = false;  // param is the signed r1, not an energy
  double e = 0;               // classical energy of the base leaf
  HomologyClass family{0, 0};
  Vec<2> omega{};  // (r1 rate = sqrt(2(e_tot - e)), base orbit frequency)
  bool minimal = false;
  std::vector<State<3>> anchors;
};

enum class CylKind { circle_plus, circle_minus, ramified, singular_plus, singular_minus };

struct Cylinder {
  CylKind kind = CylKind::circle_plus;
  ResonanceClass k{1, 0};
  HomologyClass base{0, 0};  // class of the base family
  double e_tot = 0;
  double coupling = 1.0;
  double scale = 1.0;  // cumulative rescale factor applied so far
  double param_lo = 0, param_hi = 0;
  std::size_t leaf_samples = 0;  // anchors per phi1 row
  std::vector<Torus2> leaves;    // ascending param
  std::vector<State<3>> separatrix;
  std::string label;
};

struct LiftOpts {
  std::size_t n_phi1 = 6;
  std::size_t n_phi2 = 72;
  OrbitOpts orbit{};  // used when a lift has to solve an orbit of its own
};

inline constexpr int default_q_max = 50;
inline constexpr double default_exclusion = 1e-3;

// min over q <= q_max of q^3 |rho - p/q|; negative marks an unusable ratio.
inline double diophantine_margin(double rho, int q_max = default_q_max) {
  if (!std::isfinite(rho)) return -1.0;
  double worst = std::numeric_limits<double>::infinity();
  for (int q = 1; q <= q_max; ++q) {
    double p = std::round(rho * q);
    worst = std::min(worst, double(q) * q * q * std::abs(rho - p / q));
  }
  return worst;
}

// The resonance a class spans: c advances along the half circle of the
// primitive k with (k3, -k2) parallel to c.
inline ResonanceClass class_to_resonance(const HomologyClass& c) {
  int g = std::gcd(std::abs(c[0]), std::abs(c[1]));
  if (g == 0) throw std::invalid_argument("class_to_resonance: the zero class spans none");
  return ResonanceClass(-c[1] / g, c[0] / g);
}

namespace detail {

// One period of the stored orbit in n equal time chunks. Deterministic: the
// stepper and step size are the ones the orbit was converged with.
inline std::vector<State<2>> orbit_samples(const MechanicalSystem<2>& sys,
                                           const PeriodicOrbit& o, std::size_t n) {
  std::vector<State<2>> out;
  out.reserve(n);
  State<2> x = o.anchor;
  double chunk = o.period / double(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(x);
    x = flow_mechanical(sys, x, chunk, o.h);
  }
  return out;
}

// Pull a drifted sample back onto C = e by scaling the momentum. Away from
// turning points 2(e - V) stays positive, so the scale is well conditioned;
// families with turning points go through the radical lift instead.
inline State<2> project_sample(const MechanicalSystem<2>& sys, State<2> x, double e) {
  double k2 = x[2] * x[2] + x[3] * x[3];
  double need = 2.0 * (e - sys.V(x));
  if (!(need > 0.0) || !(k2 > 0.0))
    throw std::domain_error("sample projection degenerate at a turning point");
  double s = std::sqrt(need / k2);
  x[2] *= s;
  x[3] *= s;
  return x;
}

inline void set_minimal_flag(Torus2& leaf) {
  leaf.minimal =
      leaf.omega[0] > 0 &&
      diophantine_margin(leaf.omega[1] / leaf.omega[0]) >= default_exclusion;
}

// Assemble the phi1-major anchor grid from classical samples and per-sample
// r1 values (constant across the grid's phi1 rows).
inline void pack_anchors(Torus2& leaf, const std::vector<State<2>>& base,
                         const std::vector<double>& r1, std::size_t n_phi1) {
  leaf.anchors.reserve(n_phi1 * base.size());
  for (std::size_t i = 0; i < n_phi1; ++i) {
    double phi1 = two_pi * double(i) / double(n_phi1);
    for (std::size_t j = 0; j < base.size(); ++j) {
      State<3> s;
      s[0] = phi1;
      s[1] = reduce_angle(base[j][0]);
      s[2] = reduce_angle(base[j][1]);
      s[3] = r1[j];
      s[4] = base[j][2];
      s[5] = base[j][3];
      leaf.anchors.push_back(s);
    }
  }
}

// Product leaf over an orbit strictly below the shell: samples projected
// back to C = e, r1 the leaf constant, so H = e_tot holds exactly.
inline Torus2 circle_leaf(const MechanicalSystem<2>& sys, const PeriodicOrbit& o,
                          double e_tot, int sign, const LiftOpts& opts,
                          HomologyClass family, const std::string& cyl) {
  Torus2 leaf;
  leaf.cyl = cyl;
  leaf.e = o.energy;
  leaf.family = family;
  leaf.omega = {std::sqrt(std::max(0.0, 2.0 * (e_tot - o.energy))), two_pi / o.period};
  auto base = orbit_samples(sys, o, opts.n_phi2);
  for (auto& b : base) b = project_sample(sys, b, o.energy);
  std::vector<double> r1(base.size(), double(sign) * leaf.omega[0]);
  pack_anchors(leaf, base, r1, opts.n_phi1);
  set_minimal_flag(leaf);
  return leaf;
}

}  // namespace detail

// Signed cylinder over a rotation family kept strictly inside ]0, e_tot[.
inline Cylinder lift_regular(const TrigPotential& U, const Annulus& a, int sign,
                             double e_tot, const ResonanceClass& k,
                             const LiftOpts& opts = {}, double coupling = 1.0) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("lift_regular: sign must be +-1");
  if (a.orbits.empty()) throw std::invalid_argument("lift_regular: empty base family");
  if (!(a.e_lo > 0.0) || !(a.e_hi < e_tot))
    throw RadicandNegative("lift_regular: base interval must sit inside ]0, e_tot[");
  MechanicalSystem<2> sys{U, coupling};
  Cylinder c;
  c.kind = sign > 0 ? CylKind::circle_plus : CylKind::circle_minus;
  c.k = k;
  c.base = a.c;
  c.e_tot = e_tot;
  c.coupling = coupling;
  c.param_lo = a.e_lo;
  c.param_hi = a.e_hi;
  c.leaf_samples = opts.n_phi2;
  c.label = sign > 0 ? "circle+" : "circle-";
  for (const auto& o : a.orbits) {
    Torus2 leaf = detail::circle_leaf(sys, o, e_tot, sign, opts, a.c, c.label);
    leaf.param = o.energy;
    c.leaves.push_back(std::move(leaf));
  }
  return c;
}

// Ramified cylinder: leaf parameter is the signed r1, so the two sheets over
// ]e_P, e_tot[ glue through the crossing leaf at r1 = 0, whose base orbit
// rides C = e_tot itself.
inline Cylinder lift_zero(const TrigPotential& U, const Annulus& a, double e_tot,
                          const ResonanceClass& k, const LiftOpts& opts = {},
                          double coupling = 1.0) {
  if (a.orbits.size() < 2) throw std::invalid_argument("lift_zero: need a base family table");
  if (!(a.e_lo > 0.0)) throw RadicandNegative("lift_zero: base family must sit above C = 0");
  if (!(e_tot > a.e_lo))
    throw RadicandNegative("lift_zero: shell energy at or below the family's bottom");
  MechanicalSystem<2> sys{U, coupling};
  Cylinder c;
  c.kind = CylKind::ramified;
  c.k = k;
  c.base = a.c;
  c.e_tot = e_tot;
  c.coupling = coupling;
  c.leaf_samples = opts.n_phi2;
  c.label = "ramified";
  double rim = std::sqrt(2.0 * (e_tot - a.e_lo));
  c.param_lo = -rim;
  c.param_hi = rim;
  for (const auto& o : a.orbits) {
    if (!(o.energy < e_tot - 1e-9)) continue;
    double r1 = std::sqrt(2.0 * (e_tot - o.energy));
    for (int sign : {-1, 1}) {
      Torus2 leaf = detail::circle_leaf(sys, o, e_tot, sign, opts, a.c, c.label);
      leaf.param = double(sign) * r1;
      leaf.action_param = true;
      c.leaves.push_back(std::move(leaf));
    }
  }
  // crossing leaf: solve the family at the shell energy itself
  PeriodicOrbit top = annulus_orbit_at(U, a, e_tot, opts.orbit, coupling);
  {
    Torus2 leaf;
    leaf.cyl = c.label;
    leaf.param = 0.0;
    leaf.action_param = true;
    leaf.e = top.energy;
    leaf.family = a.c;
    leaf.omega = {std::sqrt(std::max(0.0, 2.0 * (e_tot - top.energy))), two_pi / top.period};
    auto base = detail::orbit_samples(sys, top, opts.n_phi2);
    for (auto& b : base) b = detail::project_sample(sys, b, e_tot);
    std::vector<double> r1(base.size(), 0.0);
    detail::pack_anchors(leaf, base, r1, opts.n_phi1);
    detail::set_minimal_flag(leaf);
    c.leaves.push_back(std::move(leaf));
  }
  std::stable_sort(c.leaves.begin(), c.leaves.end(),
                   [](const Torus2& x, const Torus2& y) { return x.param < y.param; });
  return c;
}

// Singular cylinder over a separatrix annulus: three base families (the two
// rotation signs and the libration core) plus the lifted separatrix pair.
// The base orbits graze turning points, so each sample carries its own
// radical r1 = sign sqrt(2(e_tot - C)); the shell identity is then exact no
// matter how the sample's classical energy drifted.
inline Cylinder lift_singular(const TrigPotential& U, const SingularAnnulus& sa, int sign,
                              double e_tot, const LiftOpts& opts = {},
                              double coupling = 1.0) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("lift_singular: sign must be +-1");
  if (!(e_tot > sa.e_tilde))
    throw RadicandNegative("lift_singular: shell energy inside the sub-annulus range");
  MechanicalSystem<2> sys{U, coupling};
  Cylinder c;
  c.kind = sign > 0 ? CylKind::singular_plus : CylKind::singular_minus;
  c.k = class_to_resonance(sa.c_sep);
  c.base = sa.c_sep;
  c.e_tot = e_tot;
  c.coupling = coupling;
  c.leaf_samples = opts.n_phi2;
  c.label = sign > 0 ? "singular+" : "singular-";

  auto radical = [&](const State<2>& b) {
    double rad = 2.0 * (e_tot - sys.energy(b));
    if (!(rad > 0.0)) throw RadicandNegative("lift_singular: sample energy reaches the shell");
    return double(sign) * std::sqrt(rad);
  };
  auto add_family = [&](const Annulus& a, HomologyClass family) {
    for (const auto& o : a.orbits) {
      Torus2 leaf;
      leaf.cyl = c.label;
      leaf.param = o.energy;
      leaf.e = o.energy;
      leaf.family = family;
      leaf.omega = {std::sqrt(std::max(0.0, 2.0 * (e_tot - o.energy))), two_pi / o.period};
      auto base = detail::orbit_samples(sys, o, opts.n_phi2);
      std::vector<double> r1;
      r1.reserve(base.size());
      for (const auto& b : base) r1.push_back(radical(b));
      detail::pack_anchors(leaf, base, r1, opts.n_phi1);
      detail::set_minimal_flag(leaf);
      c.leaves.push_back(std::move(leaf));
    }
  };
  add_family(sa.sub_gt, sa.c_sep);
  add_family(sa.sub_lt, {-sa.c_sep[0], -sa.c_sep[1]});
  add_family(sa.sub_0, {0, 0});
  std::stable_sort(c.leaves.begin(), c.leaves.end(),
                   [](const Torus2& x, const Torus2& y) { return x.param < y.param; });
  c.param_lo = c.leaves.front().param;
  c.param_hi = c.leaves.back().param;

  for (const Separatrix* s : {&sa.sep_plus, &sa.sep_minus})
    for (const auto& b : s->trace) {
      State<3> p;
      p[0] = 0.0;
      p[1] = reduce_angle(b[0]);
      p[2] = reduce_angle(b[1]);
      p[3] = radical(b);
      p[4] = b[2];
      p[5] = b[3];
      c.separatrix.push_back(p);
    }
  return c;
}

inline State<3> apply_rescale(const State<3>& x, double a) { return RescaleMap{a}(x); }
inline PhasePoint<3> apply_rescale(const PhasePoint<3>& p, double a) {
  return RescaleMap{a}(p);
}

inline Torus2 apply_rescale(Torus2 t, double a) {
  if (!(a > 0)) throw std::invalid_argument("apply_rescale: factor must be positive");
  t.param *= t.action_param ? a : a * a;
  t.e *= a * a;
  t.omega[0] *= a;
  t.omega[1] *= a;
  RescaleMap m{a};
  for (auto& s : t.anchors) s = m(s);
  return t;  // the rotation number is scale-free, so the minimal flag stands
}

inline Cylinder apply_rescale(Cylinder c, double a) {
  if (!(a > 0)) throw std::invalid_argument("apply_rescale: factor must be positive");
  c.e_tot *= a * a;
  c.coupling *= a * a;
  c.scale *= a;
  double pf = c.kind == CylKind::ramified ? a : a * a;
  c.param_lo *= pf;
  c.param_hi *= pf;
  for (auto& leaf : c.leaves) leaf = apply_rescale(std::move(leaf), a);
  RescaleMap m{a};
  for (auto& s : c.separatrix) s = m(s);
  return c;
}

// Fill count slots across the parameter interval with tori whose rotation
// number clears the q^3 margin; scanning outward from each slot center keeps
// the result eps-dense with eps = interval length / count.
inline std::vector<Torus2> minimal_tori(const Cylinder& c, std::size_t count,
                                        double exclusion = default_exclusion,
                                        int q_max = default_q_max) {
  if (c.leaves.size() < 2) throw std::invalid_argument("minimal_tori: need a leaf table");
  if (count == 0) throw std::invalid_argument("minimal_tori: count must be positive");
  const double lo = c.param_lo, hi = c.param_hi, len = hi - lo;
  if (!(len > 0)) throw std::invalid_argument("minimal_tori: empty parameter interval");

  auto omega2_at = [&](double p) {
    const auto& ls = c.leaves;
    auto it = std::lower_bound(ls.begin(), ls.end(), p,
                               [](const Torus2& t, double v) { return t.param < v; });
    if (it == ls.begin()) ++it;
    if (it == ls.end()) --it;
    const Torus2& b = *it;
    const Torus2& a = *std::prev(it);
    double den = b.param - a.param;
    if (!(den > 0)) return a.omega[1];
    double w = (p - a.param) / den;
    return (1 - w) * a.omega[1] + w * b.omega[1];
  };
  auto family_at = [&](double p) {
    const auto& ls = c.leaves;
    auto it = std::lower_bound(ls.begin(), ls.end(), p,
                               [](const Torus2& t, double v) { return t.param < v; });
    if (it == ls.end()) --it;
    return it->family;
  };
  const bool ram = c.kind == CylKind::ramified;
  auto leaf_e = [&](double p) { return ram ? c.e_tot - 0.5 * p * p : p; };
  auto omega1_at = [&](double p) {
    return ram ? std::abs(p) : std::sqrt(std::max(0.0, 2.0 * (c.e_tot - p)));
  };

  std::vector<Torus2> out;
  out.reserve(count);
  const int steps = 160;
  for (std::size_t i = 0; i < count; ++i) {
    double center = lo + (double(i) + 0.5) * len / double(count);
    double radius = 0.45 * len / double(count);
    bool found = false;
    for (int s = 0; s <= steps && !found; ++s) {
      for (int pm : {1, -1}) {
        double p = center + pm * radius * double(s) / double(steps);
        double w1 = omega1_at(p);
        if (w1 > 0 && diophantine_margin(omega2_at(p) / w1, q_max) >= exclusion) {
          Torus2 t;
          t.cyl = c.label;
          t.param = p;
          t.action_param = ram;
          t.e = leaf_e(p);
          t.family = family_at(p);
          t.omega = {w1, omega2_at(p)};
          t.minimal = true;
          out.push_back(std::move(t));
          found = true;
        }
        if (found || s == 0) break;
      }
    }
    if (!found)
      throw NoneFound("minimal_tori: no parameter in the slot clears the exclusion");
  }
  return out;
}

// Action projection of one cylinder: the leading phi1 row of every leaf plus
// the separatrix samples, as (r1, r2, r3) points.
inline PointCloud action_projection(const Cylinder& c) {
  PointCloud out;
  out.tag = c.label;
  for (const auto& leaf : c.leaves) {
    std::size_t row = std::min<std::size_t>(c.leaf_samples, leaf.anchors.size());
    for (std::size_t j = 0; j < row; ++j) {
      const State<3>& s = leaf.anchors[j];
      out.points.push_back(Vec<3>{{s[3], s[4], s[5]}});
    }
  }
  for (const auto& s : c.separatrix) out.points.push_back(Vec<3>{{s[3], s[4], s[5]}});
  return out;
}

struct ProximityReport {
  ResonanceClass k{1, 0};
  double delta = 0;
  double excess = 0;        // worst projected point -> circle distance
  double coverage_gap = 0;  // worst circle point -> projection distance
  double distance = 0;      // Hausdorff: max of the two
  bool pass = false;
  std::size_t union_points = 0, circle_points = 0;
};

// Hausdorff distance between the pooled action projection and the resonance
// half circle. Meaningful on rescaled cylinders; on raw shells it reports
// how far off the unit sphere the data sits, and pass goes false.
inline ProximityReport proximity_report(const std::vector<Cylinder>& cyls,
                                        const ResonanceClass& k, double delta,
                                        std::size_t circle_samples = 512) {
  PointCloud u;
  u.tag = "cylinder union";
  for (const auto& c : cyls) {
    PointCloud p = action_projection(c);
    u.points.insert(u.points.end(), p.points.begin(), p.points.end());
  }
  if (u.points.empty()) throw std::invalid_argument("proximity_report: no projected points");
  PointCloud circle = resonance_half_circle(k, circle_samples);
  ProximityReport rep;
  rep.k = k;
  rep.delta = delta;
  rep.excess = directed_hausdorff(u, circle);
  rep.coverage_gap = directed_hausdorff(circle, u);
  rep.distance = std::max(rep.excess, rep.coverage_gap);
  rep.pass = rep.distance <= delta;
  rep.union_points = u.points.size();
  rep.circle_points = circle.points.size();
  return rep;
}

}  // namespace hdl
