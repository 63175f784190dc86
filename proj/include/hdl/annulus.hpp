#pragma once

// Energy continuation of periodic-orbit families. An annulus is the branch a
// single hyperbolic seed sweeps out when continued in e: one orbit per
// accepted energy, a frequency table omega(e) = 2 pi / T(e), and branch
// endpoints bisected to 1e-6 where Newton fails or hyperbolicity is lost.

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hdl/orbit.hpp"

namespace hdl {

struct SeedFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyResult : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FreqSample {
  double e;
  double omega;
};

// A located intersection of invariant-manifold curves inside a section. The
// same record describes homoclinic points (both curves from one orbit) and
// heteroclinic points (curves from two orbits of a chain edge). It lives here
// rather than with the curve machinery so annuli can carry their covers.
struct HomoclinicWitness {
  double energy = 0;
  Section section;
  Vec<2> chart_point{};   // section-chart coordinates of the crossing
  State<2> state{};       // phase-space point on the energy level
  double angle = 0;       // transversality angle in radians
  int pair_id = 0;        // geometrically distinct witnesses get distinct ids
  int branch_u = 0, branch_s = 0;  // which curve branches crossed
};

// One subinterval I_i* of a homoclinic cover, with the witnesses certifying
// it on a finite energy grid.
struct CoverInterval {
  double e_lo = 0, e_hi = 0;
  std::vector<double> grid;
  std::vector<HomoclinicWitness> witnesses;  // at least one per grid energy
};

struct Annulus {
  HomologyClass c{0, 0};
  double e_lo = 0, e_hi = 0;
  bool closed_lo = true, closed_hi = true;
  std::vector<PeriodicOrbit> orbits;  // ascending in e
  double mu_min = 0;                  // min |d omega / d e| over the table
  int slope_sign = 0;                 // 0 if the sign is not uniform

  // consecutive intervals overlap, non-adjacent ones are disjoint; how fine
  // the certification grid is has no canonical answer, so it is data
  std::vector<CoverInterval> homoclinic_cover;
  double cover_grid_spacing = 0;

  bool contains(double e) const { return e >= e_lo && e <= e_hi; }

  const PeriodicOrbit& orbit_near(double e) const {
    if (orbits.empty()) throw std::logic_error("annulus has no orbits");
    auto it = std::lower_bound(orbits.begin(), orbits.end(), e,
                               [](const PeriodicOrbit& o, double v) { return o.energy < v; });
    if (it == orbits.end()) return orbits.back();
    if (it != orbits.begin() && e - std::prev(it)->energy < it->energy - e) --it;
    return *it;
  }

  double omega(double e) const {
    if (orbits.size() < 2) throw std::logic_error("frequency table needs two samples");
    auto it = std::lower_bound(orbits.begin(), orbits.end(), e,
                               [](const PeriodicOrbit& o, double v) { return o.energy < v; });
    if (it == orbits.begin()) ++it;
    if (it == orbits.end()) --it;
    const auto& b = *it;
    const auto& a = *std::prev(it);
    double w = (e - a.energy) / (b.energy - a.energy);
    return (1 - w) * two_pi / a.period + w * two_pi / b.period;
  }

  std::vector<FreqSample> freq_table() const {
    std::vector<FreqSample> t;
    t.reserve(orbits.size());
    for (const auto& o : orbits) t.push_back({o.energy, two_pi / o.period});
    return t;
  }
};

struct ContinuationPolicy {
  double de_init = 0.5;
  double de_min = 1e-7;
  double de_max = 2.0;
  double grow = 1.4;
  double shrink = 0.35;
  double endpoint_tol = 1e-6;
  std::size_t max_orbits = 4000;
  OrbitOpts orbit{};
};

namespace detail {

inline void annulus_freq_stats(Annulus& a) {
  a.slope_sign = 0;
  a.mu_min = 0;
  if (a.orbits.size() < 2) return;
  double worst = std::numeric_limits<double>::infinity();
  int sign = 0;
  bool uniform = true;
  for (std::size_t i = 0; i + 1 < a.orbits.size(); ++i) {
    double de = a.orbits[i + 1].energy - a.orbits[i].energy;
    double dw = two_pi / a.orbits[i + 1].period - two_pi / a.orbits[i].period;
    double slope = dw / de;
    int s = slope > 0 ? 1 : (slope < 0 ? -1 : 0);
    if (sign == 0) sign = s;
    if (s != sign || s == 0) uniform = false;
    worst = std::min(worst, std::abs(slope));
  }
  a.slope_sign = uniform ? sign : 0;
  a.mu_min = worst;
}

}  // namespace detail

// Continue the family of class c from a seed at e_from toward e_to (either
// direction). The seed's section is reused for the whole branch so chart
// coordinates stay comparable between energies.
inline Annulus continue_annulus(const TrigPotential& U, HomologyClass c, double e_from,
                                double e_to, const State<2>& seed_guess,
                                const ContinuationPolicy& pol = {}, double coupling = 1.0) {
  if (e_to == e_from) throw std::invalid_argument("continue_annulus: need e_to != e_from");
  const double dir = e_to > e_from ? 1.0 : -1.0;
  PeriodicOrbit seed;
  try {
    seed = find_periodic_orbit(U, c, e_from, seed_guess, pol.orbit, coupling);
  } catch (const std::runtime_error& ex) {
    throw SeedFailed(std::string("seed orbit failed: ") + ex.what());
  }
  if (!seed.hyperbolic)
    throw EmptyResult("seed orbit is not hyperbolic; no annulus on this branch");

  OrbitOpts opts = pol.orbit;
  opts.section = &seed.section;

  std::vector<PeriodicOrbit> branch{seed};  // ordered as marched
  auto attempt = [&](double e, const State<2>& guess, PeriodicOrbit& out) {
    try {
      out = find_periodic_orbit(U, c, e, guess, opts, coupling);
      return out.hyperbolic;
    } catch (const std::runtime_error&) {
      return false;
    }
  };
  auto predict = [&](double e) {
    const PeriodicOrbit& last = branch.back();
    State<2> g = last.anchor;
    if (branch.size() >= 2) {
      const PeriodicOrbit& prev = branch[branch.size() - 2];
      double w = (e - last.energy) / (prev.energy - last.energy + 1e-300);
      // anchors are wrapped representatives: a crossing at theta = 0 may be
      // stored as 0 or as 2 pi, so extrapolate angles through the seam
      for (int i = 0; i < 2; ++i)
        g[i] = last.anchor[i] + w * angle_diff(prev.anchor[i], last.anchor[i]);
      for (int i = 2; i < 4; ++i)
        g[i] = last.anchor[i] + w * (prev.anchor[i] - last.anchor[i]);
    }
    return g;
  };

  double de = pol.de_init;
  while (branch.size() < pol.max_orbits && dir * (e_to - branch.back().energy) > 0) {
    double e_cur = branch.back().energy;
    de = std::min({de, pol.de_max, std::abs(e_to - e_cur)});
    double e_next = e_cur + dir * de;
    PeriodicOrbit next;
    if (attempt(e_next, predict(e_next), next)) {
      branch.push_back(next);
      de *= pol.grow;
      continue;
    }
    if (de > pol.de_min) {
      de *= pol.shrink;
      continue;
    }
    // branch endpoint: bisect between the last success and the failure
    double good = e_cur, bad = e_next;
    while (std::abs(good - bad) > pol.endpoint_tol) {
      double mid = 0.5 * (good + bad);
      PeriodicOrbit probe;
      if (attempt(mid, predict(mid), probe)) {
        branch.push_back(probe);
        good = mid;
      } else {
        bad = mid;
      }
    }
    break;
  }

  Annulus a;
  a.c = c;
  a.orbits = std::move(branch);
  std::sort(a.orbits.begin(), a.orbits.end(),
            [](const PeriodicOrbit& x, const PeriodicOrbit& y) { return x.energy < y.energy; });
  a.e_lo = a.orbits.front().energy;
  a.e_hi = a.orbits.back().energy;
  detail::annulus_freq_stats(a);
  return a;
}

// Restriction of a family to the stored orbits inside [lo, hi]. Lifts and
// chain edges work on energy windows, not on whole branches.
inline Annulus annulus_slice(const Annulus& a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("annulus_slice: lo > hi");
  Annulus s;
  s.c = a.c;
  for (const auto& o : a.orbits)
    if (o.energy >= lo - 1e-12 && o.energy <= hi + 1e-12) s.orbits.push_back(o);
  if (s.orbits.size() < 2)
    throw EmptyResult("annulus_slice: fewer than two stored orbits in the window");
  s.e_lo = s.orbits.front().energy;
  s.e_hi = s.orbits.back().energy;
  detail::annulus_freq_stats(s);
  return s;
}

// Concatenate two branches of the same class into one annulus (used when a
// family is swept from a seed in both directions).
inline Annulus merge_annuli(const Annulus& lo, const Annulus& hi) {
  if (lo.c != hi.c) throw std::invalid_argument("merge_annuli: classes differ");
  Annulus a;
  a.c = lo.c;
  a.orbits = lo.orbits;
  for (const auto& o : hi.orbits) {
    if (!a.orbits.empty() && o.energy <= a.orbits.back().energy + 1e-12) continue;
    a.orbits.push_back(o);
  }
  std::sort(a.orbits.begin(), a.orbits.end(),
            [](const PeriodicOrbit& x, const PeriodicOrbit& y) { return x.energy < y.energy; });
  a.e_lo = a.orbits.front().energy;
  a.e_hi = a.orbits.back().energy;
  detail::annulus_freq_stats(a);
  return a;
}

}  // namespace hdl
