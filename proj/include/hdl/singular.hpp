#pragma once

// The singular annulus: the lifted maximum O, a pair of opposite separatrix
// orbits shot from O's unstable plane, regular sub-annuli of classes +-c on
// ]0, e_tilde] continued toward the separatrix level, a class-0 sub-annulus
// of librations around the minimum on [e0, 0[, and near-separatrix homoclinic
// witnesses. The class realized by the separatrix pair is whatever the scan
// over the unstable plane finds; it is reported, never prescribed.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hdl/manifold.hpp"

namespace hdl {

struct SeparatrixEscapes : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Separatrix {
  double alpha = 0;             // direction in the unstable plane
  HomologyClass c{0, 0};        // winding of the loop
  std::vector<State<2>> trace;  // sampled along the loop, O to O
  double return_dist = 0;       // closest wrapped re-approach to O
  double t_loop = 0;            // time from leaving d0 to the re-approach
};

struct SingularAnnulus {
  State<2> origin{};  // O: the maximizer lifted with r = 0
  double e_hat = 0;
  double e_tilde = 0, e0 = 0;  // requested sub-annulus extents
  HomologyClass c_sep{0, 0};   // class of sep_plus; sep_minus realizes -c_sep
  Separatrix sep_plus, sep_minus;
  Annulus sub_gt, sub_lt;  // classes +-c_sep over ]0, e_tilde]
  Annulus sub_0;           // class 0 librations below the separatrix level
  // family frequencies continued to the bottom of the well (hyperbolicity not
  // required there; this is the data behind the linearization-limit check)
  std::vector<FreqSample> freq_to_min;
  double omega_min_limit = 0;  // Hessian mode frequency the trace approaches
  std::vector<HomoclinicWitness> witnesses;  // near-separatrix homoclinics
};

struct SingularOpts {
  double e_eps = 5e-3;    // how close the sub-annuli approach the singular level
  double d0 = 1e-7;       // shooting offset from O along the unstable plane
  double capture = 1e-5;  // accepted wrapped return distance for a separatrix
  double t_budget = 60;
  double h = 1e-3;       // shooting grid; the loops are short and tame
  int scan_n = 192;      // alpha grid resolution
  int trace_stride = 40;  // steps between stored separatrix samples
  int freq_trace_points = 8;
  double witness_e = 0.05;     // energy of the near-separatrix homoclinic scan
  bool scan_witnesses = true;  // the scan dominates the build; off when only
                               // the families and traces are needed
  ContinuationPolicy cont{};
  HomoclinicOpts hom{};
};

namespace detail {

inline double wrapped_dist(const State<2>& x, const State<2>& o) {
  double d0 = angle_diff(x[0], o[0]);
  double d1 = angle_diff(x[1], o[1]);
  double d2 = x[2] - o[2];
  double d3 = x[3] - o[3];
  return std::sqrt(d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3);
}

struct ShotResult {
  double min_dist = std::numeric_limits<double>::infinity();
  double t_min = 0;
  State<2> at_min{};  // lifted state at the closest approach
  bool left = false;
};

// Integrate from O + d0 * (unstable-plane direction alpha) and record the
// closest wrapped re-approach to O after the trajectory has once left the
// exit ball. Windings beyond +-2 in either angle count as an escape.
inline ShotResult shoot_unstable(const MechanicalSystem<2>& sys, const State<2>& origin,
                                 const Vec<4>& w1, const Vec<4>& w2, double alpha,
                                 const SingularOpts& opts) {
  State<2> x = origin;
  for (int i = 0; i < 4; ++i)
    x[i] += opts.d0 * (std::cos(alpha) * w1[i] + std::sin(alpha) * w2[i]);
  ShotResult res;
  const double r_exit = 0.5;
  const long nmax = long(std::ceil(opts.t_budget / opts.h));
  for (long k = 0; k < nmax; ++k) {
    strang_step(sys, x, opts.h);
    double d = wrapped_dist(x, origin);
    if (!res.left) {
      if (d > r_exit) res.left = true;
      continue;
    }
    if (d < res.min_dist) {
      res.min_dist = d;
      res.t_min = (k + 1) * opts.h;
      res.at_min = x;
    }
    if (std::abs(x[0] - origin[0]) > 5 * two_pi || std::abs(x[1] - origin[1]) > 5 * two_pi)
      break;  // wound off; nothing left to find on this ray
  }
  return res;
}

inline HomologyClass shot_winding(const ShotResult& r, const State<2>& origin) {
  return {int(std::lround((r.at_min[0] - origin[0]) / two_pi)),
          int(std::lround((r.at_min[1] - origin[1]) / two_pi))};
}

// Golden-section refinement of the re-approach distance over alpha.
inline double refine_alpha(const MechanicalSystem<2>& sys, const State<2>& origin,
                           const Vec<4>& w1, const Vec<4>& w2, double lo, double hi,
                           const SingularOpts& opts, ShotResult& best) {
  const double gr = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  ShotResult rc = shoot_unstable(sys, origin, w1, w2, c, opts);
  ShotResult rd = shoot_unstable(sys, origin, w1, w2, d, opts);
  while (b - a > 1e-13) {
    if (rc.min_dist < rd.min_dist) {
      b = d;
      d = c;
      rd = rc;
      c = b - gr * (b - a);
      rc = shoot_unstable(sys, origin, w1, w2, c, opts);
    } else {
      a = c;
      c = d;
      rc = rd;
      d = a + gr * (b - a);
      rd = shoot_unstable(sys, origin, w1, w2, d, opts);
    }
    if (std::min(rc.min_dist, rd.min_dist) < opts.capture * 1e-3) break;
  }
  best = rc.min_dist < rd.min_dist ? rc : rd;
  return rc.min_dist < rd.min_dist ? c : d;
}

inline Separatrix trace_separatrix(const MechanicalSystem<2>& sys, const State<2>& origin,
                                   const Vec<4>& w1, const Vec<4>& w2, double alpha,
                                   const ShotResult& shot, const SingularOpts& opts) {
  Separatrix sep;
  sep.alpha = alpha;
  sep.return_dist = shot.min_dist;
  sep.t_loop = shot.t_min;
  sep.c = shot_winding(shot, origin);
  State<2> x = origin;
  for (int i = 0; i < 4; ++i)
    x[i] += opts.d0 * (std::cos(alpha) * w1[i] + std::sin(alpha) * w2[i]);
  const long nmax = long(std::llround(shot.t_min / opts.h));
  sep.trace.push_back(x);
  for (long k = 0; k < nmax; ++k) {
    strang_step(sys, x, opts.h);
    if ((k + 1) % opts.trace_stride == 0 || k + 1 == nmax) sep.trace.push_back(x);
  }
  return sep;
}

// Turning-point guess for a class-0 libration: walk from the minimum toward
// the maximizer until the potential reaches e, and start there with r = 0.
// Turning point of the libration family that accumulates on the reported
// separatrix: walk from the maximum along the separatrix takeoff direction
// until the level e is crossed, then bisect. Anchoring the guess to the
// takeoff ray (not to a fixed line) keeps the family tied to the same
// channel the separatrix pair runs through.
inline State<2> libration_guess(const TrigPotential& U, const double x0[2],
                                const Vec<2>& takeoff, double e) {
  const double dw = 0.02;
  double w = dw;
  double prev = 0.0;
  for (; w < 2 * two_pi; w += dw) {
    if (U.eval(x0[0] + w * takeoff[0], x0[1] + w * takeoff[1]) < e) break;
    prev = w;
  }
  if (w >= 2 * two_pi)
    throw SeedFailed("takeoff ray never drops below the requested libration level");
  double lo = prev, hi = w;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double v = U.eval(x0[0] + mid * takeoff[0], x0[1] + mid * takeoff[1]);
    (v < e ? hi : lo) = mid;
  }
  double s = 0.5 * (lo + hi);
  return {{reduce_angle(x0[0] + s * takeoff[0]), reduce_angle(x0[1] + s * takeoff[1]), 0.0,
           0.0}};
}

}  // namespace detail

inline SingularAnnulus build_singular_annulus(const TrigPotential& U, double e_tilde,
                                              double e0, const SingularOpts& opts = {},
                                              double coupling = 1.0) {
  if (!(e_tilde > 0) || !(e0 < 0))
    throw std::invalid_argument("build_singular_annulus: need e_tilde > 0 > e0");
  MaxCertificate cert = certify_max(U);
  if (std::abs(cert.e_hat) > 1e-12)
    throw std::invalid_argument("build_singular_annulus: normalize the potential first");

  SingularAnnulus sa;
  sa.origin = {{cert.x0[0], cert.x0[1], 0.0, 0.0}};
  sa.e_hat = 0.0;
  sa.e_tilde = e_tilde;
  sa.e0 = e0;

  // the critical-point invariants, checked rather than assumed
  if (std::abs(U.eval(cert.x0[0], cert.x0[1])) > 1e-12 ||
      norm(U.grad(cert.x0[0], cert.x0[1])) > 1e-12)
    throw std::invalid_argument("build_singular_annulus: maximizer fails the 1e-12 check");

  MechanicalSystem<2> sys{U, coupling};

  // unstable plane of O: eigenvectors of -Hess with positive exponents
  SymEigPair eig = sym_eig2_vectors(-1.0 * U.hess(cert.x0[0], cert.x0[1]));
  if (eig.lo <= 0)
    throw std::invalid_argument("build_singular_annulus: maximizer is not a strict maximum");
  double l1 = std::sqrt(eig.hi), l2 = std::sqrt(eig.lo);
  Vec<4> w1{{eig.v_hi[0], eig.v_hi[1], l1 * eig.v_hi[0], l1 * eig.v_hi[1]}};
  Vec<4> w2{{eig.v_lo[0], eig.v_lo[1], l2 * eig.v_lo[0], l2 * eig.v_lo[1]}};
  w1 = (1.0 / norm(w1)) * w1;
  w2 = (1.0 / norm(w2)) * w2;

  // scan the unstable plane for re-approaching rays, refine the best ones
  std::vector<std::pair<double, double>> grid;  // (min_dist, alpha)
  for (int i = 0; i < opts.scan_n; ++i) {
    double alpha = two_pi * i / opts.scan_n;
    auto r = detail::shoot_unstable(sys, sa.origin, w1, w2, alpha, opts);
    grid.emplace_back(r.min_dist, alpha);
  }
  std::sort(grid.begin(), grid.end());

  const double da = two_pi / opts.scan_n;
  auto refine_candidate = [&](double alpha0, Separatrix& out) {
    detail::ShotResult best;
    double alpha = detail::refine_alpha(sys, sa.origin, w1, w2, alpha0 - da, alpha0 + da,
                                        opts, best);
    if (best.min_dist > opts.capture) return false;
    out = detail::trace_separatrix(sys, sa.origin, w1, w2, alpha, best, opts);
    return out.c != HomologyClass{0, 0};
  };

  bool have_plus = false;
  for (std::size_t i = 0; i < grid.size() && i < 6 && !have_plus; ++i)
    have_plus = refine_candidate(grid[i].second, sa.sep_plus);
  if (!have_plus)
    throw SeparatrixEscapes("no separatrix loop returned within the capture tolerance");
  sa.c_sep = sa.sep_plus.c;

  // the opposite loop: restrict candidates to rays that wind the other way
  bool have_minus = false;
  for (std::size_t i = 0; i < grid.size() && !have_minus; ++i) {
    if (grid[i].first > 0.05) break;  // sorted: nothing close remains
    auto r = detail::shoot_unstable(sys, sa.origin, w1, w2, grid[i].second, opts);
    HomologyClass w = detail::shot_winding(r, sa.origin);
    if (w[0] != -sa.c_sep[0] || w[1] != -sa.c_sep[1]) continue;
    have_minus = refine_candidate(grid[i].second, sa.sep_minus);
    if (have_minus && (sa.sep_minus.c[0] != -sa.c_sep[0] || sa.sep_minus.c[1] != -sa.c_sep[1]))
      have_minus = false;
  }
  if (!have_minus)
    throw SeparatrixEscapes("the opposite separatrix loop was not captured");

  // sub-annuli of classes +-c_sep on ]0, e_tilde]: seed at a comfortable
  // energy, walk to e_tilde, then continue toward the singular level
  ContinuationPolicy pol = opts.cont;
  double e_seed = std::max(2.0, 2 * e_tilde);
  {
    auto seed = find_periodic_orbit(U, sa.c_sep, e_seed, pol.orbit, coupling);
    auto approach = continue_annulus(U, sa.c_sep, e_seed, e_tilde, seed.anchor, pol, coupling);
    if (approach.e_lo > e_tilde + 1e-9)
      throw SeedFailed("class c_sep family does not reach e_tilde");
    sa.sub_gt = continue_annulus(U, sa.c_sep, e_tilde, opts.e_eps,
                                 approach.orbits.front().anchor, pol, coupling);
    sa.sub_gt.closed_lo = false;  // the family continues toward the singular level
  }
  {
    HomologyClass cm{-sa.c_sep[0], -sa.c_sep[1]};
    auto seed = find_periodic_orbit(U, cm, e_seed, pol.orbit, coupling);
    auto approach = continue_annulus(U, cm, e_seed, e_tilde, seed.anchor, pol, coupling);
    if (approach.e_lo > e_tilde + 1e-9)
      throw SeedFailed("class -c_sep family does not reach e_tilde");
    sa.sub_lt = continue_annulus(U, cm, e_tilde, opts.e_eps,
                                 approach.orbits.front().anchor, pol, coupling);
    sa.sub_lt.closed_lo = false;
  }

  // class-0 sub-annulus: librations around the minimum, swept to both sides
  // of a seed that sits in the hyperbolic near-separatrix regime
  TrigPotential negU = U;
  for (auto& t : negU.terms) t.a = -t.a;
  MaxCertificate minc = certify_max(negU);
  const double xmin[2] = {minc.x0[0], minc.x0[1]};
  double u_min = U.eval(xmin[0], xmin[1]);
  if (!(e0 > u_min))
    throw std::invalid_argument("build_singular_annulus: e0 must lie above min U");
  double e_seed0 = std::max(e0, -0.1);
  Vec<2> takeoff{{std::cos(sa.sep_plus.alpha) * w1[0] + std::sin(sa.sep_plus.alpha) * w2[0],
                  std::cos(sa.sep_plus.alpha) * w1[1] + std::sin(sa.sep_plus.alpha) * w2[1]}};
  takeoff = (1.0 / norm(takeoff)) * takeoff;
  State<2> g0 = detail::libration_guess(U, cert.x0, takeoff, e_seed0);
  {
    auto down = continue_annulus(U, {0, 0}, e_seed0, e0, g0, pol, coupling);
    auto up = continue_annulus(U, {0, 0}, e_seed0, -opts.e_eps, g0, pol, coupling);
    sa.sub_0 = merge_annuli(down, up);
    sa.sub_0.closed_hi = false;  // open toward the singular level
  }

  // frequency trace of the class-0 family to the bottom of the well; the
  // orbits turn elliptic there, so this is family data, not annulus data
  {
    OrbitOpts oo = pol.orbit;
    double e_top = sa.sub_0.e_lo;
    State<2> guess = detail::libration_guess(U, cert.x0, takeoff, e_top);
    for (int k = 0; k < opts.freq_trace_points; ++k) {
      double e = u_min + (e_top - u_min) * std::pow(0.5, k);
      guess = detail::libration_guess(U, cert.x0, takeoff, e);
      auto o = find_periodic_orbit(U, {0, 0}, e, guess, oo, coupling);
      sa.freq_to_min.push_back({e, two_pi / o.period});
    }
    Mat<2> hmin = U.hess(xmin[0], xmin[1]);
    SymEig2 meig = sym_eig2(hmin(0, 0), hmin(0, 1), hmin(1, 1));
    double w_lo = std::sqrt(meig.lo), w_hi = std::sqrt(meig.hi);
    double w_last = sa.freq_to_min.back().omega;
    sa.omega_min_limit = std::abs(w_last - w_lo) < std::abs(w_last - w_hi) ? w_lo : w_hi;
  }

  // near-separatrix homoclinics, one scan per side of the singular level
  if (opts.scan_witnesses) {
    double e_up = std::clamp(opts.witness_e, sa.sub_gt.e_lo, sa.sub_gt.e_hi);
    auto o_up = sa.sub_gt.orbit_near(e_up);
    auto wu = find_homoclinic(o_up, U, opts.hom, coupling);
    sa.witnesses.insert(sa.witnesses.end(), wu.begin(), wu.end());
    double e_dn = std::clamp(-opts.witness_e, sa.sub_0.e_lo, sa.sub_0.e_hi);
    auto o_dn = sa.sub_0.orbit_near(e_dn);
    // the libration manifolds tear on the family's own section: the manifold
    // tube grazes {r = 0} near the turning regions, so its trace there breaks
    // into short arcs. Re-anchor the witness orbit on the angle section
    // through the minimum, which every excursion crosses transversally.
    Section ang = theta_section(0, xmin[0], +1);
    OrbitOpts wo = pol.orbit;
    wo.section = &ang;
    auto cross = poincare_map(sys, ang, o_dn.anchor, wo.t_max, wo.h);
    auto o_dnw = find_periodic_orbit(U, {0, 0}, o_dn.energy, cross.state, wo, coupling);
    auto wd = find_homoclinic(o_dnw, U, opts.hom, coupling);
    sa.witnesses.insert(sa.witnesses.end(), wd.begin(), wd.end());
  }

  return sa;
}

}  // namespace hdl
