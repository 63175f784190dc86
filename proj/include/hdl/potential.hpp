#pragma once

// The potential U on T^2 as a finite trigonometric sum with closed-form
// derivatives, plus the maximum certificate (location, nondegeneracy,
// uniqueness) and normalization to Max U = 0.

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdl/geometry.hpp"
#include "hdl/linalg.hpp"

namespace hdl {

struct TrigTerm {
  int k2 = 0, k3 = 0;  // wave vector
  double a = 0.0;      // amplitude
  double phi = 0.0;    // phase
};

struct DegenerateMax : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonUniqueMax : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// U(t2, t3) = sum a * cos(k2*t2 + k3*t3 + phi). Analytic, so every
// derivative below is exact.
struct TrigPotential {
  std::vector<TrigTerm> terms;

  double eval(double t2, double t3) const {
    double s = 0;
    for (const auto& t : terms) s += t.a * std::cos(t.k2 * t2 + t.k3 * t3 + t.phi);
    return s;
  }

  Vec<2> grad(double t2, double t3) const {
    Vec<2> g;
    for (const auto& t : terms) {
      double sn = t.a * std::sin(t.k2 * t2 + t.k3 * t3 + t.phi);
      g[0] -= t.k2 * sn;
      g[1] -= t.k3 * sn;
    }
    return g;
  }

  // Returns [[h22, h23], [h23, h33]].
  Mat<2> hess(double t2, double t3) const {
    Mat<2> h;
    for (const auto& t : terms) {
      double cs = t.a * std::cos(t.k2 * t2 + t.k3 * t3 + t.phi);
      h(0, 0) -= double(t.k2) * t.k2 * cs;
      h(0, 1) -= double(t.k2) * t.k3 * cs;
      h(1, 1) -= double(t.k3) * t.k3 * cs;
    }
    h(1, 0) = h(0, 1);
    return h;
  }

  // U(. + c), same family: phases shift by k.c.
  TrigPotential translated(double c2, double c3) const {
    TrigPotential o = *this;
    for (auto& t : o.terms) t.phi += t.k2 * c2 + t.k3 * c3;
    return o;
  }

  TrigPotential shifted(double constant) const {
    TrigPotential o = *this;
    for (auto& t : o.terms)
      if (t.k2 == 0 && t.k3 == 0 && t.phi == 0.0) {
        t.a += constant;
        return o;
      }
    o.terms.push_back({0, 0, constant, 0.0});
    return o;
  }
};

// cos t2 + cos t3 + 0.3 cos(t2 - t3): coupled, with a certified
// nondegenerate maximum at the origin.
inline TrigPotential default_potential() {
  return {{{1, 0, 1.0, 0.0}, {0, 1, 1.0, 0.0}, {1, -1, 0.3, 0.0}}};
}

struct MaxCertificate {
  double x0[2];     // maximizer, angles in [0, 2pi)
  double e_hat;     // value there
  Mat<2> hessian;
  bool nondegenerate;
  bool unique;
  double margin;    // gap to the second-highest distinct local max (inf if none)
};

namespace detail {

// Ascend from a grid point to the nearest critical point: Newton on grad U
// with a gradient-ascent fallback when the Hessian is not negative definite.
inline bool ascend_to_max(const TrigPotential& U, double& t2, double& t3) {
  for (int it = 0; it < 200; ++it) {
    Vec<2> g = U.grad(t2, t3);
    double gn = norm(g);
    if (gn < 1e-13) return true;
    Mat<2> h = U.hess(t2, t3);
    SymEig2 ev = sym_eig2(h(0, 0), h(0, 1), h(1, 1));
    if (ev.hi < -1e-9) {
      // Newton step toward the critical point
      try {
        Vec<2> step = solve(h, g);
        t2 -= step[0];
        t3 -= step[1];
        continue;
      } catch (const std::runtime_error&) {
      }
    }
    // uphill otherwise, with a crude line search
    double f0 = U.eval(t2, t3);
    double s = 0.5;
    while (s > 1e-12 && U.eval(t2 + s * g[0], t3 + s * g[1]) <= f0) s *= 0.5;
    if (s <= 1e-12) return false;
    t2 += s * g[0];
    t3 += s * g[1];
  }
  return false;
}

}  // namespace detail

// Grid scan + local ascent from every cell; certifies the top maximizer.
// Throws DegenerateMax / NonUniqueMax per the definiteness and uniqueness
// tests (tol_eig = 1e-6, value tolerance 1e-9, angular separation 1e-3).
inline MaxCertificate certify_max(const TrigPotential& U, std::size_t grid_n = 256) {
  if (grid_n < 64) throw std::invalid_argument("certify_max: grid_n must be >= 64");
  constexpr double tol_eig = 1e-6;
  constexpr double val_tol = 1e-9;
  constexpr double sep_tol = 1e-3;

  struct Cand {
    double t2, t3, val;
  };
  std::vector<Cand> maxima;
  double h = two_pi / double(grid_n);
  for (std::size_t i = 0; i < grid_n; ++i)
    for (std::size_t j = 0; j < grid_n; ++j) {
      double t2 = i * h, t3 = j * h;
      // only start ascents from discrete local maxima of the grid
      double v = U.eval(t2, t3);
      bool top = true;
      for (int di = -1; di <= 1 && top; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if (!di && !dj) continue;
          if (U.eval(t2 + di * h, t3 + dj * h) > v) {
            top = false;
            break;
          }
        }
      if (!top) continue;
      if (!detail::ascend_to_max(U, t2, t3)) continue;
      Mat<2> hess = U.hess(t2, t3);
      SymEig2 ev = sym_eig2(hess(0, 0), hess(0, 1), hess(1, 1));
      if (ev.hi > tol_eig) continue;  // minimum or saddle; keep near-degenerate cases
      double t2r = reduce_angle(t2), t3r = reduce_angle(t3);
      bool dup = false;
      for (auto& c : maxima)
        if (std::abs(angle_diff(c.t2, t2r)) < sep_tol && std::abs(angle_diff(c.t3, t3r)) < sep_tol) {
          dup = true;
          break;
        }
      if (!dup) maxima.push_back({t2r, t3r, U.eval(t2, t3)});
    }
  if (maxima.empty()) throw std::runtime_error("certify_max: no critical point found");

  std::sort(maxima.begin(), maxima.end(), [](const Cand& a, const Cand& b) {
    if (a.val != b.val) return a.val > b.val;
    if (a.t2 != b.t2) return a.t2 < b.t2;  // deterministic tie-break
    return a.t3 < b.t3;
  });
  const Cand& top = maxima.front();

  MaxCertificate cert;
  cert.x0[0] = top.t2;
  cert.x0[1] = top.t3;
  cert.e_hat = top.val;
  cert.hessian = U.hess(top.t2, top.t3);
  SymEig2 ev = sym_eig2(cert.hessian(0, 0), cert.hessian(0, 1), cert.hessian(1, 1));
  cert.nondegenerate = (ev.hi < -tol_eig && ev.lo < -tol_eig);
  cert.unique = true;
  cert.margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < maxima.size(); ++i) {
    // only genuine local maxima compete for uniqueness
    Mat<2> hi = U.hess(maxima[i].t2, maxima[i].t3);
    SymEig2 evi = sym_eig2(hi(0, 0), hi(0, 1), hi(1, 1));
    if (evi.hi >= -tol_eig) continue;  // saddle or degenerate, not a max
    cert.margin = std::min(cert.margin, top.val - maxima[i].val);
    if (top.val - maxima[i].val < val_tol) cert.unique = false;
  }
  if (!cert.nondegenerate)
    throw DegenerateMax("certify_max: Hessian eigenvalue above -tol_eig at maximizer");
  if (!cert.unique) throw NonUniqueMax("certify_max: two maximizers at the top value");
  return cert;
}

// Shift so that Max U = 0 (idempotent).
inline TrigPotential normalize_max(const TrigPotential& U, std::size_t grid_n = 256) {
  MaxCertificate cert = certify_max(U, grid_n);
  if (std::abs(cert.e_hat) <= 1e-14) return U;
  return U.shifted(-cert.e_hat);
}

}  // namespace hdl
