#pragma once

// Flow maps and tangent flows. Separable mechanical systems get the
// kick-drift-kick splitting (symplectic, reversible, exact on free motion);
// generic smooth fields (the bump-perturbed system) get an adaptive
// Gragg-Bulirsch-Stoer one-step method with per-step error control.
//
// State convention: Vec<2M> with components [0, M) = angles (kept as real
// lifts, so homology classes can be read off flows) and [M, 2M) = actions.

#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <vector>

#include "hdl/geometry.hpp"
#include "hdl/linalg.hpp"
#include "hdl/potential.hpp"

namespace hdl {

struct FlowBlowup : std::runtime_error {
  double t_fail;
  explicit FlowBlowup(double t)
      : std::runtime_error("flow blow-up at t = " + std::to_string(t)), t_fail(t) {}
};

template <std::size_t M>
using State = Vec<2 * M>;

template <std::size_t N>
inline PhasePoint<N / 2> to_phase_point(const Vec<N>& x) {
  static_assert(N % 2 == 0);
  constexpr std::size_t M = N / 2;
  PhasePoint<M> p;
  for (std::size_t i = 0; i < M; ++i) {
    p.theta[i] = reduce_angle(x[i]);
    p.r[i] = x[M + i];
  }
  return p;
}

template <std::size_t M>
inline State<M> to_state(const PhasePoint<M>& p) {
  State<M> x;
  for (std::size_t i = 0; i < M; ++i) {
    x[i] = p.theta[i];
    x[M + i] = p.r[i];
  }
  return x;
}

// H = (1/2)|r|^2 + coupling * U(angles), where U acts on the two angles
// (theta_2, theta_3): for M = 2 these are components 0,1 of the state, for
// M = 3 components 1,2 (theta_1 is the cyclic angle).
template <std::size_t M>
struct MechanicalSystem {
  static_assert(M == 2 || M == 3);
  TrigPotential U;
  double coupling = 1.0;

  static constexpr std::size_t a0 = (M == 3) ? 1 : 0;  // index of theta_2

  double V(const State<M>& x) const { return coupling * U.eval(x[a0], x[a0 + 1]); }

  Vec<M> gradV(const State<M>& x) const {
    Vec<2> g = U.grad(x[a0], x[a0 + 1]);
    Vec<M> out;
    out[a0] = coupling * g[0];
    out[a0 + 1] = coupling * g[1];
    return out;
  }

  // d^2 V / d theta^2, embedded in the M x M angle block.
  Mat<M> hessV(const State<M>& x) const {
    Mat<2> h = U.hess(x[a0], x[a0 + 1]);
    Mat<M> out;
    out(a0, a0) = coupling * h(0, 0);
    out(a0, a0 + 1) = coupling * h(0, 1);
    out(a0 + 1, a0) = coupling * h(1, 0);
    out(a0 + 1, a0 + 1) = coupling * h(1, 1);
    return out;
  }

  double energy(const State<M>& x) const {
    double k = 0;
    for (std::size_t i = 0; i < M; ++i) k += x[M + i] * x[M + i];
    return 0.5 * k + V(x);
  }

  Vec<2 * M> field(const State<M>& x) const {
    Vec<2 * M> dx;
    Vec<M> g = gradV(x);
    for (std::size_t i = 0; i < M; ++i) {
      dx[i] = x[M + i];
      dx[M + i] = -g[i];
    }
    return dx;
  }
};

inline MechanicalSystem<2> classical_system(const TrigPotential& U) { return {U, 1.0}; }

// The truncated 3-degree system with coupling 1/n.
inline MechanicalSystem<3> truncated_system(const TrigPotential& U, double n) {
  return {U, 1.0 / n};
}

// Classical factor of the truncated system (same 1/n coupling, two degrees).
inline MechanicalSystem<2> classical_factor(const TrigPotential& U, double n) {
  return {U, 1.0 / n};
}

// --- splitting integrator -------------------------------------------------

template <std::size_t M>
inline void strang_step(const MechanicalSystem<M>& sys, State<M>& x, double h) {
  Vec<M> g = sys.gradV(x);
  for (std::size_t i = 0; i < M; ++i) x[M + i] -= 0.5 * h * g[i];
  for (std::size_t i = 0; i < M; ++i) x[i] += h * x[M + i];
  g = sys.gradV(x);
  for (std::size_t i = 0; i < M; ++i) x[M + i] -= 0.5 * h * g[i];
}

template <std::size_t M>
inline State<M> flow_mechanical(const MechanicalSystem<M>& sys, State<M> x, double t,
                                double h = 1e-3) {
  if (h <= 0) throw std::invalid_argument("flow_mechanical: h must be positive");
  if (!std::isfinite(t)) throw std::invalid_argument("flow_mechanical: non-finite t");
  if (t == 0) return x;
  std::size_t n = std::size_t(std::ceil(std::abs(t) / h));
  double hs = t / double(n);
  for (std::size_t k = 0; k < n; ++k) {
    strang_step(sys, x, hs);
    if (!std::isfinite(x[0]) || !std::isfinite(x[M]))
      throw FlowBlowup(double(k + 1) * hs);
  }
  return x;
}

template <std::size_t M>
struct TangentState {
  State<M> point;
  Mat<2 * M> jacobian;
};

// One splitting step together with its exact Jacobian. The per-substep maps
// are affine in r and shear-like, so the composed Jacobian is symplectic up
// to roundoff.
template <std::size_t M>
inline void strang_tangent_step(const MechanicalSystem<M>& sys, State<M>& x, Mat<2 * M>& J,
                                double h) {
  Mat<M> hv = sys.hessV(x);
  Vec<M> g = sys.gradV(x);
  for (std::size_t i = 0; i < M; ++i) {
    x[M + i] -= 0.5 * h * g[i];
    for (std::size_t c = 0; c < 2 * M; ++c) {
      double acc = 0;
      for (std::size_t j = 0; j < M; ++j) acc += hv(i, j) * J(j, c);
      J(M + i, c) -= 0.5 * h * acc;
    }
  }
  for (std::size_t i = 0; i < M; ++i) {
    x[i] += h * x[M + i];
    for (std::size_t c = 0; c < 2 * M; ++c) J(i, c) += h * J(M + i, c);
  }
  hv = sys.hessV(x);
  g = sys.gradV(x);
  for (std::size_t i = 0; i < M; ++i) {
    x[M + i] -= 0.5 * h * g[i];
    for (std::size_t c = 0; c < 2 * M; ++c) {
      double acc = 0;
      for (std::size_t j = 0; j < M; ++j) acc += hv(i, j) * J(j, c);
      J(M + i, c) -= 0.5 * h * acc;
    }
  }
}

template <std::size_t M>
inline TangentState<M> tangent_flow(const MechanicalSystem<M>& sys, State<M> x, double t,
                                    double h = 1e-3) {
  TangentState<M> ts{x, Mat<2 * M>::identity()};
  if (t == 0) return ts;
  std::size_t n = std::size_t(std::ceil(std::abs(t) / h));
  double hs = t / double(n);
  for (std::size_t k = 0; k < n; ++k) {
    strang_tangent_step(sys, ts.point, ts.jacobian, hs);
    if (!std::isfinite(ts.point[0]) || !std::isfinite(ts.point[M]))
      throw FlowBlowup(double(k + 1) * hs);
  }
  return ts;
}

// Symplecticity defect ||J^T Omega J - Omega||_max.
template <std::size_t N2>
inline double symplectic_defect(const Mat<N2>& J) {
  constexpr std::size_t M = N2 / 2;
  double worst = 0;
  // Omega(i, M+i) = 1, Omega(M+i, i) = -1 in (theta, r) block order
  for (std::size_t a = 0; a < N2; ++a)
    for (std::size_t b = 0; b < N2; ++b) {
      double s = 0;
      for (std::size_t i = 0; i < M; ++i) s += J(i, a) * J(M + i, b) - J(M + i, a) * J(i, b);
      double om = 0;
      if (a < M && b == a + M) om = 1;
      if (a >= M && b == a - M) om = -1;
      worst = std::max(worst, std::abs(s - om));
    }
  return worst;
}

// --- adaptive extrapolation integrator ------------------------------------

struct GbsStats {
  std::size_t steps = 0;
  std::size_t rhs_evals = 0;
  std::size_t rejects = 0;
};

namespace detail {

// Gragg's smoothed modified midpoint with n substeps over macro step H.
template <std::size_t N, class F>
inline Vec<N> midpoint(F&& f, const Vec<N>& x, double H, std::size_t n, GbsStats* st) {
  double h = H / double(n);
  Vec<N> u0 = x;
  Vec<N> u1 = x + h * f(x);
  for (std::size_t m = 1; m < n; ++m) {
    Vec<N> u2 = u0 + (2 * h) * f(u1);
    u0 = u1;
    u1 = u2;
  }
  if (st) st->rhs_evals += n + 1;
  return 0.5 * (u1 + u0 + h * f(u1));
}

}  // namespace detail

// Integrate dx/dt = f(x) from x over time t (either sign) with local error
// tol per macro step. f is any callable Vec<N> -> Vec<N>.
template <std::size_t N, class F>
inline Vec<N> adaptive_flow(F&& f, Vec<N> x, double t, double tol, GbsStats* stats = nullptr) {
  if (tol <= 0) throw std::invalid_argument("adaptive_flow: tol must be positive");
  if (t == 0) return x;
  constexpr std::size_t KMAX = 7;
  constexpr std::size_t seq[KMAX] = {2, 4, 6, 8, 10, 12, 14};
  double sign = t > 0 ? 1.0 : -1.0;
  double remaining = std::abs(t);
  double H = std::min(remaining, 0.1);
  std::size_t guard = 0;
  while (remaining > 0) {
    if (++guard > 2'000'000) throw std::runtime_error("adaptive_flow: step budget exceeded");
    H = std::min(H, remaining);
    if (H < 1e-14 * std::abs(t))
      throw std::runtime_error("adaptive_flow: step size underflow");
    // polynomial extrapolation tableau in H^2
    Vec<N> tab[KMAX][KMAX];
    bool accepted = false;
    for (std::size_t i = 0; i < KMAX && !accepted; ++i) {
      tab[i][0] = detail::midpoint(f, x, sign * H, seq[i], stats);
      for (std::size_t j = 1; j <= i; ++j) {
        double q = double(seq[i]) / double(seq[i - j]);
        tab[i][j] = tab[i][j - 1] + (1.0 / (q * q - 1.0)) * (tab[i][j - 1] - tab[i - 1][j - 1]);
      }
      if (i >= 2) {
        double err = norm_inf(tab[i][i] - tab[i][i - 1]);
        if (err <= tol) {
          x = tab[i][i];
          accepted = true;
          remaining -= H;
          double fac = 0.9 * std::pow(tol / std::max(err, 1e-300), 1.0 / double(2 * i + 1));
          H *= std::min(5.0, std::max(0.2, fac));
        }
      }
    }
    if (!accepted) {
      H *= 0.25;
      if (stats) stats->rejects++;
      continue;
    }
    if (stats) stats->steps++;
    if (!std::isfinite(x[0])) throw FlowBlowup(std::abs(t) - remaining);
  }
  return x;
}

// --- trajectory dump -------------------------------------------------------

// CSV rows t,theta1..m,r1..m,H at the given output stride (in steps of h).
template <std::size_t M>
inline void trajectory_csv(std::ostream& os, const MechanicalSystem<M>& sys, State<M> x,
                           double t, double h, std::size_t stride) {
  os << "t";
  for (std::size_t i = 1; i <= M; ++i) os << ",theta" << i;
  for (std::size_t i = 1; i <= M; ++i) os << ",r" << i;
  os << ",H\n";
  std::size_t n = std::size_t(std::ceil(std::abs(t) / h));
  double hs = t / double(n);
  char buf[64];
  auto row = [&](double tk) {
    std::snprintf(buf, sizeof buf, "%.17g", tk);
    os << buf;
    for (std::size_t i = 0; i < M; ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", reduce_angle(x[i]));
      os << buf;
    }
    for (std::size_t i = 0; i < M; ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", x[M + i]);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g\n", sys.energy(x));
    os << buf;
  };
  row(0.0);
  for (std::size_t k = 0; k < n; ++k) {
    strang_step(sys, x, hs);
    if ((k + 1) % stride == 0 || k + 1 == n) row(double(k + 1) * hs);
  }
}

}  // namespace hdl
