#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "hdl/integrate.hpp"
#include "hdl/rng.hpp"
#include "oracle.hpp"

using namespace hdl;
using std::numbers::pi;

namespace {

// one-degree pendulum embedded as the theta_2 factor: V = cos(theta_2) - 1
MechanicalSystem<2> pendulum_system() {
  return {TrigPotential{{{1, 0, 1.0, 0.0}, {0, 0, -1.0, 0.0}}}, 1.0};
}

MechanicalSystem<2> free_system() { return {TrigPotential{}, 1.0}; }

// first time theta_2 reaches the lifted target angle, refined by Newton on a
// single sub-step from the last checkpoint
double rotation_period(const MechanicalSystem<2>& sys, State<2> x, double target,
                       double h) {
  double t = 0;
  State<2> prev = x;
  while (x[0] < target) {
    prev = x;
    strang_step(sys, x, h);
    t += h;
    REQUIRE(t < 1e4);
  }
  double dt = h * (target - prev[0]) / (x[0] - prev[0]);
  for (int it = 0; it < 50; ++it) {
    State<2> y = prev;
    strang_step(sys, y, dt);
    double res = y[0] - target;
    if (std::abs(res) < 1e-13) break;
    dt -= res / y[2];  // d theta_2 / dt = r_2
  }
  return t - h + dt;
}

}  // namespace

TEST_CASE("splitting is exact on free motion", "[integrate]") {
  auto sys = free_system();
  State<2> x{{0.3, 1.1, 0.7, -0.4}};
  auto y = flow_mechanical(sys, x, 7.3, 1e-3);
  CHECK(y[0] == Catch::Approx(0.3 + 7.3 * 0.7).margin(1e-10));
  CHECK(y[1] == Catch::Approx(1.1 - 7.3 * 0.4).margin(1e-10));
  CHECK(y[2] == 0.7);
  CHECK(y[3] == -0.4);
}

TEST_CASE("pendulum rotation period matches the elliptic integral", "[integrate]") {
  // oracle self-check first: AGM route vs direct quadrature
  for (double e : {0.5, 2.0, 10.0})
    CHECK(oracle::pendulum_rotation_period(e) ==
          Catch::Approx(oracle::pendulum_period_quadrature(e)).epsilon(1e-12));

  auto sys = pendulum_system();
  for (double e : {0.5, 2.0}) {
    State<2> x{{0.0, 0.0, std::sqrt(2 * e), 0.0}};
    double T = rotation_period(sys, x, two_pi, 1e-4);
    CHECK(T == Catch::Approx(oracle::pendulum_rotation_period(e)).margin(1e-8));
  }
}

TEST_CASE("energy drift is second order and small", "[integrate]") {
  auto sys = classical_system(default_potential());
  State<2> x{{1.0, 2.0, 1.3, 0.4}};
  double e0 = sys.energy(x);

  auto drift = [&](double h) {
    State<2> y = x;
    double worst = 0;
    for (int k = 0; k < 100; ++k) {
      y = flow_mechanical(sys, y, 1.0, h);
      worst = std::max(worst, std::abs(sys.energy(y) - e0));
    }
    return worst;
  };
  double d1 = drift(1e-2);
  double d2 = drift(5e-3);
  CHECK(d1 / d2 == Catch::Approx(4.0).epsilon(0.25));  // order 2
  CHECK(drift(1e-3) < 1e-6);
}

TEST_CASE("reversibility: flow, flip r, flow, flip r returns the start", "[integrate]") {
  auto sys = classical_system(default_potential());
  State<2> x{{0.7, 5.9, 0.9, -0.2}};
  auto y = flow_mechanical(sys, x, 13.0, 1e-3);
  y[2] = -y[2];
  y[3] = -y[3];
  y = flow_mechanical(sys, y, 13.0, 1e-3);
  y[2] = -y[2];
  y[3] = -y[3];
  for (int i = 0; i < 4; ++i) CHECK(y[i] == Catch::Approx(x[i]).margin(1e-9));
}

TEST_CASE("tangent flow of free motion is the shear", "[integrate]") {
  auto sys = free_system();
  State<2> x{{0.1, 0.2, 0.5, 0.6}};
  auto ts = tangent_flow(sys, x, 1.0, 1e-3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double expect = (i == j) ? 1.0 : 0.0;
      if (i < 2 && j == i + 2) expect = 1.0;  // d theta / d r0 = t = 1
      CHECK(ts.jacobian(i, j) == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("tangent flow is symplectic with unit determinant", "[integrate]") {
  auto sys = classical_system(default_potential());
  State<2> x{{0.4, 1.9, 1.1, -0.3}};
  auto ts = tangent_flow(sys, x, 10.0, 1e-3);
  CHECK(det(ts.jacobian) == Catch::Approx(1.0).margin(1e-8));
  CHECK(symplectic_defect(ts.jacobian) < 1e-8 * 10.0);
}

TEST_CASE("tangent flow matches finite-difference flow columns", "[integrate]") {
  auto sys = classical_system(default_potential());
  State<2> x{{0.4, 1.9, 0.8, -0.3}};
  const double t = 2.0, h = 1e-3, eps = 1e-7;
  auto ts = tangent_flow(sys, x, t, h);
  for (std::size_t j = 0; j < 4; ++j) {
    State<2> xp = x, xm = x;
    xp[j] += eps;
    xm[j] -= eps;
    auto yp = flow_mechanical(sys, xp, t, h);
    auto ym = flow_mechanical(sys, xm, t, h);
    for (std::size_t i = 0; i < 4; ++i) {
      double fd = (yp[i] - ym[i]) / (2 * eps);
      CHECK(ts.jacobian(i, j) == Catch::Approx(fd).epsilon(1e-5).margin(1e-7));
    }
  }
}

TEST_CASE("adaptive integrator agrees with the splitting on a mechanical system",
          "[integrate]") {
  auto sys = classical_system(default_potential());
  State<2> x{{0.2, 2.6, 1.0, 0.5}};
  auto a = flow_mechanical(sys, x, 3.0, 1e-4);
  auto b = adaptive_flow([&](const State<2>& s) { return sys.field(s); }, x, 3.0, 1e-12);
  for (int i = 0; i < 4; ++i) CHECK(a[i] == Catch::Approx(b[i]).margin(2e-7));

  // free motion: exact
  auto fsys = free_system();
  auto c = adaptive_flow([&](const State<2>& s) { return fsys.field(s); }, x, 5.0, 1e-12);
  CHECK(c[0] == Catch::Approx(0.2 + 5.0 * 1.0).margin(1e-11));
  CHECK(c[1] == Catch::Approx(2.6 + 5.0 * 0.5).margin(1e-11));
}

TEST_CASE("adaptive integrator conserves energy to tolerance", "[integrate]") {
  auto sys = truncated_system(default_potential(), 4);
  State<3> x{{0.1, 2.0, 4.0, 0.9, 0.3, -0.2}};
  double e0 = sys.energy(x);
  GbsStats stats;
  auto y = adaptive_flow([&](const State<3>& s) { return sys.field(s); }, x, 50.0, 1e-10,
                         &stats);
  CHECK(std::abs(sys.energy(y) - e0) < 1e-8);
  CHECK(stats.steps > 0);
}

TEST_CASE("rescaling conjugacy with the root-n time factor", "[integrate]") {
  // sigma_a (theta, r) = (theta, a r) with a = sqrt(n) conjugates the flows:
  // the truncated flow over sqrt(n) t equals sigma^-1 . flow_1(t) . sigma.
  auto U = default_potential();
  auto H1 = truncated_system(U, 1);
  Rng rng(5);
  for (double n : {4.0, 16.0}) {
    auto Hn = truncated_system(U, n);
    double a = std::sqrt(n);
    for (int trial = 0; trial < 5; ++trial) {
      State<3> x;
      for (int i = 0; i < 3; ++i) x[i] = rng.uniform(0, two_pi);
      for (int i = 3; i < 6; ++i) x[i] = rng.uniform(-1, 1);

      // energy identity: H_1(sigma x) = n H_n(x), exactly up to roundoff
      State<3> sx = x;
      for (int i = 3; i < 6; ++i) sx[i] *= a;
      CHECK(H1.energy(sx) == Catch::Approx(n * Hn.energy(x)).margin(1e-12));

      const double t = 3.0, h = 1e-3;
      auto lhs = flow_mechanical(Hn, x, a * t, a * h);
      auto rhs = flow_mechanical(H1, sx, t, h);
      for (int i = 3; i < 6; ++i) rhs[i] /= a;
      for (int i = 0; i < 6; ++i) CHECK(lhs[i] == Catch::Approx(rhs[i]).margin(1e-12));
    }
  }
}

TEST_CASE("action projection commutes with the flow", "[integrate]") {
  auto sys = truncated_system(default_potential(), 4);
  State<3> x{{0.3, 1.2, 2.1, 0.5, 0.1, -0.7}};
  auto y = flow_mechanical(sys, x, 2.0, 1e-3);
  auto p = project_actions(to_phase_point(y));
  CHECK(p[0] == y[3]);
  CHECK(p[1] == y[4]);
  CHECK(p[2] == y[5]);
}

TEST_CASE("trajectory csv has the declared header and conserves H", "[integrate]") {
  auto sys = classical_system(default_potential());
  State<2> x{{0.1, 0.2, 1.0, 0.0}};
  std::stringstream ss;
  trajectory_csv(ss, sys, x, 1.0, 1e-3, 100);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "t,theta1,theta2,r1,r2,H");
  int rows = 0;
  std::string line;
  while (std::getline(ss, line)) ++rows;
  CHECK(rows == 11);  // t=0 plus 10 strided samples
}
