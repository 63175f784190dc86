#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hdl/annulus.hpp"
#include "hdl/manifold.hpp"
#include "hdl/orbit.hpp"
#include "hdl/section.hpp"
#include "oracle.hpp"

using namespace hdl;

namespace {

TrigPotential normalized_default() { return normalize_max(default_potential()); }

// the diagonal {theta_2 = theta_3, r_2 = r_3} is invariant for the default
// potential; on it the motion is a pendulum with U(psi) = 2 cos psi - 2
// (normalized), so libration periods have a quadrature oracle
double diag_libration_period(double e) {
  REQUIRE(e > -4.0);
  REQUIRE(e < 0.0);
  double a = std::acos(-(e + 2.0) / 2.0);  // turning half-width around psi = pi
  auto integrand = [&](double u) {
    double s = a * std::sin(u);
    double d2 = e + 2.0 + 2.0 * std::cos(s);  // = 2 cos s - 2 cos a
    double du = 1.0 - std::sin(u);
    if (d2 <= 0) {
      // remove the 0/0 at the turning point analytically
      return a * std::cos(u) / std::sqrt(2.0 * std::sin(a) * a * std::max(du, 1e-300));
    }
    return a * std::cos(u) / std::sqrt(d2);
  };
  return 2.0 * oracle::integrate(integrand, -std::numbers::pi / 2, std::numbers::pi / 2, 32);
}

double point_to_polyline(const Vec<2>& p, const std::vector<Vec<2>>& poly) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
    if (std::abs(poly[i + 1][0] - poly[i][0]) > 3.0) continue;  // wrap seam
    Vec<2> d = poly[i + 1] - poly[i];
    double len2 = dot(d, d);
    double t = len2 > 0 ? std::clamp(dot(p - poly[i], d) / len2, 0.0, 1.0) : 0.0;
    Vec<2> q = poly[i] + t * d;
    best = std::min(best, norm(p - q));
  }
  return best;
}

}  // namespace

TEST_CASE("free-motion return time is 2 pi over the rotation rate", "[section]") {
  MechanicalSystem<2> sys{TrigPotential{}, 1.0};
  Section sec = theta_section(0, 0.0, +1);
  State<2> z{{0.0, 0.3, 0.8, 0.1}};
  auto hit = poincare_map(sys, sec, z);
  CHECK(hit.t == Catch::Approx(two_pi / 0.8).margin(1e-9));
  CHECK(std::abs(sec.g(hit.state)) < 1e-12);
  CHECK(hit.state[1] == Catch::Approx(0.3 + hit.t * 0.1).margin(1e-9));
}

TEST_CASE("forward then backward return recovers the start", "[section]") {
  auto U = normalized_default();
  MechanicalSystem<2> sys{U, 1.0};
  Section sec = theta_section(0, 0.0, +1);
  State<2> z{{0.0, 0.4, 2.1, -0.3}};
  auto fwd = poincare_map(sys, sec, z);
  auto back = poincare_map(sys, sec, fwd.state, 200.0, 5e-4, -1);
  for (int i = 0; i < 4; ++i) CHECK(back.state[i] == Catch::Approx(z[i]).margin(1e-9));
  CHECK(back.t == Catch::Approx(-fwd.t).margin(1e-9));
}

TEST_CASE("free motion gives the exact class (1,0) orbit", "[orbit]") {
  TrigPotential zero{};
  auto orbit = find_periodic_orbit(zero, {1, 0}, 0.5);
  CHECK(orbit.period == Catch::Approx(two_pi).margin(1e-9));
  CHECK(orbit.anchor[2] == Catch::Approx(1.0).margin(1e-12));
  CHECK(orbit.anchor[3] == Catch::Approx(0.0).margin(1e-12));
  CHECK(orbit.residual <= 1e-10);
  CHECK_FALSE(orbit.hyperbolic);
}

TEST_CASE("high-energy orbits approach the free-motion actions", "[orbit]") {
  auto U = normalized_default();
  double prev = std::numeric_limits<double>::infinity();
  for (double e : {10.0, 50.0, 200.0}) {
    auto orbit = find_periodic_orbit(U, {1, 0}, e);
    CHECK(orbit.residual <= 1e-10);
    CHECK(orbit.hyperbolic);
    Vec<2> y{{std::sqrt(2 * e), 0.0}};
    double d = std::hypot(orbit.anchor[2] - y[0], orbit.anchor[3] - y[1]);
    CHECK(d < prev);
    prev = d;
    // the closed lift winds once in theta_2 and returns in r
    MechanicalSystem<2> sys{U, 1.0};
    State<2> back = flow_mechanical(sys, orbit.anchor, orbit.period, orbit.h);
    CHECK(back[0] - orbit.anchor[0] == Catch::Approx(two_pi).margin(1e-9));
    CHECK(back[1] - orbit.anchor[1] == Catch::Approx(0.0).margin(1e-9));
    CHECK(back[2] == Catch::Approx(orbit.anchor[2]).margin(1e-9));
    CHECK(back[3] == Catch::Approx(orbit.anchor[3]).margin(1e-9));
  }
}

TEST_CASE("equilibrium linearization has the Hessian exponents", "[orbit]") {
  // at the maximum the linearized flow decouples into exponents +-1, +-sqrt(1.6)
  auto U = normalized_default();
  MechanicalSystem<2> sys{U, 1.0};
  State<2> o{{0.0, 0.0, 0.0, 0.0}};
  auto ts = tangent_flow(sys, o, 1.0, 1e-4);
  double expect = 2 * std::cosh(1.0) + 2 * std::cosh(std::sqrt(1.6));
  CHECK(trace(ts.jacobian) == Catch::Approx(expect).margin(1e-6));
  CHECK(det(ts.jacobian) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("floquet data of a mid-energy rotation orbit", "[orbit]") {
  auto U = normalized_default();
  auto orbit = find_periodic_orbit(U, {1, 0}, 10.0);
  auto fl = floquet(orbit, U);
  REQUIRE(fl.hyperbolic);
  CHECK(fl.lambda.imag() == 0.0);
  double l = fl.lambda.real();
  CHECK(l > 1.0 + 1e-3);
  CHECK(l == Catch::Approx(std::exp(orbit.period)).epsilon(0.2));  // averaged exponent 1
  CHECK(fl.orientable);
  CHECK(fl.unit_pair_defect < 1e-6);
  CHECK(fl.reciprocity_defect < 1e-6);
  CHECK(fl.section_check < 1e-3);
  CHECK(norm(fl.dir_u) == Catch::Approx(1.0).margin(1e-12));
  CHECK(norm(fl.dir_s) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("diagonal libration is found from the turning point", "[orbit]") {
  auto U = normalized_default();
  double e = -0.5;
  double a = std::acos(-(e + 2.0) / 2.0);
  State<2> guess{{std::numbers::pi + a, std::numbers::pi + a, 0.0, 0.0}};
  auto orbit = find_periodic_orbit(U, {0, 0}, e, guess);
  CHECK(orbit.residual <= 1e-10);
  CHECK(orbit.period == Catch::Approx(diag_libration_period(e)).epsilon(1e-5));
  // the orbit stays on the diagonal
  CHECK(orbit.anchor[0] == Catch::Approx(orbit.anchor[1]).margin(1e-8));
  CHECK(orbit.anchor[2] == Catch::Approx(orbit.anchor[3]).margin(1e-8));
}

TEST_CASE("polish keeps the orbit identity on a finer grid", "[orbit]") {
  auto U = normalized_default();
  auto orbit = find_periodic_orbit(U, {1, 0}, 10.0);
  auto fine = polish_orbit(orbit, U, orbit.h / 2);
  CHECK(std::abs(fine.period - orbit.period) < 1e-5);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(fine.anchor[i] - orbit.anchor[i]) < 1e-4);
  CHECK(fine.h == orbit.h / 2);
}

TEST_CASE("class (0,0) without a guess is rejected", "[orbit]") {
  CHECK_THROWS_AS(find_periodic_orbit(normalized_default(), {0, 0}, -0.5),
                  std::invalid_argument);
}

TEST_CASE("integrable potential yields no annulus", "[annulus]") {
  TrigPotential zero{};
  CHECK_THROWS_AS(continue_annulus(zero, {1, 0}, 2.0, 0.5,
                                   State<2>{{0.0, 0.0, 2.0, 0.0}}),
                  EmptyResult);
}

TEST_CASE("continuation sweeps the class (1,0) branch downward", "[annulus]") {
  auto U = normalized_default();
  State<2> seed{{0.0, 0.0, 10.0, 0.0}};
  auto a = continue_annulus(U, {1, 0}, 50.0, 0.5, seed);
  REQUIRE(a.orbits.size() >= 8);
  CHECK(a.e_hi == 50.0);
  CHECK(a.e_lo <= 1.0);  // how far down it reaches is an instance output
  CHECK(a.slope_sign == +1);
  CHECK(a.mu_min > 0.0);
  for (const auto& o : a.orbits) {
    CHECK(o.hyperbolic);
    CHECK(o.residual <= 1e-10);
  }
  // frequency approaches the free rotation rate from below at high energy
  CHECK(a.omega(50.0) == Catch::Approx(std::sqrt(100.0)).epsilon(2e-2));
  CHECK(a.contains(10.0));
  CHECK(std::abs(a.orbit_near(10.0).energy - 10.0) < 2.5);
}

TEST_CASE("frequency matches free motion at very high energy", "[annulus]") {
  auto U = normalized_default();
  auto orbit = find_periodic_orbit(U, {1, 0}, 1000.0);
  double omega = two_pi / orbit.period;
  CHECK(omega / std::sqrt(2000.0) == Catch::Approx(1.0).margin(1e-2));
}

TEST_CASE("manifold curves stay on the level and leave along the eigenvector",
          "[manifold]") {
  auto U = normalized_default();
  MechanicalSystem<2> sys{U, 1.0};
  auto orbit = find_periodic_orbit(U, {1, 0}, 2.0);
  auto fl = floquet(orbit, U);
  ManifoldOpts mo;
  mo.ds = 0.01;
  auto cu = manifold_curve(orbit, U, ManifoldSide::unstable, +1, 1.0, mo);
  REQUIRE(cu.chart.size() >= 10);
  for (const auto& x : cu.states) CHECK(std::abs(sys.energy(x) - 2.0) < 1e-9);
  CHECK(cu.max_raw_defect < 1e-5);
  Vec<2> d0 = cu.chart[1] - cu.chart[0];
  double cosang = std::abs(dot(d0, fl.dir_u)) / norm(d0);
  CHECK(std::acos(std::min(1.0, cosang)) < 1e-4);
  CHECK(cu.arclength >= 1.0);
  CHECK_FALSE(cu.truncated);
}

TEST_CASE("reversal exchanges stable and unstable curves", "[manifold]") {
  auto U = normalized_default();
  auto orbit = find_periodic_orbit(U, {1, 0}, 2.0);
  State<2> mirrored{{orbit.anchor[0], orbit.anchor[1], -orbit.anchor[2], -orbit.anchor[3]}};
  auto rev = find_periodic_orbit(U, {-1, 0}, 2.0, mirrored);
  ManifoldOpts mo;
  mo.ds = 0.01;
  auto wu = manifold_curve(orbit, U, ManifoldSide::unstable, +1, 1.0, mo);
  auto wsp = manifold_curve(rev, U, ManifoldSide::stable, +1, 1.0, mo);
  auto wsm = manifold_curve(rev, U, ManifoldSide::stable, -1, 1.0, mo);
  // curves carry raw angle lifts; compare in a common window, reflecting r
  double c0 = orbit.anchor[1];  // theta_3 at the anchor for the (1,0) chart
  auto u = detail::wrap_chart(wu.chart, c0);
  auto sp = detail::wrap_chart(wsp.chart, c0);
  auto sm = detail::wrap_chart(wsm.chart, c0);
  double worst = 0;
  for (std::size_t k = 0; k < u.size(); k += 5) {
    Vec<2> refl{{u[k][0], -u[k][1]}};
    double d = std::min(point_to_polyline(refl, sp), point_to_polyline(refl, sm));
    worst = std::max(worst, d);
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("transverse homoclinic witnesses at a mid-branch energy", "[manifold]") {
  auto U = normalized_default();
  MechanicalSystem<2> sys{U, 1.0};
  auto orbit = find_periodic_orbit(U, {1, 0}, 2.0);
  HomoclinicOpts ho;
  ho.L = 12.0;
  ho.curve.ds = 0.02;
  auto hits = find_homoclinic(orbit, U, ho);
  REQUIRE_FALSE(hits.empty());
  CHECK(hits.front().angle > 1e-3);
  for (const auto& w : hits) {
    CHECK(w.angle >= 1e-4);
    CHECK(std::abs(sys.energy(w.state) - 2.0) < 1e-9);
  }
  // distinct ids really are geometrically separated
  for (std::size_t i = 0; i < hits.size(); ++i)
    for (std::size_t j = i + 1; j < hits.size(); ++j)
      CHECK(norm(hits[i].chart_point - hits[j].chart_point) >= 1e-3);
}

TEST_CASE("homoclinic witnesses map to the reversed orbit's witnesses", "[manifold]") {
  auto U = normalized_default();
  auto orbit = find_periodic_orbit(U, {1, 0}, 2.0);
  State<2> mirrored{{orbit.anchor[0], orbit.anchor[1], -orbit.anchor[2], -orbit.anchor[3]}};
  auto rev = find_periodic_orbit(U, {-1, 0}, 2.0, mirrored);
  HomoclinicOpts ho;
  ho.L = 12.0;
  ho.curve.ds = 0.02;
  auto wa = find_homoclinic(orbit, U, ho);
  auto wb = find_homoclinic(rev, U, ho);
  REQUIRE_FALSE(wa.empty());
  REQUIRE_FALSE(wb.empty());
  // the top witness reflects onto some witness of the reversed orbit
  const auto& top = wa.front();
  Vec<2> refl{{top.chart_point[0], -top.chart_point[1]}};
  double best = std::numeric_limits<double>::infinity();
  for (const auto& w : wb) best = std::min(best, norm(w.chart_point - refl));
  CHECK(best < 5e-2);
}
