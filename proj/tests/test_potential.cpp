#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "hdl/potential.hpp"
#include "hdl/rng.hpp"
#include "oracle.hpp"

using namespace hdl;
using std::numbers::pi;

TEST_CASE("separable potential at its critical point", "[potential]") {
  TrigPotential U{{{1, 0, 1.0, 0.0}, {0, 1, 1.0, 0.0}}};  // cos t2 + cos t3
  CHECK(U.eval(0, 0) == Catch::Approx(2.0));
  auto g = U.grad(0, 0);
  CHECK(std::abs(g[0]) <= 1e-15);
  CHECK(std::abs(g[1]) <= 1e-15);
}

TEST_CASE("default potential Hessian at the origin", "[potential]") {
  auto U = default_potential();
  auto h = U.hess(0, 0);
  CHECK(h(0, 0) == Catch::Approx(-1.3));
  CHECK(h(0, 1) == Catch::Approx(0.3));
  CHECK(h(1, 0) == Catch::Approx(0.3));
  CHECK(h(1, 1) == Catch::Approx(-1.3));
  // eigenvalues -1.0 and -1.6
  auto ev = sym_eig2(h(0, 0), h(0, 1), h(1, 1));
  CHECK(ev.hi == Catch::Approx(-1.0));
  CHECK(ev.lo == Catch::Approx(-1.6));
}

TEST_CASE("gradient and Hessian match finite differences", "[potential]") {
  auto U = default_potential();
  U.terms.push_back({2, 1, 0.17, 0.4});  // make it less symmetric
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    double t2 = rng.uniform(0, two_pi), t3 = rng.uniform(0, two_pi);
    auto g = U.grad(t2, t3);
    double fd2 = oracle::fd_derivative([&](double x) { return U.eval(x, t3); }, t2);
    double fd3 = oracle::fd_derivative([&](double x) { return U.eval(t2, x); }, t3);
    CHECK(g[0] == Catch::Approx(fd2).epsilon(1e-6).margin(1e-9));
    CHECK(g[1] == Catch::Approx(fd3).epsilon(1e-6).margin(1e-9));

    auto h = U.hess(t2, t3);
    double h22 =
        oracle::fd_derivative([&](double x) { return U.grad(x, t3)[0]; }, t2);
    double h23 =
        oracle::fd_derivative([&](double x) { return U.grad(t2, x)[0]; }, t3);
    double h33 =
        oracle::fd_derivative([&](double x) { return U.grad(t2, x)[1]; }, t3);
    CHECK(h(0, 0) == Catch::Approx(h22).epsilon(1e-6).margin(1e-9));
    CHECK(h(0, 1) == Catch::Approx(h23).epsilon(1e-6).margin(1e-9));
    CHECK(h(1, 1) == Catch::Approx(h33).epsilon(1e-6).margin(1e-9));
  }
}

TEST_CASE("certify_max on the default potential", "[potential]") {
  auto cert = certify_max(default_potential(), 256);
  CHECK(std::abs(angle_diff(cert.x0[0], 0.0)) <= 1e-10);
  CHECK(std::abs(angle_diff(cert.x0[1], 0.0)) <= 1e-10);
  CHECK(cert.e_hat == Catch::Approx(2.3));
  CHECK(cert.nondegenerate);
  CHECK(cert.unique);
  CHECK(cert.margin > 0.1);  // the runner-up maximum is well below
}

TEST_CASE("degenerate and non-unique maxima are rejected", "[potential]") {
  TrigPotential flat{{{1, 0, 1.0, 0.0}}};  // cos t2, flat in t3
  CHECK_THROWS_AS(certify_max(flat, 64), DegenerateMax);

  TrigPotential twin{{{2, 0, 1.0, 0.0}, {0, 1, 1.0, 0.0}}};  // cos 2t2 + cos t3
  CHECK_THROWS_AS(certify_max(twin, 64), NonUniqueMax);
}

TEST_CASE("certify_max is translation covariant", "[potential]") {
  auto U = default_potential();
  const double c2 = 1.1, c3 = -0.7;
  auto Uc = U.translated(c2, c3);  // Uc(x) = U(x + c)
  auto cert = certify_max(U, 256);
  auto cert_c = certify_max(Uc, 256);
  // maximizer moves to x0 - c, value and spectrum unchanged
  CHECK(std::abs(angle_diff(cert_c.x0[0], cert.x0[0] - c2)) <= 1e-9);
  CHECK(std::abs(angle_diff(cert_c.x0[1], cert.x0[1] - c3)) <= 1e-9);
  CHECK(cert_c.e_hat == Catch::Approx(cert.e_hat));
  auto ev = sym_eig2(cert.hessian(0, 0), cert.hessian(0, 1), cert.hessian(1, 1));
  auto evc = sym_eig2(cert_c.hessian(0, 0), cert_c.hessian(0, 1), cert_c.hessian(1, 1));
  CHECK(ev.lo == Catch::Approx(evc.lo));
  CHECK(ev.hi == Catch::Approx(evc.hi));
}

TEST_CASE("normalize_max shifts the maximum to zero and is idempotent", "[potential]") {
  TrigPotential sep{{{1, 0, 1.0, 0.0}, {0, 1, 1.0, 0.0}}};
  auto n1 = normalize_max(sep, 64);
  CHECK(certify_max(n1, 64).e_hat == Catch::Approx(0.0).margin(1e-12));
  // the shift was by -2
  CHECK(n1.eval(0, 0) == Catch::Approx(0.0).margin(1e-12));
  CHECK(n1.eval(pi, pi) == Catch::Approx(-4.0).margin(1e-12));

  auto U = normalize_max(default_potential());
  CHECK(certify_max(U).e_hat == Catch::Approx(0.0).margin(1e-12));
  auto again = normalize_max(U);
  CHECK(certify_max(again).e_hat == Catch::Approx(0.0).margin(1e-12));
  CHECK(again.terms.size() == U.terms.size());
}
