#include <doctest.h>

#include <cmath>

#include "grushin_lab/error.hpp"
#include "grushin_lab/potential.hpp"

using namespace grushin_lab;

TEST_CASE("eval on closed-form families") {
  CHECK(eval(Potential(power(2)), 3.0, 0) == doctest::Approx(9.0));
  CHECK(eval(Potential(power(1)), -2.0, 1) == doctest::Approx(-1.0));
  CHECK(eval(Potential(power_logperturbed(2, 0.1)), 1.0, 0) == doctest::Approx(1.0));

  Potential V(power_asym(2, 4));
  CHECK(V(-1.5) == doctest::Approx(9.0));
  CHECK(eval(V, -1.5, 1) == doctest::Approx(-12.0));

  // derivatives of |x|^d (1 + eps sin log|x|) against central differences
  Potential W(power_logperturbed(1.7, 0.3));
  for (double x : {-3.1, -0.4, 0.25, 2.0, 7.5}) {
    for (int order = 1; order <= 3; ++order) {
      const double h = 1e-4 * std::abs(x);
      const double fd = (eval(W, x + h, order - 1) - eval(W, x - h, order - 1)) / (2 * h);
      CHECK(eval(W, x, order) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("eval errors") {
  Potential V(power(2));
  CHECK_THROWS_AS(eval(V, 0.0, 1), Error);
  try {
    eval(V, 0.0, 1);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DerivativeAtOrigin);
  }
  Potential T(tabulated({1, 2, 3, 4, 5}, {1, 4, 9, 16, 25}));
  try {
    eval(T, 1.5, 2);
    FAIL("expected UnsupportedOrder");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedOrder);
  }
  CHECK_THROWS_AS(Potential(power_logperturbed(2, 0.6)), Error);
  CHECK_THROWS_AS(Potential(two_power(3, 1)), Error);
}

TEST_CASE("certify P1 examples") {
  auto c2 = certify(Potential(power(2)), PotentialClass::P1, 10, 64);
  CHECK(c2.pass);
  CHECK(c2.kappa_hat == doctest::Approx(2.0).epsilon(1e-12));
  auto c05 = certify(Potential(power(0.5)), PotentialClass::P1, 10, 64);
  CHECK(c05.pass);
  CHECK(c05.kappa_hat == doctest::Approx(2.0).epsilon(1e-12));

  // dense scan oracle for x V'/V of |x| + |x|^3
  double worst = 1;
  for (int i = 0; i <= 200000; ++i) {
    const double x = std::pow(10.0, -6 + 12.0 * i / 200000);
    const double r = (x + 3 * x * x * x) / (x + x * x * x);
    worst = std::max({worst, r, 1 / r});
  }
  auto c13 = certify(Potential(two_power(1, 3)), PotentialClass::P1, 10, 64);
  CHECK(c13.pass);
  CHECK(c13.kappa_hat == doctest::Approx(worst).epsilon(1e-9));
  CHECK(c13.kappa_hat == doctest::Approx(3.0).epsilon(1e-9));

  auto ca = certify(Potential(power_asym(2, 4)), PotentialClass::P1, 10, 64);
  CHECK(ca.kappa_hat == doctest::Approx(4.0));
  CHECK_FALSE(certify(Potential(power_asym(2, 4)), PotentialClass::P1, 3, 64).pass);
}

TEST_CASE("certify other classes") {
  auto pk = certify(Potential(power(3)), PotentialClass::Pk, 10, 64, 3);
  CHECK(pk.pass);
  CHECK(pk.kappa_hat == doctest::Approx(6.0));  // |x^3 V'''| = 6 V

  CHECK(certify(Potential(power(1.5)), PotentialClass::P1_cv, 10, 64).pass);
  CHECK_FALSE(certify(Potential(power(0.5)), PotentialClass::P1_cv, 10, 64).pass);

  auto uc = certify(Potential(power_logperturbed(2, 0.1)), PotentialClass::P1_uc, 10, 64);
  CHECK(uc.pass);
  CHECK(uc.theta == doctest::Approx(1.0).epsilon(0.05));
  CHECK(uc.omega.back() < uc.omega.front());

  // nonmonotone table breaks the doubling inequality
  Potential bad(tabulated({0.5, 1, 1.5, 2, 3, 4}, {0.25, 1, 0.5, 4, 9, 16}));
  CHECK_FALSE(bad.p1().has_value());
  CHECK_FALSE(certify(bad, PotentialClass::P1, 1e6, 64).pass);
}

TEST_CASE("tabulated power data reproduces the power law") {
  std::vector<double> x, v;
  for (int i = -10; i <= 10; ++i) {
    x.push_back(std::pow(2.0, i));
    v.push_back(std::pow(2.0, 1.5 * i));
  }
  Potential T(tabulated(x, v));
  CHECK(T(3.3) == doctest::Approx(std::pow(3.3, 1.5)).epsilon(1e-12));
  CHECK(T(-1e5) == doctest::Approx(std::pow(1e5, 1.5)).epsilon(1e-12));
  CHECK(eval(T, -0.7, 1) == doctest::Approx(-1.5 * std::pow(0.7, 0.5)).epsilon(1e-10));
  CHECK(T.kappa() == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("sublevel measure") {
  CHECK(sublevel_measure(Potential(power(2)), 4) == doctest::Approx(4.0).epsilon(1e-13));
  CHECK(sublevel_measure(Potential(power(3)), 8) == doctest::Approx(4.0).epsilon(1e-13));
  CHECK(sublevel_measure(Potential(power_asym(2, 4)), 4) == doctest::Approx(3.0).epsilon(1e-13));
  Potential bad(tabulated({0.5, 1, 1.5, 2, 3, 4}, {0.25, 1, 0.5, 4, 9, 16}));
  try {
    sublevel_measure(bad, 1.0);
    FAIL("expected NotCertified");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotCertified);
  }

  for (const auto& spec : {power(0.5), power(2), power_logperturbed(2, 0.2), two_power(1, 3), power_asym(1.5, 3)}) {
    Potential V(spec);
    const double k = V.kappa();
    for (double t : {1e-3, 0.7, 5.0, 1e4}) {
      for (double lam : {2.0, 4.0}) {
        const double q = sublevel_measure(V, lam * t) / sublevel_measure(V, t);
        CHECK(q >= std::pow(lam, 1 / k) / 2);
        CHECK(q <= 2 * std::pow(lam, k));
      }
      for (double r : {0.5, 2.0, 3.0}) {
        const double lhs = sublevel_measure(V.rescaled(r), t);
        const double rhs = sublevel_measure(V, t / (r * r)) / r;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("doubling property of half-potentials") {
  for (const auto& spec : {power(0.5), power(4), power_logperturbed(1.5, 0.3), two_power(1, 3)}) {
    Potential V(spec);
    const double k = V.kappa();
    for (Side side : {Side::plus, Side::minus}) {
      for (int i = 0; i <= 60; ++i) {
        const double x = std::pow(10.0, -3 + 6.0 * i / 60);
        for (double lam : {2.0, 10.0}) {
          const double q = V.half(side, lam * x) / V.half(side, x);
          CHECK(q >= std::pow(lam, 1 / k) * (1 - 1e-12));
          CHECK(q <= std::pow(lam, k) * (1 + 1e-12));
        }
      }
    }
  }
}

TEST_CASE("scale and rescale") {
  Potential V(power(2));
  CHECK(V.scaled(4)(1.0) == doctest::Approx(4.0));
  CHECK(Potential(power(1)).rescaled(2)(1.0) == doctest::Approx(8.0));
  CHECK(V.rescaled(3.0).kappa() == V.kappa());
  CHECK(Potential(rescale(power(2), 3.0)).kappa() == doctest::Approx(2.0));
}

TEST_CASE("lagrange gap") {
  Potential V(power(2));
  CHECK(lagrange_gap(V, Side::plus, 2, 1) == doctest::Approx(1.5));
  CHECK(lagrange_gap(Potential(power(1)), Side::plus, 3, 1) == doctest::Approx(1.0));
  double lo = 1e9, hi = 0;
  for (int i = 0; i <= 6000; ++i) {
    const double y = std::pow(10.0, -3 + 6.0 * i / 6000);
    const double g = lagrange_gap(V, Side::minus, 2 * y, y);
    lo = std::min(lo, g);
    hi = std::max(hi, g);
  }
  CHECK(lo >= 0.75);
  CHECK(hi <= 1.5 * (1 + 1e-12));
  CHECK_THROWS_AS(lagrange_gap(V, Side::plus, 1, 2), Error);
  CHECK_THROWS_AS(lagrange_gap(V, Side::plus, 1, 0), Error);
}
