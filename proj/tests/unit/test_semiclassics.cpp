#include <doctest.h>

#include <cmath>
#include <numbers>

#include "grushin_lab/semiclassics.hpp"

using namespace grushin_lab;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("phase integrals in closed form") {
  CHECK(bs_phase(Potential(power(2)), 9) == doctest::Approx(kPi * 9 / 2).epsilon(1e-12));
  CHECK(bs_phase(Potential(power(1)), 1) == doctest::Approx(4.0 / 3).epsilon(1e-12));
  CHECK(bs_phase(Potential(power_asym(2, 4)), 4) == doctest::Approx(1.5 * kPi).epsilon(1e-12));
  // |x|^d: 2 E^{1/d + 1/2} B(1/d, 3/2) / d
  for (double d : {0.5, 1.5, 3.0}) {
    const double E = 2.7;
    const double exact = 2 * std::pow(E, 1 / d + 0.5) * std::beta(1 / d, 1.5) / d;
    CHECK(bs_phase(Potential(power(d)), E) == doctest::Approx(exact).epsilon(1e-11));
  }
}

TEST_CASE("kv") {
  CHECK(kv(Potential(power(2)), 4) == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(kv(Potential(power(1)), 3) == doctest::Approx(4.0).epsilon(1e-12));
  Potential V(power(2));
  for (double t : {0.1, 1.0, 50.0}) CHECK(kv(V, t) / sublevel_measure(V, t) == doctest::Approx(kPi / 4).epsilon(1e-12));
}

TEST_CASE("bs_energy inverts the phase") {
  Potential V(power(1.5));
  for (double ph : {0.5, 3.0, 400.0}) CHECK(bs_phase(V, bs_energy(V, ph)) == doctest::Approx(ph).epsilon(1e-12));
}

TEST_CASE("logarithmic Bohr-Sommerfeld error") {
  for (int n : {1, 2, 20, 150}) CHECK(bs_log_error(Potential(power(2)), n).err == doctest::Approx(kPi / 2).epsilon(1e-8));
  const auto r = bs_log_error(Potential(power(1)), 2);
  const double E2 = 2.338107410459767;
  CHECK(r.err == doctest::Approx(std::abs(4.0 / 3 * std::pow(E2, 1.5) - 2 * kPi)).epsilon(1e-9));
  CHECK(bs_log_error(Potential(power(2)), 1).ratio == doctest::Approx(kPi / 2 / std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("xi") {
  CHECK(xi(Potential(power(2)), 1, 2) == doctest::Approx(4.0).epsilon(1e-9));
  Potential A(power(1));
  CHECK(xi(A, 2, eigenvalue(A, 2)) == doctest::Approx(1.0).epsilon(1e-12));

  // non-homogeneous: round trip through the eigenvalue
  Potential W(two_power(1, 3));
  for (int n : {1, 5}) {
    for (double lam : {0.3, 7.0, 120.0}) {
      const double t = xi(W, n, lam);
      CHECK(eigenvalue(W.scaled(t), n) == doctest::Approx(lam).epsilon(1e-8));
      CHECK(xi(W, n, 2 * lam) > t);
    }
  }
}

TEST_CASE("virial ratio") {
  for (double d : {1.0, 2.0, 4.0}) {
    for (int n : {1, 10}) {
      for (double tau : {0.25, 4.0}) {
        const auto v = virial(Potential(power(d)), n, tau);
        CHECK(std::abs(v.ratio - 2 / (d + 2)) < 1e-5);
        CHECK(std::abs(v.ratio - v.hellmann_feynman) < 1e-6);
      }
    }
  }
  const auto w = virial(Potential(two_power(1, 3)), 6, 1.0);
  CHECK(w.ratio > 0);
  CHECK(w.ratio <= 1 + 1e-6);
  CHECK(std::abs(w.ratio - w.hellmann_feynman) < 1e-6);
}
