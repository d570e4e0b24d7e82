#include <doctest.h>

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "grushin_lab/error.hpp"
#include "grushin_lab/grushin.hpp"

using namespace grushin_lab;

namespace {

constexpr double kPi = std::numbers::pi;

GrushinConfig small_config() {
  GrushinConfig cfg;
  cfg.fiber_cap = 8;
  cfg.truncation_limit = 1;
  return cfg;
}

std::size_t node(const KernelSlice& s, double x) {
  for (std::size_t i = 0; i < s.x.size(); ++i)
    if (std::abs(s.x[i] - x) < 1e-12) return i;
  FAIL("x is not a grid node");
  return 0;
}

}  // namespace

TEST_CASE("multiplier support and validation") {
  const auto m = bump();
  CHECK(m.support().first == doctest::Approx(0.4));
  CHECK(m.support().second == doctest::Approx(0.6));
  CHECK(m(0.5) == 1.0);
  CHECK(m(0.45) == 1.0);
  CHECK(m(0.39) == 0.0);
  CHECK(m(0.425) == doctest::Approx(0.5));
  CHECK_THROWS_AS(bump(0.25), Error);
  CHECK_THROWS_AS(riesz_fragment(1, 1), Error);
  CHECK_THROWS_AS(tabulated_multiplier({0.3, 0.2}, {1, 1}), Error);

  // the dyadic piece j lives on 1 - l in [2^{-j-1}, 2^{1-j}]
  const auto f = riesz_fragment(1.5, 3);
  CHECK(f.support().first == doctest::Approx(0.75));
  CHECK(f.support().second == doctest::Approx(1 - 1.0 / 16));
  CHECK(f(0.875) == doctest::Approx(std::pow(0.125, 1.5)));
  CHECK(f(0.7) == 0.0);
  CHECK(f(0.95) == 0.0);

  const auto t = tabulated_multiplier({0.3, 0.5, 0.7}, {0, 2, 0});
  CHECK(t(0.4) == doctest::Approx(1.0));
  CHECK(t(0.8) == 0.0);
}

TEST_CASE("Sobolev norms") {
  const auto m = bump();
  const double l2 = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double l) { return m(l) * m(l); }, 0.3, 0.7, 15, 1e-12);
  const double n0 = sobolev_norm(m, 0);
  CHECK(n0 * n0 > 0.1);
  CHECK(n0 * n0 < 0.2);
  CHECK(n0 * n0 == doctest::Approx(l2).epsilon(1e-2));
  double prev = n0;
  for (double s : {0.25, 0.5, 1.0, 2.0}) {
    const double n = sobolev_norm(m, s);
    CHECK(n >= prev);
    prev = n;
  }
  CHECK(sobolev_norm(tabulated_multiplier({0.3, 0.6}, {0, 0}), 0.5) == 0.0);
  CHECK_THROWS_AS(sobolev_norm(m, 2.5), Error);
}

TEST_CASE("fiber bands for x^2") {
  // E_n(xi^2 x^2) = xi (2n - 1)
  FiberSource src(Potential(power(2)), GrushinConfig{}.eig);
  for (int n : {1, 2, 5}) {
    const auto [lo, hi] = src.band(n, 0.25, 1.0);
    CHECK(lo == doctest::Approx(0.25 / (2 * n - 1)).epsilon(1e-9));
    CHECK(hi == doctest::Approx(1.0 / (2 * n - 1)).epsilon(1e-9));
    const auto f = src.fiber(n, 0.3);
    CHECK(f.E == doctest::Approx(0.3 * (2 * n - 1)).epsilon(1e-9));
  }
  const auto g = src.fiber(1, 0.5);
  // ground state of -d^2 + x^2/4: (2 pi)^{-1/4} e^{-x^2/4}
  CHECK(g(1.0) == doctest::Approx(std::pow(2 * kPi, -0.25) * std::exp(-0.25)).epsilon(1e-6));
}

TEST_CASE("fibers of a non-homogeneous potential") {
  const Potential V(two_power(1, 3));
  FiberSource src(V, GrushinConfig{}.eig);
  const auto [lo, hi] = src.band(2, 0.5, 2.0);
  CHECK(eigenvalue(V.scaled(lo * lo), 2) == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(eigenvalue(V.scaled(hi * hi), 2) == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(src.fiber(2, lo).E == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("kernel symmetry, parity and the fiber Plancherel identity") {
  const Potential V(power(2));
  const auto m = bump();
  const auto cfg = small_config();
  FiberSource src(V, cfg.eig);
  const auto s0 = kernel_slice(m, src, 1.0, 0.0, cfg);
  const auto s1 = kernel_slice(m, src, 1.0, 1.0, cfg);
  const auto sm = kernel_slice(m, src, 1.0, -1.0, cfg);
  REQUIRE(s0.u.size() == s1.u.size());
  REQUIRE(s1.u.size() == sm.u.size());
  double kmax = 0;
  for (double k : s1.K) kmax = std::max(kmax, std::abs(k));
  const std::size_t a = node(s0, 1.0), b = node(s1, 0.0);
  const std::size_t p = node(s1, 2.0), q = node(sm, -2.0);
  for (std::size_t j = 0; j < s0.u.size(); ++j) {
    // K(x, x', u) = K(x', x, -u) and K is even in u
    CHECK(std::abs(s0.at(a, j) - s1.at(b, j)) <= 1e-8 * kmax);
    // V even: K(-x, -x', u) = K(x, x', u)
    CHECK(std::abs(s1.at(p, j) - sm.at(q, j)) <= 1e-8 * kmax);
  }
  for (double xp : {0.0, 1.0}) {
    const auto& s = xp == 0 ? s0 : s1;
    const double u_space = weighted_plancherel_lhs(s, V, 0) / plancherel_prefactor(V, 1.0, 0, xp);
    CHECK(u_space == doctest::Approx(plancherel_oracle(m, src, 1.0, xp, s.fiber_cap)).epsilon(1e-2));
    CHECK(s.tail_fraction < cfg.tail_tol);
  }
}

TEST_CASE("rescaling covariance") {
  const auto m = bump();
  const auto cfg = small_config();
  const double a = weighted_plancherel_lhs(m, Potential(power(2)), 2.0, 0.25, 1.0, cfg);
  const double b = weighted_plancherel_lhs(m, Potential(rescale(power(2), 2.0)), 1.0, 0.25, 0.5, cfg);
  CHECK(a == doctest::Approx(b).epsilon(2e-2));
}

TEST_CASE("empty multiplier and errors") {
  const Potential V(power(2));
  const auto zero = tabulated_multiplier({0.3, 0.6}, {0, 0});
  const auto cfg = small_config();
  const auto s = kernel_slice(zero, V, 1.0, 0.0, cfg);
  for (double k : s.K) CHECK(k == 0.0);
  CHECK(weighted_plancherel_lhs(s, V, 0.25) == 0.0);
  const auto sweep = plancherel_sweep(zero, V, {0.25}, {1.0}, {0.0}, cfg);
  CHECK(sweep.rows.at(0).ratio == 0.0);
  CHECK_THROWS_AS(kernel_slice(bump(), V, -1.0, 0.0, cfg), Error);
  CHECK_THROWS_AS(kernel_slice(bump(), V, 1.0, 0.0, cfg, 0.5), Error);
  GrushinConfig tight = cfg;
  tight.truncation_limit = 1e-6;
  tight.max_fiber_cap = 8;
  try {
    kernel_slice(bump(), V, 1.0, 4.0, tight);
    FAIL("expected WindowOverflow");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::WindowOverflow);
  }
}
