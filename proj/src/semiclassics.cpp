#include "grushin_lab/semiclassics.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include "grushin_lab/error.hpp"

namespace grushin_lab {

namespace {

constexpr double kPi = std::numbers::pi;

// Integral of (E - W)^{1/2} over [0, xt]; tanh-sinh clusters nodes at both
// ends, where the integrand has square-root (and possibly cusp) behaviour.
std::pair<double, double> half_phase(const Potential& V, Side side, double E) {
  const double xt = half_inverse(V, side, E);
  thread_local boost::math::quadrature::tanh_sinh<double> ts(12);
  auto f = [&](double y) { return std::sqrt(std::max(E - V.half(side, y), 0.0)); };
  double err = 0, l1 = 0;
  const double val = ts.integrate(f, 0.0, xt, 1e-14, &err, &l1);
  return {val, err};
}

}  // namespace

PhaseProfile phase_profile(const Potential& V, double E) {
  if (!(E > 0)) throw Error(ErrorKind::NonPositiveInput, "energy must be positive");
  const auto [a, ea] = half_phase(V, Side::plus, E);
  const auto [b, eb] = half_phase(V, Side::minus, E);
  return {E, a + b, ea + eb};
}

double bs_phase(const Potential& V, double E) {
  return phase_profile(V, E).phase;
}

double kv(const Potential& V, double t) {
  if (!(t > 0)) throw Error(ErrorKind::NonPositiveInput, "t must be positive");
  return bs_phase(V, t) / std::sqrt(t);
}

double bs_energy(const Potential& V, double phase) {
  if (!(phase > 0)) throw Error(ErrorKind::NonPositiveInput, "phase must be positive");
  const double lp = std::log(phase);
  auto f = [&](double s) { return std::log(bs_phase(V, std::exp(s))) - lp; };
  double a = 0, fa = f(a);
  double b = a, fb = fa;
  double step = fa < 0 ? 1.0 : -1.0;
  for (int i = 0; i < 200 && (fa < 0) == (fb < 0); ++i) {
    a = b, fa = fb;
    b = a + step;
    fb = f(b);
    step *= 2;
  }
  if ((fa < 0) == (fb < 0)) throw Error(ErrorKind::BracketFailure, "cannot bracket phase level");
  if (a > b) std::swap(a, b), std::swap(fa, fb);
  std::uintmax_t iters = 100;
  const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(48),
                                                   iters);
  return std::exp(0.5 * (r.first + r.second));
}

BsError bs_log_error(const Potential& V, int n, const EigenSolveConfig& cfg) {
  BsError out;
  out.E = eigenvalue(V, n, cfg);
  out.phase = bs_phase(V, out.E);
  out.err = std::abs(out.phase - kPi * n);
  out.ratio = out.err / std::log(1.0 + n);
  return out;
}

double xi(const Potential& V, int n, double lambda, const EigenSolveConfig& cfg) {
  if (!(lambda > 0)) throw Error(ErrorKind::NonPositiveInput, "lambda must be positive");
  const double E0 = eigenvalue(V, n, cfg);
  if (const auto d = V.spec().homogeneous_degree()) return std::pow(lambda / E0, (*d + 2) / 2);

  // E_n(tau V) grows like tau^a with 2/(kappa+2) <= a <= 1, so the doubling
  // bounds place log tau within (kappa + 2) |log(lambda/E0)| of zero.
  const double kappa = V.kappa();
  const double lr = std::abs(std::log(lambda / E0)) + std::log(2.0);
  auto f = [&](double s) { return std::log(eigenvalue(V.scaled(std::exp(s)), n, cfg) / lambda); };
  double a = -(kappa + 2) * lr, b = (kappa + 2) * lr;
  const double fa = f(a), fb = f(b);
  if (!(fa < 0 && fb > 0)) throw Error(ErrorKind::BracketFailure, "Xi bracket does not contain the root");
  std::uintmax_t iters = 200;
  auto tol = [](double x, double y) { return std::abs(x - y) <= 1e-11; };
  const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
  return std::exp(0.5 * (r.first + r.second));
}

VirialResult virial(const Potential& V, int n, double tau, const EigenSolveConfig& cfg) {
  if (!(tau > 0)) throw Error(ErrorKind::NonPositiveInput, "tau must be positive");
  const Potential Vt = V.scaled(tau);
  const EigenPair p = eigenfunction(Vt, n, cfg);
  const double E = p.E;

  // central differences on one fixed solver grid, then Richardson in the step
  const auto grid = halve_grid(halve_grid(solver_grid(Vt, E, n, cfg)));
  auto energy = [&](double t) { return eigenvalue_on_grid(V.scaled(t), n, grid, E); };
  const double delta = 1e-4 * tau;
  const double d1 = (energy(tau + delta) - energy(tau - delta)) / (2 * delta);
  const double d2 = (energy(tau + delta / 2) - energy(tau - delta / 2)) / delta;
  const double deriv = (4 * d2 - d1) / 3;
  const double Eg = energy(tau);

  // Hellmann-Feynman: tau dE/dtau = <tau V psi, psi>
  static const double gx[4] = {0.0694318442029737, 0.3300094782075719, 0.6699905217924281, 0.9305681557970263};
  static const double gw[4] = {0.1739274225687269, 0.3260725774312731, 0.3260725774312731, 0.1739274225687269};
  double hf = 0;
  for (std::size_t j = 0; j + 1 < p.grid.size(); ++j) {
    const double a = p.grid[j], h = p.grid[j + 1] - a;
    double acc = 0;
    for (int g = 0; g < 4; ++g) {
      const double x = a + gx[g] * h;
      const double f = p.value(x);
      acc += gw[g] * Vt(x) * f * f;
    }
    hf += acc * h;
  }
  return {tau * deriv / Eg, hf / E};
}

double virial_ratio(const Potential& V, int n, double tau, const EigenSolveConfig& cfg) {
  return virial(V, n, tau, cfg).ratio;
}

}  // namespace grushin_lab
