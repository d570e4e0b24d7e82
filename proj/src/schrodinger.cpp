#include "grushin_lab/schrodinger.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include "grushin_lab/error.hpp"
#include "grushin_lab/semiclassics.hpp"
#include "magnus.hpp"

namespace grushin_lab {

using detail::M2;

void EigenSolveConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::PreconditionViolated, what);
  };
  need(rel_tol_eigenvalue > 0 && rel_tol_eigenvalue <= 1e-4, "rel_tol_eigenvalue must lie in (0, 1e-4]");
  need(truncation_factor >= 8, "truncation_factor must be at least 8");
  need(points_per_wavelength >= 4, "points_per_wavelength must be at least 4");
  need(transition_refinement >= 1, "transition_refinement must be positive");
  need(max_grid >= 1000, "max_grid must be at least 1000");
  need(residual_target > 0, "residual_target must be positive");
  need(oversample >= 0, "oversample must be nonnegative");
}

std::uint64_t EigenSolveConfig::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const auto& v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    for (std::size_t i = 0; i < sizeof v; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  mix(rel_tol_eigenvalue);
  mix(truncation_factor);
  mix(points_per_wavelength);
  mix(transition_refinement);
  mix(static_cast<std::uint64_t>(max_grid));
  mix(residual_target);
  mix(oversample);
  return h;
}

namespace {

constexpr double kPi = std::numbers::pi;

double hermite(double h, double f0, double f1, double d0, double d1, double t) {
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * h * d0 + (-2 * t3 + 3 * t2) * f1 + (t3 - t2) * h * d1;
}

double hermite_slope(double h, double f0, double f1, double d0, double d1, double t) {
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * f0 + (-6 * t2 + 6 * t) * f1) / h + (3 * t2 - 4 * t + 1) * d0 + (3 * t2 - 2 * t) * d1;
}

// Solver mesh: nodes plus V at the Gauss points of each interval.
struct Mesh {
  std::vector<double> x;
  std::vector<std::array<double, 3>> vg;
  std::size_t origin = 0;

  Mesh(const Potential& V, const std::vector<double>& grid) : x(grid) {
    origin = static_cast<std::size_t>(std::lower_bound(x.begin(), x.end(), 0.0) - x.begin());
    vg.resize(x.size() - 1);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      const double h = x[i + 1] - x[i];
      for (int j = 0; j < 3; ++j) vg[i][j] = V(x[i] + detail::kGaussNodes[j] * h);
    }
  }

  M2 step(std::size_t i, double E) const {
    return detail::magnus6(x[i + 1] - x[i], vg[i][0] - E, vg[i][1] - E, vg[i][2] - E);
  }
};

int sign_of(double v) { return (v > 0) - (v < 0); }

double reduced_phase(double k, double p, double dp) {
  if (p == 0) return 0.0;
  double phi = std::atan2(k * p, dp);
  if (phi < 0) phi += kPi;
  if (phi >= kPi) phi -= kPi;
  return phi;
}

// theta_L(0) - theta_R(0) for the Pruefer phase theta = atan2(k psi, psi').
double phase_mismatch(const Mesh& m, double E, double k) {
  const std::size_t i0 = m.origin, N = m.x.size() - 1;
  double p = 0, dp = 1;
  int last = 0, zl = 0;
  for (std::size_t i = 0; i < i0; ++i) {
    const M2 U = m.step(i, E);
    const double np = U.a * p + U.b * dp, ndp = U.c * p + U.d * dp;
    p = np, dp = ndp;
    const double big = std::max(std::abs(p), std::abs(dp));
    if (big > 1e150) p /= big, dp /= big;
    const int s = sign_of(p);
    if (s != 0) {
      if (last != 0 && s != last) ++zl;
      last = s;
    }
  }
  if (p == 0) ++zl;
  const double theta_l = kPi * zl + reduced_phase(k, p, dp);

  double q = 0, dq = -1;
  int zr = 0;
  last = 0;
  for (std::size_t i = N; i > i0; --i) {
    const M2 U = detail::inverse_unimodular(m.step(i - 1, E));
    const double nq = U.a * q + U.b * dq, ndq = U.c * q + U.d * dq;
    q = nq, dq = ndq;
    const double big = std::max(std::abs(q), std::abs(dq));
    if (big > 1e150) q /= big, dq /= big;
    const int s = sign_of(q);
    if (s != 0) {
      if (last != 0 && s != last) ++zr;
      last = s;
    }
  }
  const double theta_r = reduced_phase(k, q, dq) - kPi * zr;
  return theta_l - theta_r;
}

int count_from_mismatch(double D) {
  return D < 0 ? 0 : static_cast<int>(std::floor(D / kPi)) + 1;
}

struct CoarseSolution {
  double E = 0;
  std::vector<double> grid;
};

double solve_on_mesh(const Mesh& m, int n, double E_guess) {
  const double k = std::sqrt(E_guess);
  const double target = (n - 1) * kPi;
  auto F = [&](double E) { return phase_mismatch(m, E, k) - target; };
  double lo = E_guess, hi = E_guess;
  double flo = F(lo);
  double fhi = flo;
  double step = 1e-3;
  for (int it = 0; flo >= 0; ++it) {
    if (it > 200) throw Error(ErrorKind::BracketFailure, "cannot bracket eigenvalue from below");
    hi = lo, fhi = flo;
    lo = std::max(lo * (1 - step), lo * 0.5);
    flo = F(lo);
    step *= 2;
  }
  step = 1e-3;
  for (int it = 0; fhi <= 0; ++it) {
    if (it > 200) throw Error(ErrorKind::BracketFailure, "cannot bracket eigenvalue from above");
    lo = hi, flo = fhi;
    hi = hi * (1 + step);
    fhi = F(hi);
    step *= 2;
  }
  std::uintmax_t iters = 200;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 4e-15 * std::abs(a); };
  const auto r = boost::math::tools::toms748_solve(F, lo, hi, flo, fhi, tol, iters);
  const double E = 0.5 * (r.first + r.second);
  const int clo = count_from_mismatch(F(E * (1 - 1e-10)) + target);
  const int chi = count_from_mismatch(F(E * (1 + 1e-10)) + target);
  if (clo != n - 1 || chi != n) {
    throw Error(ErrorKind::BracketFailure, "phase count is not monotone across the eigenvalue bracket");
  }
  return E;
}

CoarseSolution solve_coarse(const Potential& V, int n, const EigenSolveConfig& cfg) {
  cfg.validate();
  if (n < 1) throw Error(ErrorKind::PreconditionViolated, "n must be positive");
  if (!V.p1()) throw Error(ErrorKind::NotCertified, "eigensolver requires a P1 certificate");
  const double E0 = bs_energy(V, kPi * (n - 0.5));
  auto grid = solver_grid(V, E0, n, cfg);
  double E1 = solve_on_mesh(Mesh(V, grid), n, E0);
  if (std::abs(E1 - E0) > 0.5 * std::pow(n, -2.0 / 3.0) * E0) {
    grid = solver_grid(V, E1, n, cfg);
    E1 = solve_on_mesh(Mesh(V, grid), n, E1);
  }
  for (;;) {
    if (2 * grid.size() > cfg.max_grid) {
      throw Error(ErrorKind::MaxGridExceeded, "eigenvalue tolerance not reached within max_grid nodes");
    }
    auto fine = halve_grid(grid);
    const double E2 = solve_on_mesh(Mesh(V, fine), n, E1);
    const double extrapolated = E2 + (E2 - E1) / 63.0;
    if (std::abs(E2 - E1) / 63.0 <= cfg.rel_tol_eigenvalue * extrapolated) {
      return {extrapolated, std::move(fine)};
    }
    grid = std::move(fine);
    E1 = E2;
  }
}

struct Sampled {
  std::vector<double> x, v, psi, dpsi;
  std::vector<std::size_t> interval;  // coarse interval owning the node (node j belongs to [j-1, j])
  double mismatch = 0;                // sine of the Pruefer phase gap between the two sweeps at 0
};

// Integrates through the subdivided mesh from both ends and matches at 0.
Sampled sample(const Potential& V, const Mesh& m, const std::vector<int>& sub, double E) {
  const std::size_t N = m.x.size() - 1, i0 = m.origin;
  std::size_t total = 1;
  for (int s : sub) total += static_cast<std::size_t>(s);
  Sampled out;
  out.x.resize(total);
  out.v.resize(total);
  out.psi.resize(total);
  out.dpsi.resize(total);
  out.interval.resize(total);
  std::vector<std::size_t> start(N + 1);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < N; ++i) {
    start[i] = pos;
    const double h = (m.x[i + 1] - m.x[i]) / sub[i];
    for (int j = 0; j < sub[i]; ++j) {
      out.x[pos] = j == 0 ? m.x[i] : m.x[i] + j * h;
      out.interval[pos] = i == 0 ? 0 : (j == 0 ? i - 1 : i);
      ++pos;
    }
  }
  start[N] = pos;
  out.x[pos] = m.x[N];
  out.interval[pos] = N - 1;
  for (std::size_t j = 0; j < total; ++j) out.v[j] = V(out.x[j]);

  auto magnus = [&](double a, double b) {
    const double h = b - a;
    return detail::magnus6(h, V(a + detail::kGaussNodes[0] * h) - E, V(a + detail::kGaussNodes[1] * h) - E,
                           V(a + detail::kGaussNodes[2] * h) - E);
  };
  // steps touching the origin are split geometrically, since V may have a cusp there
  auto fine_step = [&](std::size_t j) {
    const double a = out.x[j], b = out.x[j + 1];
    if (a != 0 && b != 0) return magnus(a, b);
    const double len = b - a;
    M2 U{1, 0, 0, 1};
    double t = 1e-6;
    for (double prev = 0; prev < 1;) {
      const double next = prev == 0 ? t : std::min(1.0, prev * 1.25);
      const M2 S = a == 0 ? magnus(a + prev * len, a + next * len) : magnus(b - next * len, b - prev * len);
      U = a == 0 ? S * U : U * S;
      prev = next;
    }
    return U;
  };

  const std::size_t j0 = start[i0];
  out.psi[0] = 0, out.dpsi[0] = 1;
  for (std::size_t j = 0; j < j0; ++j) {
    const M2 U = fine_step(j);
    out.psi[j + 1] = U.a * out.psi[j] + U.b * out.dpsi[j];
    out.dpsi[j + 1] = U.c * out.psi[j] + U.d * out.dpsi[j];
  }
  const double lp = out.psi[j0], ldp = out.dpsi[j0];
  out.psi[total - 1] = 0, out.dpsi[total - 1] = -1;
  for (std::size_t j = total - 1; j > j0; --j) {
    const M2 U = detail::inverse_unimodular(fine_step(j - 1));
    out.psi[j - 1] = U.a * out.psi[j] + U.b * out.dpsi[j];
    out.dpsi[j - 1] = U.c * out.psi[j] + U.d * out.dpsi[j];
  }
  const double k = std::sqrt(E);
  const double rp = out.psi[j0], rdp = out.dpsi[j0];
  const double ln = std::hypot(k * lp, ldp), rn = std::hypot(k * rp, rdp);
  out.mismatch = k * ((lp / ln) * (rdp / rn) - (ldp / ln) * (rp / rn));
  const double c = k * std::abs(lp) >= std::abs(ldp) ? out.psi[j0] / lp : out.dpsi[j0] / ldp;
  for (std::size_t j = 0; j < j0; ++j) out.psi[j] *= c, out.dpsi[j] *= c;
  double big = 0;
  for (double p : out.psi) big = std::max(big, std::abs(p));
  for (std::size_t j = 0; j < total; ++j) out.psi[j] /= big, out.dpsi[j] /= big;
  return out;
}

// (1/h^2) * integral of (h - |t|) (V - E) psi over the stencil around node j,
// which the three-point difference of an exact solution reproduces even where
// V has a cusp.
double stencil_average(const Potential& V, const Sampled& s, std::size_t j, double E) {
  thread_local boost::math::quadrature::tanh_sinh<double> ts(10);
  const double h = s.x[j + 1] - s.x[j];
  auto half = [&](std::size_t a) {
    auto f = [&](double t) {
      const double x = s.x[a] + t * h;
      const double w = a == j ? 1 - t : t;
      return w * (V(x) - E) * hermite(h, s.psi[a], s.psi[a + 1], s.dpsi[a], s.dpsi[a + 1], t);
    };
    return ts.integrate(f, 0.0, 1.0, 1e-12);
  };
  return half(j - 1) + half(j);
}

}  // namespace

std::vector<double> halve_grid(const std::vector<double>& grid) {
  std::vector<double> out;
  out.reserve(2 * grid.size());
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    out.push_back(grid[i]);
    out.push_back(0.5 * (grid[i] + grid[i + 1]));
  }
  out.push_back(grid.back());
  return out;
}

std::pair<double, double> transition_points(const Potential& V, double E) {
  if (!(E > 0)) throw Error(ErrorKind::NonPositiveInput, "energy must be positive");
  return {half_inverse(V, Side::minus, E), half_inverse(V, Side::plus, E)};
}

std::vector<double> solver_grid(const Potential& V, double E, int n, const EigenSolveConfig& cfg) {
  const auto [xm, xp] = transition_points(V, E);
  const double w = std::pow(static_cast<double>(std::max(n, 1)), -2.0 / 3.0) * (xm + xp);
  const double ppw = cfg.points_per_wavelength;
  const double hc = 2 * kPi / (ppw * std::sqrt(E));
  const double h0 = 1e-6 * hc;
  const double h_layer = w / cfg.transition_refinement;

  auto march = [&](Side side, double xt) {
    std::vector<double> ys;
    double y = 0, S = 0;
    for (;;) {
      double h = std::min(hc, 0.25 * y + h0);
      if (y < xt + 0.5 * w && y + h > xt - 0.5 * w) h = std::min(h, h_layer);
      double yn = y + h;
      double W = V.half(side, yn);
      if (W > E) {
        const double hf = 2 * kPi / (ppw * std::sqrt(W - E));
        if (hf < h) {
          yn = y + hf;
          W = V.half(side, yn);
        }
      }
      if (yn > xt) {
        const double lo = std::max(y, xt);
        S += (yn - lo) * std::sqrt(std::max(V.half(side, 0.5 * (lo + yn)) - E, 0.0));
      }
      y = yn;
      ys.push_back(y);
      if (ys.size() > cfg.max_grid) throw Error(ErrorKind::MaxGridExceeded, "solver grid exceeds max_grid");
      if (y > xt && (S >= 600 || (W >= cfg.truncation_factor * E && S >= 50))) break;
    }
    return ys;
  };
  const auto right = march(Side::plus, xp);
  const auto left = march(Side::minus, xm);
  std::vector<double> grid;
  grid.reserve(left.size() + right.size() + 1);
  for (auto it = left.rbegin(); it != left.rend(); ++it) grid.push_back(-*it);
  grid.push_back(0.0);
  grid.insert(grid.end(), right.begin(), right.end());
  if (grid.size() > cfg.max_grid) throw Error(ErrorKind::MaxGridExceeded, "solver grid exceeds max_grid");
  return grid;
}

double eigenvalue_on_grid(const Potential& V, int n, const std::vector<double>& grid, double E_guess) {
  return solve_on_mesh(Mesh(V, grid), n, E_guess);
}

double eigenvalue(const Potential& V, int n, const EigenSolveConfig& cfg) {
  return solve_coarse(V, n, cfg).E;
}

EigenPair eigenfunction(const Potential& V, int n, const EigenSolveConfig& cfg) {
  auto coarse = solve_coarse(V, n, cfg);
  const double E = coarse.E;
  // the graded nodes next to the origin are dropped for sampling; second
  // differences on them would measure rounding error only
  {
    const auto [xm, xp] = transition_points(V, E);
    const double c = 0.5 * std::min(xm, xp);
    double h0 = 0;
    for (std::size_t i = 0; i + 1 < coarse.grid.size(); ++i) {
      if (coarse.grid[i] >= -c && coarse.grid[i + 1] <= c) h0 = std::max(h0, coarse.grid[i + 1] - coarse.grid[i]);
    }
    std::erase_if(coarse.grid, [&](double x) { return x != 0 && std::abs(x) < 0.75 * h0; });
  }
  const Mesh m(V, coarse.grid);
  const std::size_t N = m.x.size() - 1;

  std::vector<int> sub(N, 2);
  if (cfg.oversample > 0) {
    std::fill(sub.begin(), sub.end(), cfg.oversample + cfg.oversample % 2);
  } else {
    // a priori estimate from |psi''''| ~ (V-E)^2 psi + 2 V' psi' + V'' psi on a coarse sampling
    std::vector<int> two(N, 2);
    const Sampled c = sample(V, m, two, E);
    double pmax = 0;
    for (double p : c.psi) pmax = std::max(pmax, std::abs(p));
    const double rho = 0.25 * cfg.residual_target;
    for (std::size_t i = 0; i < N; ++i) {
      const double h = m.x[i + 1] - m.x[i];
      const double mid = 0.5 * (m.x[i] + m.x[i + 1]);
      double amp = 0, slope = 0, q = 0;
      for (std::size_t j = 2 * i; j <= 2 * i + 2; ++j) {
        const double g = std::abs(c.v[j] - E);
        amp = std::max(amp, std::abs(c.psi[j]) + std::min(h * std::abs(c.dpsi[j]), std::abs(c.dpsi[j]) / std::sqrt(std::max(g, 1e-300))));
        slope = std::max(slope, std::abs(c.dpsi[j]));
        q = std::max(q, g);
      }
      const double d1 = std::abs(V.derivative(mid, 1));
      double d2 = 0;
      if (m.x[i] != 0 && m.x[i + 1] != 0) d2 = std::abs(V.derivative(m.x[i + 1], 1) - V.derivative(m.x[i], 1)) / h;
      const double bound = q * q * amp + 2 * d1 * slope + d2 * amp;
      const double hreq = bound > 0 ? std::sqrt(12 * rho * E * pmax / bound) : h;
      int s = static_cast<int>(std::ceil(h / hreq));
      s = std::max(2, s + s % 2);
      sub[i] = s;
    }
  }

  EigenPair p;
  p.n = n;
  p.E = E;
  bool last_pass = false;
  double Es = E;
  for (int pass = 0;; ++pass) {
    std::size_t total = 1;
    for (int s : sub) total += static_cast<std::size_t>(s);
    if (total > cfg.max_grid) throw Error(ErrorKind::MaxGridExceeded, "eigenfunction sampling exceeds max_grid");
    Sampled s = sample(V, m, sub, Es);
    // the eigenvalue of the sampling mesh differs from E by the solver error;
    // match on this mesh so that psi and psi' are both continuous at 0
    const std::size_t o = m.origin;
    const double h_origin = std::min((m.x[o + 1] - m.x[o]) / sub[o], (m.x[o] - m.x[o - 1]) / sub[o - 1]);
    if (std::abs(s.mismatch) > 1e-3 * cfg.residual_target * std::sqrt(E) * h_origin) {
      const double E1 = Es * (1 + 1e-11);
      const Sampled s1 = sample(V, m, sub, E1);
      const double Em = E1 - s1.mismatch * (E1 - Es) / (s1.mismatch - s.mismatch);
      if (std::abs(Em - E) < 1e-8 * E) {
        Es = Em;
        s = sample(V, m, sub, Es);
      }
    }

    // Simpson normalisation per solver interval
    double norm = 0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const double h = (m.x[i + 1] - m.x[i]) / sub[i];
      double acc = s.psi[pos] * s.psi[pos] + s.psi[pos + sub[i]] * s.psi[pos + sub[i]];
      for (int j = 1; j < sub[i]; ++j) acc += (j % 2 ? 4.0 : 2.0) * s.psi[pos + j] * s.psi[pos + j];
      norm += acc * h / 3;
      pos += sub[i];
    }
    const double scale = 1.0 / std::sqrt(norm);
    double pmax = 0;
    for (std::size_t j = 0; j < s.psi.size(); ++j) {
      s.psi[j] *= scale;
      s.dpsi[j] *= scale;
      pmax = std::max(pmax, std::abs(s.psi[j]));
    }

    double worst = 0;
    std::vector<char> bad(N, 0);
    for (std::size_t j = 1; j + 1 < s.x.size(); ++j) {
      const double hl = s.x[j] - s.x[j - 1], hr = s.x[j + 1] - s.x[j];
      if (std::abs(hl - hr) > 1e-9 * hl) continue;
      const double d2 = (s.psi[j + 1] - 2 * s.psi[j] + s.psi[j - 1]) / (hl * hr);
      double r = std::abs(d2 - (s.v[j] - E) * s.psi[j]) / (E * pmax);
      if (r > cfg.residual_target) r = std::abs(d2 - stencil_average(V, s, j, E)) / (E * pmax);
      worst = std::max(worst, r);
      if (r > cfg.residual_target) {
        bad[s.interval[j]] = 1;
        bad[s.interval[j + 1]] = 1;
      }
    }
    const bool done = cfg.oversample > 0 || worst <= cfg.residual_target || pass >= 4 || last_pass;
    if (done) {
      // tail check: the last solver interval at each end must carry a negligible amplitude
      double tail = 0;
      for (std::size_t j = 0; j <= static_cast<std::size_t>(sub.front()); ++j) tail = std::max(tail, std::abs(s.psi[j]));
      for (std::size_t j = s.psi.size() - 1 - sub.back(); j < s.psi.size(); ++j) tail = std::max(tail, std::abs(s.psi[j]));
      if (tail >= 1e-9 * pmax) throw Error(ErrorKind::MaxGridExceeded, "eigenfunction tail not negligible at cutoff");
      p.grid = std::move(s.x);
      p.v = std::move(s.v);
      p.psi = std::move(s.psi);
      p.dpsi = std::move(s.dpsi);
      p.residual = worst;
      break;
    }
    // below this spacing the three-point difference is dominated by rounding
    const double h_floor = std::sqrt(16 * std::numeric_limits<double>::epsilon() / (E * cfg.residual_target));
    bool refined = false;
    for (std::size_t i = 0; i < N; ++i) {
      if (bad[i] && (m.x[i + 1] - m.x[i]) / (2 * sub[i]) >= h_floor) {
        sub[i] *= 2;
        refined = true;
      }
    }
    if (!refined) last_pass = true;
  }

  // independent quadrature of |psi|^2: four-point Gauss on the Hermite interpolant
  static const double gx[4] = {0.0694318442029737, 0.3300094782075719, 0.6699905217924281, 0.9305681557970263};
  static const double gw[4] = {0.1739274225687269, 0.3260725774312731, 0.3260725774312731, 0.1739274225687269};
  double q = 0;
  for (std::size_t j = 0; j + 1 < p.grid.size(); ++j) {
    const double h = p.grid[j + 1] - p.grid[j];
    double acc = 0;
    for (int g = 0; g < 4; ++g) {
      const double f = hermite(h, p.psi[j], p.psi[j + 1], p.dpsi[j], p.dpsi[j + 1], gx[g]);
      acc += gw[g] * f * f;
    }
    q += acc * h;
  }
  p.norm_defect = std::abs(q - 1);
  return p;
}

double EigenPair::value(double x) const {
  if (grid.empty() || x < grid.front() || x > grid.back()) return 0.0;
  auto it = std::upper_bound(grid.begin(), grid.end(), x);
  std::size_t j = it == grid.end() ? grid.size() - 2 : static_cast<std::size_t>(it - grid.begin()) - 1;
  const double h = grid[j + 1] - grid[j];
  return hermite(h, psi[j], psi[j + 1], dpsi[j], dpsi[j + 1], (x - grid[j]) / h);
}

double EigenPair::derivative(double x) const {
  if (grid.empty() || x < grid.front() || x > grid.back()) return 0.0;
  auto it = std::upper_bound(grid.begin(), grid.end(), x);
  std::size_t j = it == grid.end() ? grid.size() - 2 : static_cast<std::size_t>(it - grid.begin()) - 1;
  const double h = grid[j + 1] - grid[j];
  return hermite_slope(h, psi[j], psi[j + 1], dpsi[j], dpsi[j + 1], (x - grid[j]) / h);
}

double EigenPair::max_abs() const {
  double m = 0;
  for (double p : psi) m = std::max(m, std::abs(p));
  return m;
}

namespace {

// Roots of a sampled function f with derivative df, located by sign changes
// between nodes and refined on the cubic Hermite interpolant. An exact zero
// at a node is reported once.
std::vector<double> sampled_roots(const std::vector<double>& x, const std::vector<double>& f,
                                  const std::vector<double>& df) {
  std::vector<double> roots;
  int last = 0;
  bool at_zero = false;
  for (std::size_t j = 1; j + 1 < x.size(); ++j) {
    const int s = sign_of(f[j]);
    if (s == 0) {
      if (last != 0 && !at_zero) roots.push_back(x[j]);
      at_zero = true;
      continue;
    }
    if (last != 0 && s != last && !at_zero) {
      const double h = x[j] - x[j - 1];
      auto g = [&](double t) { return hermite(h, f[j - 1], f[j], df[j - 1], df[j], t); };
      const double ga = g(0), gb = g(1);
      if ((ga < 0) == (gb < 0)) {
        roots.push_back(x[j - 1] - f[j - 1] * h / (f[j] - f[j - 1]));
      } else {
        std::uintmax_t it = 100;
        const auto r = boost::math::tools::toms748_solve(g, 0.0, 1.0, ga, gb,
                                                         boost::math::tools::eps_tolerance<double>(50), it);
        roots.push_back(x[j - 1] + 0.5 * (r.first + r.second) * h);
      }
    }
    at_zero = false;
    last = s;
  }
  return roots;
}

}  // namespace

std::vector<double> zeros(const EigenPair& p) {
  return sampled_roots(p.grid, p.psi, p.dpsi);
}

std::vector<double> critical_points(const EigenPair& p) {
  std::vector<double> dd(p.psi.size());
  for (std::size_t j = 0; j < p.psi.size(); ++j) dd[j] = (p.v[j] - p.E) * p.psi[j];
  return sampled_roots(p.grid, p.dpsi, dd);
}

void check_interlacing(const EigenPair& p) {
  const auto z = zeros(p);
  const auto c = critical_points(p);
  if (z.size() != static_cast<std::size_t>(p.n - 1) || c.size() != static_cast<std::size_t>(p.n)) {
    throw Error(ErrorKind::InterlacingViolation, "n = " + std::to_string(p.n) + ": " + std::to_string(z.size()) +
                                                     " zeros and " + std::to_string(c.size()) + " critical points");
  }
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!(c[i] < z[i] && z[i] < c[i + 1])) {
      throw Error(ErrorKind::InterlacingViolation, "n = " + std::to_string(p.n) + ": zeros and critical points do not interlace");
    }
  }
}

int spectrum_count(const Potential& V, double Lambda, const EigenSolveConfig& cfg) {
  cfg.validate();
  if (!(Lambda > 0)) throw Error(ErrorKind::NonPositiveInput, "Lambda must be positive");
  if (!V.p1()) throw Error(ErrorKind::NotCertified, "spectrum_count requires a P1 certificate");
  const int n_est = std::max(1, static_cast<int>(bs_phase(V, Lambda) / kPi + 1));
  auto grid = solver_grid(V, Lambda, n_est, cfg);
  const double k = std::sqrt(Lambda);
  int prev = count_from_mismatch(phase_mismatch(Mesh(V, grid), Lambda, k));
  for (int level = 0; level < 6; ++level) {
    grid = halve_grid(grid);
    if (grid.size() > cfg.max_grid) break;
    const int c = count_from_mismatch(phase_mismatch(Mesh(V, grid), Lambda, k));
    if (c == prev) return c;
    prev = c;
  }
  throw Error(ErrorKind::BracketFailure, "phase count did not settle under grid refinement");
}

double inner_product(const EigenPair& a, const EigenPair& b) {
  static const double gx[4] = {0.0694318442029737, 0.3300094782075719, 0.6699905217924281, 0.9305681557970263};
  static const double gw[4] = {0.1739274225687269, 0.3260725774312731, 0.3260725774312731, 0.1739274225687269};
  const double lo = std::max(a.grid.front(), b.grid.front());
  const double hi = std::min(a.grid.back(), b.grid.back());
  if (!(lo < hi)) return 0.0;
  std::vector<double> pts;
  pts.reserve(a.grid.size() + b.grid.size());
  std::merge(a.grid.begin(), a.grid.end(), b.grid.begin(), b.grid.end(), std::back_inserter(pts));
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::size_t ia = 0, ib = 0;
  double sum = 0, comp = 0;
  for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
    const double s = pts[j], t = pts[j + 1];
    if (s < lo || t > hi) continue;
    while (a.grid[ia + 1] <= s) ++ia;
    while (b.grid[ib + 1] <= s) ++ib;
    const double ha = a.grid[ia + 1] - a.grid[ia], hb = b.grid[ib + 1] - b.grid[ib];
    double acc = 0;
    for (int g = 0; g < 4; ++g) {
      const double x = s + gx[g] * (t - s);
      const double fa = hermite(ha, a.psi[ia], a.psi[ia + 1], a.dpsi[ia], a.dpsi[ia + 1], (x - a.grid[ia]) / ha);
      const double fb = hermite(hb, b.psi[ib], b.psi[ib + 1], b.dpsi[ib], b.dpsi[ib + 1], (x - b.grid[ib]) / hb);
      acc += gw[g] * fa * fb;
    }
    // compensated summation keeps the result independent of grid size
    const double y = acc * (t - s) - comp;
    const double tt = sum + y;
    comp = (tt - sum) - y;
    sum = tt;
  }
  return sum;
}

EigenPair scale_pair(const EigenPair& p, double tau, double degree) {
  if (!(tau > 0)) throw Error(ErrorKind::NonPositiveInput, "tau must be positive");
  const double s = std::pow(tau, 1.0 / (degree + 2));
  EigenPair q = p;
  const double rs = std::sqrt(s);
  for (std::size_t j = 0; j < q.grid.size(); ++j) {
    q.grid[j] /= s;
    q.v[j] *= s * s;
    q.psi[j] *= rs;
    q.dpsi[j] *= rs * s;
  }
  q.E *= s * s;
  return q;
}

}  // namespace grushin_lab
