#include "grushin_lab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "grushin_lab/error.hpp"
#include "grushin_lab/parallel.hpp"
#include "grushin_lab/semiclassics.hpp"

namespace grushin_lab {

namespace {

constexpr double kPi = std::numbers::pi;

std::size_t nearest_node(const std::vector<double>& grid, double x) {
  const auto it = std::lower_bound(grid.begin(), grid.end(), x);
  std::size_t j = static_cast<std::size_t>(it - grid.begin());
  if (j == grid.size()) return j - 1;
  if (j > 0 && x - grid[j - 1] < grid[j] - x) --j;
  return j;
}

bool passes(const Potential& V, PotentialClass cls, double kappa_max, int k = 3) {
  return certify(V, cls, kappa_max, 256, k).pass;
}

}  // namespace

std::string to_string(Inequality id) {
  switch (id) {
    case Inequality::pointwise_psi: return "pointwise_psi";
    case Inequality::pointwise_dpsi: return "pointwise_dpsi";
    case Inequality::sonin_C3: return "sonin_C3";
    case Inequality::sonin_power: return "sonin_power";
    case Inequality::exp_decay: return "exp_decay";
    case Inequality::projector: return "projector";
    case Inequality::summation: return "summation";
    case Inequality::gap_log: return "gap_log";
  }
  return "unknown";
}

void BoundReport::finalize() {
  std::sort(per_n.begin(), per_n.end(), [](const BoundEntry& a, const BoundEntry& b) { return a.n < b.n; });
  uniform_constant = 0;
  trend = 0;
  if (per_n.empty()) return;
  const int mid = per_n.back().n / 2;
  double lo = 0, hi = 0;
  for (const auto& e : per_n) {
    uniform_constant = std::max(uniform_constant, e.sup_ratio);
    (e.n <= mid ? lo : hi) = std::max(e.n <= mid ? lo : hi, e.sup_ratio);
  }
  trend = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
}

PotentialClass require_class_for_alpha(const Potential& V, double alpha, double kappa_max) {
  if (alpha == 0.5) {
    if (!V.p1() || !V.p1()->pass) throw Error(ErrorKind::MissingCertificate, "alpha = 1/2 needs a P1 certificate");
    return PotentialClass::P1;
  }
  if (alpha > 0.25 && alpha < 0.5) {
    if (!passes(V, PotentialClass::P1_uc, kappa_max))
      throw Error(ErrorKind::MissingCertificate, "alpha in (1/4, 1/2) needs a P1_uc certificate");
    return PotentialClass::P1_uc;
  }
  if (alpha == 0.25) {
    if (passes(V, PotentialClass::P1_cv, kappa_max)) return PotentialClass::P1_cv;
    if (passes(V, PotentialClass::Pk, kappa_max, 3)) return PotentialClass::Pk;
    throw Error(ErrorKind::MissingCertificate, "alpha = 1/4 needs a P1_cv or P3 certificate");
  }
  throw Error(ErrorKind::PreconditionViolated, "alpha must be 1/4, in (1/4, 1/2), or 1/2");
}

SupRatio pointwise_ratio(const Potential& V, const EigenPair& p, double alpha, Quantity which) {
  const double E = p.E;
  const auto [xm, xp] = transition_points(V, E);
  const double scale = std::sqrt(xm + xp);
  const std::size_t skip_l = nearest_node(p.grid, -xm), skip_r = nearest_node(p.grid, xp);
  const double n = p.n;
  SupRatio out;
  for (std::size_t j = 0; j < p.grid.size(); ++j) {
    if (j == skip_l || j == skip_r) continue;
    const double gap = 1 - p.v[j] / E;
    double r;
    if (which == Quantity::psi) {
      const double bound = std::min(std::pow(n, 2 * alpha / 3), std::pow(std::abs(gap), -alpha));
      r = std::abs(p.psi[j]) * scale / bound;
    } else {
      const double bound = std::max(std::pow(n, (2 * alpha - 1) / 3), std::pow(std::max(gap, 0.0), 0.5 - alpha));
      r = std::abs(p.dpsi[j]) * scale / (std::sqrt(E) * bound);
    }
    if (r > out.sup_ratio) out = {r, p.grid[j]};
  }
  return out;
}

SupRatio pointwise_ratio(const Potential& V, int n, double alpha, Quantity which, const EigenSolveConfig& cfg) {
  require_class_for_alpha(V, alpha);
  return pointwise_ratio(V, eigenfunction(V, n, cfg), alpha, which);
}

BoundReport pointwise_report(const Potential& V, double alpha, Quantity which, int n_max, const EigenSolveConfig& cfg,
                             int threads) {
  const PotentialClass cls = require_class_for_alpha(V, alpha);
  BoundReport rep;
  rep.id = which == Quantity::psi ? Inequality::pointwise_psi : Inequality::pointwise_dpsi;
  rep.family = to_string(V.spec().family());
  rep.cls = cls == PotentialClass::Pk ? "P3" : to_string(cls);
  rep.alpha = alpha;
  rep.params["n_max"] = n_max;
  rep.per_n.resize(static_cast<std::size_t>(n_max));
  parallel_for(rep.per_n.size(), threads, [&](std::size_t i) {
    const int n = static_cast<int>(i) + 1;
    const auto r = pointwise_ratio(V, eigenfunction(V, n, cfg), alpha, which);
    rep.per_n[i] = {n, r.sup_ratio, r.argmax_x};
  });
  rep.finalize();
  return rep;
}

EnvelopeResult envelope_check(const Potential& V, const EigenPair& p, double tol) {
  const double E = p.E;
  const auto [xm, xp] = transition_points(V, E);
  const std::size_t N = p.grid.size();
  std::vector<double> g(N), h(N, 0.0);
  std::vector<char> in_h(N, 0);
  double gmax = 0, hmax = 0;
  for (std::size_t j = 0; j < N; ++j) {
    g[j] = (E - p.v[j]) * p.psi[j] * p.psi[j] + p.dpsi[j] * p.dpsi[j];
    gmax = std::max(gmax, std::abs(g[j]));
    if (p.v[j] < E) {
      h[j] = p.psi[j] * p.psi[j] + p.dpsi[j] * p.dpsi[j] / (E - p.v[j]);
      in_h[j] = 1;
    }
  }
  // one grid cell on either side of each transition point is left out of the h check
  const std::size_t tl = nearest_node(p.grid, -xm), tr = nearest_node(p.grid, xp);
  for (std::size_t j : {tl, tr}) {
    for (std::size_t k = j > 0 ? j - 1 : 0; k <= std::min(j + 1, N - 1); ++k) in_h[k] = 0;
  }
  for (std::size_t j = 0; j < N; ++j) {
    if (in_h[j]) hmax = std::max(hmax, h[j]);
  }

  EnvelopeResult out;
  for (std::size_t j = 0; j + 1 < N; ++j) {
    const double a = p.grid[j], b = p.grid[j + 1];
    // wrong-way step: g must increase towards 0, h must decrease towards 0
    double dg = 0;
    if (b <= 0) dg = g[j] - g[j + 1];
    else if (a >= 0) dg = g[j + 1] - g[j];
    if (dg > tol * gmax) ++out.g_violations;
    out.g_worst = std::max(out.g_worst, dg / gmax);
    if (in_h[j] && in_h[j + 1]) {
      double dh = 0;
      if (b <= 0) dh = h[j + 1] - h[j];
      else if (a >= 0) dh = h[j] - h[j + 1];
      if (dh > tol * hmax) ++out.h_violations;
      out.h_worst = std::max(out.h_worst, dh / hmax);
    }
  }
  return out;
}

StructureResult structure_check(const EigenPair& p) {
  StructureResult out;
  const auto cps = critical_points(p);
  const auto zs = zeros(p);
  // moving away from 0 on either half-line
  auto count = [](std::vector<double> vals, bool increasing) {
    int bad = 0;
    for (std::size_t i = 1; i < vals.size(); ++i) {
      if (increasing ? !(vals[i] > vals[i - 1]) : !(vals[i] < vals[i - 1])) ++bad;
    }
    return bad;
  };
  for (int side : {1, -1}) {
    std::vector<double> pm, dm;
    std::vector<double> c, z;
    for (double x : cps)
      if (side * x >= 0) c.push_back(x);
    for (double x : zs)
      if (side * x >= 0) z.push_back(x);
    if (side < 0) std::reverse(c.begin(), c.end()), std::reverse(z.begin(), z.end());
    for (double x : c) pm.push_back(std::pow(p.value(x), 2));
    for (double x : z) dm.push_back(std::pow(p.derivative(x), 2));
    out.psi_max_violations += count(pm, true);
    out.dpsi_max_violations += count(dm, false);
  }
  for (std::size_t j = 0; j < p.grid.size(); ++j) {
    if (p.v[j] < p.E || p.psi[j] == 0 || p.grid[j] == 0) continue;
    // compare signs: the product of tail samples underflows
    const bool neg = (p.grid[j] > 0) != ((p.psi[j] > 0) == (p.dpsi[j] > 0));
    if (!neg || p.dpsi[j] == 0) ++out.decay_sign_violations;
  }
  return out;
}

SoninResult sonin_profile(const Potential& V, const EigenPair& p, SoninVariant variant, double eps_or_delta,
                          double alpha, double tol) {
  const double E = p.E;
  const auto [xm, xp] = transition_points(V, E);
  const std::size_t N = p.grid.size();
  SoninResult out;
  std::vector<char> side(N, 0);  // +1 right region, -1 left region
  for (std::size_t j = 0; j < N; ++j) {
    const double x = p.grid[j];
    if (x == 0 || p.v[j] >= E) continue;
    if (variant == SoninVariant::C3) {
      if (p.v[j] >= (1 - eps_or_delta) * E) side[j] = x > 0 ? 1 : -1;
    } else {
      const double lim = std::exp(-eps_or_delta);
      if (x > 0 && x >= lim * xp) side[j] = 1;
      if (x < 0 && -x >= lim * xm) side[j] = -1;
    }
  }
  std::vector<double> S(N, 0.0);
  for (std::size_t j = 0; j < N; ++j) {
    if (!side[j]) continue;
    const double x = p.grid[j], psi = p.psi[j], dpsi = p.dpsi[j];
    const double q = E - p.v[j];
    double f, df, B;
    if (variant == SoninVariant::C3) {
      const double v1 = V.derivative(x, 1), v2 = V.derivative(x, 2);
      const double w = std::pow(q, 0.25);
      f = w * psi;
      df = w * (dpsi - 0.25 * v1 / q * psi);
      B = q + 5.0 / 16 * v1 * v1 / (q * q) + 0.25 * v2 / q;
    } else {
      // s is the distance to the transition point on the same side
      const double s = x > 0 ? xp - x : xm + x;
      const double w = std::pow(s, alpha);
      f = w * psi;
      df = x > 0 ? w * (dpsi - alpha * psi / s) : w * (dpsi + alpha * psi / s);
      B = q + alpha * (alpha + 1) / (s * s);
    }
    if (!(B > 0)) {
      side[j] = 0;
      continue;
    }
    S[j] = f * f + df * df / B;
    out.max_s = std::max(out.max_s, S[j]);
    out.x.push_back(x);
    out.s.push_back(S[j]);
    ++out.region_nodes;
  }
  if (out.region_nodes < 8) throw Error(ErrorKind::RegionEmpty, "fewer than 8 grid nodes in the Sonin region");
  for (std::size_t j = 0; j + 1 < N; ++j) {
    if (!side[j] || side[j] != side[j + 1]) continue;
    const double step = side[j] > 0 ? S[j + 1] - S[j] : S[j] - S[j + 1];
    if (step > tol * out.max_s) ++out.violations;
  }
  return out;
}

SoninResult sonin_profile(const Potential& V, int n, SoninVariant variant, double eps_or_delta, double alpha,
                          const EigenSolveConfig& cfg) {
  if (n < 2) throw Error(ErrorKind::PreconditionViolated, "Sonin profiles need n >= 2");
  if (variant == SoninVariant::C3) {
    if (!passes(V, PotentialClass::Pk, 64, 3)) throw Error(ErrorKind::MissingCertificate, "C3 variant needs P3");
  } else {
    require_class_for_alpha(V, alpha);
  }
  const EigenPair p = eigenfunction(V, n, cfg);
  try {
    return sonin_profile(V, p, variant, eps_or_delta, alpha);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::RegionEmpty) throw;
  }
  EigenSolveConfig fine = cfg;
  fine.residual_target = cfg.residual_target / 16;
  return sonin_profile(V, eigenfunction(V, n, fine), variant, eps_or_delta, alpha);
}

DecayFit exp_decay_fit(const Potential& V, const EigenPair& p, double floor) {
  const double scale = std::sqrt(sublevel_measure(V, p.E));
  const double pmax = p.max_abs();
  std::vector<double> t, y;
  for (std::size_t j = 0; j < p.grid.size(); ++j) {
    if (p.v[j] < 4 * p.E || std::abs(p.psi[j]) < floor * pmax) continue;
    t.push_back(std::abs(p.grid[j]) * std::sqrt(p.v[j]));
    y.push_back(-std::log(std::abs(p.psi[j]) * scale));
  }
  if (t.size() < 3) throw Error(ErrorKind::RegionEmpty, "no grid nodes in {V >= 4E} above the amplitude floor");
  const double m = static_cast<double>(t.size());
  double st = 0, sy = 0;
  for (std::size_t i = 0; i < t.size(); ++i) st += t[i], sy += y[i];
  const double tb = st / m, yb = sy / m;
  double stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    stt += (t[i] - tb) * (t[i] - tb);
    sty += (t[i] - tb) * (y[i] - yb);
  }
  DecayFit out;
  out.c_fit = sty / stt;
  out.intercept = yb - out.c_fit * tb;
  out.nodes = t.size();
  for (std::size_t i = 0; i < t.size(); ++i) {
    out.max_violation = std::max(out.max_violation, std::exp(-y[i] + out.c_fit * t[i] / 2));
  }
  return out;
}

DecayFit exp_decay_fit(const Potential& V, int n, const EigenSolveConfig& cfg) {
  return exp_decay_fit(V, eigenfunction(V, n, cfg));
}

double summation_oracle(const std::vector<double>& t, double a, double b, const SummationParams& prm) {
  const auto [c, kappa, theta, beta] = prm;
  if (!(c > 0) || !(kappa >= 1) || !(theta >= 0 && theta < 1) || !(beta >= 0 && beta < 1))
    throw Error(ErrorKind::PreconditionViolated, "need c > 0, kappa >= 1, theta and beta in [0, 1)");
  if (!(a > 0) || !(b > 0) || !(b <= kappa * a)) throw Error(ErrorKind::PreconditionViolated, "need 0 < b <= kappa a");
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    if (t[i] < 1 / kappa || std::abs(t[i] - c * n) > kappa * std::pow(n, beta) * (1 + 1e-12))
      throw Error(ErrorKind::PreconditionViolated, "sequence violates |t_n - c n| <= kappa n^beta");
  }
  if (t.empty() || t.back() <= kappa * a)
    throw Error(ErrorKind::PreconditionViolated, "sequence does not extend beyond kappa a");
  const double cap = std::pow(a, -beta);
  double sum = 0, comp = 0;
  for (double tn : t) {
    if (tn > kappa * a) continue;
    const double gap = std::abs(tn - b);
    const double term = gap > 0 || theta == 0 ? std::min(std::pow(a, theta - 1) * std::pow(gap, -theta), cap) : cap;
    const double yk = term - comp;
    const double s = sum + yk;
    comp = (s - sum) - yk;
    sum = s;
  }
  return sum;
}

std::vector<double> random_gap_sequence(const SummationParams& prm, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> t(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double n = static_cast<double>(i + 1);
    t[i] = std::max(prm.c * n + prm.kappa * std::pow(n, prm.beta) * u(rng), 1 / prm.kappa);
  }
  return t;
}

double summation_sup(const std::vector<double>& t, const SummationParams& prm, int count, double a_min, double a_max,
                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double sup = 0;
  for (int i = 0; i < count; ++i) {
    const double a = a_min * std::pow(a_max / a_min, u(rng));
    const double b = prm.kappa * a * (1 - u(rng));
    sup = std::max(sup, summation_oracle(t, a, b, prm));
  }
  return sup;
}

std::vector<WindowTerm> projector_window(const Potential& V, double lambda, double A, const EigenSolveConfig& cfg) {
  if (!(lambda > 0) || !(A > 0)) throw Error(ErrorKind::NonPositiveInput, "lambda and A must be positive");
  std::vector<WindowTerm> out;
  for (int n = 1;; ++n) {
    const double t = xi(V, n, lambda, cfg);
    const double level = lambda / t;
    if (level > 2 * A) break;
    if (level >= A) out.push_back({n, t});
  }
  return out;
}

std::vector<ProjectorResult> projector_sum(const Potential& V, double lambda, double A, const std::vector<double>& xs,
                                           double c_decay, const EigenSolveConfig& cfg) {
  const auto window = projector_window(V, lambda, A, cfg);
  std::vector<ProjectorResult> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i].x = xs[i];
    out[i].inside = V(xs[i]) <= 8 * A;
    if (!window.empty()) out[i].n_lo = window.front().n, out[i].n_hi = window.back().n;
  }
  const auto degree = V.spec().homogeneous_degree();
  for (const auto& w : window) {
    const EigenPair p = degree ? scale_pair(eigenfunction(V, w.n, cfg), w.xi, *degree)
                               : eigenfunction(V.scaled(w.xi), w.n, cfg);
    for (std::size_t i = 0; i < xs.size(); ++i) out[i].sum += std::pow(p.value(xs[i]), 2);
  }
  const double root = std::sqrt(lambda);
  for (auto& r : out) {
    const double weight = r.inside ? 1.0 : std::exp(-c_decay * root * std::abs(r.x));
    r.ratio = r.sum / (root * weight);
  }
  return out;
}

ProjectorResult projector_sum(const Potential& V, double lambda, double A, double x, double c_decay,
                              const EigenSolveConfig& cfg) {
  return projector_sum(V, lambda, A, std::vector<double>{x}, c_decay, cfg).front();
}

double projector_hypothesis_ratio(const Potential& V, double lambda, double A, double theta, double delta,
                                  const EigenSolveConfig& cfg) {
  const auto window = projector_window(V, lambda, A, cfg);
  const auto degree = V.spec().homogeneous_degree();
  double sup = 0;
  for (const auto& w : window) {
    const Potential Vt = V.scaled(w.xi);
    const EigenPair p = degree ? scale_pair(eigenfunction(V, w.n, cfg), w.xi, *degree) : eigenfunction(Vt, w.n, cfg);
    const double scale = std::sqrt(sublevel_measure(Vt, p.E));
    const auto [xm, xp] = transition_points(Vt, p.E);
    const std::size_t skip_l = nearest_node(p.grid, -xm), skip_r = nearest_node(p.grid, xp);
    for (std::size_t j = 0; j < p.grid.size(); ++j) {
      if (j == skip_l || j == skip_r) continue;
      const double bound = std::min(std::pow(static_cast<double>(w.n), delta / 2),
                                    std::pow(p.E / std::abs(p.v[j] - p.E), theta / 2));
      sup = std::max(sup, std::abs(p.psi[j]) * scale / bound);
    }
  }
  return sup;
}

GapLogResult gap_log_check(const Potential& V, double lambda, double A, const EigenSolveConfig& cfg) {
  const auto window = projector_window(V, lambda, A, cfg);
  GapLogResult out;
  if (window.empty()) return out;
  out.n_lo = window.front().n;
  out.n_hi = window.back().n;
  for (const auto& w : window) {
    const double tn = std::sqrt(lambda) * kv(V, lambda / w.xi);
    const double err = std::abs(tn - kPi * w.n);
    out.max_err = std::max(out.max_err, err);
    out.max_ratio = std::max(out.max_ratio, err / std::log(1.0 + w.n));
  }
  return out;
}

}  // namespace grushin_lab
