#include "grushin_lab/grushin.hpp"

#include <algorithm>
#include <mutex>
#include <cmath>
#include <numbers>

#include <fftw3.h>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/zeta.hpp>

#include "grushin_lab/error.hpp"
#include "grushin_lab/parallel.hpp"
#include "grushin_lab/semiclassics.hpp"

namespace grushin_lab {

namespace {

constexpr double kPi = std::numbers::pi;

// Smooth step: 0 for t <= 0, 1 for t >= 1.
double smooth_step(double t) {
  if (t <= 0) return 0;
  if (t >= 1) return 1;
  const double a = std::exp(-1 / t), b = std::exp(-1 / (1 - t));
  return a / (a + b);
}

// Smallest 2^a 3^b 5^c >= n.
std::size_t smooth_size(std::size_t n) {
  std::size_t best = 1;
  while (best < n) best *= 2;
  for (std::size_t p5 = 1; p5 < 2 * n; p5 *= 5) {
    for (std::size_t p3 = p5; p3 < 2 * n; p3 *= 3) {
      std::size_t v = p3;
      while (v < n) v *= 2;
      best = std::min(best, v);
    }
  }
  return best;
}

struct FftwBuffer {
  double* data;
  explicit FftwBuffer(std::size_t n) : data(static_cast<double*>(fftw_malloc(sizeof(double) * n))) {}
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
};

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// int_0^U u^beta f(u) du on a uniform grid u_j = j du with a singular
// endpoint correction at 0 for even f (generalised Euler-Maclaurin).
double weighted_integral(const std::vector<double>& f, double du, double beta, std::size_t last) {
  double sum = 0, comp = 0;
  for (std::size_t j = 1; j <= last; ++j) {
    const double w = j == last ? 0.5 : 1.0;
    const double term = w * std::pow(j * du, beta) * f[j] - comp;
    const double t = sum + term;
    comp = (t - sum) - term;
    sum = t;
  }
  double out = du * sum;
  const double f2 = f.size() > 1 ? 2 * (f[1] - f[0]) / (du * du) : 0.0;
  out -= boost::math::zeta(-beta) * f[0] * std::pow(du, 1 + beta);
  if (beta > 0) out -= boost::math::zeta(-beta - 2) * 0.5 * f2 * std::pow(du, 3 + beta);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- multipliers

void MultiplierSpec::validate() const {
  auto bad = [](const char* msg) { throw Error(ErrorKind::InvalidSpec, msg); };
  if (!std::isfinite(amplitude)) bad("multiplier amplitude must be finite");
  switch (kind) {
    case MultiplierKind::bump:
      if (!(half_width >= 0) || !(ramp > 0)) bad("bump needs half_width >= 0 and ramp > 0");
      break;
    case MultiplierKind::riesz_fragment:
      if (!(order >= 0)) bad("Riesz order must be nonnegative");
      if (piece < 2) bad("Riesz piece index must be at least 2 for support in [1/4, 1]");
      break;
    case MultiplierKind::tabulated:
      if (lambda.size() < 2 || lambda.size() != values.size()) bad("tabulated multiplier needs matching samples");
      for (std::size_t i = 1; i < lambda.size(); ++i)
        if (!(lambda[i] > lambda[i - 1])) bad("tabulated multiplier abscissae must increase");
      for (double v : values)
        if (!std::isfinite(v)) bad("tabulated multiplier values must be finite");
      break;
  }
  const auto [a, b] = support();
  if (a < 0.25 || b > 1.0) bad("multiplier support must lie in [1/4, 1]");
}

std::pair<double, double> MultiplierSpec::support() const {
  switch (kind) {
    case MultiplierKind::bump: return {center - half_width - ramp, center + half_width + ramp};
    case MultiplierKind::riesz_fragment: return {1 - std::ldexp(1.0, 1 - piece), 1 - std::ldexp(1.0, -piece - 1)};
    case MultiplierKind::tabulated: return {lambda.front(), lambda.back()};
  }
  return {0, 0};
}

bool MultiplierSpec::is_zero() const {
  if (amplitude == 0) return true;
  if (kind == MultiplierKind::tabulated) return std::all_of(values.begin(), values.end(), [](double v) { return v == 0; });
  return false;
}

double MultiplierSpec::operator()(double l) const {
  const auto [a, b] = support();
  if (!(l > a && l < b)) return kind == MultiplierKind::tabulated && (l == a || l == b) ? amplitude * (l == a ? values.front() : values.back()) : 0.0;
  switch (kind) {
    case MultiplierKind::bump: return amplitude * smooth_step((l - a) / ramp) * smooth_step((b - l) / ramp);
    case MultiplierKind::riesz_fragment: {
      const double t = 1 - l;
      const double tau = std::ldexp(t, piece);
      return amplitude * std::pow(t, order) * smooth_step((tau - 0.5) / 0.5) * smooth_step(2 - tau);
    }
    case MultiplierKind::tabulated: {
      const auto it = std::upper_bound(lambda.begin(), lambda.end(), l);
      const std::size_t j = static_cast<std::size_t>(it - lambda.begin()) - 1;
      const double t = (l - lambda[j]) / (lambda[j + 1] - lambda[j]);
      return amplitude * ((1 - t) * values[j] + t * values[j + 1]);
    }
  }
  return 0;
}

MultiplierSpec bump(double center, double half_width, double ramp) {
  MultiplierSpec m;
  m.kind = MultiplierKind::bump;
  m.center = center;
  m.half_width = half_width;
  m.ramp = ramp;
  m.validate();
  return m;
}

MultiplierSpec riesz_fragment(double order, int piece) {
  MultiplierSpec m;
  m.kind = MultiplierKind::riesz_fragment;
  m.order = order;
  m.piece = piece;
  m.validate();
  return m;
}

MultiplierSpec tabulated_multiplier(std::vector<double> lambda, std::vector<double> values) {
  MultiplierSpec m;
  m.kind = MultiplierKind::tabulated;
  m.lambda = std::move(lambda);
  m.values = std::move(values);
  m.validate();
  return m;
}

double sobolev_norm(const MultiplierSpec& m, double s) {
  if (!(s >= 0 && s <= 2)) throw Error(ErrorKind::PreconditionViolated, "Sobolev order must lie in [0, 2]");
  m.validate();
  if (m.is_zero()) return 0.0;
  auto norm_at = [&](std::size_t samples) {
    const std::size_t L = 8 * samples;
    const double h = 2.0 / static_cast<double>(samples);
    FftwBuffer in(L);
    auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (L / 2 + 1)));
    fftw_plan plan;
    {
      std::lock_guard lock(planner_mutex());
      plan = fftw_plan_dft_r2c_1d(static_cast<int>(L), in.data, out, FFTW_ESTIMATE);
    }
    for (std::size_t j = 0; j < L; ++j) in.data[j] = j < samples ? m(static_cast<double>(j) * h) : 0.0;
    fftw_execute(plan);
    const double dtau = 2 * kPi / (static_cast<double>(L) * h);
    double acc = 0;
    for (std::size_t k = 0; k <= L / 2; ++k) {
      const double tau = static_cast<double>(k) * dtau;
      const double mag = (out[k][0] * out[k][0] + out[k][1] * out[k][1]) * h * h / (2 * kPi);
      const double w = (k == 0 || k == L / 2) ? 1.0 : 2.0;
      acc += w * std::pow(1 + tau * tau, s) * mag;
    }
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan);
    }
    fftw_free(out);
    return std::sqrt(acc * dtau);
  };
  double prev = norm_at(1024);
  for (std::size_t samples = 2048; samples <= (std::size_t{1} << 22); samples *= 2) {
    const double cur = norm_at(samples);
    if (std::abs(cur - prev) <= 0.01 * cur) return cur;
    prev = cur;
  }
  throw Error(ErrorKind::NotConverged, "Sobolev norm does not settle under refinement");
}

// ---------------------------------------------------------------- fibers

double FiberSource::Fiber::operator()(double x) const { return std::sqrt(s) * pair->value(s * x); }

FiberSource::FiberSource(Potential V, EigenSolveConfig cfg)
    : V_(std::move(V)), cfg_(cfg), degree_(V_.spec().homogeneous_degree()) {}

std::shared_ptr<const EigenPair> FiberSource::base(int n) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = base_.find(n); it != base_.end()) return it->second;
  }
  auto p = std::make_shared<const EigenPair>(eigenfunction(V_, n, cfg_));
  std::lock_guard lock(mutex_);
  return base_.emplace(n, std::move(p)).first->second;
}

std::pair<double, double> FiberSource::band(int n, double lo, double hi) const {
  if (degree_) {
    double En;
    {
      std::lock_guard lock(mutex_);
      auto it = e1_.find(n);
      En = it != e1_.end() ? it->second : -1;
    }
    if (En < 0) {
      En = eigenvalue(V_, n, cfg_);
      std::lock_guard lock(mutex_);
      e1_[n] = En;
    }
    const double p = (*degree_ + 2) / 4;
    return {std::pow(lo / En, p), std::pow(hi / En, p)};
  }
  return {std::sqrt(xi(V_, n, lo, cfg_)), std::sqrt(xi(V_, n, hi, cfg_))};
}

FiberSource::Fiber FiberSource::fiber(int n, double xi_val) const {
  if (degree_) {
    Fiber f;
    f.pair = base(n);
    f.s = std::pow(xi_val * xi_val, 1 / (*degree_ + 2));
    f.E = f.s * f.s * f.pair->E;
    return f;
  }
  const auto key = std::make_pair(n, xi_val);
  {
    std::lock_guard lock(mutex_);
    if (auto it = pairs_.find(key); it != pairs_.end()) return {it->second->E, 1.0, it->second};
  }
  auto p = std::make_shared<const EigenPair>(eigenfunction(V_.scaled(xi_val * xi_val), n, cfg_));
  std::lock_guard lock(mutex_);
  const auto& q = pairs_.emplace(key, std::move(p)).first->second;
  return {q->E, 1.0, q};
}

// ---------------------------------------------------------------- kernel

double plancherel_prefactor(const Potential& V, double r, double vartheta, double x_prime) {
  return std::pow(r, 2 - 2 * vartheta) * std::pow(std::max(V(r), V(x_prime)), 0.5 - vartheta);
}

namespace {

// Per-fiber xi-integrals for n in [n_first, n_max].
std::vector<double> oracle_terms(const MultiplierSpec& m, FiberSource& src, double r, double x_prime, int n_max,
                                 int n_first = 1) {
  const auto [a, b] = m.support();
  const double r2 = r * r;
  std::vector<double> terms;
  for (int n = n_first; n <= n_max; ++n) {
    const auto [lo, hi] = src.band(n, a / r2, b / r2);
    auto f = [&, n](double xi_val) {
      const auto fb = src.fiber(n, xi_val);
      const double mv = m(r2 * fb.E), pv = fb(x_prime);
      return mv * mv * pv * pv;
    };
    terms.push_back(boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 8, 1e-9) / kPi);
  }
  return terms;
}

}  // namespace

double plancherel_oracle(const MultiplierSpec& m, FiberSource& src, double r, double x_prime, int n_max) {
  m.validate();
  if (m.is_zero()) return 0.0;
  const auto terms = oracle_terms(m, src, r, x_prime, n_max);
  double total = 0;
  for (double t : terms) total += t;
  return total;
}

KernelSlice kernel_slice(const MultiplierSpec& m, const Potential& V, double r, double x_prime,
                         const GrushinConfig& cfg, double vartheta) {
  FiberSource src(V, cfg.eig);
  return kernel_slice(m, src, r, x_prime, cfg, vartheta);
}

KernelSlice kernel_slice(const MultiplierSpec& m, FiberSource& src, double r, double x_prime,
                         const GrushinConfig& cfg, double vartheta) {
  m.validate();
  if (!(r > 0)) throw Error(ErrorKind::NonPositiveInput, "r must be positive");
  if (!(vartheta >= 0 && vartheta < 0.5)) throw Error(ErrorKind::PreconditionViolated, "vartheta must lie in [0, 1/2)");
  if (cfg.fiber_cap < 1 || cfg.max_fiber_cap < cfg.fiber_cap)
    throw Error(ErrorKind::ConfigError, "fiber caps must satisfy 1 <= fiber_cap <= max_fiber_cap");
  const auto [a, b] = m.support();
  const double r2 = r * r;

  KernelSlice out;
  out.r = r;
  out.x_prime = x_prime;

  // Fiber cap: doubled until the share of the fibers beyond it, estimated from
  // the xi-space sums at N, 2N and 4N, is below truncation_limit.
  int N = cfg.fiber_cap;
  if (!m.is_zero()) {
    std::vector<double> terms;
    for (;;) {
      if (terms.size() < static_cast<std::size_t>(4 * N)) {
        const auto more = oracle_terms(m, src, r, x_prime, 4 * N, static_cast<int>(terms.size()) + 1);
        terms.insert(terms.end(), more.begin(), more.end());
      }
      double p1 = 0, p2 = 0, p4 = 0;
      for (int n = 1; n <= 4 * N; ++n) {
        const double t = terms[static_cast<std::size_t>(n - 1)];
        if (n <= N) p1 += t;
        if (n <= 2 * N) p2 += t;
        p4 += t;
      }
      const double d1 = p2 - p1, d2 = p4 - p2;
      const double rest = d1 > d2 && d2 > 0 ? d2 * d2 / (d1 - d2) : d2;
      const double total = p4 + rest;
      out.truncation_estimate = total > 0 ? (total - p1) / total : 0.0;
      if (out.truncation_estimate <= cfg.truncation_limit) break;
      if (2 * N > cfg.max_fiber_cap)
        throw Error(ErrorKind::WindowOverflow, "fibers beyond the largest cap carry more than the allowed share");
      N *= 2;
    }
  }
  out.fiber_cap = N;

  std::vector<std::pair<double, double>> bands(static_cast<std::size_t>(N));
  for (int n = 1; n <= N; ++n) bands[static_cast<std::size_t>(n - 1)] = src.band(n, a / r2, b / r2);
  const double xi_top = bands.front().second;

  // x-grid: where the widest fiber (smallest xi of each band) is above the decay floor
  double x_lo = std::min(0.0, x_prime), x_hi = std::max(0.0, x_prime);
  for (int n = 1; n <= N; ++n) {
    const auto fb = src.fiber(n, bands[static_cast<std::size_t>(n - 1)].first);
    const auto& p = *fb.pair;
    const double floor = cfg.decay_floor * p.max_abs();
    std::size_t i0 = 0, i1 = p.grid.size() - 1;
    while (i0 < i1 && std::abs(p.psi[i0]) < floor) ++i0;
    while (i1 > i0 && std::abs(p.psi[i1]) < floor) --i1;
    x_lo = std::min(x_lo, p.grid[i0] / fb.s);
    x_hi = std::max(x_hi, p.grid[i1] / fb.s);
  }
  const double dx0 = 2 * kPi * r / (cfg.x_points_per_wavelength * std::sqrt(b));
  const double dx = dx0 < 1 ? 1.0 / std::ceil(1 / dx0) : std::floor(dx0);
  const long i_lo = static_cast<long>(std::floor(x_lo / dx)), i_hi = static_cast<long>(std::ceil(x_hi / dx));
  for (long i = i_lo; i <= i_hi; ++i) out.x.push_back(static_cast<double>(i) * dx);
  const std::size_t X = out.x.size();

  double dxi = (bands.back().second - bands.back().first) / 64;
  const double du_target = 2 * kPi * r / cfg.u_points_per_scale;
  const double beta = 2 * vartheta;
  for (int halving = 0;; ++halving) {
    const std::size_t M = static_cast<std::size_t>(std::ceil(xi_top / dxi));
    const std::size_t Mp = smooth_size(std::max<std::size_t>(M, static_cast<std::size_t>(std::ceil(kPi / (du_target * dxi)))));
    const double du = kPi / (static_cast<double>(Mp) * dxi);

    // G(x, xi) = sum_n m(r^2 E_n) psi_n(x) psi_n(x') on the xi-grid
    std::vector<double> G(X * (M + 1), 0.0);
    parallel_for(M + 1, cfg.threads, [&](std::size_t k) {
      const double xk = static_cast<double>(k) * dxi;
      for (int n = 1; n <= N; ++n) {
        const auto [lo, hi] = bands[static_cast<std::size_t>(n - 1)];
        if (!(xk > lo && xk < hi)) continue;
        const auto fb = src.fiber(n, xk);
        const double w = m(r2 * fb.E) * fb(x_prime);
        if (w == 0) continue;
        for (std::size_t i = 0; i < X; ++i) G[i * (M + 1) + k] += w * fb(out.x[i]);
      }
    });

    // cosine transform in xi, row by row
    const std::size_t U = Mp + 1;
    std::size_t keep = 0;
    while (keep < U && static_cast<double>(keep) * du <= cfg.store_scales * 2 * kPi * r) ++keep;
    out.u.assign(keep, 0.0);
    for (std::size_t j = 0; j < keep; ++j) out.u[j] = static_cast<double>(j) * du;
    out.K.assign(X * keep, 0.0);
    out.mass.assign(U, 0.0);
    {
      FftwBuffer in(U), res(U);
      fftw_plan plan;
      {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_r2r_1d(static_cast<int>(U), in.data, res.data, FFTW_REDFT00, FFTW_ESTIMATE);
      }
      const double c = dxi / (2 * kPi);
      for (std::size_t i = 0; i < X; ++i) {
        std::fill(in.data, in.data + U, 0.0);
        std::copy(G.begin() + static_cast<long>(i * (M + 1)), G.begin() + static_cast<long>((i + 1) * (M + 1)), in.data);
        fftw_execute(plan);
        for (std::size_t j = 0; j < U; ++j) {
          const double K = c * res.data[j];
          out.mass[j] += dx * K * K;
          if (j < keep) out.K[i * keep + j] = K;
        }
      }
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan);
    }
    out.u_all.resize(U);
    for (std::size_t j = 0; j < U; ++j) out.u_all[j] = static_cast<double>(j) * du;
    out.delta_xi = dxi;
    out.period = 2 * kPi / dxi;
    out.halvings = halving;

    const std::size_t quarter = Mp / 2;
    const double head = weighted_integral(out.mass, du, beta, quarter);
    double tail = 0;
    for (std::size_t j = quarter; j < U; ++j) {
      const double w = (j == quarter || j == U - 1) ? 0.5 : 1.0;
      tail += w * std::pow(static_cast<double>(j) * du, beta) * out.mass[j];
    }
    tail *= du;
    out.tail_fraction = head > 0 ? tail / head : 0.0;
    if (out.tail_fraction < cfg.tail_tol) break;
    if (halving >= cfg.max_halvings) throw Error(ErrorKind::TailNotConverged, "u-tail of the kernel does not decay");
    dxi /= 2;
  }
  return out;
}

double weighted_plancherel_lhs(const KernelSlice& slice, const Potential& V, double vartheta) {
  if (!(vartheta >= 0 && vartheta < 0.5)) throw Error(ErrorKind::PreconditionViolated, "vartheta must lie in [0, 1/2)");
  if (slice.u_all.size() < 3) return 0.0;
  const double du = slice.u_all[1];
  const std::size_t quarter = (slice.u_all.size() - 1) / 2;
  // the integrand is even in u
  const double integral = 2 * weighted_integral(slice.mass, du, 2 * vartheta, quarter);
  return plancherel_prefactor(V, slice.r, vartheta, slice.x_prime) * integral;
}

double weighted_plancherel_lhs(const MultiplierSpec& m, const Potential& V, double r, double vartheta,
                               double x_prime, const GrushinConfig& cfg) {
  return weighted_plancherel_lhs(kernel_slice(m, V, r, x_prime, cfg, vartheta), V, vartheta);
}

SweepResult plancherel_sweep(const MultiplierSpec& m, const Potential& V, const std::vector<double>& varthetas,
                             const std::vector<double>& r_set, const std::vector<double>& x_prime_set,
                             const GrushinConfig& cfg) {
  if (varthetas.empty() || r_set.empty() || x_prime_set.empty())
    throw Error(ErrorKind::ConfigError, "sweep needs at least one vartheta, r and x'");
  FiberSource src(V, cfg.eig);
  const double top = *std::max_element(varthetas.begin(), varthetas.end());
  std::vector<double> sob;
  for (double t : varthetas) {
    const double n = sobolev_norm(m, t);
    sob.push_back(n * n);
  }
  SweepResult res;
  for (double r : r_set) {
    for (double xp : x_prime_set) {
      const KernelSlice slice = kernel_slice(m, src, r, xp, cfg, top);
      for (std::size_t k = 0; k < varthetas.size(); ++k) {
        SweepRow row{r, xp, varthetas[k], weighted_plancherel_lhs(slice, V, varthetas[k]), sob[k], 0};
        row.ratio = row.sobolev_sq > 0 ? row.lhs / row.sobolev_sq : 0.0;
        res.rows.push_back(row);
      }
    }
  }
  std::vector<double> ratios;
  for (const auto& row : res.rows) ratios.push_back(row.ratio);
  std::sort(ratios.begin(), ratios.end());
  res.max_ratio = ratios.back();
  const std::size_t h = ratios.size() / 2;
  res.median_ratio = ratios.size() % 2 ? ratios[h] : 0.5 * (ratios[h - 1] + ratios[h]);
  res.min_ratio = ratios.front();
  res.uniformity = res.min_ratio > 0 ? res.max_ratio / res.min_ratio : 0.0;
  res.max_over_median = res.median_ratio > 0 ? res.max_ratio / res.median_ratio : 0.0;
  return res;
}

}  // namespace grushin_lab
