#include "grushin_lab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include <math.h>  // pchip.hpp calls unqualified isnan
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/tools/roots.hpp>

#include "grushin_lab/error.hpp"

namespace grushin_lab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kOriginGuard = 1e-300;
constexpr int kClosedFormOrder = 16;

// y^p (a + b sin L + c cos L), L = log y, differentiated `order` times.
double trig_power_derivative(double y, double p, double a, double b, double c, int order) {
  for (int i = 0; i < order; ++i) {
    const double na = p * a;
    const double nb = p * b - c;
    const double nc = p * c + b;
    a = na;
    b = nb;
    c = nc;
    p -= 1.0;
  }
  const double L = std::log(y);
  return std::pow(y, p) * (a + b * std::sin(L) + c * std::cos(L));
}

double falling_power(double y, double d, int order) {
  return trig_power_derivative(y, d, 1.0, 0.0, 0.0, order);
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::InvalidSpec, what);
}

void validate(const PotentialSpec& s) {
  require(s.amplitude > 0 && std::isfinite(s.amplitude), "amplitude must be positive");
  require(s.dilation > 0 && std::isfinite(s.dilation), "dilation must be positive");
  std::visit(overloaded{
                 [](const PowerParams& p) { require(p.d > 0, "power: d must be positive"); },
                 [](const PowerAsymParams& p) {
                   require(p.d > 0, "power_asym: d must be positive");
                   require(p.a > 0, "power_asym: a must be positive");
                 },
                 [](const LogPerturbedParams& p) {
                   require(p.d > 0, "power_logperturbed: d must be positive");
                   require(p.eps >= 0 && p.eps < 0.5, "power_logperturbed: eps must lie in [0, 1/2)");
                 },
                 [](const TwoPowerParams& p) {
                   require(p.d1 > 0 && p.d1 < p.d2, "two_power: need 0 < d1 < d2");
                 },
                 [](const TabulatedParams& p) {
                   require(p.x.size() == p.v.size(), "tabulated: x and v differ in length");
                   for (std::size_t i = 0; i < p.x.size(); ++i) {
                     require(p.x[i] != 0 && std::isfinite(p.x[i]), "tabulated: x must be finite and nonzero");
                     require(p.v[i] > 0 && std::isfinite(p.v[i]), "tabulated: v must be positive");
                   }
                 },
             },
             s.params);
}

}  // namespace

struct Potential::Tab {
  using Interp = boost::math::interpolators::pchip<std::vector<double>>;

  struct HalfLine {
    std::optional<Interp> f;
    double L0 = 0, L1 = 0, y0 = 0, y1 = 0, s0 = 0, s1 = 0;

    // log W and d log W / d log y at log y = L
    std::pair<double, double> eval(double L) const {
      if (L <= L0) return {y0 + s0 * (L - L0), s0};
      if (L >= L1) return {y1 + s1 * (L - L1), s1};
      return {(*f)(L), f->prime(L)};
    }
  };

  HalfLine plus, minus;

  static HalfLine build(std::vector<std::pair<double, double>> pts) {
    std::sort(pts.begin(), pts.end());
    require(pts.size() >= 4, "tabulated: need at least four samples per half-line");
    std::vector<double> L, lv;
    for (const auto& [y, v] : pts) {
      if (!L.empty()) require(std::log(y) > L.back(), "tabulated: duplicate abscissae");
      L.push_back(std::log(y));
      lv.push_back(std::log(v));
    }
    HalfLine h;
    h.L0 = L.front();
    h.L1 = L.back();
    h.y0 = lv.front();
    h.y1 = lv.back();
    h.f.emplace(std::move(L), std::move(lv));
    h.s0 = h.f->prime(h.L0);
    h.s1 = h.f->prime(h.L1);
    return h;
  }

  explicit Tab(const TabulatedParams& p) {
    std::vector<std::pair<double, double>> pos, neg;
    for (std::size_t i = 0; i < p.x.size(); ++i) {
      (p.x[i] > 0 ? pos : neg).emplace_back(std::abs(p.x[i]), p.v[i]);
    }
    if (neg.empty()) neg = pos;
    if (pos.empty()) pos = neg;
    plus = build(std::move(pos));
    minus = build(std::move(neg));
  }
};

Family PotentialSpec::family() const {
  return static_cast<Family>(params.index());
}

int PotentialSpec::derivative_order_available() const {
  return family() == Family::tabulated ? 1 : kClosedFormOrder;
}

std::optional<double> PotentialSpec::homogeneous_degree() const {
  if (const auto* p = std::get_if<PowerParams>(&params)) return p->d;
  if (const auto* p = std::get_if<LogPerturbedParams>(&params); p && p->eps == 0) return p->d;
  if (const auto* p = std::get_if<PowerAsymParams>(&params)) return p->d;
  return std::nullopt;
}

PotentialSpec power(double d) { return PotentialSpec{PowerParams{d}}; }
PotentialSpec power_asym(double d, double a) { return PotentialSpec{PowerAsymParams{d, a}}; }
PotentialSpec power_logperturbed(double d, double eps) { return PotentialSpec{LogPerturbedParams{d, eps}}; }
PotentialSpec two_power(double d1, double d2) { return PotentialSpec{TwoPowerParams{d1, d2}}; }
PotentialSpec tabulated(std::vector<double> x, std::vector<double> v) {
  return PotentialSpec{TabulatedParams{std::move(x), std::move(v)}};
}

PotentialSpec scale(const PotentialSpec& spec, double tau) {
  if (!(tau > 0)) throw Error(ErrorKind::NonPositiveInput, "scale factor must be positive");
  PotentialSpec out = spec;
  out.amplitude *= tau;
  return out;
}

PotentialSpec rescale(const PotentialSpec& spec, double r) {
  if (!(r > 0)) throw Error(ErrorKind::NonPositiveInput, "rescale factor must be positive");
  PotentialSpec out = spec;
  out.amplitude *= r * r;
  out.dilation *= r;
  return out;
}

Potential::Potential(PotentialSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  if (const auto* t = std::get_if<TabulatedParams>(&spec_.params)) tab_ = std::make_shared<const Tab>(*t);
  for (int points : {256, 1024}) {
    try {
      auto cert = certify(*this, PotentialClass::P1, 1e6, points);
      if (cert.pass) p1_ = std::move(cert);
      break;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::GridTooCoarse) throw;
    }
  }
}

Potential::Potential(PotentialSpec spec, std::optional<ClassCertificate> cert, std::shared_ptr<const Tab> tab)
    : spec_(std::move(spec)), tab_(std::move(tab)), p1_(std::move(cert)) {}

double Potential::base(double x) const {
  if (x == 0) return 0.0;
  const double y = std::abs(x);
  return std::visit(overloaded{
                        [&](const PowerParams& p) { return std::pow(y, p.d); },
                        [&](const PowerAsymParams& p) { return (x > 0 ? 1.0 : p.a) * std::pow(y, p.d); },
                        [&](const LogPerturbedParams& p) {
                          return std::pow(y, p.d) * (1.0 + p.eps * std::sin(std::log(y)));
                        },
                        [&](const TwoPowerParams& p) { return std::pow(y, p.d1) + std::pow(y, p.d2); },
                        [&](const TabulatedParams&) {
                          const auto& h = x > 0 ? tab_->plus : tab_->minus;
                          return std::exp(h.eval(std::log(y)).first);
                        },
                    },
                    spec_.params);
}

double Potential::base_derivative(double x, int order) const {
  if (order == 0) return base(x);
  const double y = std::abs(x);
  const double sign = (x < 0 && order % 2 == 1) ? -1.0 : 1.0;
  const double w = std::visit(
      overloaded{
          [&](const PowerParams& p) { return falling_power(y, p.d, order); },
          [&](const PowerAsymParams& p) { return (x > 0 ? 1.0 : p.a) * falling_power(y, p.d, order); },
          [&](const LogPerturbedParams& p) { return trig_power_derivative(y, p.d, 1.0, p.eps, 0.0, order); },
          [&](const TwoPowerParams& p) { return falling_power(y, p.d1, order) + falling_power(y, p.d2, order); },
          [&](const TabulatedParams&) {
            const auto& h = x > 0 ? tab_->plus : tab_->minus;
            const auto [lw, slope] = h.eval(std::log(y));
            return std::exp(lw) * slope / y;
          },
      },
      spec_.params);
  return sign * w;
}

double Potential::value(double x) const {
  return spec_.amplitude * base(spec_.dilation * x);
}

double Potential::derivative(double x, int order) const {
  if (order < 0 || order > spec_.derivative_order_available()) {
    throw Error(ErrorKind::UnsupportedOrder, "derivative order " + std::to_string(order) + " not available");
  }
  if (order == 0) return value(x);
  if (std::abs(x) < kOriginGuard) throw Error(ErrorKind::DerivativeAtOrigin, "derivative requested at x = 0");
  return spec_.amplitude * std::pow(spec_.dilation, order) * base_derivative(spec_.dilation * x, order);
}

double Potential::half(Side side, double x) const {
  return value(side == Side::plus ? x : -x);
}

double Potential::half_derivative(Side side, double x) const {
  return side == Side::plus ? derivative(x, 1) : -derivative(-x, 1);
}

double Potential::kappa() const {
  if (!p1_) throw Error(ErrorKind::NotCertified, "potential has no P1 certificate");
  return p1_->kappa_hat;
}

Potential Potential::scaled(double tau) const {
  return Potential(scale(spec_, tau), p1_, tab_);
}

Potential Potential::rescaled(double r) const {
  return Potential(rescale(spec_, r), p1_, tab_);
}

std::uint64_t Potential::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  auto mixd = [&](double v) { mix(&v, sizeof v); };
  const auto fam = static_cast<std::uint32_t>(spec_.family());
  mix(&fam, sizeof fam);
  std::visit(overloaded{
                 [&](const PowerParams& p) { mixd(p.d); },
                 [&](const PowerAsymParams& p) { mixd(p.d), mixd(p.a); },
                 [&](const LogPerturbedParams& p) { mixd(p.d), mixd(p.eps); },
                 [&](const TwoPowerParams& p) { mixd(p.d1), mixd(p.d2); },
                 [&](const TabulatedParams& p) {
                   for (double v : p.x) mixd(v);
                   for (double v : p.v) mixd(v);
                 },
             },
             spec_.params);
  mixd(spec_.amplitude);
  mixd(spec_.dilation);
  return h;
}

double eval(const Potential& V, double x, int order) {
  return V.derivative(x, order);
}

namespace {

std::vector<double> log_grid(int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = std::pow(10.0, -6.0 + 12.0 * i / (n - 1));
  return g;
}

struct Level {
  double kappa = 1.0;
  double worst_x = 0.0;
  bool convex = true;
  double theta = 1.0;
  std::vector<double> omega;
  std::string reason;
};

const std::vector<double>& h_samples() {
  static const std::vector<double> h = [] {
    std::vector<double> v;
    for (int j = 0; j <= 7; ++j) v.push_back(std::ldexp(1.0, -j));
    return v;
  }();
  return h;
}

Level certify_level(const Potential& V, PotentialClass cls, int n, int k) {
  Level lv;
  const auto grid = log_grid(n);
  auto bump = [&](double kap, double x) {
    if (!(kap <= lv.kappa)) {  // also catches NaN
      lv.kappa = std::isnan(kap) ? kInf : kap;
      lv.worst_x = x;
    }
  };
  for (Side side : {Side::plus, Side::minus}) {
    const double sg = side == Side::plus ? 1.0 : -1.0;
    for (double y : grid) {
      const double w = V.half(side, y);
      const double r = y * V.half_derivative(side, y) / w;
      bump(r > 0 ? std::max(r, 1.0 / r) : kInf, sg * y);
      if (side == Side::plus) {
        const double q = V.half(Side::minus, y) / w;
        bump(std::max(q, 1.0 / q), y);
      }
      if (cls == PotentialClass::Pk) {
        double yl = y;
        for (int l = 2; l <= k; ++l) {
          yl *= y;
          bump(std::abs(yl * V.derivative(sg * y, l)) / w, sg * y);
        }
      }
    }
  }
  if (cls == PotentialClass::P1_cv) {
    std::vector<double> xs;
    for (auto it = grid.rbegin(); it != grid.rend(); ++it) xs.push_back(-*it);
    for (double y : grid) xs.push_back(y);
    double prev = -kInf;
    for (double x : xs) {
      const double d = V.derivative(x, 1);
      if (d < prev - 1e-12 * std::abs(prev)) {
        lv.convex = false;
        lv.worst_x = x;
        lv.reason = "V' decreases";
        break;
      }
      prev = d;
    }
  }
  if (cls == PotentialClass::P1_uc) {
    const auto& hs = h_samples();
    std::vector<double> q(hs.size(), 0.0);
    lv.omega.assign(hs.size(), 0.0);
    for (Side side : {Side::plus, Side::minus}) {
      for (double y : grid) {
        const double d0 = V.half_derivative(side, y);
        for (std::size_t j = 0; j < hs.size(); ++j) {
          for (double h : {hs[j], -hs[j]}) {
            const double d1 = V.half_derivative(side, y * std::exp(h));
            const double qq = std::abs(d1 - d0) / std::abs(d0);
            const double om = std::abs(std::log(d1 / d0));
            q[j] = std::max(q[j], std::isnan(qq) ? kInf : qq);
            lv.omega[j] = std::max(lv.omega[j], std::isnan(om) ? kInf : om);
          }
        }
      }
    }
    // omega-hat is a modulus: make it monotone in t (hs is decreasing)
    for (std::size_t j = hs.size() - 1; j-- > 0;) lv.omega[j] = std::max(lv.omega[j], lv.omega[j + 1]);
    // Hoelder exponent from the slope of log q against log h over the small steps
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    bool degenerate = false;
    for (std::size_t j = 2; j < hs.size(); ++j) {
      if (!(q[j] > 0) || !std::isfinite(q[j])) {
        degenerate = true;
        continue;
      }
      const double a = std::log(hs[j]), b = std::log(q[j]);
      sx += a, sy += b, sxx += a * a, sxy += a * b, ++m;
    }
    double theta = 1.0;
    if (m >= 2 && !degenerate) theta = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    lv.theta = std::clamp(theta, 0.0, 1.0);
    for (std::size_t j = 0; j < hs.size(); ++j) {
      const double c = lv.theta > 0 ? q[j] / std::pow(hs[j], lv.theta) : kInf;
      if (c > lv.kappa) lv.kappa = c;
    }
  }
  return lv;
}

}  // namespace

ClassCertificate certify(const Potential& V, PotentialClass cls, double kappa_max, int grid_points, int k) {
  if (grid_points < 64) throw Error(ErrorKind::PreconditionViolated, "grid_points must be at least 64");
  if (!(kappa_max >= 1)) throw Error(ErrorKind::PreconditionViolated, "kappa_max must be at least 1");
  if (cls == PotentialClass::Pk) {
    if (k < 1) throw Error(ErrorKind::PreconditionViolated, "k must be positive");
    if (k > V.spec().derivative_order_available()) {
      throw Error(ErrorKind::UnsupportedOrder, "potential has fewer than k derivatives");
    }
  } else {
    k = 1;
  }
  const Level coarse = certify_level(V, cls, grid_points, k);
  const Level fine = certify_level(V, cls, 2 * grid_points - 1, k);
  if (std::isfinite(coarse.kappa) != std::isfinite(fine.kappa) ||
      (std::isfinite(fine.kappa) && std::abs(fine.kappa - coarse.kappa) > 0.01 * coarse.kappa)) {
    throw Error(ErrorKind::GridTooCoarse, "kappa estimate moved by more than 1% under grid doubling");
  }
  ClassCertificate c;
  c.cls = cls;
  c.k = k;
  c.kappa_hat = fine.kappa;
  c.theta = fine.theta;
  c.grid = log_grid(2 * grid_points - 1);
  c.worst_x = fine.worst_x;
  c.pass = std::isfinite(fine.kappa) && fine.kappa <= kappa_max;
  if (!std::isfinite(fine.kappa)) {
    c.reason = "doubling inequality fails";
  } else if (!c.pass) {
    c.reason = "kappa_hat exceeds kappa_max";
  }
  if (cls == PotentialClass::P1_cv && !fine.convex) {
    c.pass = false;
    c.reason = fine.reason;
  }
  if (cls == PotentialClass::P1_uc) {
    c.h_grid = h_samples();
    c.omega = fine.omega;
    const double top = c.omega.front(), bottom = c.omega.back();
    const bool vanishing = top < 1e-12 || bottom <= 0.5 * top;
    if (!std::isfinite(top) || !vanishing || !(c.theta > 0)) {
      c.pass = false;
      c.reason = "modulus of continuity of log V' does not vanish";
    }
  }
  return c;
}

double half_inverse(const Potential& V, Side side, double t) {
  if (!(t > 0)) throw Error(ErrorKind::NonPositiveInput, "level must be positive");
  const double lt = std::log(t);
  auto f = [&](double s) { return std::log(V.half(side, std::exp(s))) - lt; };
  double a = -std::log(V.spec().dilation), fa = f(a);
  if (fa == 0) return std::exp(a);
  double step = fa < 0 ? 1.0 : -1.0;
  double b = a, fb = fa;
  for (int i = 0; i < 200 && (fa < 0) == (fb < 0); ++i) {
    a = b, fa = fb;
    b = a + step;
    fb = f(b);
    step *= 2;
  }
  if ((fa < 0) == (fb < 0)) throw Error(ErrorKind::BracketFailure, "no sign change for half-potential inverse");
  if (fb == 0) return std::exp(b);
  if (a > b) std::swap(a, b), std::swap(fa, fb);
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(52),
                                                   iters);
  return std::exp(0.5 * (r.first + r.second));
}

double sublevel_measure(const Potential& V, double t) {
  if (!V.p1()) throw Error(ErrorKind::NotCertified, "sublevel_measure requires a P1 certificate");
  return half_inverse(V, Side::plus, t) + half_inverse(V, Side::minus, t);
}

double lagrange_gap(const Potential& V, Side side, double x, double y) {
  if (!(y > 0) || !(x >= y)) throw Error(ErrorKind::NonPositiveInput, "lagrange_gap needs x >= y > 0");
  const double wx = V.half(side, x);
  if (x == y) return x * V.half_derivative(side, x) / wx;
  return (wx - V.half(side, y)) / ((wx / x) * (x - y));
}

std::string to_string(Family f) {
  switch (f) {
    case Family::power: return "power";
    case Family::power_asym: return "power_asym";
    case Family::power_logperturbed: return "power_logperturbed";
    case Family::two_power: return "two_power";
    case Family::tabulated: return "tabulated";
  }
  return "unknown";
}

std::string to_string(PotentialClass c) {
  switch (c) {
    case PotentialClass::P1: return "P1";
    case PotentialClass::P1_uc: return "P1_uc";
    case PotentialClass::P1_cv: return "P1_cv";
    case PotentialClass::Pk: return "Pk";
  }
  return "unknown";
}

PotentialClass class_from_string(const std::string& s) {
  if (s == "P1") return PotentialClass::P1;
  if (s == "P1_uc") return PotentialClass::P1_uc;
  if (s == "P1_cv") return PotentialClass::P1_cv;
  if (s == "Pk" || (s.size() == 2 && s[0] == 'P' && s[1] >= '2' && s[1] <= '9')) return PotentialClass::Pk;
  throw Error(ErrorKind::ConfigError, "unknown potential class '" + s + "'");
}

}  // namespace grushin_lab
