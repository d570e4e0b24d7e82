#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "grushin_lab/potential.hpp"
#include "grushin_lab/schrodinger.hpp"

namespace grushin_lab {

enum class MultiplierKind { bump, riesz_fragment, tabulated };

struct MultiplierSpec {
  MultiplierKind kind = MultiplierKind::bump;
  double amplitude = 1.0;
  // bump: 1 on [center - half_width, center + half_width], smooth ramps of width `ramp`
  double center = 0.5;
  double half_width = 0.05;
  double ramp = 0.05;
  // riesz_fragment: (1 - l)^order chi(2^piece (1 - l)) with chi a smooth bump on [1/2, 2]
  double order = 1.0;
  int piece = 2;
  // tabulated: piecewise linear through (lambda, values), zero outside
  std::vector<double> lambda;
  std::vector<double> values;

  // Throws InvalidSpec unless supp m lies in [1/4, 1].
  void validate() const;
  double operator()(double l) const;
  std::pair<double, double> support() const;
  bool is_zero() const;
};

MultiplierSpec bump(double center = 0.5, double half_width = 0.05, double ramp = 0.05);
MultiplierSpec riesz_fragment(double order, int piece);
MultiplierSpec tabulated_multiplier(std::vector<double> lambda, std::vector<double> values);

// ||m||_{W^{s,2}} with the unitary Fourier transform, so that s = 0 gives ||m||_2.
double sobolev_norm(const MultiplierSpec& m, double s);

struct GrushinConfig {
  // Fibers n > fiber_cap are dropped; the cap doubles (up to max_fiber_cap)
  // while their estimated share exceeds truncation_limit.
  int fiber_cap = 32;
  int max_fiber_cap = 256;
  double truncation_limit = 0.05;
  double tail_tol = 1e-4;
  int u_points_per_scale = 16;
  int x_points_per_wavelength = 16;
  double decay_floor = 1e-8;
  int max_halvings = 6;
  // K is kept for u <= store_scales * 2 pi r
  double store_scales = 8;
  int threads = 1;
  EigenSolveConfig eig = [] {
    EigenSolveConfig c;
    c.residual_target = 1e-4;
    return c;
  }();
};

// Eigendata of -d^2 + xi^2 V. Homogeneous V reuses one eigensolve per n
// through the scaling law; otherwise pairs are solved per (n, xi) and cached.
class FiberSource {
 public:
  struct Fiber {
    double E = 0;
    double s = 1;
    std::shared_ptr<const EigenPair> pair;
    double operator()(double x) const;
  };

  FiberSource(Potential V, EigenSolveConfig cfg);
  const Potential& potential() const { return V_; }
  // [xi_lo, xi_hi] with E_n(xi^2 V) in [lo, hi]
  std::pair<double, double> band(int n, double lo, double hi) const;
  Fiber fiber(int n, double xi) const;

 private:
  std::shared_ptr<const EigenPair> base(int n) const;

  Potential V_;
  EigenSolveConfig cfg_;
  std::optional<double> degree_;
  mutable std::mutex mutex_;
  mutable std::map<int, std::shared_ptr<const EigenPair>> base_;
  mutable std::map<std::pair<int, double>, std::shared_ptr<const EigenPair>> pairs_;
  mutable std::map<int, double> e1_;
};

struct KernelSlice {
  double r = 1;
  double x_prime = 0;
  std::vector<double> x;
  std::vector<double> u;      // stored u nodes (a prefix of the full u-grid)
  std::vector<double> K;      // row-major, K[i * u.size() + j] = K(x[i], x_prime, u[j])
  std::vector<double> u_all;  // full u-grid on [0, period / 2]
  std::vector<double> mass;   // integral over x of K^2 at each u_all node
  double delta_xi = 0;
  double period = 0;
  double tail_fraction = 0;        // share of the weighted u-integral beyond period / 4
  double truncation_estimate = 0;  // relative share of fibers n > fiber_cap (vartheta = 0)
  int fiber_cap = 0;
  int halvings = 0;

  double at(std::size_t i, std::size_t j) const { return K[i * u.size() + j]; }
};

// K(x, x', u) = (2 pi)^{-1} int e^{i xi u} sum_n m(r^2 E_n(xi^2 V)) psi_n(x) psi_n(x') dxi
// on a uniform xi-grid, transformed to u with a discrete cosine transform.
// The xi-step is halved until the |u|^{2 vartheta}-weighted tail beyond a
// quarter period is below tail_tol.
KernelSlice kernel_slice(const MultiplierSpec& m, const Potential& V, double r, double x_prime,
                         const GrushinConfig& cfg = {}, double vartheta = 0);
KernelSlice kernel_slice(const MultiplierSpec& m, FiberSource& src, double r, double x_prime,
                         const GrushinConfig& cfg = {}, double vartheta = 0);

double plancherel_prefactor(const Potential& V, double r, double vartheta, double x_prime);

// r^{2-2 vartheta} max{V(r), V(x')}^{1/2-vartheta} int int |u|^{2 vartheta} |K|^2 du dx
double weighted_plancherel_lhs(const MultiplierSpec& m, const Potential& V, double r, double vartheta,
                               double x_prime, const GrushinConfig& cfg = {});
double weighted_plancherel_lhs(const KernelSlice& slice, const Potential& V, double vartheta);

// int int |K|^2 du dx computed in xi-space: by Plancherel in u and
// orthonormality in x it equals pi^{-1} int_0^inf sum_{n <= n_max}
// m(r^2 E_n)^2 psi_n(x')^2 dxi.
double plancherel_oracle(const MultiplierSpec& m, FiberSource& src, double r, double x_prime, int n_max);

struct SweepRow {
  double r = 0;
  double x_prime = 0;
  double vartheta = 0;
  double lhs = 0;
  double sobolev_sq = 0;
  double ratio = 0;
};
struct SweepResult {
  std::vector<SweepRow> rows;
  double max_ratio = 0;
  double min_ratio = 0;
  double median_ratio = 0;
  double uniformity = 0;  // max / min
  double max_over_median = 0;
};
SweepResult plancherel_sweep(const MultiplierSpec& m, const Potential& V, const std::vector<double>& varthetas,
                             const std::vector<double>& r_set, const std::vector<double>& x_prime_set,
                             const GrushinConfig& cfg = {});

}  // namespace grushin_lab
