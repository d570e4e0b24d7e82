#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "grushin_lab/potential.hpp"

namespace grushin_lab {

struct EigenSolveConfig {
  double rel_tol_eigenvalue = 1e-10;
  double truncation_factor = 25.0;
  int points_per_wavelength = 16;
  int transition_refinement = 16;
  std::size_t max_grid = 4'000'000;
  // Target for the three-point residual of the sampled eigenfunction.
  double residual_target = 1e-6;
  // Fixed number of samples per solver interval; 0 picks it from residual_target.
  int oversample = 0;

  void validate() const;
  std::uint64_t hash() const;
};

struct EigenPair {
  int n = 0;
  double E = 0;
  std::vector<double> grid;
  std::vector<double> v;  // V on the grid
  std::vector<double> psi;
  std::vector<double> dpsi;
  double residual = 0;
  double norm_defect = 0;

  // Cubic Hermite interpolation from (psi, dpsi); zero outside the grid.
  double value(double x) const;
  double derivative(double x) const;
  double max_abs() const;
};

double eigenvalue(const Potential& V, int n, const EigenSolveConfig& cfg = {});
EigenPair eigenfunction(const Potential& V, int n, const EigenSolveConfig& cfg = {});

std::vector<double> zeros(const EigenPair& p);
std::vector<double> critical_points(const EigenPair& p);
// Throws InterlacingViolation unless zeros and critical points have the
// expected counts and strictly interlace.
void check_interlacing(const EigenPair& p);

// (x_minus, x_plus) with V(x_plus) = E = V(-x_minus).
std::pair<double, double> transition_points(const Potential& V, double E);

int spectrum_count(const Potential& V, double Lambda, const EigenSolveConfig& cfg = {});

double inner_product(const EigenPair& a, const EigenPair& b);

// Pair of tau*V from a pair of V when V is homogeneous of the given degree.
EigenPair scale_pair(const EigenPair& p, double tau, double degree);

// Solver internals exposed for fixed-grid differentiation.
std::vector<double> solver_grid(const Potential& V, double E_design, int n, const EigenSolveConfig& cfg);
std::vector<double> halve_grid(const std::vector<double>& grid);
double eigenvalue_on_grid(const Potential& V, int n, const std::vector<double>& grid, double E_guess);

}  // namespace grushin_lab
