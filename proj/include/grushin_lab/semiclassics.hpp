#pragma once

#include "grushin_lab/potential.hpp"
#include "grushin_lab/schrodinger.hpp"

namespace grushin_lab {

struct PhaseProfile {
  double E = 0;
  double phase = 0;
  double quadrature_error_bound = 0;
};

PhaseProfile phase_profile(const Potential& V, double E);
double bs_phase(const Potential& V, double E);
double kv(const Potential& V, double t);

struct BsError {
  double E = 0;
  double phase = 0;
  double err = 0;
  double ratio = 0;
};
BsError bs_log_error(const Potential& V, int n, const EigenSolveConfig& cfg = {});

// Energy E with bs_phase(V, E) = phase.
double bs_energy(const Potential& V, double phase);

double xi(const Potential& V, int n, double lambda, const EigenSolveConfig& cfg = {});

struct VirialResult {
  double ratio = 0;
  double hellmann_feynman = 0;
};
VirialResult virial(const Potential& V, int n, double tau, const EigenSolveConfig& cfg = {});
double virial_ratio(const Potential& V, int n, double tau, const EigenSolveConfig& cfg = {});

}  // namespace grushin_lab
