#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "grushin_lab/potential.hpp"
#include "grushin_lab/schrodinger.hpp"

namespace grushin_lab {

enum class Inequality { pointwise_psi, pointwise_dpsi, sonin_C3, sonin_power, exp_decay, projector, summation, gap_log };

std::string to_string(Inequality id);

struct BoundEntry {
  int n = 0;
  double sup_ratio = 0;
  double argmax_x = 0;
};

struct BoundReport {
  Inequality id = Inequality::pointwise_psi;
  std::string family;
  std::string cls;
  double alpha = 0;
  std::vector<BoundEntry> per_n;
  double uniform_constant = 0;
  // sup over the upper half of the n-range divided by sup over the lower half
  double trend = 0;
  std::map<std::string, double> params;

  // Sorts per_n and recomputes uniform_constant and trend.
  void finalize();
};

// ---- pointwise estimates in the transition region

enum class Quantity { psi, dpsi };

struct SupRatio {
  double sup_ratio = 0;
  double argmax_x = 0;
};

// Class whose certificate justifies the exponent alpha: P1 for 1/2, P1_uc
// for (1/4, 1/2), P1_cv or P3 for 1/4. Throws MissingCertificate if V does
// not pass the corresponding check and PreconditionViolated for other alpha.
PotentialClass require_class_for_alpha(const Potential& V, double alpha, double kappa_max = 64);

// Sup over the grid of |psi| |{V <= E}|^{1/2} / min{n^{2a/3}, |1 - V/E|^{-a}}
// (resp. the psi' analogue), skipping the node nearest each transition point.
SupRatio pointwise_ratio(const Potential& V, const EigenPair& p, double alpha, Quantity which);
SupRatio pointwise_ratio(const Potential& V, int n, double alpha, Quantity which, const EigenSolveConfig& cfg = {});

BoundReport pointwise_report(const Potential& V, double alpha, Quantity which, int n_max,
                             const EigenSolveConfig& cfg = {}, int threads = 1);

// ---- monotone envelopes and structural facts

struct EnvelopeResult {
  int g_violations = 0;  // (E - V) psi^2 + psi'^2
  int h_violations = 0;  // psi^2 + psi'^2 / (E - V) on the classical region
  double g_worst = 0;    // largest wrong-way step relative to max g
  double h_worst = 0;
};
EnvelopeResult envelope_check(const Potential& V, const EigenPair& p, double tol = 1e-8);

struct StructureResult {
  int psi_max_violations = 0;   // local maxima of psi^2 not increasing away from 0
  int dpsi_max_violations = 0;  // local maxima of psi'^2 not decreasing away from 0
  int decay_sign_violations = 0;  // x psi psi' >= 0 where V >= E
};
StructureResult structure_check(const EigenPair& p);

// ---- Sonin functions

enum class SoninVariant { C3, power };

struct SoninResult {
  int violations = 0;
  std::size_t region_nodes = 0;
  double max_s = 0;
  std::vector<double> x;
  std::vector<double> s;
};

// C3: f = (E - V)^{1/4} psi on {(1 - eps) E <= V < E}; power: f = (x_n - x)^alpha psi
// on [e^{-delta} x_n, x_n) and its mirror image. S = f^2 + f'^2 / B must
// decrease on the right and increase on the left.
SoninResult sonin_profile(const Potential& V, const EigenPair& p, SoninVariant variant, double eps_or_delta,
                          double alpha = 0.25, double tol = 1e-8);
SoninResult sonin_profile(const Potential& V, int n, SoninVariant variant, double eps_or_delta, double alpha = 0.25,
                          const EigenSolveConfig& cfg = {});

// ---- exponential decay outside the classical region

struct DecayFit {
  double c_fit = 0;
  double intercept = 0;
  double max_violation = 0;
  std::size_t nodes = 0;
};
// Least squares of -log(|psi| |{V <= E}|^{1/2}) against |x| V(x)^{1/2} on
// {V >= 4E}, using nodes with |psi| >= floor * max|psi|.
DecayFit exp_decay_fit(const Potential& V, const EigenPair& p, double floor = 1e-12);
DecayFit exp_decay_fit(const Potential& V, int n, const EigenSolveConfig& cfg = {});

// ---- summation lemma

struct SummationParams {
  double c = 1;
  double kappa = 1;
  double theta = 0.5;
  double beta = 0;
};
// Sum over {n : t_n <= kappa a} of min{a^{theta-1} |t_n - b|^{-theta}, a^{-beta}},
// with t[0] = t_1. Throws PreconditionViolated unless the hypotheses hold and
// the sequence reaches beyond kappa a.
double summation_oracle(const std::vector<double>& t, double a, double b, const SummationParams& prm);

// Admissible sequence t_n = c n + kappa n^beta u_n with u_n uniform in
// [-1, 1], clipped below at 1/kappa.
std::vector<double> random_gap_sequence(const SummationParams& prm, std::size_t length, std::uint64_t seed);
// Sup of summation_oracle over `count` random pairs (a, b) with a log-uniform
// in [a_min, a_max] and b uniform in (0, kappa a].
double summation_sup(const std::vector<double>& t, const SummationParams& prm, int count, double a_min,
                     double a_max, std::uint64_t seed);

// ---- spectral projector sums

struct WindowTerm {
  int n = 0;
  double xi = 0;  // Xi_n(lambda)
};
// {n : lambda / Xi_n(lambda) in [A, 2A]}, found by marching n upwards.
std::vector<WindowTerm> projector_window(const Potential& V, double lambda, double A,
                                         const EigenSolveConfig& cfg = {});

struct ProjectorResult {
  double x = 0;
  double sum = 0;
  double ratio = 0;
  bool inside = true;  // V(x) <= 8A
  int n_lo = 0;
  int n_hi = -1;
};
// c_decay is the exponential rate used for V(x) > 8A.
std::vector<ProjectorResult> projector_sum(const Potential& V, double lambda, double A, const std::vector<double>& xs,
                                           double c_decay, const EigenSolveConfig& cfg = {});
ProjectorResult projector_sum(const Potential& V, double lambda, double A, double x, double c_decay,
                              const EigenSolveConfig& cfg = {});

// Sup over x of |psi_n(x; Xi_n V)| |{V <= lambda/Xi_n}|^{1/2} / min{n^{delta/2},
// (E/|Xi_n V - E|)^{theta/2}} with E = lambda: the eigenfunction hypothesis of
// the projector bound, with its exponents as parameters.
double projector_hypothesis_ratio(const Potential& V, double lambda, double A, double theta, double delta,
                                  const EigenSolveConfig& cfg = {});

struct GapLogResult {
  double max_ratio = 0;  // max |t_n - pi n| / log(1 + n)
  double max_err = 0;    // max |t_n - pi n|
  int n_lo = 0;
  int n_hi = -1;
};
// t_n = lambda^{1/2} K_V(lambda / Xi_n(lambda)) over the projector window.
GapLogResult gap_log_check(const Potential& V, double lambda, double A, const EigenSolveConfig& cfg = {});

}  // namespace grushin_lab
