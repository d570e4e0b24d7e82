#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace grushin_lab {

enum class Family { power, power_asym, power_logperturbed, two_power, tabulated };

struct PowerParams {
  double d = 2.0;
};
struct PowerAsymParams {
  double d = 2.0;
  double a = 1.0;  // left branch is a|x|^d
};
struct LogPerturbedParams {
  double d = 2.0;
  double eps = 0.0;
};
struct TwoPowerParams {
  double d1 = 1.0;
  double d2 = 3.0;
};
struct TabulatedParams {
  std::vector<double> x;
  std::vector<double> v;
};

using FamilyParams =
    std::variant<PowerParams, PowerAsymParams, LogPerturbedParams, TwoPowerParams, TabulatedParams>;

// V(x) = amplitude * base(dilation * x), where base is given by the family.
struct PotentialSpec {
  FamilyParams params = PowerParams{};
  double amplitude = 1.0;
  double dilation = 1.0;

  Family family() const;
  int derivative_order_available() const;
  // Degree of homogeneity for pure powers.
  std::optional<double> homogeneous_degree() const;
};

PotentialSpec power(double d);
PotentialSpec power_asym(double d, double a);
PotentialSpec power_logperturbed(double d, double eps);
PotentialSpec two_power(double d1, double d2);
PotentialSpec tabulated(std::vector<double> x, std::vector<double> v);

PotentialSpec scale(const PotentialSpec& spec, double tau);
PotentialSpec rescale(const PotentialSpec& spec, double r);

enum class PotentialClass { P1, P1_uc, P1_cv, Pk };

struct ClassCertificate {
  PotentialClass cls = PotentialClass::P1;
  double kappa_hat = 1.0;
  double theta = 1.0;
  int k = 1;
  std::vector<double> grid;      // positive abscissae (both half-lines use them)
  std::vector<double> h_grid;    // log-step samples for the continuity checks
  std::vector<double> omega;     // omega-hat at h_grid (P1_uc)
  bool pass = false;
  double worst_x = 0.0;
  std::string reason;
};

enum class Side { plus, minus };

class Potential {
 public:
  explicit Potential(PotentialSpec spec);

  const PotentialSpec& spec() const { return spec_; }
  double operator()(double x) const { return value(x); }
  double value(double x) const;
  double derivative(double x, int order) const;
  // Half-potential W(x) = V(+-x) for x > 0, with its first derivative.
  double half(Side side, double x) const;
  double half_derivative(Side side, double x) const;

  // P1 certificate computed at construction (or inherited through scale/rescale).
  const std::optional<ClassCertificate>& p1() const { return p1_; }
  double kappa() const;

  Potential scaled(double tau) const;
  Potential rescaled(double r) const;

  std::uint64_t hash() const;

 private:
  struct Tab;
  Potential(PotentialSpec spec, std::optional<ClassCertificate> cert, std::shared_ptr<const Tab> tab);
  double base(double x) const;
  double base_derivative(double x, int order) const;

  PotentialSpec spec_;
  std::shared_ptr<const Tab> tab_;
  std::optional<ClassCertificate> p1_;
};

double eval(const Potential& V, double x, int order);

ClassCertificate certify(const Potential& V, PotentialClass cls, double kappa_max, int grid_points,
                         int k = 3);

// Inverse of a half-potential: W(x) = t.
double half_inverse(const Potential& V, Side side, double t);
double sublevel_measure(const Potential& V, double t);
double lagrange_gap(const Potential& V, Side side, double x, double y);

std::string to_string(Family f);
std::string to_string(PotentialClass c);
PotentialClass class_from_string(const std::string& s);

}  // namespace grushin_lab
