#pragma once

#include <array>
#include <cmath>

namespace grushin_lab::detail {

// 2x2 matrix [[a, b], [c, d]]
struct M2 {
  double a = 0, b = 0, c = 0, d = 0;
};

inline M2 operator+(M2 x, M2 y) { return {x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d}; }
inline M2 operator-(M2 x, M2 y) { return {x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d}; }
inline M2 operator*(double s, M2 x) { return {s * x.a, s * x.b, s * x.c, s * x.d}; }
inline M2 operator*(M2 x, M2 y) {
  return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
}
inline M2 comm(M2 x, M2 y) { return x * y - y * x; }

inline M2 inverse_unimodular(M2 u) { return {u.d, -u.b, -u.c, u.a}; }

// Gauss-Legendre nodes on [0, 1] used by the sixth-order Magnus step.
inline constexpr std::array<double, 3> kGaussNodes = {0.5 - 0.38729833462074168852, 0.5, 0.5 + 0.38729833462074168852};

// exp of a traceless 2x2 matrix.
inline M2 expm_traceless(M2 om) {
  const double a = 0.5 * (om.a - om.d);
  const double delta = a * a + om.b * om.c;
  double ch, sh;
  if (std::abs(delta) < 1e-6) {
    ch = 1 + delta * (0.5 + delta * (1.0 / 24 + delta * (1.0 / 720 + delta / 40320)));
    sh = 1 + delta * (1.0 / 6 + delta * (1.0 / 120 + delta * (1.0 / 5040 + delta / 362880)));
  } else if (delta > 0) {
    const double s = std::sqrt(delta);
    ch = std::cosh(s);
    sh = std::sinh(s) / s;
  } else {
    const double s = std::sqrt(-delta);
    ch = std::cos(s);
    sh = std::sin(s) / s;
  }
  return {ch + sh * a, sh * om.b, sh * om.c, ch - sh * a};
}

// Propagator of (psi, psi')' = [[0, 1], [q, 0]] (psi, psi') over a step of
// length h, given q at the three Gauss nodes.
inline M2 magnus6(double h, double q1, double q2, double q3) {
  constexpr double r15 = 3.87298334620741688518;  // sqrt(15)
  const M2 A1{0, 1, q1, 0}, A2{0, 1, q2, 0}, A3{0, 1, q3, 0};
  const M2 a1 = h * A2;
  const M2 a2 = (r15 * h / 3) * (A3 - A1);
  const M2 a3 = (10 * h / 3) * (A3 - 2.0 * A2 + A1);
  const M2 c1 = comm(a1, a2);
  const M2 c2 = (-1.0 / 60) * comm(a1, 2.0 * a3 + c1);
  const M2 om = a1 + (1.0 / 12) * a3 + (1.0 / 240) * comm(-20.0 * a1 - a3 + c1, a2 + c2);
  return expm_traceless(om);
}

}  // namespace grushin_lab::detail
