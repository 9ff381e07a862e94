#pragma once

// Independent reference computations used to check the library. Nothing here calls
// into cband, so a shared bug cannot make both sides agree.

#include <array>
#include <cmath>
#include <complex>
#include <functional>

namespace oracle {

using C = std::complex<double>;

// Values frozen from a 30-digit evaluation; the oracle functions below reproduce them.
inline constexpr double kQuarticPeriod = 3.70814935460274383687;  // sqrt(pi/2) Gamma(1/4)/Gamma(3/4)
inline constexpr double kQuarticAction = 4.94419913947032511582;  // 2 * int_{-1}^{1} sqrt(2(1-x^4)) dx
inline constexpr double kCosh1 = 1.54308063481524377848;
inline constexpr double kDoubleWellOuter = 2.18890105931673394201;  // sqrt((5+sqrt 21)/2)
inline constexpr double kDoubleWellInner = 0.45685025174785664849;  // sqrt((5-sqrt 21)/2)

inline C cosh_taylor(C z, int terms = 40) {
  C term = 1.0;
  C sum = 1.0;
  for (int k = 1; k < terms; ++k) {
    term *= z * z / static_cast<double>((2 * k - 1) * (2 * k));
    sum += term;
  }
  return sum;
}

// Roots of x^4 - 5x^2 - e = 0 for real e, via the quadratic in x^2.
inline std::array<double, 2> double_well_radicals(double e) {
  const double disc = std::sqrt(25.0 + 4.0 * e);
  return {std::sqrt((5.0 + disc) / 2.0), std::sqrt((5.0 - disc) / 2.0)};
}

// 2 * int_{-1}^{1} sqrt(2(1-x^4)) dx with x = sin(theta), composite Simpson.
inline double quartic_action(int intervals = 4000) {
  auto f = [](double th) {
    const double c = std::cos(th);
    const double s = std::sin(th);
    return std::sqrt(2.0) * c * c * std::sqrt(1.0 + s * s);
  };
  const double a = -M_PI / 2.0;
  const double b = M_PI / 2.0;
  const double h = (b - a) / intervals;
  double sum = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) sum += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return 2.0 * sum * h / 3.0;
}

struct State {
  C x;
  C p;
};

// Classical fixed-step RK4 for dx/dt = 2k p, dp/dt = -V'(x).
inline State rk4(const std::function<C(C)>& force, double k, State s, double h, double t_end) {
  auto rhs = [&](const State& y) { return State{2.0 * k * y.p, force(y.x)}; };
  const long n = std::lround(t_end / h);
  for (long i = 0; i < n; ++i) {
    const State k1 = rhs(s);
    const State k2 = rhs({s.x + 0.5 * h * k1.x, s.p + 0.5 * h * k1.p});
    const State k3 = rhs({s.x + 0.5 * h * k2.x, s.p + 0.5 * h * k2.p});
    const State k4 = rhs({s.x + h * k3.x, s.p + h * k3.p});
    s.x += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    s.p += h / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
  }
  return s;
}

inline C cosine_force(C x) { return -std::sin(x); }
inline C quartic_force(C x) { return -4.0 * x * x * x; }
inline C double_well_force(C x) { return -(4.0 * x * x * x - 10.0 * x); }

}  // namespace oracle
