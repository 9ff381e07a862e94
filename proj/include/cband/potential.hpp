#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <variant>
#include <vector>

#include "cband/types.hpp"

namespace cband {

/// V(x) = -cos(x). Wells at 2*pi*n, barriers at odd multiples of pi.
struct CosineLattice {};
/// V(x) = x^4.
struct Quartic {};
/// V(x) = x^4 - 5 x^2.
struct DoubleWell {};
/// V(x) = sum_k coefficients[k] x^k, real coefficients in ascending order.
struct Polynomial {
  std::vector<double> coefficients;
};

/// Kinetic term: Half gives p^2/2, Full gives p^2.
enum class KineticTerm { Half, Full };

struct PotentialSpec {
  std::variant<CosineLattice, Quartic, DoubleWell, Polynomial> shape;
  KineticTerm kinetic = KineticTerm::Half;

  [[nodiscard]] static PotentialSpec cosine(KineticTerm k = KineticTerm::Half) {
    return {CosineLattice{}, k};
  }
  [[nodiscard]] static PotentialSpec quartic(KineticTerm k = KineticTerm::Half) {
    return {Quartic{}, k};
  }
  [[nodiscard]] static PotentialSpec double_well(KineticTerm k = KineticTerm::Full) {
    return {DoubleWell{}, k};
  }
  [[nodiscard]] static PotentialSpec polynomial(std::vector<double> c,
                                                KineticTerm k = KineticTerm::Half) {
    return {Polynomial{std::move(c)}, k};
  }

  [[nodiscard]] bool is_cosine() const { return std::holds_alternative<CosineLattice>(shape); }

  /// Coefficient of p^2 in the Hamiltonian.
  [[nodiscard]] double kinetic_factor() const { return kinetic == KineticTerm::Half ? 0.5 : 1.0; }

  /// Ascending coefficients for the polynomial shapes. Throws for the cosine lattice.
  [[nodiscard]] std::vector<double> polynomial_coefficients() const;

  /// Throws UsageError unless the degree is >= 1 and every coefficient is finite.
  void validate() const;

  /// Canonical name: cosine, quartic, doublewell, or poly:c0,c1,...
  [[nodiscard]] std::string name() const;
  /// Parses the canonical name. Throws UsageError on anything else.
  [[nodiscard]] static PotentialSpec parse(const std::string& name, KineticTerm kinetic);
};

namespace detail {

template <typename Scalar>
Scalar horner(const std::vector<double>& c, Scalar x) {
  Scalar acc(0);
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + Scalar(*it);
  return acc;
}

template <typename Scalar>
Scalar horner_derivative(const std::vector<double>& c, Scalar x) {
  Scalar acc(0);
  for (std::size_t k = c.size(); k-- > 1;) acc = acc * x + Scalar(static_cast<double>(k) * c[k]);
  return acc;
}

}  // namespace detail

/// V(x) continued analytically to the scalar type (double or std::complex<double>).
/// For large |Im x| the cosine overflows; the result is then non-finite and callers
/// treat that as escape.
template <typename Scalar>
[[nodiscard]] Scalar potential_value(const PotentialSpec& spec, Scalar x) {
  return std::visit(
      [&](const auto& s) -> Scalar {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, CosineLattice>) {
          return -std::cos(x);
        } else if constexpr (std::is_same_v<S, Quartic>) {
          const Scalar x2 = x * x;
          return x2 * x2;
        } else if constexpr (std::is_same_v<S, DoubleWell>) {
          const Scalar x2 = x * x;
          return x2 * (x2 - Scalar(5.0));
        } else {
          return detail::horner(s.coefficients, x);
        }
      },
      spec.shape);
}

/// V'(x), continued analytically.
template <typename Scalar>
[[nodiscard]] Scalar potential_gradient(const PotentialSpec& spec, Scalar x) {
  return std::visit(
      [&](const auto& s) -> Scalar {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, CosineLattice>) {
          return std::sin(x);
        } else if constexpr (std::is_same_v<S, Quartic>) {
          return Scalar(4.0) * x * x * x;
        } else if constexpr (std::is_same_v<S, DoubleWell>) {
          return Scalar(4.0) * x * x * x - Scalar(10.0) * x;
        } else {
          return detail::horner_derivative(s.coefficients, x);
        }
      },
      spec.shape);
}

template <typename Scalar>
[[nodiscard]] Scalar hamiltonian(const PotentialSpec& spec, Scalar x, Scalar p) {
  return Scalar(spec.kinetic_factor()) * p * p + potential_value(spec, x);
}

[[nodiscard]] inline Complex hamiltonian(const PotentialSpec& spec, const PhaseState& s) {
  return hamiltonian<Complex>(spec, s.x, s.p);
}

/// Momentum that places (x0, p0) on the energy surface H = E, using the principal
/// square root. `branch` is +1 or -1.
[[nodiscard]] Complex initial_momentum(const PotentialSpec& spec, Complex energy, Complex x0,
                                       int branch = +1);

/// Hamilton's equations: (dx/dt, dp/dt) = (dH/dp, -V'(x)).
[[nodiscard]] inline PhaseVector vector_field(const PotentialSpec& spec, const PhaseVector& y) {
  return PhaseVector(Complex(2.0 * spec.kinetic_factor()) * y(1),
                     -potential_gradient<Complex>(spec, y(0)));
}

}  // namespace cband
