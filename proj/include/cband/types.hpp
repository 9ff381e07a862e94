#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace cband {

using Complex = std::complex<double>;

/// Complex position and momentum packed for the Runge-Kutta stages.
using PhaseVector = Eigen::Matrix<Complex, 2, 1>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

struct PhaseState {
  double t = 0.0;
  Complex x{};
  Complex p{};

  [[nodiscard]] PhaseVector vector() const { return PhaseVector(x, p); }
  [[nodiscard]] static PhaseState from_vector(double t, const PhaseVector& y) {
    return PhaseState{t, y(0), y(1)};
  }
};

[[nodiscard]] inline bool is_finite(Complex z) {
  return std::isfinite(z.real()) && std::isfinite(z.imag());
}

[[nodiscard]] inline bool is_finite(const PhaseState& s) {
  return std::isfinite(s.t) && is_finite(s.x) && is_finite(s.p);
}

/// Euclidean distance in the 4-real-dimensional phase space.
[[nodiscard]] inline double phase_distance(const PhaseState& a, const PhaseState& b) {
  return std::sqrt(std::norm(a.x - b.x) + std::norm(a.p - b.p));
}

// Error taxonomy. The CLI maps each of these to a distinct exit code.

/// Bad arguments or a violated precondition.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The integrator could not continue (step size underflow, pathological step).
class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A periodic-orbit search ran out of time without the orbit closing.
class NoClosure : public std::runtime_error {
 public:
  explicit NoClosure(double t_max)
      : std::runtime_error("orbit did not close within t_max = " + std::to_string(t_max)),
        t_max_(t_max) {}
  [[nodiscard]] double t_max() const { return t_max_; }

 private:
  double t_max_;
};

/// Not enough hops were observed to compute a statistic.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A checkpoint file was written for a different grid.
class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cband
