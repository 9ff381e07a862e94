#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "cband/integrator.hpp"
#include "cband/potential.hpp"
#include "cband/types.hpp"

namespace cband {

struct OrbitOptions {
  /// Phase-space distance below which the orbit counts as closed.
  double closure_tol = 1e-6;
  double t_max = 100.0;
  IntegratorConfig integrator{};
};

struct OrbitResult {
  double period = 0.0;
  double closure_error = 0.0;
  double closure_tol = 0.0;
  /// One full loop; the last sample is the refined return point at t = period.
  TrajectoryRecord samples;
};

/// Integrates from `start` until the phase-space trajectory returns to within
/// `closure_tol` of it. The return time is located by golden-section minimisation of
/// the phase-space distance around the sampled minimum.
/// Throws NoClosure when t_max elapses first.
[[nodiscard]] OrbitResult orbit_period(const PotentialSpec& spec, Complex energy,
                                       const PhaseState& start, const OrbitOptions& opts = {});

struct ActionResult {
  Complex action{};
  /// action / pi - 1/2, the effective Bohr-Sommerfeld quantum number.
  Complex n_eff{};
};

/// Loop integral of p dx by the trapezoidal rule over the recorded orbit.
/// Throws UsageError if the orbit is not closed within its tolerance.
[[nodiscard]] ActionResult action_integral(const OrbitResult& orbit);

struct TurningPoints {
  std::vector<Complex> points;
  /// Set for the cosine lattice: every point repeats with this period in Re x.
  std::optional<double> lattice_period;
};

/// Solutions of V(x) = E. Polynomials go through companion-matrix eigenvalues
/// followed by Newton polishing; the cosine lattice returns the principal pair.
[[nodiscard]] TurningPoints turning_points(const PotentialSpec& spec, Complex energy);

/// Roots of sum_k c[k] x^k with complex coefficients. Leading zeros are dropped.
[[nodiscard]] std::vector<Complex> polynomial_roots(std::vector<Complex> c);

struct HyperbolaSample {
  double im_e = 0.0;
  double mean_time = 0.0;
};

struct HyperbolaFit {
  /// Geometric mean of mean_time * |im_e|.
  double c = 0.0;
  /// max |mean_time * |im_e| - c| / c over the samples.
  double relative_residual = 0.0;
  std::vector<HyperbolaSample> samples;
};

[[nodiscard]] HyperbolaFit hyperbola_fit(const std::vector<HyperbolaSample>& samples);

}  // namespace cband
