#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "cband/potential.hpp"
#include "cband/types.hpp"

namespace cband {

struct IntegratorConfig {
  double rel_tol = 1e-14;
  double abs_tol = 1e-14;
  double h_init = 1e-3;
  double h_min = 1e-12;
  double h_max = 0.1;
  std::int64_t max_steps = 100'000'000;
  /// Allowed |H - E|, relative to TrajectoryRecord::energy_scale.
  double energy_tol = 1e-8;
  /// Limit on |x|; on the cosine lattice the limit applies to |Im x| instead.
  double escape_bound = 50.0;

  /// Throws UsageError when the step bounds or tolerances are inconsistent.
  void validate() const;
};

enum class Termination { TimeBudget, StepBudget, Escaped, EnergyDriftExceeded, ObserverStop };

[[nodiscard]] std::string_view to_string(Termination t);

struct TrajectoryRecord {
  std::vector<PhaseState> samples;
  Termination termination = Termination::TimeBudget;
  /// Largest |H - E| over the accepted steps.
  double max_energy_drift = 0.0;
  /// max(1, largest |V(x)| seen). Drift is judged against energy_tol times this.
  double energy_scale = 1.0;
  std::int64_t accepted_steps = 0;
  std::int64_t rejected_steps = 0;

  [[nodiscard]] const PhaseState& final_state() const { return samples.back(); }
};

struct StepResult {
  PhaseState state;
  /// Max-norm of the difference between the embedded order-4 and order-5 solutions
  /// over the four real phase-space components.
  double error = 0.0;
  /// Order-5 minus order-4 solution.
  PhaseVector difference = PhaseVector::Zero();
  /// False when a stage produced a non-finite derivative.
  bool finite = true;
};

/// One Dormand-Prince 5(4) step. The returned state is the order-5 solution.
[[nodiscard]] StepResult step_embedded(const PotentialSpec& spec, const PhaseState& state, double h);

/// Per-step callback. Receives every accepted state; return false to stop.
using StepObserver = std::function<bool(const PhaseState&)>;

struct IntegrateOptions {
  double t_max = 100.0;
  /// When false only the initial and final states are kept in `samples`.
  bool store_samples = true;
};

/// Adaptive integration of Hamilton's equations from `start` until `t_max` or one
/// of the other termination conditions. Energy drift is monitored, never corrected.
/// Throws IntegrationError when the step size falls below h_min.
[[nodiscard]] TrajectoryRecord integrate(const PotentialSpec& spec, Complex energy,
                                         const PhaseState& start, const IntegratorConfig& cfg,
                                         const IntegrateOptions& opts,
                                         const StepObserver& observer = {});

/// Uniform-in-index thinning to at most `max_samples` samples; first and last are kept.
[[nodiscard]] std::vector<PhaseState> decimate(const std::vector<PhaseState>& samples,
                                               std::size_t max_samples);

}  // namespace cband
