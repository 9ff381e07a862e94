#include "cband/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cband {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
// Fifth-order weights (also the last stage row, FSAL).
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                 b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
// Difference between fifth- and fourth-order weights.
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

double max_component(const PhaseVector& v) {
  double m = 0.0;
  for (int i = 0; i < 2; ++i) m = std::max({m, std::abs(v(i).real()), std::abs(v(i).imag())});
  return m;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

bool all_finite(const PhaseVector& v) { return is_finite(v(0)) && is_finite(v(1)); }

struct Stepper {
  const PotentialSpec& spec;

  // k1 is the derivative at y; on return `k7` holds the derivative at the new point and
  // `increment` the order-5 update. `carry` is the compensation term of the running sum.
  StepResult step(const PhaseState& s, const PhaseVector& y, const PhaseVector& carry,
                  const PhaseVector& k1, double h, PhaseVector& k7, PhaseVector& increment) const {
    const Complex H(h);
    const PhaseVector k2 = vector_field(spec, y + H * (a21 * k1));
    const PhaseVector k3 = vector_field(spec, y + H * (a31 * k1 + a32 * k2));
    const PhaseVector k4 = vector_field(spec, y + H * (a41 * k1 + a42 * k2 + a43 * k3));
    const PhaseVector k5 =
        vector_field(spec, y + H * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const PhaseVector k6 =
        vector_field(spec, y + H * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    increment = H * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const PhaseVector y5 = y + (increment - carry);
    k7 = vector_field(spec, y5);
    const PhaseVector diff = H * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    StepResult r;
    r.difference = diff;
    r.state = PhaseState::from_vector(s.t + h, y5);
    r.finite = all_finite(y5) && all_finite(k7) && all_finite(diff);
    r.error = r.finite ? max_component(diff) : std::numeric_limits<double>::infinity();
    return r;
  }
};

bool escaped(const PotentialSpec& spec, Complex x, double bound) {
  if (spec.is_cosine()) return std::abs(x.imag()) > bound;
  return std::abs(x) > bound;
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(h_min > 0.0 && h_min <= h_init && h_init <= h_max)) {
    throw UsageError("integrator step bounds must satisfy 0 < h_min <= h_init <= h_max");
  }
  if (!(rel_tol > 0.0 && abs_tol > 0.0 && energy_tol > 0.0)) {
    throw UsageError("integrator tolerances must be positive");
  }
  if (!(escape_bound > 0.0)) throw UsageError("escape_bound must be positive");
  if (max_steps < 1) throw UsageError("max_steps must be >= 1");
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::TimeBudget: return "TimeBudget";
    case Termination::StepBudget: return "StepBudget";
    case Termination::Escaped: return "Escaped";
    case Termination::EnergyDriftExceeded: return "EnergyDriftExceeded";
    case Termination::ObserverStop: return "ObserverStop";
  }
  return "Unknown";
}

StepResult step_embedded(const PotentialSpec& spec, const PhaseState& state, double h) {
  if (!(h > 0.0)) throw UsageError("step size must be positive");
  const PhaseVector y = state.vector();
  const PhaseVector k1 = vector_field(spec, y);
  if (!all_finite(k1)) {
    StepResult bad;
    bad.state = state;
    bad.error = std::numeric_limits<double>::infinity();
    bad.finite = false;
    return bad;
  }
  PhaseVector k7;
  PhaseVector increment;
  return Stepper{spec}.step(state, y, PhaseVector::Zero(), k1, h, k7, increment);
}

TrajectoryRecord integrate(const PotentialSpec& spec, Complex energy, const PhaseState& start,
                           const IntegratorConfig& cfg, const IntegrateOptions& opts,
                           const StepObserver& observer) {
  cfg.validate();
  const double drift0 = std::abs(hamiltonian(spec, start) - energy);
  const double scale0 = std::max(1.0, std::abs(potential_value<Complex>(spec, start.x)));
  if (!(drift0 <= cfg.energy_tol * scale0)) {
    std::ostringstream os;
    os << "initial state is off the energy surface: |H - E| = " << drift0;
    throw UsageError(os.str());
  }

  TrajectoryRecord rec;
  rec.samples.push_back(start);
  rec.max_energy_drift = drift0;
  rec.energy_scale = scale0;

  const Stepper stepper{spec};
  PhaseState s = start;
  PhaseVector y = s.vector();
  PhaseVector k1 = vector_field(spec, y);
  PhaseVector k7;
  PhaseVector increment;
  // Kahan compensation for the accumulated state.
  PhaseVector carry = PhaseVector::Zero();
  double h = cfg.h_init;
  const double t_end = start.t + opts.t_max;

  auto finish = [&](Termination why) {
    rec.termination = why;
    if (!opts.store_samples && rec.samples.size() == 1 && s.t > start.t) rec.samples.push_back(s);
    return rec;
  };

  while (true) {
    if (s.t >= t_end) return finish(Termination::TimeBudget);
    if (rec.accepted_steps >= cfg.max_steps) return finish(Termination::StepBudget);

    const double remaining = t_end - s.t;
    const bool last = h >= remaining;
    const double h_try = last ? remaining : h;

    const StepResult r = stepper.step(s, y, carry, k1, h_try, k7, increment);
    double ratio = std::numeric_limits<double>::infinity();
    if (r.finite) {
      const PhaseVector y1 = r.state.vector();
      const double scale = cfg.abs_tol + cfg.rel_tol * std::max(max_component(y), max_component(y1));
      // First-order change of H caused by the local error.
      const double energy_error =
          std::abs(potential_gradient<Complex>(spec, y1(0))) * std::abs(r.difference(0)) +
          2.0 * spec.kinetic_factor() * std::abs(y1(1)) * std::abs(r.difference(1));
      ratio = std::max(r.error / scale,
                       energy_error / (cfg.abs_tol + cfg.rel_tol * std::max(std::abs(energy), std::abs(potential_value<Complex>(spec, y1(0))))));
    }

    if (ratio <= 1.0) {
      s = last ? PhaseState{t_end, r.state.x, r.state.p} : r.state;
      const PhaseVector y_next = s.vector();
      carry = (y_next - y) - (increment - carry);
      y = y_next;
      k1 = k7;
      ++rec.accepted_steps;
      if (opts.store_samples) rec.samples.push_back(s);

      const Complex potential = potential_value<Complex>(spec, s.x);
      const double drift = std::abs(Complex(spec.kinetic_factor()) * s.p * s.p + potential - energy);
      rec.max_energy_drift = std::max(rec.max_energy_drift, std::isfinite(drift) ? drift : kInf);
      rec.energy_scale = std::max(rec.energy_scale, std::abs(potential));
      if (escaped(spec, s.x, cfg.escape_bound)) return finish(Termination::Escaped);
      if (!(drift <= cfg.energy_tol * rec.energy_scale)) return finish(Termination::EnergyDriftExceeded);
      if (observer && !observer(s)) return finish(Termination::ObserverStop);

      const double grow = ratio > 0.0 ? 0.9 * std::pow(ratio, -0.2) : 5.0;
      // Keep h from the untruncated step when the final step was clipped to t_end.
      const double base = last ? h : h_try;
      h = std::clamp(base * std::min(grow, 5.0), cfg.h_min, cfg.h_max);
    } else {
      ++rec.rejected_steps;
      double shrink = std::isfinite(ratio) ? 0.9 * std::pow(ratio, -0.2) : 0.5;
      shrink = std::clamp(shrink, 0.1, 0.5);
      const double next = h_try * shrink;
      if (next < cfg.h_min) {
        std::ostringstream os;
        os.precision(17);
        os << "step size underflow at t = " << s.t << " (h = " << next << " < h_min = " << cfg.h_min
           << ")";
        throw IntegrationError(os.str());
      }
      h = next;
    }
  }
}

std::vector<PhaseState> decimate(const std::vector<PhaseState>& samples, std::size_t max_samples) {
  if (max_samples == 0 || samples.size() <= max_samples) return samples;
  if (max_samples == 1) return {samples.back()};
  std::vector<PhaseState> out;
  out.reserve(max_samples);
  const std::size_t n = samples.size();
  for (std::size_t i = 0; i < max_samples; ++i) {
    out.push_back(samples[i * (n - 1) / (max_samples - 1)]);
  }
  return out;
}

}  // namespace cband
