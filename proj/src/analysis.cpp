#include "cband/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace cband {

namespace {

// State reached from `anchor` after integrating to absolute time t.
PhaseState advance_to(const PotentialSpec& spec, Complex energy, const PhaseState& anchor, double t,
                      const IntegratorConfig& cfg) {
  if (t <= anchor.t) return anchor;
  IntegrateOptions opts;
  opts.t_max = t - anchor.t;
  opts.store_samples = false;
  IntegratorConfig local = cfg;
  local.h_init = std::clamp(opts.t_max, cfg.h_min, cfg.h_init);
  return integrate(spec, energy, anchor, local, opts).final_state();
}

struct Closure {
  PhaseState state;
  double distance;
};

// Golden-section search for the minimum of the distance to `start` on [a.t, b_t].
Closure refine_return(const PotentialSpec& spec, Complex energy, const PhaseState& start,
                      const PhaseState& anchor, double b_t, const IntegratorConfig& cfg) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = anchor.t;
  double hi = b_t;
  auto eval = [&](double t) {
    PhaseState s = advance_to(spec, energy, anchor, t, cfg);
    return Closure{s, phase_distance(s, start)};
  };
  double m1 = hi - inv_phi * (hi - lo);
  double m2 = lo + inv_phi * (hi - lo);
  Closure f1 = eval(m1);
  Closure f2 = eval(m2);
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
    if (f1.distance <= f2.distance) {
      hi = m2;
      m2 = m1;
      f2 = f1;
      m1 = hi - inv_phi * (hi - lo);
      f1 = eval(m1);
    } else {
      lo = m1;
      m1 = m2;
      f1 = f2;
      m2 = lo + inv_phi * (hi - lo);
      f2 = eval(m2);
    }
  }
  return f1.distance <= f2.distance ? f1 : f2;
}

}  // namespace

OrbitResult orbit_period(const PotentialSpec& spec, Complex energy, const PhaseState& start,
                         const OrbitOptions& opts) {
  if (!(opts.closure_tol > 0.0)) throw UsageError("closure_tol must be positive");

  // Sampled distances d(k-2), d(k-1) and the states behind them. A sampled local
  // minimum well below the largest excursion triggers a refined closure check.
  PhaseState before = start;
  PhaseState middle = start;
  double d_before = 0.0;
  double d_middle = 0.0;
  double farthest = 0.0;
  std::optional<Closure> closure;

  auto observer = [&](const PhaseState& s) {
    const double d = phase_distance(s, start);
    farthest = std::max(farthest, d);
    const bool departed = farthest > 100.0 * opts.closure_tol;
    if (departed && d_middle < d_before && d >= d_middle && d_middle < 0.25 * farthest) {
      Closure c = refine_return(spec, energy, start, before, s.t, opts.integrator);
      if (c.distance < opts.closure_tol) {
        closure = c;
        return false;
      }
    }
    before = middle;
    d_before = d_middle;
    middle = s;
    d_middle = d;
    return true;
  };

  IntegrateOptions iopts;
  iopts.t_max = opts.t_max;
  TrajectoryRecord rec = integrate(spec, energy, start, opts.integrator, iopts, observer);
  if (!closure) throw NoClosure(opts.t_max);

  auto& samples = rec.samples;
  samples.erase(std::remove_if(samples.begin(), samples.end(),
                               [&](const PhaseState& s) { return s.t >= closure->state.t; }),
                samples.end());
  samples.push_back(closure->state);

  OrbitResult out;
  out.period = closure->state.t - start.t;
  out.closure_error = closure->distance;
  out.closure_tol = opts.closure_tol;
  out.samples = std::move(rec);
  return out;
}

ActionResult action_integral(const OrbitResult& orbit) {
  const auto& s = orbit.samples.samples;
  if (s.size() < 3 || !(orbit.closure_error < orbit.closure_tol)) {
    throw UsageError("action integral requires a closed orbit");
  }
  auto term = [&](std::size_t k) { return 0.5 * (s[k].p + s[k + 1].p) * (s[k + 1].x - s[k].x); };
  // Terms are paired from both ends.
  const std::size_t n = s.size() - 1;
  Complex sum{};
  for (std::size_t k = 0; k < n / 2; ++k) sum += term(k) + term(n - 1 - k);
  if (n % 2 == 1) sum += term(n / 2);
  return {sum, sum / kPi - 0.5};
}

std::vector<Complex> polynomial_roots(std::vector<Complex> c) {
  while (!c.empty() && c.back() == Complex{}) c.pop_back();
  if (c.size() < 2) throw UsageError("polynomial must have degree >= 1");
  const auto degree = static_cast<Eigen::Index>(c.size() - 1);

  Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(degree, degree);
  for (Eigen::Index i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  for (Eigen::Index i = 0; i < degree; ++i) {
    companion(i, degree - 1) = -c[static_cast<std::size_t>(i)] / c.back();
  }
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(companion, false);
  if (solver.info() != Eigen::Success) throw std::runtime_error("companion eigenvalue solve failed");

  std::vector<Complex> roots(solver.eigenvalues().begin(), solver.eigenvalues().end());
  for (Complex& z : roots) {
    for (int it = 0; it < 50; ++it) {
      Complex f{};
      Complex df{};
      for (std::size_t k = c.size(); k-- > 0;) {
        df = df * z + f;
        f = f * z + c[k];
      }
      if (df == Complex{}) break;
      const Complex dz = f / df;
      z -= dz;
      if (std::abs(dz) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
  }
  std::sort(roots.begin(), roots.end(), [](Complex a, Complex b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return roots;
}

TurningPoints turning_points(const PotentialSpec& spec, Complex energy) {
  spec.validate();
  TurningPoints out;
  if (spec.is_cosine()) {
    // -cos x = E  =>  x = +-acos(-E) + 2 pi n.
    const Complex x = std::acos(-energy);
    out.points = {-x, x};
    out.lattice_period = kTwoPi;
    return out;
  }
  const std::vector<double> real_c = spec.polynomial_coefficients();
  std::vector<Complex> c(real_c.begin(), real_c.end());
  c[0] -= energy;
  out.points = polynomial_roots(std::move(c));
  return out;
}

HyperbolaFit hyperbola_fit(const std::vector<HyperbolaSample>& samples) {
  if (samples.size() < 3) throw UsageError("hyperbola fit needs at least 3 samples");
  double log_sum = 0.0;
  for (const auto& s : samples) {
    if (!(s.im_e != 0.0) || !std::isfinite(s.im_e)) throw UsageError("hyperbola fit: im_e must be nonzero");
    if (!(s.mean_time > 0.0) || !std::isfinite(s.mean_time)) {
      throw UsageError("hyperbola fit: mean_time must be positive");
    }
    log_sum += std::log(s.mean_time * std::abs(s.im_e));
  }
  HyperbolaFit fit;
  fit.samples = samples;
  fit.c = std::exp(log_sum / static_cast<double>(samples.size()));
  for (const auto& s : samples) {
    fit.relative_residual =
        std::max(fit.relative_residual, std::abs(s.mean_time * std::abs(s.im_e) - fit.c) / fit.c);
  }
  return fit;
}

}  // namespace cband
