#include "cband/events.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cband {

WellIndex well_of(Complex x) {
  return static_cast<WellIndex>(std::floor(x.real() / kTwoPi + 0.5));
}

HopDetector::HopDetector(const PhaseState& start, double margin)
    : margin_(margin), confirmed_(well_of(start.x)), current_(confirmed_), previous_(start) {}

std::optional<HopEvent> HopDetector::update(const PhaseState& s) {
  const WellIndex w = well_of(s.x);
  if (w != current_) {
    if (std::abs(w - current_) != 1) {
      std::ostringstream os;
      os << "position jumped from well " << current_ << " to well " << w << " in one step at t = "
         << s.t;
      throw IntegrationError(os.str());
    }
    if (w == confirmed_) {
      pending_.reset();
    } else if (std::abs(w - confirmed_) == 1) {
      // Linear interpolation of the barrier crossing between the two samples.
      const double barrier = kPi * static_cast<double>(2 * std::max(w, current_) - 1);
      const double x0 = previous_.x.real();
      const double x1 = s.x.real();
      const double frac = x1 != x0 ? std::clamp((barrier - x0) / (x1 - x0), 0.0, 1.0) : 1.0;
      pending_ = w;
      pending_cross_t_ = previous_.t + frac * (s.t - previous_.t);
    } else {
      std::ostringstream os;
      os << "well " << current_ << " was crossed without reaching its interior (confirmed well "
         << confirmed_ << ", now " << w << ") at t = " << s.t;
      throw IntegrationError(os.str());
    }
    current_ = w;
  }
  previous_ = s;

  if (pending_ && std::abs(s.x.real() - well_centre(*pending_)) < margin_) {
    HopEvent ev;
    ev.t_cross = pending_cross_t_;
    ev.t_confirm = s.t;
    ev.from_well = confirmed_;
    ev.to_well = *pending_;
    ev.direction = ev.to_well > ev.from_well ? Direction::Right : Direction::Left;
    confirmed_ = *pending_;
    pending_.reset();
    return ev;
  }
  return std::nullopt;
}

std::string_view to_string(Behavior b) {
  switch (b) {
    case Behavior::Conduction: return "Conduction";
    case Behavior::Hopping: return "Hopping";
    case Behavior::Localized: return "Localized";
    case Behavior::Undecided: return "Undecided";
    case Behavior::Escaped: return "Escaped";
  }
  return "Unknown";
}

char to_letter(Behavior b) {
  switch (b) {
    case Behavior::Conduction: return 'C';
    case Behavior::Hopping: return 'H';
    case Behavior::Localized: return 'L';
    case Behavior::Undecided: return 'U';
    case Behavior::Escaped: return 'X';
  }
  return '?';
}

Behavior behavior_from_letter(char c) {
  switch (c) {
    case 'C': return Behavior::Conduction;
    case 'H': return Behavior::Hopping;
    case 'L': return Behavior::Localized;
    case 'U': return Behavior::Undecided;
    case 'X': return Behavior::Escaped;
    default: throw UsageError(std::string("unknown behavior letter '") + c + "'");
  }
}

void ClassifyConfig::validate() const {
  if (hop_quota < 2) throw UsageError("hop_quota must be >= 2");
  if (!(t_max > 0.0)) throw UsageError("t_max must be positive");
  if (!(confirm_margin > 0.0 && confirm_margin < kPi)) {
    throw UsageError("confirm_margin must lie in (0, pi)");
  }
  if (branch != 1 && branch != -1) throw UsageError("branch must be +1 or -1");
  integrator.validate();
}

namespace {

// Shared driver: integrates and feeds the detector; `stop` sees the hop list after
// every confirmed hop and returns true to end the run.
template <typename StopRule>
VerdictRecord run_detector(const PotentialSpec& spec, Complex energy, const ClassifyConfig& cfg,
                           StopRule stop) {
  if (!spec.is_cosine()) throw UsageError("hop classification requires the cosine lattice potential");
  cfg.validate();

  const PhaseState start{0.0, cfg.x0, initial_momentum(spec, energy, cfg.x0, cfg.branch)};
  HopDetector detector(start, cfg.confirm_margin);

  VerdictRecord v;
  v.energy = energy;
  auto observer = [&](const PhaseState& s) {
    if (auto ev = detector.update(s)) {
      v.hops.push_back(*ev);
      if (stop(v.hops)) return false;
    }
    return true;
  };

  IntegrateOptions opts;
  opts.t_max = cfg.t_max;
  opts.store_samples = false;
  const TrajectoryRecord rec = integrate(spec, energy, start, cfg.integrator, opts, observer);
  v.t_elapsed = rec.final_state().t - start.t;
  v.max_energy_drift = rec.max_energy_drift;
  v.termination = rec.termination;
  return v;
}

}  // namespace

VerdictRecord classify_energy(const PotentialSpec& spec, Complex energy, const ClassifyConfig& cfg) {
  const auto quota = static_cast<std::size_t>(cfg.hop_quota);
  auto stop = [quota](const std::vector<HopEvent>& hops) {
    return hops.back().direction != hops.front().direction || hops.size() >= quota;
  };
  VerdictRecord v = run_detector(spec, energy, cfg, stop);

  if (v.termination == Termination::Escaped || v.termination == Termination::EnergyDriftExceeded) {
    v.kind = {Behavior::Escaped, std::nullopt};
  } else if (!v.hops.empty() && v.hops.back().direction != v.hops.front().direction) {
    v.kind = {Behavior::Hopping, std::nullopt};
  } else if (v.hops.size() >= quota) {
    v.kind = {Behavior::Conduction, v.hops.front().direction};
  } else if (v.hops.empty()) {
    v.kind = {Behavior::Localized, std::nullopt};
  } else {
    v.kind = {Behavior::Undecided, std::nullopt};
  }
  return v;
}

VerdictRecord collect_hops(const PotentialSpec& spec, Complex energy, const ClassifyConfig& cfg,
                           int hop_limit) {
  if (hop_limit < 1) throw UsageError("hop_limit must be >= 1");
  const auto limit = static_cast<std::size_t>(hop_limit);
  VerdictRecord v = run_detector(
      spec, energy, cfg, [limit](const std::vector<HopEvent>& hops) { return hops.size() >= limit; });
  if (v.termination == Termination::Escaped || v.termination == Termination::EnergyDriftExceeded) {
    v.kind = {Behavior::Escaped, std::nullopt};
  }
  return v;
}

HopTimeStats inter_hop_times(const VerdictRecord& v, std::size_t discard_first) {
  if (v.hops.size() < discard_first + 2) {
    std::ostringstream os;
    os << "need at least " << discard_first + 2 << " hops to measure inter-hop times (have "
       << v.hops.size() << ")";
    throw InsufficientData(os.str());
  }
  HopTimeStats st;
  for (std::size_t i = discard_first + 1; i < v.hops.size(); ++i) {
    st.intervals.push_back(v.hops[i].t_cross - v.hops[i - 1].t_cross);
  }
  const double n = static_cast<double>(st.intervals.size());
  st.mean = std::accumulate(st.intervals.begin(), st.intervals.end(), 0.0) / n;
  double ss = 0.0;
  for (double d : st.intervals) ss += (d - st.mean) * (d - st.mean);
  st.stddev = st.intervals.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return st;
}

}  // namespace cband
