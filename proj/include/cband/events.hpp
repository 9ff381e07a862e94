#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cband/integrator.hpp"
#include "cband/potential.hpp"
#include "cband/types.hpp"

namespace cband {

/// Index of a cosine-lattice well: well n is centred at 2*pi*n.
using WellIndex = std::int64_t;

enum class Direction { Left = -1, Right = +1 };

[[nodiscard]] constexpr Direction opposite(Direction d) {
  return d == Direction::Left ? Direction::Right : Direction::Left;
}
[[nodiscard]] constexpr char to_char(Direction d) { return d == Direction::Left ? 'L' : 'R'; }

/// Nearest well to Re x. The barrier Re x = (2n+1)pi belongs to well n+1.
[[nodiscard]] WellIndex well_of(Complex x);

/// Centre of well n.
[[nodiscard]] inline double well_centre(WellIndex n) { return kTwoPi * static_cast<double>(n); }

struct HopEvent {
  double t_cross = 0.0;
  double t_confirm = 0.0;
  WellIndex from_well = 0;
  WellIndex to_well = 0;
  Direction direction = Direction::Right;

  friend bool operator==(const HopEvent&, const HopEvent&) = default;
};

/// Tracks the confirmed well along a trajectory.
///
/// A hop from the confirmed well n to an adjacent well m is reported only once the
/// particle, having crossed the barrier, comes within `margin` of the centre of m.
/// Crossings that retreat into n before that are forgotten.
class HopDetector {
 public:
  HopDetector(const PhaseState& start, double margin);

  /// Feed the next accepted state. Returns the hop confirmed by this state, if any.
  /// Throws IntegrationError if Re x moved by more than one well in a single step.
  std::optional<HopEvent> update(const PhaseState& s);

  [[nodiscard]] WellIndex confirmed_well() const { return confirmed_; }
  [[nodiscard]] std::optional<WellIndex> pending_well() const { return pending_; }

 private:
  double margin_;
  WellIndex confirmed_;
  WellIndex current_;
  std::optional<WellIndex> pending_;
  double pending_cross_t_ = 0.0;
  PhaseState previous_;
};

enum class Behavior { Conduction, Hopping, Localized, Undecided, Escaped };

struct BehaviorKind {
  Behavior behavior = Behavior::Undecided;
  /// Set exactly when behavior == Conduction.
  std::optional<Direction> direction;

  [[nodiscard]] bool is_conduction() const { return behavior == Behavior::Conduction; }
  friend bool operator==(const BehaviorKind&, const BehaviorKind&) = default;
};

[[nodiscard]] std::string_view to_string(Behavior b);
/// Single-letter code used in grid files: C, H, L, U, X.
[[nodiscard]] char to_letter(Behavior b);
/// Inverse of to_letter. Throws UsageError on an unknown letter.
[[nodiscard]] Behavior behavior_from_letter(char c);

struct ClassifyConfig {
  int hop_quota = 10;
  double t_max = 2000.0;
  double confirm_margin = kPi / 2.0;
  Complex x0{0.0, 0.0};
  int branch = +1;
  IntegratorConfig integrator{};

  void validate() const;
};

struct VerdictRecord {
  Complex energy{};
  BehaviorKind kind{};
  std::vector<HopEvent> hops;
  double t_elapsed = 0.0;
  double max_energy_drift = 0.0;
  Termination termination = Termination::TimeBudget;
};

/// Classifies one complex energy on the cosine lattice. The particle starts at
/// cfg.x0 with the momentum branch cfg.branch; the first direction reversal decides
/// Hopping, hop_quota same-direction hops decide Conduction.
/// Throws UsageError for any other potential.
[[nodiscard]] VerdictRecord classify_energy(const PotentialSpec& spec, Complex energy,
                                            const ClassifyConfig& cfg);

/// Integrates until `hop_limit` hops are confirmed (regardless of direction) or t_max
/// runs out. The kind is left Undecided unless the run escaped.
[[nodiscard]] VerdictRecord collect_hops(const PotentialSpec& spec, Complex energy,
                                         const ClassifyConfig& cfg, int hop_limit);

struct HopTimeStats {
  std::vector<double> intervals;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Successive differences of hop crossing times after dropping the first
/// `discard_first` hops. Throws InsufficientData when fewer than two hops remain.
[[nodiscard]] HopTimeStats inter_hop_times(const VerdictRecord& v, std::size_t discard_first);

}  // namespace cband
