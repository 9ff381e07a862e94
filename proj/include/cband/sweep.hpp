#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cband/events.hpp"
#include "cband/types.hpp"

namespace cband {

/// Rectangular grid of complex energies. Points are re_min + i*re_step, up to re_max
/// (inclusive, with a small tolerance for floating-point step accumulation).
struct GridSpec {
  double re_min = 0.0, re_max = 0.0, re_step = 0.01;
  double im_min = 0.0, im_max = 0.0, im_step = 0.01;

  void validate() const;
  [[nodiscard]] std::size_t re_count() const;
  [[nodiscard]] std::size_t im_count() const;
  [[nodiscard]] std::size_t size() const { return re_count() * im_count(); }
  /// Row-major index, Re fastest.
  [[nodiscard]] Complex point(std::size_t index) const;
  /// Index of the grid point nearest `e`, or nullopt if `e` is off the grid.
  [[nodiscard]] std::optional<std::size_t> index_of(Complex e) const;
  /// "re_min,re_max,re_step,im_min,im_max,im_step" at round-trip precision.
  [[nodiscard]] std::string describe() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct GridCell {
  Complex energy{};
  BehaviorKind kind{};
  int hop_count = 0;
  std::optional<double> first_hop_time;
  std::optional<double> mean_hop_time;

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

[[nodiscard]] GridCell summarize(const VerdictRecord& v);

/// Column header of grid and checkpoint files.
[[nodiscard]] std::string grid_csv_header();
[[nodiscard]] std::string format_cell(const GridCell& cell);
/// Throws UsageError on a malformed row.
[[nodiscard]] GridCell parse_cell(const std::string& row);

/// Maps an energy to its verdict. Lets tests and callers substitute the classifier.
using EnergyClassifier = std::function<VerdictRecord(Complex)>;

struct SweepOptions {
  int workers = 1;
  /// Append-only record of completed cells. Without `resume` an existing file is replaced.
  std::optional<std::filesystem::path> checkpoint;
  bool resume = false;
  /// Called under the collector lock after each completed cell.
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Classifies every grid point; output is row-major whatever the worker count.
/// Throws CheckpointMismatch if a resumed checkpoint belongs to another grid.
[[nodiscard]] std::vector<GridCell> sweep(const GridSpec& grid, const EnergyClassifier& classify,
                                          const SweepOptions& opts);
[[nodiscard]] std::vector<GridCell> sweep(const PotentialSpec& spec, const GridSpec& grid,
                                          const ClassifyConfig& cfg, const SweepOptions& opts);

struct EdgeResult {
  /// Midpoint of the final bracket along the bisected axis.
  double edge = 0.0;
  int rounds = 0;
  /// Final bracket, conduction side first.
  double conduct_side = 0.0;
  double other_side = 0.0;
  /// An Undecided (or Escaped, or opposite-direction) verdict was met and treated
  /// as non-conduction.
  bool flagged = false;
};

/// Bisects the conduction/non-conduction boundary between two energies that differ
/// along exactly one axis, until the bracket is narrower than `resolution`.
/// Throws UsageError unless e_conduct classifies as Conduction and e_other as
/// Hopping or Localized.
[[nodiscard]] EdgeResult refine_edge(const EnergyClassifier& classify, Complex e_conduct,
                                     Complex e_other, double resolution);
[[nodiscard]] EdgeResult refine_edge(const PotentialSpec& spec, Complex e_conduct, Complex e_other,
                                     double resolution, const ClassifyConfig& cfg);

struct BandInterval {
  double im = 0.0;
  double re_lo = 0.0;
  double re_hi = 0.0;
  Direction direction = Direction::Right;
  double edge_resolution = 0.0;
  /// Edge not bracketed by a clean Hopping/Localized verdict, band clipped by the
  /// scan window, split on a direction change, or next to another band across only
  /// Undecided cells.
  bool flagged = false;

  [[nodiscard]] double centre() const { return 0.5 * (re_lo + re_hi); }
};

struct LineScanOptions {
  double coarse_step = 0.01;
  double fine_resolution = 0.001;
  int workers = 1;
};

/// Coarse scan of Re E along Im E = im, then bisection of every band edge.
[[nodiscard]] std::vector<BandInterval> bands_on_line(const EnergyClassifier& classify, double im,
                                                      double re_min, double re_max,
                                                      const LineScanOptions& opts);
[[nodiscard]] std::vector<BandInterval> bands_on_line(const PotentialSpec& spec, double im,
                                                      double re_min, double re_max,
                                                      const LineScanOptions& opts,
                                                      const ClassifyConfig& cfg);

}  // namespace cband
