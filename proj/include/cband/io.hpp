#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cband/analysis.hpp"
#include "cband/events.hpp"
#include "cband/integrator.hpp"
#include "cband/potential.hpp"
#include "cband/sweep.hpp"

namespace cband {

inline constexpr const char* kVersion = "0.1.0";

/// Every tunable of every command, serialised as one flat JSON object
/// ("integrator.rel_tol", "grid.re_min", ...). Complex values are "re,im" strings.
struct RunConfig {
  std::string command;
  PotentialSpec potential = PotentialSpec::cosine();
  Complex energy{0.0, 0.0};
  Complex x0{0.0, 0.0};
  /// Explicit initial momentum; when absent it follows from energy, x0 and branch.
  std::optional<Complex> p0;
  int branch = +1;

  IntegratorConfig integrator{};

  double trace_t_max = 100.0;
  std::size_t trace_max_samples = 0;

  int hop_quota = 10;
  double classify_t_max = 2000.0;
  double confirm_margin = kPi / 2.0;

  GridSpec grid{-1.0, 1.0, 0.01, -1.0, -0.05, 0.01};
  int workers = 1;
  std::string checkpoint;

  double edges_im = -0.9;
  double edges_re_min = -1.0;
  double edges_re_max = 1.0;
  double edges_coarse = 0.01;
  double edges_fine = 0.001;

  double tuntime_re = 0.1;
  std::vector<double> tuntime_im_list{-0.1, -0.15, -0.2, -0.3};
  int tuntime_hops = 12;
  int tuntime_discard = 1;
  double tuntime_t_max = 10000.0;

  double closure_tol = 1e-6;
  double orbit_t_max = 100.0;

  std::string output;

  [[nodiscard]] ClassifyConfig classify_config() const;
  [[nodiscard]] LineScanOptions line_scan_options() const;
};

[[nodiscard]] nlohmann::json to_json(const RunConfig& cfg);
/// Applies the keys of `j` on top of `base`. Throws UsageError on unknown keys or
/// ill-typed values.
[[nodiscard]] RunConfig apply_json(RunConfig base, const nlohmann::json& j);
/// Reads a config file: a JSON object, a JSON result document of this tool, or a
/// CSV output of this tool whose header carries the resolved config.
[[nodiscard]] nlohmann::json load_config_file(const std::filesystem::path& path);

/// "re,im" to Complex. Throws UsageError on malformed input.
[[nodiscard]] Complex parse_complex(const std::string& text);
[[nodiscard]] std::string format_complex(Complex z);
/// Comma-separated list of reals.
[[nodiscard]] std::vector<double> parse_list(const std::string& text);

/// Writes the two comment lines every output file starts with. The echoed config
/// leaves out the output path, worker count and checkpoint path.
void write_header(std::ostream& os, const RunConfig& cfg);

[[nodiscard]] nlohmann::json to_json(const HopEvent& ev);
[[nodiscard]] nlohmann::json to_json(const VerdictRecord& v);
[[nodiscard]] nlohmann::json to_json(const OrbitResult& orbit);
[[nodiscard]] nlohmann::json to_json(const ActionResult& action);
[[nodiscard]] nlohmann::json to_json(const TurningPoints& tp);
[[nodiscard]] nlohmann::json to_json(const HyperbolaFit& fit);

[[nodiscard]] std::string trajectory_csv_header();
/// One trajectory row: t, re_x, im_x, re_p, im_p, energy_drift.
[[nodiscard]] std::string format_trajectory_row(const PotentialSpec& spec, Complex energy,
                                                const PhaseState& s);

[[nodiscard]] std::string band_csv_header();
[[nodiscard]] std::string format_band(const BandInterval& b);

[[nodiscard]] std::string hyperbola_csv_header();
[[nodiscard]] std::string format_hyperbola_row(const HyperbolaSample& s);
/// Reads im_e and mean_time columns from a CSV (comment lines skipped, header required).
[[nodiscard]] std::vector<HyperbolaSample> read_hyperbola_csv(std::istream& is);

}  // namespace cband
