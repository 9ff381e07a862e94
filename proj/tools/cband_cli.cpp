#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cband/analysis.hpp"
#include "cband/events.hpp"
#include "cband/format.hpp"
#include "cband/integrator.hpp"
#include "cband/io.hpp"
#include "cband/potential.hpp"
#include "cband/sweep.hpp"

namespace {

using cband::Complex;
using cband::RunConfig;
using nlohmann::json;

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kIntegration = 3,
  kCheckpoint = 4,
  kInsufficient = 5,
};

// A flag that, when present on the command line, overrides the config file.
struct Override {
  CLI::Option* option;
  std::function<void(RunConfig&)> apply;
};

class Command {
 public:
  Command(CLI::App& app, const std::string& name, const std::string& description)
      : sub_(app.add_subcommand(name, description)), name_(name) {
    sub_->add_option("--config", config_path_, "JSON config file, or an earlier output file");
    text("--output,-o", "Output file (standard output when omitted)",
         [](RunConfig& c, const std::string& v) { c.output = v; });
  }

  CLI::App* app() const { return sub_; }
  const std::string& name() const { return name_; }

  template <typename T>
  CLI::Option* option(const std::string& flags, const std::string& description,
                      std::function<void(RunConfig&, const T&)> apply) {
    auto storage = std::make_shared<T>();
    CLI::Option* opt = sub_->add_option(flags, *storage, description);
    overrides_.push_back({opt, [storage, apply](RunConfig& c) { apply(c, *storage); }});
    return opt;
  }

  CLI::Option* real(const std::string& flags, const std::string& description,
                    std::function<void(RunConfig&, const double&)> apply) {
    return option<double>(flags, description, std::move(apply));
  }
  CLI::Option* integer(const std::string& flags, const std::string& description,
                       std::function<void(RunConfig&, const long long&)> apply) {
    return option<long long>(flags, description, std::move(apply));
  }
  CLI::Option* text(const std::string& flags, const std::string& description,
                    std::function<void(RunConfig&, const std::string&)> apply) {
    return option<std::string>(flags, description, std::move(apply));
  }
  CLI::Option* complex(const std::string& flags, const std::string& description,
                       std::function<void(RunConfig&, Complex)> apply) {
    return text(flags, description + " as re,im",
                [apply](RunConfig& c, const std::string& v) { apply(c, cband::parse_complex(v)); });
  }
  CLI::Option* range(const std::string& flags, const std::string& description,
                     std::function<void(RunConfig&, double, double)> apply) {
    return text(flags, description + " as min,max", [apply, flags](RunConfig& c, const std::string& v) {
      const auto values = cband::parse_list(v);
      if (values.size() != 2) throw cband::UsageError(flags + " expects exactly two values");
      apply(c, values[0], values[1]);
    });
  }

  void potential_flags() {
    text("--kinetic", "Kinetic term: half (p^2/2) or full (p^2)", [](RunConfig& c, const std::string& v) {
      c = cband::apply_json(c, json{{"kinetic", v}});
    });
    text("--potential", "cosine, quartic, doublewell or poly:c0,c1,...",
         [](RunConfig& c, const std::string& v) { c.potential = cband::PotentialSpec::parse(v, c.potential.kinetic); });
  }

  void start_flags() {
    complex("--energy,-E", "Energy", [](RunConfig& c, Complex v) { c.energy = v; });
    x0_ = complex("--x0", "Initial position", [](RunConfig& c, Complex v) { c.x0 = v; });
    complex("--p0", "Initial momentum (overrides --energy)", [](RunConfig& c, Complex v) { c.p0 = v; });
    integer("--branch", "Momentum branch, +1 or -1", [](RunConfig& c, const long long& v) {
      c.branch = static_cast<int>(v);
    });
  }

  void integrator_flags() {
    real("--rel-tol", "Relative local error tolerance", [](RunConfig& c, const double& v) { c.integrator.rel_tol = v; });
    real("--abs-tol", "Absolute local error tolerance", [](RunConfig& c, const double& v) { c.integrator.abs_tol = v; });
    real("--h-init", "Initial step", [](RunConfig& c, const double& v) { c.integrator.h_init = v; });
    real("--h-min", "Smallest step before failing", [](RunConfig& c, const double& v) { c.integrator.h_min = v; });
    real("--h-max", "Largest step", [](RunConfig& c, const double& v) { c.integrator.h_max = v; });
    integer("--max-steps", "Step budget", [](RunConfig& c, const long long& v) { c.integrator.max_steps = v; });
    real("--energy-tol", "Energy drift budget", [](RunConfig& c, const double& v) { c.integrator.energy_tol = v; });
    real("--escape-bound", "Escape radius", [](RunConfig& c, const double& v) { c.integrator.escape_bound = v; });
  }

  void classify_flags() {
    integer("--hop-quota", "Same-direction hops that decide conduction",
            [](RunConfig& c, const long long& v) { c.hop_quota = static_cast<int>(v); });
    real("--margin", "Hop confirmation margin", [](RunConfig& c, const double& v) { c.confirm_margin = v; });
  }

  // Defaults, then the config file, then whatever was given on the command line.
  RunConfig resolve() {
    RunConfig cfg;
    cfg.command = name_;
    if (!config_path_.empty()) {
      const json file = cband::load_config_file(config_path_);
      if (file.is_object() && file.contains("x0")) x0_from_file_ = true;
      cfg = cband::apply_json(cfg, file);
    }
    for (const auto& o : overrides_) {
      if (o.option->count() > 0) o.apply(cfg);
    }
    return cfg;
  }

  bool x0_given() const { return x0_from_file_ || (x0_ != nullptr && x0_->count() > 0); }

 private:
  CLI::App* sub_;
  std::string name_;
  std::string config_path_;
  std::vector<Override> overrides_;
  CLI::Option* x0_ = nullptr;
  bool x0_from_file_ = false;
};

// Standard output or the --output file.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::out | std::ios::trunc);
      if (!file_) throw cband::UsageError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

void write_json_result(const RunConfig& cfg, const json& result) {
  json doc;
  doc["cband_version"] = cband::kVersion;
  json echoed = cband::to_json(cfg);
  for (const char* key : {"output", "sweep.workers", "sweep.checkpoint"}) echoed.erase(key);
  doc["config"] = echoed;
  doc["result"] = result;
  Sink sink(cfg.output);
  sink.stream() << doc.dump(2) << '\n';
}

cband::PhaseState start_state(RunConfig& cfg) {
  if (cfg.p0) {
    cfg.energy = cband::hamiltonian(cfg.potential, cfg.x0, *cfg.p0);
    return {0.0, cfg.x0, *cfg.p0};
  }
  return {0.0, cfg.x0, cband::initial_momentum(cfg.potential, cfg.energy, cfg.x0, cfg.branch)};
}

int run_trace(RunConfig cfg) {
  const cband::PhaseState start = start_state(cfg);
  cband::IntegrateOptions opts;
  opts.t_max = cfg.trace_t_max;
  const auto rec = cband::integrate(cfg.potential, cfg.energy, start, cfg.integrator, opts);
  const auto samples =
      cfg.trace_max_samples > 0 ? cband::decimate(rec.samples, cfg.trace_max_samples) : rec.samples;

  Sink sink(cfg.output);
  auto& os = sink.stream();
  cband::write_header(os, cfg);
  os << cband::trajectory_csv_header() << '\n';
  for (const auto& s : samples) os << cband::format_trajectory_row(cfg.potential, cfg.energy, s) << '\n';

  std::cerr << "termination: " << cband::to_string(rec.termination) << " at t = " << rec.final_state().t
            << " after " << rec.accepted_steps << " steps, max energy drift " << rec.max_energy_drift << '\n';
  return kOk;
}

int run_classify(RunConfig cfg, const std::string& json_path) {
  const auto verdict = cband::classify_energy(cfg.potential, cfg.energy, cfg.classify_config());
  std::cout << cband::to_string(verdict.kind.behavior) << '\n';
  std::cerr << "hops: " << verdict.hops.size();
  if (verdict.kind.direction) std::cerr << ", direction " << cband::to_char(*verdict.kind.direction);
  std::cerr << ", t = " << verdict.t_elapsed << ", termination " << cband::to_string(verdict.termination) << '\n';
  if (!json_path.empty()) {
    cfg.output = json_path;
    write_json_result(cfg, cband::to_json(verdict));
  }
  return kOk;
}

int run_sweep(RunConfig cfg, bool resume, bool progress) {
  cfg.grid.validate();
  cband::SweepOptions opts;
  opts.workers = cfg.workers;
  opts.resume = resume;
  if (!cfg.checkpoint.empty()) {
    opts.checkpoint = cfg.checkpoint;
  } else if (!cfg.output.empty()) {
    opts.checkpoint = cfg.output + ".checkpoint";
  }
  if (progress) {
    opts.progress = [](std::size_t done, std::size_t total) {
      std::cerr << "\r" << done << "/" << total << " cells" << std::flush;
      if (done == total) std::cerr << '\n';
    };
  }
  const auto cells = cband::sweep(cfg.potential, cfg.grid, cfg.classify_config(), opts);

  Sink sink(cfg.output);
  auto& os = sink.stream();
  cband::write_header(os, cfg);
  os << cband::grid_csv_header() << '\n';
  for (const auto& cell : cells) os << cband::format_cell(cell) << '\n';
  return kOk;
}

int run_edges(RunConfig cfg) {
  const auto bands = cband::bands_on_line(cfg.potential, cfg.edges_im, cfg.edges_re_min, cfg.edges_re_max,
                                          cfg.line_scan_options(), cfg.classify_config());
  Sink sink(cfg.output);
  auto& os = sink.stream();
  cband::write_header(os, cfg);
  os << cband::band_csv_header() << '\n';
  for (const auto& b : bands) os << cband::format_band(b) << '\n';
  std::cerr << bands.size() << " band(s) at Im E = " << cfg.edges_im << '\n';
  return kOk;
}

int run_tuntime(RunConfig cfg, const std::string& from_csv) {
  std::vector<cband::HyperbolaSample> samples;
  if (!from_csv.empty()) {
    std::ifstream in(from_csv);
    if (!in) throw cband::UsageError("cannot read " + from_csv);
    samples = cband::read_hyperbola_csv(in);
  } else {
    if (cfg.tuntime_hops < cfg.tuntime_discard + 2) {
      throw cband::UsageError("--hops must be at least --discard + 2");
    }
    cband::ClassifyConfig cc = cfg.classify_config();
    cc.t_max = cfg.tuntime_t_max;
    for (double im : cfg.tuntime_im_list) {
      const Complex e{cfg.tuntime_re, im};
      const auto v = cband::collect_hops(cfg.potential, e, cc, cfg.tuntime_hops);
      if (static_cast<int>(v.hops.size()) < cfg.tuntime_hops) {
        throw cband::InsufficientData("energy " + cband::format_complex(e) + " gave " +
                                      std::to_string(v.hops.size()) + " hops within t_max, " +
                                      std::to_string(cfg.tuntime_hops) + " required");
      }
      const auto stats = cband::inter_hop_times(v, static_cast<std::size_t>(cfg.tuntime_discard));
      samples.push_back({im, stats.mean});
    }
  }
  const auto fit = cband::hyperbola_fit(samples);

  Sink sink(cfg.output);
  auto& os = sink.stream();
  cband::write_header(os, cfg);
  os << cband::hyperbola_csv_header() << '\n';
  for (const auto& s : samples) os << cband::format_hyperbola_row(s) << '\n';
  os << "# fit: c=" << cband::format_number(fit.c)
     << ", relative_residual=" << cband::format_number(fit.relative_residual) << '\n';
  std::cerr << "c = " << fit.c << ", relative_residual = " << fit.relative_residual << '\n';
  return kOk;
}

// Without an explicit start, orbits begin at the turning point furthest to the right.
cband::OrbitResult closed_orbit(RunConfig& cfg, bool x0_given) {
  if (!x0_given && !cfg.p0) {
    const auto tp = cband::turning_points(cfg.potential, cfg.energy);
    cfg.x0 = *std::max_element(tp.points.begin(), tp.points.end(), [](Complex a, Complex b) {
      return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
  }
  const cband::PhaseState start = start_state(cfg);
  cband::OrbitOptions opts;
  opts.closure_tol = cfg.closure_tol;
  opts.t_max = cfg.orbit_t_max;
  opts.integrator = cfg.integrator;
  return cband::orbit_period(cfg.potential, cfg.energy, start, opts);
}

int run_period(RunConfig cfg, bool x0_given) {
  const auto orbit = closed_orbit(cfg, x0_given);
  write_json_result(cfg, cband::to_json(orbit));
  return kOk;
}

int run_action(RunConfig cfg, bool x0_given) {
  const auto orbit = closed_orbit(cfg, x0_given);
  json result = cband::to_json(cband::action_integral(orbit));
  result["period"] = orbit.period;
  result["closure_error"] = orbit.closure_error;
  write_json_result(cfg, result);
  return kOk;
}

int run_turning(const RunConfig& cfg) {
  write_json_result(cfg, cband::to_json(cband::turning_points(cfg.potential, cfg.energy)));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complex-energy classical trajectories and conduction bands"};
  app.set_version_flag("--version", std::string("cband ") + cband::kVersion);
  app.require_subcommand(1);

  Command trace(app, "trace", "Integrate one trajectory and write it as CSV");
  trace.potential_flags();
  trace.start_flags();
  trace.integrator_flags();
  trace.real("--tmax", "Time budget", [](RunConfig& c, const double& v) { c.trace_t_max = v; });
  trace.integer("--max-samples", "Thin the output to at most this many rows (0 keeps all)",
                [](RunConfig& c, const long long& v) { c.trace_max_samples = static_cast<std::size_t>(v); });

  Command classify(app, "classify", "Classify one energy on the cosine lattice");
  classify.potential_flags();
  classify.start_flags();
  classify.integrator_flags();
  classify.classify_flags();
  classify.real("--tmax", "Time budget", [](RunConfig& c, const double& v) { c.classify_t_max = v; });
  std::string classify_json;
  classify.app()->add_option("--json", classify_json, "Also write the verdict and hop list as JSON");

  Command sweep(app, "sweep", "Classify a rectangular grid of energies");
  sweep.potential_flags();
  sweep.integrator_flags();
  sweep.classify_flags();
  sweep.real("--tmax", "Time budget per energy", [](RunConfig& c, const double& v) { c.classify_t_max = v; });
  sweep.range("--re-range", "Re E range", [](RunConfig& c, double a, double b) {
    c.grid.re_min = a;
    c.grid.re_max = b;
  });
  sweep.range("--im-range", "Im E range", [](RunConfig& c, double a, double b) {
    c.grid.im_min = a;
    c.grid.im_max = b;
  });
  sweep.real("--re-step", "Re E spacing", [](RunConfig& c, const double& v) { c.grid.re_step = v; });
  sweep.real("--im-step", "Im E spacing", [](RunConfig& c, const double& v) { c.grid.im_step = v; });
  sweep.integer("--workers,-j", "Worker threads", [](RunConfig& c, const long long& v) { c.workers = static_cast<int>(v); });
  sweep.text("--checkpoint", "Checkpoint file (default <output>.checkpoint)",
             [](RunConfig& c, const std::string& v) { c.checkpoint = v; });
  bool resume = false;
  bool progress = false;
  sweep.app()->add_flag("--resume", resume, "Skip cells already in the checkpoint");
  sweep.app()->add_flag("--progress", progress, "Print a cells-completed counter to standard error");

  Command edges(app, "edges", "Find conduction bands along a line of constant Im E");
  edges.potential_flags();
  edges.integrator_flags();
  edges.classify_flags();
  edges.real("--tmax", "Time budget per energy", [](RunConfig& c, const double& v) { c.classify_t_max = v; });
  edges.real("--im", "Im E of the line", [](RunConfig& c, const double& v) { c.edges_im = v; });
  edges.range("--re-range", "Re E range", [](RunConfig& c, double a, double b) {
    c.edges_re_min = a;
    c.edges_re_max = b;
  });
  edges.real("--coarse", "Coarse scan spacing", [](RunConfig& c, const double& v) { c.edges_coarse = v; });
  edges.real("--fine", "Edge resolution", [](RunConfig& c, const double& v) { c.edges_fine = v; });
  edges.integer("--workers,-j", "Worker threads", [](RunConfig& c, const long long& v) { c.workers = static_cast<int>(v); });

  Command tuntime(app, "tuntime", "Mean time between hops against Im E, with a hyperbola fit");
  tuntime.potential_flags();
  tuntime.integrator_flags();
  tuntime.classify_flags();
  tuntime.real("--re", "Re E", [](RunConfig& c, const double& v) { c.tuntime_re = v; });
  tuntime.text("--im-list", "Comma-separated Im E values",
               [](RunConfig& c, const std::string& v) { c.tuntime_im_list = cband::parse_list(v); });
  tuntime.integer("--hops", "Hops required per energy", [](RunConfig& c, const long long& v) {
    c.tuntime_hops = static_cast<int>(v);
  });
  tuntime.integer("--discard", "Leading hops dropped as transient", [](RunConfig& c, const long long& v) {
    c.tuntime_discard = static_cast<int>(v);
  });
  tuntime.real("--tmax", "Time budget per energy", [](RunConfig& c, const double& v) { c.tuntime_t_max = v; });
  std::string from_csv;
  tuntime.app()->add_option("--from-csv", from_csv, "Fit im_e,mean_time samples from a CSV instead of simulating");

  auto orbit_command = [](CLI::App& a, const std::string& name, const std::string& description) {
    auto cmd = std::make_unique<Command>(a, name, description);
    cmd->potential_flags();
    cmd->start_flags();
    cmd->integrator_flags();
    cmd->real("--closure-tol", "Phase-space closure tolerance", [](RunConfig& c, const double& v) { c.closure_tol = v; });
    cmd->real("--tmax", "Time budget", [](RunConfig& c, const double& v) { c.orbit_t_max = v; });
    return cmd;
  };
  auto period = orbit_command(app, "period", "Period of a closed orbit");
  auto action = orbit_command(app, "action", "Action integral over a closed orbit");

  Command turning(app, "turning", "Turning points V(x) = E");
  turning.potential_flags();
  turning.complex("--energy,-E", "Energy", [](RunConfig& c, Complex v) { c.energy = v; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (trace.app()->parsed()) return run_trace(trace.resolve());
    if (classify.app()->parsed()) return run_classify(classify.resolve(), classify_json);
    if (sweep.app()->parsed()) return run_sweep(sweep.resolve(), resume, progress);
    if (edges.app()->parsed()) return run_edges(edges.resolve());
    if (tuntime.app()->parsed()) return run_tuntime(tuntime.resolve(), from_csv);
    if (period->app()->parsed()) return run_period(period->resolve(), period->x0_given());
    if (action->app()->parsed()) return run_action(action->resolve(), action->x0_given());
    if (turning.app()->parsed()) return run_turning(turning.resolve());
  } catch (const cband::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const cband::CheckpointMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCheckpoint;
  } catch (const cband::InsufficientData& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInsufficient;
  } catch (const cband::NoClosure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIntegration;
  } catch (const cband::IntegrationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIntegration;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: bad JSON: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
