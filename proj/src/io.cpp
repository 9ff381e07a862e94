#include "cband/io.hpp"

#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "cband/format.hpp"

namespace cband {

using nlohmann::json;

Complex parse_complex(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos || text.find(',', comma + 1) != std::string::npos) {
    throw UsageError("expected a complex number as 're,im', got '" + text + "'");
  }
  try {
    std::size_t u1 = 0, u2 = 0;
    const std::string a = text.substr(0, comma);
    const std::string b = text.substr(comma + 1);
    const double re = std::stod(a, &u1);
    const double im = std::stod(b, &u2);
    if (u1 != a.size() || u2 != b.size()) throw std::invalid_argument("trailing characters");
    return {re, im};
  } catch (const std::exception&) {
    throw UsageError("expected a complex number as 're,im', got '" + text + "'");
  }
}

std::string format_complex(Complex z) { return format_number(z.real()) + "," + format_number(z.imag()); }

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "' in list '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

ClassifyConfig RunConfig::classify_config() const {
  ClassifyConfig c;
  c.hop_quota = hop_quota;
  c.t_max = classify_t_max;
  c.confirm_margin = confirm_margin;
  c.x0 = x0;
  c.branch = branch;
  c.integrator = integrator;
  return c;
}

LineScanOptions RunConfig::line_scan_options() const {
  LineScanOptions o;
  o.coarse_step = edges_coarse;
  o.fine_resolution = edges_fine;
  o.workers = workers;
  return o;
}

namespace {

struct Field {
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

template <typename T>
T as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw UsageError("config key '" + key + "' has the wrong type");
  }
}

// Registry of config keys. Adding a field means adding one entry here.
const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    auto real = [&t](const std::string& key, auto member) {
      t[key] = {[member](const RunConfig& c) { return json(member(const_cast<RunConfig&>(c))); },
                [member, key](RunConfig& c, const json& j) { member(c) = as<double>(j, key); }};
    };
    auto integer = [&t](const std::string& key, auto member) {
      t[key] = {[member](const RunConfig& c) { return json(member(const_cast<RunConfig&>(c))); },
                [member, key](RunConfig& c, const json& j) {
                  member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(as<std::int64_t>(j, key));
                }};
    };
    auto complex = [&t](const std::string& key, auto member) {
      t[key] = {[member](const RunConfig& c) { return json(format_complex(member(const_cast<RunConfig&>(c)))); },
                [member, key](RunConfig& c, const json& j) {
                  member(c) = parse_complex(as<std::string>(j, key));
                }};
    };
    auto text = [&t](const std::string& key, auto member) {
      t[key] = {[member](const RunConfig& c) { return json(member(const_cast<RunConfig&>(c))); },
                [member, key](RunConfig& c, const json& j) { member(c) = as<std::string>(j, key); }};
    };

    text("command", [](RunConfig& c) -> std::string& { return c.command; });
    t["potential"] = {[](const RunConfig& c) { return json(c.potential.name()); },
                      [](RunConfig& c, const json& j) {
                        c.potential = PotentialSpec::parse(as<std::string>(j, "potential"), c.potential.kinetic);
                      }};
    t["kinetic"] = {[](const RunConfig& c) { return json(c.potential.kinetic == KineticTerm::Half ? "half" : "full"); },
                    [](RunConfig& c, const json& j) {
                      const auto v = as<std::string>(j, "kinetic");
                      if (v == "half") {
                        c.potential.kinetic = KineticTerm::Half;
                      } else if (v == "full") {
                        c.potential.kinetic = KineticTerm::Full;
                      } else {
                        throw UsageError("kinetic must be 'half' or 'full'");
                      }
                    }};
    complex("energy", [](RunConfig& c) -> Complex& { return c.energy; });
    complex("x0", [](RunConfig& c) -> Complex& { return c.x0; });
    t["p0"] = {[](const RunConfig& c) { return c.p0 ? json(format_complex(*c.p0)) : json(nullptr); },
               [](RunConfig& c, const json& j) {
                 if (j.is_null()) {
                   c.p0.reset();
                 } else {
                   c.p0 = parse_complex(as<std::string>(j, "p0"));
                 }
               }};
    integer("branch", [](RunConfig& c) -> int& { return c.branch; });

    real("integrator.rel_tol", [](RunConfig& c) -> double& { return c.integrator.rel_tol; });
    real("integrator.abs_tol", [](RunConfig& c) -> double& { return c.integrator.abs_tol; });
    real("integrator.h_init", [](RunConfig& c) -> double& { return c.integrator.h_init; });
    real("integrator.h_min", [](RunConfig& c) -> double& { return c.integrator.h_min; });
    real("integrator.h_max", [](RunConfig& c) -> double& { return c.integrator.h_max; });
    integer("integrator.max_steps", [](RunConfig& c) -> std::int64_t& { return c.integrator.max_steps; });
    real("integrator.energy_tol", [](RunConfig& c) -> double& { return c.integrator.energy_tol; });
    real("integrator.escape_bound", [](RunConfig& c) -> double& { return c.integrator.escape_bound; });

    real("trace.t_max", [](RunConfig& c) -> double& { return c.trace_t_max; });
    integer("trace.max_samples", [](RunConfig& c) -> std::size_t& { return c.trace_max_samples; });

    integer("classify.hop_quota", [](RunConfig& c) -> int& { return c.hop_quota; });
    real("classify.t_max", [](RunConfig& c) -> double& { return c.classify_t_max; });
    real("classify.confirm_margin", [](RunConfig& c) -> double& { return c.confirm_margin; });

    real("grid.re_min", [](RunConfig& c) -> double& { return c.grid.re_min; });
    real("grid.re_max", [](RunConfig& c) -> double& { return c.grid.re_max; });
    real("grid.re_step", [](RunConfig& c) -> double& { return c.grid.re_step; });
    real("grid.im_min", [](RunConfig& c) -> double& { return c.grid.im_min; });
    real("grid.im_max", [](RunConfig& c) -> double& { return c.grid.im_max; });
    real("grid.im_step", [](RunConfig& c) -> double& { return c.grid.im_step; });
    integer("sweep.workers", [](RunConfig& c) -> int& { return c.workers; });
    text("sweep.checkpoint", [](RunConfig& c) -> std::string& { return c.checkpoint; });

    real("edges.im", [](RunConfig& c) -> double& { return c.edges_im; });
    real("edges.re_min", [](RunConfig& c) -> double& { return c.edges_re_min; });
    real("edges.re_max", [](RunConfig& c) -> double& { return c.edges_re_max; });
    real("edges.coarse", [](RunConfig& c) -> double& { return c.edges_coarse; });
    real("edges.fine", [](RunConfig& c) -> double& { return c.edges_fine; });

    real("tuntime.re", [](RunConfig& c) -> double& { return c.tuntime_re; });
    t["tuntime.im_list"] = {[](const RunConfig& c) { return json(c.tuntime_im_list); },
                            [](RunConfig& c, const json& j) {
                              c.tuntime_im_list = as<std::vector<double>>(j, "tuntime.im_list");
                            }};
    integer("tuntime.hops", [](RunConfig& c) -> int& { return c.tuntime_hops; });
    integer("tuntime.discard", [](RunConfig& c) -> int& { return c.tuntime_discard; });
    real("tuntime.t_max", [](RunConfig& c) -> double& { return c.tuntime_t_max; });

    real("orbit.closure_tol", [](RunConfig& c) -> double& { return c.closure_tol; });
    real("orbit.t_max", [](RunConfig& c) -> double& { return c.orbit_t_max; });

    text("output", [](RunConfig& c) -> std::string& { return c.output; });
    return t;
  }();
  return table;
}

}  // namespace

json to_json(const RunConfig& cfg) {
  json j = json::object();
  for (const auto& [key, field] : fields()) j[key] = field.get(cfg);
  return j;
}

RunConfig apply_json(RunConfig base, const json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  const auto& table = fields();
  if (j.contains("kinetic")) table.at("kinetic").set(base, j.at("kinetic"));
  for (const auto& [key, value] : j.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw UsageError("unknown config key '" + key + "'");
    if (key == "command") {
      const auto cmd = as<std::string>(value, key);
      if (!base.command.empty() && !cmd.empty() && cmd != base.command) {
        throw UsageError("config was written for '" + cmd + "', not '" + base.command + "'");
      }
      continue;
    }
    it->second.set(base, value);
  }
  return base;
}

json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '#') {
    std::istringstream lines(text);
    std::string line;
    const std::string tag = "# config: ";
    while (std::getline(lines, line)) {
      if (line.rfind(tag, 0) == 0) return json::parse(line.substr(tag.size()));
      if (line.empty() || line[0] != '#') break;
    }
    throw UsageError("file " + path.string() + " has no config header");
  }
  try {
    json j = json::parse(text);
    if (j.is_object() && j.contains("cband_version") && j.contains("config")) return j.at("config");
    return j;
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

void write_header(std::ostream& os, const RunConfig& cfg) {
  os << "# cband " << kVersion << '\n';
  json j = to_json(cfg);
  for (const char* key : {"output", "sweep.workers", "sweep.checkpoint"}) j.erase(key);
  os << "# config: " << j.dump() << '\n';
}

json to_json(const HopEvent& ev) {
  return {{"t_cross", ev.t_cross},
          {"t_confirm", ev.t_confirm},
          {"from_well", ev.from_well},
          {"to_well", ev.to_well},
          {"direction", std::string(1, to_char(ev.direction))}};
}

json to_json(const VerdictRecord& v) {
  json hops = json::array();
  for (const auto& h : v.hops) hops.push_back(to_json(h));
  json j = {{"energy", format_complex(v.energy)},
            {"kind", std::string(to_string(v.kind.behavior))},
            {"direction", v.kind.direction ? json(std::string(1, to_char(*v.kind.direction))) : json(nullptr)},
            {"hop_count", v.hops.size()},
            {"hops", hops},
            {"t_elapsed", v.t_elapsed},
            {"max_energy_drift", v.max_energy_drift},
            {"termination", std::string(to_string(v.termination))}};
  return j;
}

json to_json(const OrbitResult& orbit) {
  return {{"period", orbit.period},
          {"closure_error", orbit.closure_error},
          {"closure_tol", orbit.closure_tol},
          {"samples", orbit.samples.samples.size()},
          {"max_energy_drift", orbit.samples.max_energy_drift}};
}

json to_json(const ActionResult& action) {
  return {{"action", {{"re", action.action.real()}, {"im", action.action.imag()}}},
          {"n_eff", {{"re", action.n_eff.real()}, {"im", action.n_eff.imag()}}}};
}

json to_json(const TurningPoints& tp) {
  json pts = json::array();
  for (Complex z : tp.points) pts.push_back({{"re", z.real()}, {"im", z.imag()}});
  json j = {{"points", pts}};
  j["lattice_period"] = tp.lattice_period ? json(*tp.lattice_period) : json(nullptr);
  return j;
}

json to_json(const HyperbolaFit& fit) {
  return {{"c", fit.c}, {"relative_residual", fit.relative_residual}, {"samples", fit.samples.size()}};
}

std::string trajectory_csv_header() { return "t,re_x,im_x,re_p,im_p,energy_drift"; }

std::string format_trajectory_row(const PotentialSpec& spec, Complex energy, const PhaseState& s) {
  const double drift = std::abs(hamiltonian(spec, s) - energy);
  return format_number(s.t) + "," + format_number(s.x.real()) + "," + format_number(s.x.imag()) + "," +
         format_number(s.p.real()) + "," + format_number(s.p.imag()) + "," + format_number(drift);
}

std::string band_csv_header() { return "im_e,re_lo,re_hi,direction,flagged"; }

std::string format_band(const BandInterval& b) {
  return format_number(b.im) + "," + format_number(b.re_lo) + "," + format_number(b.re_hi) + "," +
         to_char(b.direction) + "," + (b.flagged ? "1" : "0");
}

std::string hyperbola_csv_header() { return "im_e,mean_time,product"; }

std::string format_hyperbola_row(const HyperbolaSample& s) {
  return format_number(s.im_e) + "," + format_number(s.mean_time) + "," +
         format_number(s.mean_time * std::abs(s.im_e));
}

std::vector<HyperbolaSample> read_hyperbola_csv(std::istream& is) {
  std::string line;
  std::optional<std::size_t> col_im, col_t;
  std::vector<HyperbolaSample> out;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!col_im) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == "im_e") col_im = i;
        if (cells[i] == "mean_time") col_t = i;
      }
      if (!col_im) throw UsageError("hyperbola CSV is missing column 'im_e'");
      if (!col_t) throw UsageError("hyperbola CSV is missing column 'mean_time'");
      continue;
    }
    if (cells.size() <= std::max(*col_im, *col_t)) throw UsageError("short row in hyperbola CSV: '" + line + "'");
    try {
      out.push_back({std::stod(cells[*col_im]), std::stod(cells[*col_t])});
    } catch (const std::exception&) {
      throw UsageError("bad number in hyperbola CSV row '" + line + "'");
    }
  }
  if (!col_im) throw UsageError("hyperbola CSV has no header row");
  return out;
}

}  // namespace cband
