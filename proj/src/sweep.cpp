#include "cband/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "cband/format.hpp"

namespace cband {

namespace {

std::size_t axis_count(double lo, double hi, double step) {
  return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

std::vector<std::string> split(const std::string& row, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(row);
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!row.empty() && row.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw UsageError("bad number '" + s + "'");
  }
  if (used != s.size()) throw UsageError("bad number '" + s + "'");
  return v;
}

std::optional<double> parse_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_number(s);
}

constexpr std::string_view kGridTag = "# grid: ";

}  // namespace

void GridSpec::validate() const {
  const double v[] = {re_min, re_max, re_step, im_min, im_max, im_step};
  for (double x : v) {
    if (!std::isfinite(x)) throw UsageError("grid bounds must be finite");
  }
  if (!(re_step > 0.0 && im_step > 0.0)) throw UsageError("grid steps must be positive");
  if (!(re_min <= re_max && im_min <= im_max)) throw UsageError("grid minimum exceeds maximum");
}

std::size_t GridSpec::re_count() const { return axis_count(re_min, re_max, re_step); }
std::size_t GridSpec::im_count() const { return axis_count(im_min, im_max, im_step); }

Complex GridSpec::point(std::size_t index) const {
  const std::size_t nre = re_count();
  const auto i = static_cast<double>(index % nre);
  const auto j = static_cast<double>(index / nre);
  return {re_min + i * re_step, im_min + j * im_step};
}

std::optional<std::size_t> GridSpec::index_of(Complex e) const {
  const double fi = std::round((e.real() - re_min) / re_step);
  const double fj = std::round((e.imag() - im_min) / im_step);
  if (fi < 0.0 || fj < 0.0) return std::nullopt;
  const auto i = static_cast<std::size_t>(fi);
  const auto j = static_cast<std::size_t>(fj);
  if (i >= re_count() || j >= im_count()) return std::nullopt;
  const std::size_t index = j * re_count() + i;
  const Complex p = point(index);
  if (std::abs(p.real() - e.real()) > 1e-6 * re_step || std::abs(p.imag() - e.imag()) > 1e-6 * im_step) {
    return std::nullopt;
  }
  return index;
}

std::string GridSpec::describe() const {
  return format_number(re_min) + "," + format_number(re_max) + "," + format_number(re_step) + "," +
         format_number(im_min) + "," + format_number(im_max) + "," + format_number(im_step);
}

GridCell summarize(const VerdictRecord& v) {
  GridCell c;
  c.energy = v.energy;
  c.kind = v.kind;
  c.hop_count = static_cast<int>(v.hops.size());
  if (!v.hops.empty()) c.first_hop_time = v.hops.front().t_cross;
  if (v.hops.size() >= 2) c.mean_hop_time = inter_hop_times(v, 0).mean;
  return c;
}

std::string grid_csv_header() {
  return "re_e,im_e,kind,direction,hop_count,first_hop_time,mean_hop_time";
}

std::string format_cell(const GridCell& cell) {
  std::string row;
  row += format_number(cell.energy.real()) + ",";
  row += format_number(cell.energy.imag()) + ",";
  row += to_letter(cell.kind.behavior);
  row += ",";
  row += cell.kind.direction ? to_char(*cell.kind.direction) : '-';
  row += "," + std::to_string(cell.hop_count);
  row += "," + format_optional(cell.first_hop_time);
  row += "," + format_optional(cell.mean_hop_time);
  return row;
}

GridCell parse_cell(const std::string& row) {
  const auto f = split(row, ',');
  if (f.size() != 7) throw UsageError("grid row must have 7 columns: '" + row + "'");
  GridCell c;
  c.energy = {parse_number(f[0]), parse_number(f[1])};
  if (f[2].size() != 1 || f[3].size() != 1) throw UsageError("bad kind/direction in '" + row + "'");
  c.kind.behavior = behavior_from_letter(f[2][0]);
  if (f[3][0] == 'L') {
    c.kind.direction = Direction::Left;
  } else if (f[3][0] == 'R') {
    c.kind.direction = Direction::Right;
  } else if (f[3][0] != '-') {
    throw UsageError("bad direction in '" + row + "'");
  }
  if (c.kind.direction.has_value() != c.kind.is_conduction()) {
    throw UsageError("direction must be set exactly for conduction cells: '" + row + "'");
  }
  c.hop_count = static_cast<int>(parse_number(f[4]));
  c.first_hop_time = parse_optional(f[5]);
  c.mean_hop_time = parse_optional(f[6]);
  return c;
}

std::vector<GridCell> sweep(const GridSpec& grid, const EnergyClassifier& classify,
                            const SweepOptions& opts) {
  grid.validate();
  if (opts.workers < 1) throw UsageError("workers must be >= 1");

  const std::size_t total = grid.size();
  std::vector<std::optional<GridCell>> cells(total);

  std::ofstream checkpoint;
  if (opts.checkpoint) {
    const auto& path = *opts.checkpoint;
    const bool existing = opts.resume && std::filesystem::exists(path);
    if (existing) {
      std::ifstream in(path);
      std::string line;
      std::optional<std::string> recorded;
      while (std::getline(in, line)) {
        if (line.rfind(kGridTag, 0) == 0) {
          recorded = line.substr(kGridTag.size());
          if (*recorded != grid.describe()) {
            throw CheckpointMismatch("checkpoint " + path.string() + " was written for grid " +
                                     *recorded + " but the requested grid is " + grid.describe());
          }
          continue;
        }
        if (line.empty() || line[0] == '#' || line == grid_csv_header()) continue;
        GridCell c;
        try {
          c = parse_cell(line);
        } catch (const UsageError&) {
          continue;  // a torn final line from an interrupted run
        }
        const auto idx = grid.index_of(c.energy);
        if (!idx) {
          throw CheckpointMismatch("checkpoint " + path.string() + " holds energy off the requested grid " +
                                   grid.describe());
        }
        cells[*idx] = c;
      }
      if (!recorded) {
        throw CheckpointMismatch("checkpoint " + path.string() + " has no grid record; requested grid " +
                                 grid.describe());
      }
      checkpoint.open(path, std::ios::app);
    } else {
      checkpoint.open(path, std::ios::trunc);
      checkpoint << kGridTag << grid.describe() << '\n' << grid_csv_header() << '\n';
      checkpoint.flush();
    }
    if (!checkpoint) throw std::runtime_error("cannot write checkpoint " + path.string());
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < total; ++i) {
    if (!cells[i]) pending.push_back(i);
  }
  std::size_t done = total - pending.size();

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex lock;

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t k = next.fetch_add(1);
      if (k >= pending.size()) return;
      const std::size_t idx = pending[k];
      try {
        GridCell cell = summarize(classify(grid.point(idx)));
        cell.energy = grid.point(idx);
        std::lock_guard guard(lock);
        cells[idx] = cell;
        ++done;
        if (checkpoint.is_open()) {
          checkpoint << format_cell(cell) << '\n';
          checkpoint.flush();
        }
        if (opts.progress) opts.progress(done, total);
      } catch (...) {
        std::lock_guard guard(lock);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };

  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(opts.workers), pending.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  std::vector<GridCell> out;
  out.reserve(total);
  for (auto& c : cells) out.push_back(*c);
  return out;
}

std::vector<GridCell> sweep(const PotentialSpec& spec, const GridSpec& grid, const ClassifyConfig& cfg,
                            const SweepOptions& opts) {
  return sweep(
      grid, [&](Complex e) { return classify_energy(spec, e, cfg); }, opts);
}

namespace {

enum class Axis { Real, Imag };

double coordinate(Complex e, Axis a) { return a == Axis::Real ? e.real() : e.imag(); }
Complex with_coordinate(Complex e, Axis a, double v) {
  return a == Axis::Real ? Complex{v, e.imag()} : Complex{e.real(), v};
}

// Bisection with the endpoint verdicts already known. Only conduction in
// `direction` counts as the conduction side.
EdgeResult bisect_edge(const EnergyClassifier& classify, Complex e_conduct, Complex e_other,
                       Direction direction, double resolution) {
  if (!(resolution > 0.0)) throw UsageError("edge resolution must be positive");
  Axis axis;
  if (e_conduct.imag() == e_other.imag() && e_conduct.real() != e_other.real()) {
    axis = Axis::Real;
  } else if (e_conduct.real() == e_other.real() && e_conduct.imag() != e_other.imag()) {
    axis = Axis::Imag;
  } else {
    throw UsageError("edge bracket energies must differ along exactly one axis");
  }

  EdgeResult r;
  double in = coordinate(e_conduct, axis);
  double out = coordinate(e_other, axis);
  while (std::abs(out - in) >= resolution) {
    const double mid = 0.5 * (in + out);
    const BehaviorKind k = classify(with_coordinate(e_conduct, axis, mid)).kind;
    if (k.is_conduction() && k.direction == direction) {
      in = mid;
    } else {
      if (k.behavior != Behavior::Hopping && k.behavior != Behavior::Localized) r.flagged = true;
      out = mid;
    }
    ++r.rounds;
  }
  r.conduct_side = in;
  r.other_side = out;
  r.edge = 0.5 * (in + out);
  return r;
}

}  // namespace

EdgeResult refine_edge(const EnergyClassifier& classify, Complex e_conduct, Complex e_other,
                       double resolution) {
  const BehaviorKind kc = classify(e_conduct).kind;
  const BehaviorKind ko = classify(e_other).kind;
  const bool other_ok = ko.behavior == Behavior::Hopping || ko.behavior == Behavior::Localized;
  if (!kc.is_conduction() || !other_ok) {
    std::ostringstream os;
    os << "edge bracket needs Conduction on one side and Hopping or Localized on the other; got "
       << to_string(kc.behavior) << " and " << to_string(ko.behavior);
    throw UsageError(os.str());
  }
  return bisect_edge(classify, e_conduct, e_other, *kc.direction, resolution);
}

EdgeResult refine_edge(const PotentialSpec& spec, Complex e_conduct, Complex e_other, double resolution,
                       const ClassifyConfig& cfg) {
  return refine_edge([&](Complex e) { return classify_energy(spec, e, cfg); }, e_conduct, e_other,
                     resolution);
}

std::vector<BandInterval> bands_on_line(const EnergyClassifier& classify, double im, double re_min,
                                        double re_max, const LineScanOptions& opts) {
  if (!(opts.coarse_step > opts.fine_resolution && opts.fine_resolution > 0.0)) {
    throw UsageError("need coarse_step > fine_resolution > 0");
  }
  const GridSpec line{re_min, re_max, opts.coarse_step, im, im, 1.0};
  SweepOptions sopts;
  sopts.workers = opts.workers;
  const std::vector<GridCell> cells = sweep(line, classify, sopts);

  // Maximal runs of same-direction conduction cells.
  struct Run {
    std::size_t first, last;
    Direction direction;
    bool flagged;
  };
  std::vector<Run> runs;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].kind.is_conduction()) continue;
    const Direction d = *cells[i].kind.direction;
    if (!runs.empty() && runs.back().last + 1 == i) {
      if (runs.back().direction == d) {
        runs.back().last = i;
        continue;
      }
      runs.back().flagged = true;
      runs.push_back({i, i, d, true});
      continue;
    }
    runs.push_back({i, i, d, false});
  }
  for (std::size_t r = 1; r < runs.size(); ++r) {
    bool only_undecided = true;
    for (std::size_t i = runs[r - 1].last + 1; i < runs[r].first; ++i) {
      only_undecided = only_undecided && cells[i].kind.behavior == Behavior::Undecided;
    }
    if (only_undecided) runs[r - 1].flagged = runs[r].flagged = true;
  }

  std::vector<BandInterval> bands;
  for (const Run& run : runs) {
    BandInterval b;
    b.im = im;
    b.direction = run.direction;
    b.edge_resolution = opts.fine_resolution;
    b.flagged = run.flagged;

    auto edge_towards = [&](std::size_t inner, std::optional<std::size_t> outer, double clip) {
      if (!outer) {
        b.flagged = true;
        return clip;
      }
      const GridCell& o = cells[*outer];
      if (o.kind.is_conduction()) {
        // Direction change: the boundary between the two runs is still bisected.
        b.flagged = true;
      } else if (o.kind.behavior != Behavior::Hopping && o.kind.behavior != Behavior::Localized) {
        b.flagged = true;
      }
      const EdgeResult e =
          bisect_edge(classify, cells[inner].energy, o.energy, run.direction, opts.fine_resolution);
      b.flagged = b.flagged || e.flagged;
      return e.edge;
    };

    const std::optional<std::size_t> below =
        run.first > 0 ? std::optional<std::size_t>(run.first - 1) : std::nullopt;
    const std::optional<std::size_t> above =
        run.last + 1 < cells.size() ? std::optional<std::size_t>(run.last + 1) : std::nullopt;
    b.re_lo = edge_towards(run.first, below, cells[run.first].energy.real());
    b.re_hi = edge_towards(run.last, above, cells[run.last].energy.real());
    bands.push_back(b);
  }
  return bands;
}

std::vector<BandInterval> bands_on_line(const PotentialSpec& spec, double im, double re_min,
                                        double re_max, const LineScanOptions& opts,
                                        const ClassifyConfig& cfg) {
  return bands_on_line([&](Complex e) { return classify_energy(spec, e, cfg); }, im, re_min, re_max,
                       opts);
}

}  // namespace cband
