#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "cband/sweep.hpp"

using namespace cband;

namespace {

VerdictRecord verdict(Complex e, Behavior b, std::optional<Direction> d = std::nullopt, int hops = 0) {
  VerdictRecord v;
  v.energy = e;
  v.kind = {b, d};
  for (int i = 0; i < hops; ++i) {
    const WellIndex from = d == Direction::Left ? -i : i;
    const WellIndex to = d == Direction::Left ? from - 1 : from + 1;
    v.hops.push_back({10.0 * (i + 1) + e.real(), 10.0 * (i + 1) + 1.0, from, to, d.value_or(Direction::Right)});
  }
  return v;
}

// Conduction to the right on (lo, hi), hopping elsewhere.
EnergyClassifier band(double lo, double hi) {
  return [lo, hi](Complex e) {
    if (e.real() > lo && e.real() < hi) return verdict(e, Behavior::Conduction, Direction::Right, 10);
    return verdict(e, Behavior::Hopping, std::nullopt, 2);
  };
}

std::string render(const std::vector<GridCell>& cells) {
  std::string out = grid_csv_header() + "\n";
  for (const auto& c : cells) out += format_cell(c) + "\n";
  return out;
}

// A deterministic classifier whose verdict depends on the energy in a way that
// exercises every column, with jittered run time to shuffle worker scheduling.
VerdictRecord busy(Complex e) {
  const long key = std::lround(1000.0 * e.real()) * 7 + std::lround(1000.0 * e.imag()) * 13;
  std::this_thread::sleep_for(std::chrono::microseconds((key % 5 + 5) % 5 * 50));
  switch (((key % 4) + 4) % 4) {
    case 0: return verdict(e, Behavior::Conduction, Direction::Left, 10);
    case 1: return verdict(e, Behavior::Hopping, std::nullopt, 3);
    case 2: return verdict(e, Behavior::Localized);
    default: return verdict(e, Behavior::Undecided, std::nullopt, 1);
  }
}

class Checkpoint : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("cband_sweep_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

}  // namespace

TEST(GridSpec, CountsAndPoints) {
  const GridSpec g{-1.0, 1.0, 0.01, -1.0, -0.05, 0.01};
  EXPECT_EQ(g.re_count(), 201u);
  EXPECT_EQ(g.im_count(), 96u);
  EXPECT_EQ(g.size(), 201u * 96u);
  EXPECT_EQ(g.point(0), Complex(-1.0, -1.0));
  EXPECT_NEAR(g.point(1).real(), -0.99, 1e-15);
  EXPECT_NEAR(g.point(201).imag(), -0.99, 1e-15);
  EXPECT_NEAR(g.point(g.size() - 1).real(), 1.0, 1e-12);
  EXPECT_NEAR(g.point(g.size() - 1).imag(), -0.05, 1e-12);
}

TEST(GridSpec, IndexOfInvertsPoint) {
  const GridSpec g{-0.3, 0.3, 0.1, -0.9, -0.5, 0.2};
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.index_of(g.point(i)), i);
  EXPECT_EQ(g.index_of({0.05, -0.9}), std::nullopt);
  EXPECT_EQ(g.index_of({0.5, -0.9}), std::nullopt);
  EXPECT_EQ(g.index_of({-0.4, -0.9}), std::nullopt);
}

TEST(GridSpec, Validation) {
  EXPECT_THROW((GridSpec{0, 1, 0, 0, 1, 0.1}).validate(), UsageError);
  EXPECT_THROW((GridSpec{1, 0, 0.1, 0, 1, 0.1}).validate(), UsageError);
  EXPECT_THROW((GridSpec{0, NAN, 0.1, 0, 1, 0.1}).validate(), UsageError);
  EXPECT_NO_THROW((GridSpec{0, 0, 0.1, 0, 0, 0.1}).validate());
  EXPECT_EQ((GridSpec{0, 0, 0.1, 0, 0, 0.1}).size(), 1u);
}

TEST(GridCell, CsvRoundTrip) {
  const GridCell a = summarize(verdict({-0.95, -0.9}, Behavior::Conduction, Direction::Left, 10));
  const GridCell b = summarize(verdict({0.1, 0.0}, Behavior::Localized));
  const GridCell c = summarize(verdict({0.1 / 3.0, -0.15}, Behavior::Undecided, std::nullopt, 1));
  for (const auto& cell : {a, b, c}) EXPECT_EQ(parse_cell(format_cell(cell)), cell);
  EXPECT_EQ(format_cell(b), "0.10000000000000001,0,L,-,0,,");
  EXPECT_EQ(a.hop_count, 10);
  EXPECT_TRUE(a.mean_hop_time);
  EXPECT_FALSE(c.mean_hop_time);
  EXPECT_TRUE(c.first_hop_time);
}

TEST(GridCell, MalformedRowsAreRejected) {
  EXPECT_THROW((void)parse_cell("0.1,0,L,-,0,"), UsageError);
  EXPECT_THROW((void)parse_cell("0.1,0,Q,-,0,,"), UsageError);
  EXPECT_THROW((void)parse_cell("0.1,0,C,-,10,1,2"), UsageError);
  EXPECT_THROW((void)parse_cell("0.1,0,H,R,3,1,2"), UsageError);
  EXPECT_THROW((void)parse_cell("abc,0,L,-,0,,"), UsageError);
}

TEST(Sweep, RowMajorOrder) {
  const GridSpec g{0.0, 0.2, 0.1, -0.2, -0.1, 0.1};
  const auto cells = sweep(g, busy, {});
  ASSERT_EQ(cells.size(), 6u);
  for (std::size_t i = 0; i < cells.size(); ++i) EXPECT_EQ(cells[i].energy, g.point(i));
}

TEST(Sweep, OutputIndependentOfWorkerCount) {
  const GridSpec g{-0.5, 0.5, 0.05, -0.6, -0.1, 0.05};
  SweepOptions one;
  const std::string reference = render(sweep(g, busy, one));
  for (int w : {2, 4, 8}) {
    SweepOptions opts;
    opts.workers = w;
    EXPECT_EQ(render(sweep(g, busy, opts)), reference) << w << " workers";
  }
}

TEST(Sweep, RejectsZeroWorkers) {
  SweepOptions opts;
  opts.workers = 0;
  EXPECT_THROW((void)sweep(GridSpec{0, 0, 1, 0, 0, 1}, busy, opts), UsageError);
}

TEST(Sweep, ProgressCountsEveryCell) {
  SweepOptions opts;
  opts.workers = 3;
  std::vector<std::size_t> seen;
  opts.progress = [&](std::size_t done, std::size_t total) {
    EXPECT_EQ(total, 12u);
    seen.push_back(done);
  };
  (void)sweep(GridSpec{0, 0.3, 0.1, 0, 0.2, 0.1}, busy, opts);
  ASSERT_EQ(seen.size(), 12u);
  for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], i + 1);
}

TEST(Sweep, ClassifierErrorsPropagate) {
  SweepOptions opts;
  opts.workers = 4;
  auto failing = [](Complex e) -> VerdictRecord {
    if (e.real() > 0.25) throw IntegrationError("boom");
    return busy(e);
  };
  EXPECT_THROW((void)sweep(GridSpec{0, 0.5, 0.05, 0, 0.1, 0.05}, failing, opts), IntegrationError);
}

TEST_F(Checkpoint, CheckpointResumeMatchesUninterruptedRun) {
  const GridSpec g{-0.5, 0.5, 0.1, -0.3, -0.1, 0.1};
  const std::string reference = render(sweep(g, busy, {}));

  SweepOptions opts;
  opts.checkpoint = dir_ / "run.checkpoint";
  std::atomic<int> budget{13};
  auto interrupted = [&](Complex e) {
    if (--budget < 0) throw std::runtime_error("killed");
    return busy(e);
  };
  EXPECT_THROW((void)sweep(g, interrupted, opts), std::runtime_error);

  std::atomic<int> calls{0};
  auto counting = [&](Complex e) {
    ++calls;
    return busy(e);
  };
  opts.resume = true;
  opts.workers = 4;
  EXPECT_EQ(render(sweep(g, counting, opts)), reference);
  EXPECT_EQ(calls.load(), static_cast<int>(g.size()) - 13);

  calls = 0;
  EXPECT_EQ(render(sweep(g, counting, opts)), reference);
  EXPECT_EQ(calls.load(), 0);
}

TEST_F(Checkpoint, TornFinalLineIsRecomputed) {
  const GridSpec g{0.0, 0.4, 0.1, -0.2, -0.2, 0.1};
  SweepOptions opts;
  opts.checkpoint = dir_ / "torn.checkpoint";
  const std::string reference = render(sweep(g, busy, opts));

  // Keep the first two cells and half of the third.
  std::ifstream in(*opts.checkpoint);
  std::string grid_line, header, r0, r1, r2;
  std::getline(in, grid_line);
  std::getline(in, header);
  std::getline(in, r0);
  std::getline(in, r1);
  std::getline(in, r2);
  in.close();
  std::ofstream(*opts.checkpoint, std::ios::trunc) << grid_line << '\n'
                                                   << header << '\n'
                                                   << r0 << '\n'
                                                   << r1 << '\n'
                                                   << r2.substr(0, r2.size() / 2);
  std::atomic<int> calls{0};
  opts.resume = true;
  const auto cells = sweep(
      g,
      [&](Complex e) {
        ++calls;
        return busy(e);
      },
      opts);
  EXPECT_EQ(render(cells), reference);
  EXPECT_EQ(calls.load(), 3);
}

TEST_F(Checkpoint, MismatchedCheckpointNamesBothGrids) {
  SweepOptions opts;
  opts.checkpoint = dir_ / "a.checkpoint";
  const GridSpec first{0.0, 0.2, 0.1, 0.0, 0.0, 0.1};
  const GridSpec second{0.0, 0.3, 0.1, 0.0, 0.0, 0.1};
  (void)sweep(first, busy, opts);
  opts.resume = true;
  try {
    (void)sweep(second, busy, opts);
    FAIL() << "expected CheckpointMismatch";
  } catch (const CheckpointMismatch& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find(first.describe()), std::string::npos) << what;
    EXPECT_NE(what.find(second.describe()), std::string::npos) << what;
  }
}

TEST_F(Checkpoint, WithoutResumeTheCheckpointIsReplaced) {
  SweepOptions opts;
  opts.checkpoint = dir_ / "b.checkpoint";
  (void)sweep(GridSpec{0.0, 0.2, 0.1, 0.0, 0.0, 0.1}, busy, opts);
  EXPECT_NO_THROW((void)sweep(GridSpec{0.0, 0.3, 0.1, 0.0, 0.0, 0.1}, busy, opts));
  std::ifstream in(*opts.checkpoint);
  std::string first_line;
  std::getline(in, first_line);
  EXPECT_EQ(first_line, "# grid: " + (GridSpec{0.0, 0.3, 0.1, 0.0, 0.0, 0.1}).describe());
}

TEST(Sweep, RealAxisIsLocalized) {
  const auto cells = sweep(PotentialSpec::cosine(), GridSpec{-0.5, 0.5, 0.5, 0.0, 0.0, 0.1}, {}, {});
  ASSERT_EQ(cells.size(), 3u);
  for (const auto& c : cells) EXPECT_EQ(c.kind.behavior, Behavior::Localized) << c.energy;
}

TEST(Sweep, SingleConductionCell) {
  const auto cells = sweep(PotentialSpec::cosine(), GridSpec{-0.95, -0.95, 0.01, -0.9, -0.9, 0.01}, {}, {});
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_EQ(cells[0].kind.behavior, Behavior::Conduction);
  EXPECT_EQ(cells[0].hop_count, 10);
}

TEST(Sweep, MirroredGridHasSameKinds) {
  SweepOptions opts;
  opts.workers = 4;
  const auto lower = sweep(PotentialSpec::cosine(), GridSpec{-0.6, 0.6, 0.3, -0.7, -0.4, 0.3}, {}, opts);
  const auto upper = sweep(PotentialSpec::cosine(), GridSpec{-0.6, 0.6, 0.3, 0.4, 0.7, 0.3}, {}, opts);
  ASSERT_EQ(lower.size(), upper.size());
  const std::size_t nre = 5;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    const std::size_t mirrored = (1 - i / nre) * nre + i % nre;
    EXPECT_EQ(lower[i].kind, upper[mirrored].kind) << lower[i].energy;
  }
}

TEST(RefineEdge, FourRoundsForTenfoldBracket) {
  const auto r = refine_edge(band(-1.0, 0.3), {0.29, -0.5}, {0.30999, -0.5}, 0.001);
  EXPECT_EQ(r.rounds, 5);
  const auto r4 = refine_edge(band(-1.0, 0.3), {0.2925, -0.5}, {0.3025, -0.5}, 0.001);
  EXPECT_EQ(r4.rounds, 4);
}

TEST(RefineEdge, FindsInjectedEdge) {
  for (double res : {1e-3, 1e-5, 1e-8}) {
    const auto r = refine_edge(band(-1.0, 0.3), {0.29, -0.5}, {0.31, -0.5}, res);
    EXPECT_NEAR(r.edge, 0.3, res);
    EXPECT_LT(r.conduct_side, 0.3);
    EXPECT_GE(r.other_side, 0.3);
    EXPECT_LT(std::abs(r.other_side - r.conduct_side), res);
    EXPECT_FALSE(r.flagged);
  }
}

TEST(RefineEdge, WorksAlongImaginaryAxisAndEitherOrientation) {
  auto cls = [](Complex e) {
    return e.imag() < -0.42 ? verdict(e, Behavior::Conduction, Direction::Left, 10)
                            : verdict(e, Behavior::Localized);
  };
  const auto r = refine_edge(cls, {0.1, -0.5}, {0.1, -0.3}, 1e-6);
  EXPECT_NEAR(r.edge, -0.42, 1e-6);
  const auto flipped = refine_edge(band(0.3, 1.0), {0.31, 0.0}, {0.29, 0.0}, 1e-6);
  EXPECT_NEAR(flipped.edge, 0.3, 1e-6);
}

TEST(RefineEdge, UndecidedShrinksTowardConductionAndFlags) {
  auto cls = [](Complex e) {
    if (e.real() < 0.3) return verdict(e, Behavior::Conduction, Direction::Right, 10);
    if (e.real() < 0.305) return verdict(e, Behavior::Undecided, std::nullopt, 4);
    return verdict(e, Behavior::Hopping, std::nullopt, 2);
  };
  const auto r = refine_edge(cls, {0.29, 0.0}, {0.31, 0.0}, 1e-6);
  EXPECT_TRUE(r.flagged);
  EXPECT_NEAR(r.edge, 0.3, 1e-6);
}

TEST(RefineEdge, OppositeDirectionIsNotConduction) {
  auto cls = [](Complex e) {
    if (e.real() < 0.3) return verdict(e, Behavior::Conduction, Direction::Right, 10);
    if (e.real() < 0.305) return verdict(e, Behavior::Conduction, Direction::Left, 10);
    return verdict(e, Behavior::Hopping, std::nullopt, 2);
  };
  const auto r = refine_edge(cls, {0.29, 0.0}, {0.31, 0.0}, 1e-6);
  EXPECT_TRUE(r.flagged);
  EXPECT_NEAR(r.edge, 0.3, 1e-6);
}

TEST(RefineEdge, PreconditionErrorsRestateVerdicts) {
  try {
    (void)refine_edge(band(-1.0, 0.3), {0.31, 0.0}, {0.29, 0.0}, 1e-3);
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("Hopping"), std::string::npos) << what;
    EXPECT_NE(what.find("Conduction"), std::string::npos) << what;
  }
  EXPECT_THROW((void)refine_edge(band(-1.0, 0.3), {0.29, 0.0}, {0.31, 0.1}, 1e-3), UsageError);
  EXPECT_THROW((void)refine_edge(band(-1.0, 0.3), {0.29, 0.0}, {0.31, 0.0}, 0.0), UsageError);
}

TEST(BandsOnLine, InjectedBand) {
  LineScanOptions opts;
  opts.coarse_step = 0.01;
  opts.fine_resolution = 1e-4;
  const auto bands = bands_on_line(band(0.213, 0.4567), -0.5, -1.0, 1.0, opts);
  ASSERT_EQ(bands.size(), 1u);
  EXPECT_NEAR(bands[0].re_lo, 0.213, 1e-4);
  EXPECT_NEAR(bands[0].re_hi, 0.4567, 1e-4);
  EXPECT_EQ(bands[0].direction, Direction::Right);
  EXPECT_EQ(bands[0].im, -0.5);
  EXPECT_EQ(bands[0].edge_resolution, 1e-4);
  EXPECT_FALSE(bands[0].flagged);
}

TEST(BandsOnLine, AuditOfInjectedBands) {
  auto cls = [](Complex e) {
    const double r = e.real();
    if ((r > -0.8 && r < -0.72) || (r > 0.1 && r < 0.13) || (r > 0.5 && r < 0.61)) {
      return verdict(e, Behavior::Conduction, Direction::Left, 10);
    }
    return verdict(e, r < 0 ? Behavior::Hopping : Behavior::Localized, std::nullopt, r < 0 ? 2 : 0);
  };
  LineScanOptions opts;
  opts.fine_resolution = 1e-3;
  opts.workers = 4;
  const auto bands = bands_on_line(cls, -0.9, -1.0, 1.0, opts);
  ASSERT_EQ(bands.size(), 3u);
  for (const auto& b : bands) {
    EXPECT_LT(b.re_lo, b.re_hi);
    EXPECT_TRUE(cls({b.centre(), b.im}).kind.is_conduction());
    EXPECT_FALSE(cls({b.re_lo - opts.fine_resolution, b.im}).kind.is_conduction());
    EXPECT_FALSE(cls({b.re_hi + opts.fine_resolution, b.im}).kind.is_conduction());
  }
}

TEST(BandsOnLine, DirectionChangeSplitsAndFlags) {
  auto cls = [](Complex e) {
    if (e.real() > 0.2 && e.real() < 0.3) return verdict(e, Behavior::Conduction, Direction::Right, 10);
    if (e.real() >= 0.3 && e.real() < 0.4) return verdict(e, Behavior::Conduction, Direction::Left, 10);
    return verdict(e, Behavior::Hopping, std::nullopt, 2);
  };
  const auto bands = bands_on_line(cls, -0.5, 0.0, 1.0, {});
  ASSERT_EQ(bands.size(), 2u);
  EXPECT_EQ(bands[0].direction, Direction::Right);
  EXPECT_EQ(bands[1].direction, Direction::Left);
  EXPECT_TRUE(bands[0].flagged);
  EXPECT_TRUE(bands[1].flagged);
  EXPECT_NEAR(bands[0].re_hi, 0.3, 1e-3);
  EXPECT_NEAR(bands[1].re_lo, 0.3, 1e-3);
}

TEST(BandsOnLine, UndecidedGapIsFlaggedNotMerged) {
  auto cls = [](Complex e) {
    const double r = e.real();
    if ((r > 0.1 && r < 0.2) || (r > 0.245 && r < 0.35)) return verdict(e, Behavior::Conduction, Direction::Right, 10);
    if (r >= 0.2 && r <= 0.245) return verdict(e, Behavior::Undecided, std::nullopt, 3);
    return verdict(e, Behavior::Hopping, std::nullopt, 2);
  };
  const auto bands = bands_on_line(cls, -0.5, 0.0, 1.0, {});
  ASSERT_EQ(bands.size(), 2u);
  EXPECT_TRUE(bands[0].flagged);
  EXPECT_TRUE(bands[1].flagged);
  EXPECT_NEAR(bands[0].re_hi, 0.2, 1e-3);
  EXPECT_NEAR(bands[1].re_lo, 0.245, 1e-3);
}

TEST(BandsOnLine, ClippedBandIsFlaggedAtWindowEdge) {
  const auto bands = bands_on_line(band(-5.0, 0.153), -0.5, 0.0, 1.0, {});
  ASSERT_EQ(bands.size(), 1u);
  EXPECT_EQ(bands[0].re_lo, 0.0);
  EXPECT_NEAR(bands[0].re_hi, 0.153, 1e-3);
  EXPECT_TRUE(bands[0].flagged);
}

TEST(BandsOnLine, NoConductionGivesEmptyList) {
  EXPECT_TRUE(bands_on_line(band(5.0, 6.0), -0.5, 0.0, 1.0, {}).empty());
}

TEST(BandsOnLine, RejectsBadResolution) {
  LineScanOptions opts;
  opts.coarse_step = 0.001;
  opts.fine_resolution = 0.01;
  EXPECT_THROW((void)bands_on_line(band(0.0, 1.0), -0.5, 0.0, 1.0, opts), UsageError);
}
