#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "art/harness.hpp"
#include "art/io.hpp"
#include "test_support.hpp"

namespace hs = art::harness;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("art_harness_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

hs::ExperimentConfig mv_only(std::vector<std::uint64_t> seeds) {
  hs::ExperimentConfig c;
  c.methods = {"mv"};
  c.seeds = std::move(seeds);
  return c;
}

template <typename F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const art::Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Accuracy, Examples) {
  EXPECT_EQ(hs::accuracy({0, 1, 2, 3}, {0, 1, 2, 3}), 1.0);
  EXPECT_EQ(hs::accuracy({1, 2, 3, 0}, {0, 1, 2, 3}), 0.0);
  EXPECT_EQ(hs::accuracy({0, 1, 2, 0}, {0, 1, 2, 3}), 0.75);
  EXPECT_THROW(hs::accuracy({0, 1}, {0}), art::Error);
  EXPECT_THROW(hs::accuracy(std::vector<int>{}, std::vector<int>{}), art::Error);
}

TEST(Accuracy, CovariantUnderConsistentRelabeling) {
  art::Rng rng(1);
  const std::vector<int> relabel{3, 0, 2, 1};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> est(30), truth(30), est_p(30), truth_p(30);
    for (std::size_t j = 0; j < 30; ++j) {
      est[j] = static_cast<int>(rng.uniform_index(4));
      truth[j] = static_cast<int>(rng.uniform_index(4));
      est_p[j] = relabel[static_cast<std::size_t>(est[j])];
      truth_p[j] = relabel[static_cast<std::size_t>(truth[j])];
    }
    EXPECT_EQ(hs::accuracy(est, truth), hs::accuracy(est_p, truth_p));
  }
}

TEST(ValidationSplit, KeepsTheFirstEvents) {
  const auto obs = art::testing::matrix_from_rows({{1, 2, 1, 2}, {2, 2, 1, 1}}, 2);
  const auto split = hs::validation_split(obs, {0, 1, 0, 1}, 2);
  EXPECT_EQ(split.obs.n_events(), 2u);
  EXPECT_EQ(split.truths, (std::vector<int>{0, 1}));
  EXPECT_EQ(split.obs.raw(1, 1), 1);
}

TEST(Sweep, CartesianRowCount) {
  auto c = mv_only({1});
  c.sparsities = {0.8, 0.4, 0.5, 0.6, 0.7};
  const auto table = hs::run_sweep(c);
  ASSERT_EQ(table.size(), 5u);
  for (std::size_t i = 1; i < table.size(); ++i) EXPECT_LT(table[i - 1].sparsity, table[i].sparsity);
  for (const auto& r : table) EXPECT_FALSE(r.failed());
}

TEST(Sweep, SameConfigSameTable) {
  auto c = mv_only({1, 2});
  c.methods = {"mv", "art"};
  c.hyper_overrides = "iterations = 2\nK = 2\nR1 = 2\nR2 = 2\nlayer_sizes = 8 / 8 / 8\n";
  c.sparsities = {0.6};
  const auto a = hs::run_sweep(c);
  const auto b = hs::run_sweep(c);
  ASSERT_EQ(a.size(), 4u);
  ASSERT_EQ(b.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].method, b[i].method);
    EXPECT_EQ(a[i].seed, b[i].seed);
    EXPECT_EQ(a[i].accuracy, b[i].accuracy) << a[i].method << " seed " << a[i].seed;
    EXPECT_TRUE(a[i].error.empty()) << a[i].error;
  }
}

TEST(Sweep, CellsCanBeRecomputedAlone) {
  auto c = mv_only({1, 2, 3});
  c.methods = {"art", "mv"};
  c.hyper_overrides = "iterations = 1\nK = 2\nR1 = 2\nR2 = 2\nlayer_sizes = 8 / 8 / 8\n";
  c.densities = {0.5, 1.0};
  const auto table = hs::run_sweep(c);
  ASSERT_EQ(table.size(), 12u);
  for (const auto& row : table) {
    if (row.seed != 2) continue;
    const auto cell = hs::prepare_cell(c, 2, row.sparsity, row.density, std::nullopt);
    const auto again = hs::run_cell(c, cell, row.method, 2, row.sparsity, row.density);
    EXPECT_EQ(again.accuracy, row.accuracy) << row.method << " density " << row.density;
  }
}

TEST(Sweep, DistinctCellsGetDistinctSeeds) {
  const auto a = hs::cell_seeds(1, 0.6, 1.0, "art");
  const auto b = hs::cell_seeds(2, 0.6, 1.0, "art");
  const auto c = hs::cell_seeds(1, 0.6, 0.2, "art");
  EXPECT_NE(a.dataset, b.dataset);
  EXPECT_EQ(a.dataset, c.dataset);
  EXPECT_EQ(a.mask, c.mask);
  EXPECT_NE(a.thinning, c.thinning);
  EXPECT_NE(a.fit, c.fit);
  EXPECT_NE(a.fit, hs::cell_seeds(1, 0.6, 1.0, "mv").fit);
}

TEST(Sweep, FailuresAreRecordedAndTheSweepContinues) {
  auto c = mv_only({1, 2});
  c.methods = {"art", "mv"};
  c.hyper_overrides = "iterations = 1\nK = 2\nR1 = 2\nR2 = 2\nlayer_sizes = 8 / 8 / 8\nV = 0.01\n";
  c.hyper_base.b_prime = 1e300;  // overflows the community update
  std::vector<std::string> seen;
  const auto table = hs::run_sweep(c, {[&](const hs::ResultRow& r) { seen.push_back(r.method); }, {}});
  ASSERT_EQ(table.size(), 4u);
  EXPECT_EQ(seen.size(), 4u);
  for (const auto& r : table)
    if (r.method == "mv") EXPECT_FALSE(r.failed());
}

TEST(Sweep, MajorityVoteBandOnTheDefaultBenchmark) {
  auto c = mv_only({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  c.sparsities = {0.6};
  const auto table = hs::run_sweep(c);
  const auto summary = hs::summarize(table);
  ASSERT_EQ(summary.size(), 1u);
  EXPECT_EQ(summary[0].n, 10u);
  RecordProperty("mv_mean", std::to_string(summary[0].mean));
  EXPECT_GE(summary[0].mean, 0.26);
  EXPECT_LE(summary[0].mean, 0.42);
}

TEST(ExperimentConfigParser, ReadsSweepKeysAndForwardsTheRest) {
  const auto c = hs::parse_experiment_config(R"(
    mode = synthetic
    sparsity = 0.4, 0.6
    density = 1.0,0.2
    seeds = 3-5
    methods = mv
    beta_gen = 0.7
    noise_std = 0.02
    iterations = 12   # forwarded
  )");
  EXPECT_EQ(c.sparsities, (std::vector<double>{0.4, 0.6}));
  EXPECT_EQ(c.densities, (std::vector<double>{1.0, 0.2}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 4, 5}));
  EXPECT_EQ(c.methods, std::vector<std::string>{"mv"});
  EXPECT_EQ(c.spec.beta_gen, 0.7);
  EXPECT_EQ(c.spec.confusion_noise_std, 0.02);
  EXPECT_EQ(art::parse_hyper_params(c.hyper_overrides, c.hyper_base).iterations, 12);
  EXPECT_EQ(hs::parse_experiment_config("seeds = 9, 2").seeds, (std::vector<std::uint64_t>{9, 2}));
}

TEST(ExperimentConfigParser, RejectsBadInput) {
  EXPECT_THROW(hs::parse_experiment_config("mode = remote"), art::Error);
  EXPECT_THROW(hs::parse_experiment_config("sparsity = 1.5"), art::Error);
  EXPECT_THROW(hs::parse_experiment_config("methods = art, bcc"), art::Error);
  EXPECT_THROW(hs::parse_experiment_config("learning_rat = 1"), art::Error);
  EXPECT_THROW(hs::parse_experiment_config("seeds = 5-2"), art::Error);
  EXPECT_THROW(hs::parse_experiment_config("mode = file"), art::Error);
}

TEST(Report, EmptyTableIsHeaderOnly) {
  std::ostringstream out;
  hs::write_report({}, out);
  EXPECT_EQ(out.str(), std::string(hs::kReportHeader) + "\n");
}

TEST(Report, SummaryIsTheMeanOverSeeds) {
  const hs::ResultTable table{{"art", 0.6, 1.0, 1, 0.5, 1.0, ""}, {"art", 0.6, 1.0, 2, 0.7, 1.0, ""},
                              {"art", 0.6, 1.0, 3, std::nan(""), 0.0, "boom"}};
  const auto s = hs::summarize(table);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s[0].mean, 0.6);
  EXPECT_EQ(s[0].n, 2u);
  EXPECT_EQ(s[0].failures, 1u);
  EXPECT_NEAR(s[0].std, std::sqrt(0.02), 1e-12);
}

TEST(Report, RoundTripReproducesTheTable) {
  const auto dir = scratch("report");
  const hs::ResultTable table{{"art", 0.6, 0.2, 4, 1.0 / 3.0, 12.25, ""}, {"mv", 0.4, 1.0, 7, 0.125, 0.001, ""},
                              {"art", 0.6, 1.0, 5, std::nan(""), 3.0, "boom"}};
  hs::emit_report(table, dir / "results.csv");
  EXPECT_TRUE(std::filesystem::exists(dir / "results.summary.csv"));
  const auto back = hs::read_report(dir / "results.csv");
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].method, table[i].method);
    EXPECT_EQ(back[i].sparsity, table[i].sparsity);
    EXPECT_EQ(back[i].density, table[i].density);
    EXPECT_EQ(back[i].seed, table[i].seed);
    EXPECT_EQ(back[i].accuracy, table[i].accuracy);
    EXPECT_EQ(back[i].wall_time_s, table[i].wall_time_s);
  }
  EXPECT_TRUE(back[2].failed());
}

TEST(Report, UnwritablePathIsAnError) {
  const auto dir = scratch("unwritable");
  write_file(dir / "file", "x");
  EXPECT_THROW(hs::emit_report({}, dir / "file" / "results.csv"), art::Error);
}

TEST(Io, ObservationGraphAndTruthFilesRoundTrip) {
  const auto dir = scratch("io");
  art::Rng rng(2);
  const auto obs = art::testing::random_matrix(6, 9, 3, rng, 0.3);
  const auto graph = art::testing::random_graph(6, 0.5, rng);
  art::io::write_observations(obs, dir / "obs.csv");
  art::io::write_graph(graph, dir / "graph.csv");
  art::io::write_truths({0, 2, 1}, dir / "truths.csv");
  EXPECT_EQ(art::io::read_observations(dir / "obs.csv", {6, 9, 3}), obs);
  EXPECT_EQ(art::io::read_graph(dir / "graph.csv", 6), graph);
  EXPECT_EQ(art::io::read_truths(dir / "truths.csv"), (std::vector<int>{0, 2, 1}));
}

TEST(Io, EstimateRoundTripIsExact) {
  const auto dir = scratch("estimate");
  Eigen::MatrixXd conf(2, 3);
  conf << 0.1, 0.7, 0.2, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0;
  const auto est = art::TruthEstimate::from_confidence(conf);
  art::io::write_estimate(est, dir / "est.csv");
  const auto back = art::io::read_estimate(dir / "est.csv");
  EXPECT_EQ(back.states, est.states);
  EXPECT_EQ(back.confidence, est.confidence);
}

TEST(Io, MalformedLinesNameTheFileAndLine) {
  const auto dir = scratch("malformed");
  write_file(dir / "obs.csv", "agent,event,value\n1,1,2\n2,x,1\n");
  EXPECT_NE(error_of([&] { art::io::read_observations(dir / "obs.csv"); }).find("obs.csv:3"), std::string::npos);
  write_file(dir / "bad_header.csv", "a,b,c\n1,1,1\n");
  EXPECT_NE(error_of([&] { art::io::read_observations(dir / "bad_header.csv"); }).find(":1"), std::string::npos);
  write_file(dir / "zero.csv", "agent,event,value\n0,1,1\n");
  EXPECT_THROW(art::io::read_observations(dir / "zero.csv"), art::Error);
  EXPECT_THROW(art::io::read_observations(dir / "absent.csv"), art::Error);
}

TEST(Imdb, RatingLevels) {
  const int expected[] = {0, 0, 0, 0, 0, 1, 1, 2, 2, 3, 3};
  for (int r = 0; r <= 10; ++r) EXPECT_EQ(art::io::imdb_level(r), expected[r]) << "rating " << r;
  EXPECT_EQ(art::io::imdb_level(6) + 1, 2);
  EXPECT_EQ(art::io::imdb_level(9) + 1, 4);
  EXPECT_THROW(art::io::imdb_level(11), art::Error);
  EXPECT_THROW(art::io::imdb_level(-1), art::Error);
}

TEST(Imdb, LoaderIndexesSymmetrizesAndCounts) {
  const auto dir = scratch("imdb");
  write_file(dir / "ratings.txt",
             "user movie rating\n"
             "u7 m1 9\n"
             "u3,m2,4   # comment\n"
             "u7\tm2\t6\n"
             "\n"
             "u9 m1 10\n");
  write_file(dir / "edges.txt", "u7 u3\nu3 u7\nu9 u9\nu3 ghost\nu9 u7\n");
  const auto ds = art::io::load_imdb(dir / "ratings.txt", dir / "edges.txt");
  EXPECT_EQ(ds.agent_ids, (std::vector<std::string>{"u7", "u3", "u9"}));
  EXPECT_EQ(ds.event_ids, (std::vector<std::string>{"m1", "m2"}));
  EXPECT_EQ(ds.n_ratings, 4u);
  EXPECT_EQ(ds.obs.n_states(), 4);
  EXPECT_EQ(ds.obs.raw(0, 0), 3);
  EXPECT_EQ(ds.obs.raw(1, 1), 0);
  EXPECT_EQ(ds.obs.raw(0, 1), 1);
  EXPECT_EQ(ds.graph.n_edges(), 2u);
  EXPECT_TRUE(ds.graph.connected(0, 1));
  EXPECT_TRUE(ds.graph.connected(2, 0));
  EXPECT_EQ(ds.n_dropped_edges, 1u);
}

TEST(Imdb, MalformedRatingsNameTheLine) {
  const auto dir = scratch("imdb_bad");
  write_file(dir / "edges.txt", "");
  write_file(dir / "r1.txt", "a m 5\nb m 12\n");
  EXPECT_NE(error_of([&] { art::io::load_imdb(dir / "r1.txt", dir / "edges.txt"); }).find("r1.txt:2"), std::string::npos);
  write_file(dir / "r2.txt", "a m 5\nb m\n");
  EXPECT_NE(error_of([&] { art::io::load_imdb(dir / "r2.txt", dir / "edges.txt"); }).find("r2.txt:2"), std::string::npos);
  write_file(dir / "r3.txt", "a m 5\nb m five\n");
  EXPECT_NE(error_of([&] { art::io::load_imdb(dir / "r3.txt", dir / "edges.txt"); }).find("r3.txt:2"), std::string::npos);
}
