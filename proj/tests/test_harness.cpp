#include "zojade/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace zojade;

namespace {

json small_config() {
  return json::parse(R"({
    "topology": {"kind": "ring", "n": 4},
    "instance": {"family": "quadratic", "dimension": 3, "seed": 2},
    "algorithms": [{"name": "zo_jade", "epsilon": 0.5}, {"name": "gradient_tracking", "eta": 0.2}],
    "budget": 600,
    "seeds": [1, 2]
  })");
}

RunTrace trace_of(std::vector<std::pair<std::uint64_t, double>> pts) {
  RunTrace t;
  long it = 0;
  for (auto [q, e] : pts) {
    TraceRow r;
    r.iteration = it++;
    r.queries_per_agent = q;
    r.e_f = e;
    t.rows.push_back(r);
  }
  return t;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Aggregate, SingleTraceIsItself) {
  const RunTrace t = trace_of({{0, 1.0}, {5, 0.5}, {10, 0.1}});
  const AggregateCurve c = aggregate({t});
  EXPECT_EQ(c.queries, (std::vector<std::uint64_t>{0, 5, 10}));
  EXPECT_EQ(c.ef_mean, (std::vector<double>{1.0, 0.5, 0.1}));
  for (double s : c.ef_std) EXPECT_EQ(s, 0.0);
}

TEST(Aggregate, IdenticalTracesHaveZeroSpread) {
  const RunTrace t = trace_of({{0, 3.0}, {7, 0.3}});
  const AggregateCurve c = aggregate({t, t, t});
  EXPECT_EQ(c.ef_mean, (std::vector<double>{3.0, 0.3}));
  EXPECT_EQ(c.ef_std, (std::vector<double>{0.0, 0.0}));
}

TEST(Aggregate, LastValueInterpolationOnUnionGrid) {
  const RunTrace a = trace_of({{0, 1.0}, {4, 0.6}, {8, 0.2}});
  const RunTrace b = trace_of({{0, 3.0}, {6, 1.0}});
  const AggregateCurve c = aggregate({a, b});
  EXPECT_EQ(c.queries, (std::vector<std::uint64_t>{0, 4, 6, 8}));
  EXPECT_DOUBLE_EQ(c.ef_mean[1], (0.6 + 3.0) / 2);
  EXPECT_DOUBLE_EQ(c.ef_mean[2], (0.6 + 1.0) / 2);
  EXPECT_DOUBLE_EQ(c.ef_mean[3], (0.2 + 1.0) / 2);
  EXPECT_DOUBLE_EQ(c.ef_std[0], 1.0);  // population std of {1, 3}
}

TEST(RateFit, Geometric) {
  std::vector<double> x, y;
  for (int t = 0; t < 40; ++t) {
    x.push_back(t);
    y.push_back(std::pow(0.5, t));
  }
  const RateFit f = fit_exponential_rate(x, y);
  EXPECT_NEAR(f.rate, std::log(0.5), 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_EQ(f.points, 20u);
}

TEST(RateFit, Constant) {
  std::vector<double> x, y;
  for (int t = 0; t < 12; ++t) {
    x.push_back(t);
    y.push_back(0.25);
  }
  const RateFit f = fit_exponential_rate(x, y);
  EXPECT_EQ(f.rate, 0.0);
  EXPECT_EQ(f.r_squared, 1.0);
}

TEST(RateFit, FloorExcludesPlateau) {
  std::vector<double> x, y;
  for (int t = 0; t < 60; ++t) {
    x.push_back(t);
    y.push_back(std::max(std::exp(-t), 1e-14));
  }
  const RateFit f = fit_exponential_rate(x, y);
  EXPECT_NEAR(f.rate, -1.0, 1e-9);
}

TEST(RateFit, TooFewPoints) {
  std::vector<double> x{0, 1, 2}, y{1, 0.5, 0.25};
  EXPECT_THROW(fit_exponential_rate(x, y), ConfigError);
  std::vector<double> x2, y2;
  for (int t = 0; t < 20; ++t) {
    x2.push_back(t);
    y2.push_back(t < 5 ? 1.0 : 0.0);
  }
  EXPECT_THROW(fit_exponential_rate(x2, y2), ConfigError);
}

TEST(RateFit, BadTail) {
  std::vector<double> x(12, 1.0), y(12, 1.0);
  EXPECT_THROW(fit_exponential_rate(x, y, 0.0), ConfigError);
  EXPECT_THROW(fit_exponential_rate(x, y, 1.5), ConfigError);
}

TEST(Config, DefaultsAndHash) {
  const ExperimentConfig a = parse_config(small_config());
  EXPECT_EQ(a.mu, 1e-3);
  EXPECT_EQ(a.record_every, 1);
  EXPECT_EQ(a.algorithms.size(), 2u);
  EXPECT_EQ(config_hash(a).size(), 16u);
  json j = small_config();
  j["output_dir"] = "elsewhere";
  EXPECT_EQ(config_hash(parse_config(j)), config_hash(a));
  j["mu"] = 1e-2;
  EXPECT_NE(config_hash(parse_config(j)), config_hash(a));
  // explicit defaults hash like omitted ones
  json k = small_config();
  k["mu"] = 1e-3;
  k["record_every"] = 1;
  EXPECT_EQ(config_hash(parse_config(k)), config_hash(a));
}

TEST(Config, UnknownKeysRejected) {
  for (const char* path : {"", "topology", "instance"}) {
    json j = small_config();
    (std::string(path).empty() ? j : j[path])["bogus"] = 1;
    EXPECT_THROW(parse_config(j), ConfigError) << path;
  }
  json j = small_config();
  j["algorithms"][0]["eta"] = 0.1;
  EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, ValidationErrors) {
  auto bad = [](auto mutate) {
    json j = small_config();
    mutate(j);
    EXPECT_THROW(parse_config(j), ConfigError) << j.dump();
  };
  bad([](json& j) { j["mu"] = 0.0; });
  bad([](json& j) { j["budget"] = 0; });
  bad([](json& j) { j["seeds"] = json::array(); });
  bad([](json& j) { j["algorithms"] = json::array(); });
  bad([](json& j) { j["algorithms"][0]["epsilon"] = 1.5; });
  bad([](json& j) { j["algorithms"][1]["name"] = "zo_jade"; });
  bad([](json& j) { j["topology"]["kind"] = "star"; });
  bad([](json& j) { j["instance"]["family"] = "mnist"; });
  bad([](json& j) { j["mu"] = "small"; });
  bad([](json& j) { j.erase("instance"); });
}

TEST(Config, StepGrids) {
  json j = small_config();
  j["algorithms"][0]["epsilon"] = "auto";
  j["algorithms"][1].erase("eta");
  const ExperimentConfig c = parse_config(j);
  EXPECT_TRUE(c.algorithms[0].step.auto_grid);
  EXPECT_TRUE(c.algorithms[1].step.auto_grid);
  json k = small_config();
  k["algorithms"][0]["epsilon"] = {0.1, 0.3};
  EXPECT_EQ(parse_config(k).algorithms[0].step.candidates, (std::vector<double>{0.1, 0.3}));
}

TEST(Config, MatrixTopology) {
  json j = small_config();
  j["topology"] = {{"kind", "matrix"}, {"weights", {{0.5, 0.5, 0.0, 0.0}, {0.5, 0.0, 0.5, 0.0}, {0.0, 0.5, 0.0, 0.5}, {0.0, 0.0, 0.5, 0.5}}}};
  const ExperimentConfig c = parse_config(j);
  const Network net = build_network(c.topology);
  EXPECT_EQ(net.p->size(), 4);
  j["topology"]["weights"][0][0] = 0.6;
  EXPECT_THROW(build_network(parse_config(j).topology), ConfigError);
}

TEST(Config, StandardizeOnlyForCsv) {
  json j = small_config();
  j["instance"]["standardize"] = true;
  const ExperimentConfig c = parse_config(j);
  EXPECT_THROW(build_instance(c.instance, 4), ConfigError);
}

TEST(Config, CsvInstance) {
  const auto dir = std::filesystem::temp_directory_path() / "zojade_csv_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "d.csv");
    os << "a,b,y\n";
    for (int r = 0; r < 12; ++r) os << r * 0.5 << ',' << (r % 3) << ',' << (r % 2 ? 1 : -1) << '\n';
  }
  json j = small_config();
  j["instance"] = {{"family", "logistic"}, {"csv", (dir / "d.csv").string()}, {"header", true}};
  const ProblemInstance inst = build_instance(parse_config(j).instance, 4);
  EXPECT_EQ(inst.d, 3);
  EXPECT_EQ(inst.agents(), 4);
  j["instance"]["family"] = "ridge";
  EXPECT_EQ(build_instance(parse_config(j).instance, 4).d, 2);
}

TEST(Csv, TraceRoundTrip) {
  RunTrace t = trace_of({{0, 1.0 / 3.0}, {9, 1e-17}, {18, 0.1 + 0.2}});
  t.config_hash = "0123456789abcdef";
  std::stringstream ss;
  csv::write_trace(ss, t);
  const auto table = csv::read_table(ss);
  EXPECT_EQ(table.header.back(), "config_hash");
  EXPECT_EQ(table.columns.at("e_f"), (std::vector<double>{1.0 / 3.0, 1e-17, 0.1 + 0.2}));
  EXPECT_EQ(table.columns.at("queries_per_agent"), (std::vector<double>{0, 9, 18}));
}

TEST(Csv, ShortestRoundTripFormatting) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0 / 3.0), "0.3333333333333333");
  EXPECT_EQ(format_double(1e-300), "1e-300");
  EXPECT_EQ(format_double(2.0), "2");
}

TEST(Csv, AggregateHeader) {
  std::stringstream ss;
  csv::write_aggregate(ss, aggregate({trace_of({{0, 1.0}})}), "h");
  EXPECT_EQ(ss.str(), "queries,ef_mean,ef_std,config_hash\n0,1,0,h\n");
}

TEST(Experiment, SharedInitialPointsAcrossAlgorithms) {
  json j = small_config();
  j["algorithms"] = json::parse(R"([{"name": "zo_jade", "epsilon": 0.5}, {"name": "gradient_tracking", "eta": 0.2},
                                    {"name": "consensus_gd", "eta": 0.1}])");
  const ExperimentResult r = run_experiment(parse_config(j));
  ASSERT_EQ(r.outcomes.size(), 3u);
  for (std::size_t s = 0; s < 2; ++s) {
    const double e0 = r.outcomes[0].traces[s].rows.front().e_f;
    const double c0 = r.outcomes[0].traces[s].rows.front().consensus_error;
    for (const auto& o : r.outcomes) {
      EXPECT_EQ(o.traces[s].rows.front().e_f, e0);
      EXPECT_EQ(o.traces[s].rows.front().consensus_error, c0);
    }
  }
}

TEST(Experiment, IdenticalSeedsGiveZeroSpread) {
  json j = small_config();
  j["seeds"] = {3, 3};
  const ExperimentResult r = run_experiment(parse_config(j));
  for (const auto& o : r.outcomes) {
    for (double s : o.curve.ef_std) EXPECT_EQ(s, 0.0);
    EXPECT_EQ(o.curve.ef_mean.back(), o.traces[0].rows.back().e_f);
  }
}

TEST(Experiment, OneSeedAggregateEqualsTrace) {
  json j = small_config();
  j["seeds"] = {5};
  j["algorithms"] = json::parse(R"([{"name": "zo_jade", "epsilon": 0.2}])");
  const ExperimentResult r = run_experiment(parse_config(j));
  const auto& o = r.outcomes.front();
  ASSERT_EQ(o.curve.queries.size(), o.traces[0].rows.size());
  for (std::size_t k = 0; k < o.curve.queries.size(); ++k) EXPECT_EQ(o.curve.ef_mean[k], o.traces[0].rows[k].e_f);
}

TEST(Experiment, TuningPicksFastestCandidate) {
  json j = small_config();
  j["algorithms"] = json::parse(R"([{"name": "zo_jade", "epsilon": [0.05, 0.5]}, {"name": "gradient_tracking"}])");
  j["target_ef"] = 1e-6;
  j["budget"] = 5000;
  const ExperimentResult r = run_experiment(parse_config(j));
  EXPECT_TRUE(r.outcomes[0].tuned);
  EXPECT_EQ(r.outcomes[0].step_parameter, 0.5);
  const ExperimentConfig c = parse_config(j);
  const ProblemInstance inst = build_instance(c.instance, 4);
  const auto grid = step_candidates(c.algorithms[1], inst);
  ASSERT_EQ(grid.size(), 5u);
  EXPECT_DOUBLE_EQ(grid.front(), 1.0 / inst.constants.L1);
  EXPECT_NE(std::find(grid.begin(), grid.end(), r.outcomes[1].step_parameter), grid.end());
}

TEST(Experiment, OutputsReproducibleAndLossRecomputable) {
  const auto base = std::filesystem::temp_directory_path() / "zojade_harness_test";
  std::filesystem::remove_all(base);
  const ExperimentConfig cfg = parse_config(small_config());
  write_outputs(run_experiment(cfg), (base / "a").string());
  write_outputs(run_experiment(cfg), (base / "b").string());
  int files = 0;
  const std::string hash = config_hash(cfg);
  for (const auto& e : std::filesystem::directory_iterator(base / "a")) {
    ++files;
    const std::string body = slurp(e.path());
    EXPECT_EQ(body, slurp(base / "b" / e.path().filename())) << e.path();
    EXPECT_NE(body.find(hash), std::string::npos) << e.path();
  }
  EXPECT_EQ(files, 2 * 2 + 2 * 2 + 2 + 1);

  // final e_f from the stored iterates
  const ProblemInstance inst = build_instance(cfg.instance, 4);
  std::ifstream fin(base / "a" / "final_zo_jade_seed1.csv");
  const auto fx = csv::read_table(fin);
  Matrix x(4, 3);
  for (Index i = 0; i < 4; ++i)
    for (Index k = 0; k < 3; ++k) x(i, k) = fx.columns.at("x" + std::to_string(k))[i];
  std::ifstream tin(base / "a" / "trace_zo_jade_seed1.csv");
  const auto tr = csv::read_table(tin);
  EXPECT_NEAR(loss_metric(inst, x).e_f, tr.columns.at("e_f").back(), 1e-12);
}

TEST(Experiment, FailureFlagged) {
  json j = small_config();
  j["algorithms"] = json::parse(R"([{"name": "consensus_gd", "eta": 100.0}])");
  j["budget"] = 5000;
  EXPECT_TRUE(run_experiment(parse_config(j)).any_failed);
}
