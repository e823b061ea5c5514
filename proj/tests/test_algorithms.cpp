#include "zojade/algorithms.hpp"

#include <gtest/gtest.h>

using namespace zojade;

namespace {

std::shared_ptr<const ConsensusMatrix> network(TopologyKind kind, int n) {
  return std::make_shared<const ConsensusMatrix>(metropolis_hastings(topology_from_spec({kind, n, 0.5, 1})));
}

std::vector<BlackBoxObjective> one_quadratic(double a, double b) {
  std::vector<BlackBoxObjective> f;
  f.emplace_back(1, [a, b](const Vector& x) { return 0.5 * a * x[0] * x[0] + b * x[0]; });
  return f;
}

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }

ProblemInstance separable(int n, Index d, std::uint64_t seed = 1) {
  SeparableQuadraticSpec s;
  s.n = n;
  s.d = d;
  s.seed = seed;
  return separable_quadratic_instance(s);
}

}  // namespace

TEST(JadeStep, ScalarQuadraticOneStep) {
  // small mu is left out: the Hessian estimate carries eps/mu^2 rounding
  for (double mu : {0.1, 0.5, 2.0})
    for (double x0 : {-3.0, 0.0, 5.5}) {
      auto f = one_quadratic(2.0, -3.0);
      NetworkState s = NetworkState::initial(network(TopologyKind::ring, 1), m1(x0));
      s = jade_step(s, f, {1.0, mu, 1e-8});
      EXPECT_NEAR(s.x(0, 0), 1.5, 1e-12);
    }
}

TEST(JadeStep, QueriesPerStep) {
  const ProblemInstance inst = separable(4, 3);
  auto f = inst.make_objectives();
  NetworkState s = NetworkState::initial(network(TopologyKind::ring, 4), initial_points(4, 3, 1));
  for (int t = 1; t <= 5; ++t) {
    s = jade_step(s, f, {0.1, 1e-3, 1e-8});
    EXPECT_EQ(s.total_queries, static_cast<std::uint64_t>(4 * 7 * t));
  }
  for (const auto& o : f) EXPECT_EQ(o.query_count(), 35u);
  EXPECT_EQ(queries_per_iteration(Algorithm::zo_jade, 3), 7u);
  EXPECT_EQ(queries_per_iteration(Algorithm::gradient_tracking, 3), 6u);
}

TEST(JadeStep, FirstStepUsesZeroInitialization) {
  auto f = one_quadratic(4.0, 1.0);
  NetworkState s = NetworkState::initial(network(TopologyKind::ring, 1), m1(2.0));
  s = jade_step(s, f, {0.5, 0.1, 1e-8});
  // g = a x - (a x + b) = -b, h = a; y = g, z = h
  EXPECT_NEAR(s.g(0, 0), -1.0, 1e-12);
  EXPECT_NEAR(s.h(0, 0), 4.0, 1e-12);
  EXPECT_NEAR(s.y(0, 0), -1.0, 1e-12);
  EXPECT_NEAR(s.z(0, 0), 4.0, 1e-12);
  EXPECT_NEAR(s.x(0, 0), 0.5 * 2.0 + 0.5 * (-0.25), 1e-12);
}

TEST(JadeStep, FixedPointIsKept) {
  const ProblemInstance base = separable(1, 3);
  const CostPtr cost = base.costs.front();
  ProblemInstance inst = base;
  inst.costs.assign(5, cost);
  auto f = inst.make_objectives();
  Matrix x0 = base.x_star.transpose().replicate(5, 1);
  NetworkState s = NetworkState::initial(network(TopologyKind::ring, 5), x0);
  s = jade_step(s, f, {0.3, 1e-2, 1e-8});  // warm-up populates y, z
  for (int t = 0; t < 20; ++t) s = jade_step(s, f, {0.3, 1e-2, 1e-8});
  EXPECT_LE((s.x - x0).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(JadeStep, TrackingConservation) {
  const ProblemInstance inst = synthetic_classification({6, 10, 8, 1, 0.1, 2.0, 1.0});
  auto f = inst.make_objectives();
  NetworkState s = NetworkState::initial(network(TopologyKind::erdos_renyi, 8), initial_points(8, 6, 2));
  for (int t = 0; t < 200; ++t) {
    s = jade_step(s, f, {0.2, 1e-3, 1e-8});
    ASSERT_LE(s.tracking_residual_y(), 1e-9);
    ASSERT_LE(s.tracking_residual_z(), 1e-9);
  }
}

TEST(JadeStep, QuadraticTrajectoriesIndependentOfMu) {
  const ProblemInstance inst = separable(6, 4);
  auto p = network(TopologyKind::ring, 6);
  auto fa = inst.make_objectives(), fb = inst.make_objectives();
  NetworkState a = NetworkState::initial(p, initial_points(6, 4, 3));
  NetworkState b = a;
  for (int t = 0; t < 300; ++t) {
    a = jade_step(a, fa, {0.1, 1e-1, 1e-8});
    b = jade_step(b, fb, {0.1, 1e-4, 1e-8});
    ASSERT_LE((a.x - b.x).cwiseAbs().maxCoeff(), 1e-6) << "t=" << t;
  }
}

TEST(JadeStep, ConvergesToClosedFormAndConsensus) {
  const ProblemInstance inst = separable(10, 5, 4);
  auto f = inst.make_objectives();
  NetworkState s = NetworkState::initial(network(TopologyKind::path, 10), initial_points(10, 5, 1));
  for (int t = 0; t < 3000; ++t) s = jade_step(s, f, {0.5, 1e-3, 1e-8});
  for (Index i = 0; i < 10; ++i) EXPECT_LE((Vector(s.x.row(i).transpose()) - inst.x_star).norm(), 1e-8);
  EXPECT_LE(s.consensus_error(), 1e-6 * (1 + s.mean_x().norm()));
  EXPECT_EQ(s.clamp_count, 0u);
}

TEST(JadeStep, ClampActivatesOnNegativeCurvature) {
  std::vector<BlackBoxObjective> f;
  f.emplace_back(1, [](const Vector& x) { return -x[0] * x[0]; });
  NetworkState s = NetworkState::initial(network(TopologyKind::ring, 1), m1(1.0));
  s = jade_step(s, f, {0.1, 1e-2, 1e-3});
  EXPECT_EQ(s.clamp_count, 1u);
  EXPECT_TRUE(s.x.allFinite());
}

TEST(JadeStep, NonFiniteAbortsWithAgentAndCoordinate) {
  std::vector<BlackBoxObjective> f;
  f.emplace_back(2, [](const Vector& x) { return x.squaredNorm(); });
  NetworkState s = NetworkState::initial(network(TopologyKind::ring, 1), Matrix::Zero(1, 2));
  s.y(0, 1) = -std::numeric_limits<double>::infinity();
  s.g(0, 1) = 0.0;
  s.z(0, 1) = std::nan("");
  try {
    jade_step(s, f, {0.5, 1e-2, 1e-8});
    FAIL();
  } catch (const RunAborted& e) {
    EXPECT_NE(std::string(e.what()).find("agent 0"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("coordinate 1"), std::string::npos);
  }
}

TEST(JadeStep, ConfigValidation) {
  EXPECT_THROW((JadeConfig{0.0, 1e-3, 1e-8}.validate()), ConfigError);
  EXPECT_THROW((JadeConfig{1.5, 1e-3, 1e-8}.validate()), ConfigError);
  EXPECT_THROW((JadeConfig{0.5, 0.0, 1e-8}.validate()), ConfigError);
  EXPECT_THROW((JadeConfig{0.5, 1e-3, 0.0}.validate()), ConfigError);
  EXPECT_NO_THROW((JadeConfig{1.0, 1e-3, 1e-8}.validate()));
}

TEST(GradientTracking, ScalarOneStep) {
  auto f = one_quadratic(4.0, 0.0);
  NetworkState s = NetworkState::initial(network(TopologyKind::ring, 1), m1(3.0));
  s = gradient_tracking_step(s, f, {0.25, 0.1});
  EXPECT_NEAR(s.x(0, 0), 0.0, 1e-12);
}

TEST(GradientTracking, ZeroStepKeepsIterates) {
  const ProblemInstance inst = separable(5, 2);
  auto f = inst.make_objectives();
  const Matrix x0 = initial_points(5, 2, 1);
  NetworkState s = NetworkState::initial(network(TopologyKind::complete, 5), x0);
  // complete graph averages in one step; eta = 0 then leaves x fixed
  s = gradient_tracking_step(s, f, {0.0, 1e-3});
  const Matrix after = s.x;
  for (int t = 0; t < 10; ++t) s = gradient_tracking_step(s, f, {0.0, 1e-3});
  EXPECT_LE((s.x - after).cwiseAbs().maxCoeff(), 1e-15);
  auto g = inst.make_objectives();
  std::vector<BlackBoxObjective> single;
  single.push_back(g.front());
  NetworkState one = NetworkState::initial(network(TopologyKind::ring, 1), x0.topRows(1));
  for (int t = 0; t < 5; ++t) one = gradient_tracking_step(one, single, {0.0, 1e-3});
  EXPECT_EQ(one.x, x0.topRows(1));
}

TEST(GradientTracking, ConservationAndQueries) {
  const ProblemInstance inst = synthetic_ridge({4, 10, 6, 1, 0.1, 0.1, 1.0});
  auto f = inst.make_objectives();
  NetworkState s = NetworkState::initial(network(TopologyKind::ring, 6), initial_points(6, 4, 1));
  for (int t = 1; t <= 100; ++t) {
    s = gradient_tracking_step(s, f, {0.05, 1e-3});
    ASSERT_LE(s.tracking_residual_y(), 1e-9);
  }
  EXPECT_EQ(s.total_queries, 6u * 8u * 100u);
}

TEST(ConsensusGd, ZeroStepContractsAtSpectralGap) {
  const ProblemInstance inst = separable(8, 2);
  auto f = inst.make_objectives();
  auto p = network(TopologyKind::ring, 8);
  const double gap = spectral_gap(*p);
  NetworkState s = NetworkState::initial(p, initial_points(8, 2, 5));
  const Vector mean = s.mean_x();
  const double start = s.consensus_error();
  for (int t = 0; t < 60; ++t) s = consensus_gd_step(s, f, {0.0, 1e-3});
  EXPECT_LE(s.consensus_error(), std::pow(gap, 60) * start * (1 + 1e-9));
  EXPECT_LE((s.mean_x() - mean).norm(), 1e-14);
  // the rate is attained: the decay over the last 20 steps is close to gap^20
  NetworkState later = s;
  for (int t = 0; t < 20; ++t) later = consensus_gd_step(later, f, {0.0, 1e-3});
  EXPECT_NEAR(std::log(later.consensus_error() / s.consensus_error()) / 20.0, std::log(gap), 0.02);
}

TEST(ConsensusGd, SingleAgentIsGradientDescent) {
  auto f = one_quadratic(2.0, -4.0);
  NetworkState s = NetworkState::initial(network(TopologyKind::ring, 1), m1(0.0));
  double x = 0.0;
  for (int t = 0; t < 10; ++t) {
    s = consensus_gd_step(s, f, {0.1, 0.1});
    x -= 0.1 * (2.0 * x - 4.0);
    EXPECT_NEAR(s.x(0, 0), x, 1e-12);
  }
}

TEST(ConsensusGd, IdenticalAgentsFollowCentralizedPath) {
  const ProblemInstance base = separable(1, 3);
  ProblemInstance inst = base;
  inst.costs.assign(4, base.costs.front());
  auto f = inst.make_objectives();
  const Vector x0 = Vector::Constant(3, 2.0);
  NetworkState s = NetworkState::initial(network(TopologyKind::ring, 4), x0.transpose().replicate(4, 1));
  Vector x = x0;
  for (int t = 0; t < 20; ++t) {
    s = consensus_gd_step(s, f, {0.2, 1e-3});
    x -= 0.2 * base.costs.front()->gradient(x);
    for (Index i = 0; i < 4; ++i) EXPECT_LE((Vector(s.x.row(i).transpose()) - x).norm(), 1e-12);
  }
}

TEST(Loss, Examples) {
  SeparableQuadraticSpec spec;
  spec.n = 3;
  spec.d = 2;
  const ProblemInstance inst = separable_quadratic_instance(spec);
  const Matrix at_star = inst.x_star.transpose().replicate(3, 1);
  EXPECT_EQ(loss_metric(inst, at_star).e_f, 0.0);

  // n = 1, f = (x - 1)^2 + 1: f_star = 1, at x = 2 the loss is 1
  ProblemInstance one;
  auto q = std::make_shared<const QuadraticCost>(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, -2.0), 2.0);
  one.costs = {q};
  one.global = q;
  one.d = 1;
  one.x_star = Vector::Constant(1, 1.0);
  one.f_star = q->value(one.x_star);
  EXPECT_DOUBLE_EQ(one.f_star, 1.0);
  const LossValue lv = loss_metric(one, m1(2.0));
  EXPECT_DOUBLE_EQ(lv.e_f, 1.0);
  EXPECT_FALSE(lv.absolute);

  // f = x^2: f_star = 0, absolute error
  auto sq = std::make_shared<const QuadraticCost>(Matrix::Constant(1, 1, 2.0), Vector::Zero(1), 0.0);
  one.costs = {sq};
  one.global = sq;
  one.x_star = Vector::Zero(1);
  one.f_star = 0.0;
  const LossValue abs = loss_metric(one, m1(3.0));
  EXPECT_TRUE(abs.absolute);
  EXPECT_DOUBLE_EQ(abs.e_f, 9.0);
}

TEST(Run, BudgetBelowOneStep) {
  const ProblemInstance inst = separable(3, 4);
  RunConfig cfg;
  cfg.budget = 8;  // < 2d + 1
  const RunTrace t = run(inst, network(TopologyKind::ring, 3), initial_points(3, 4, 1), cfg);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].iteration, 0);
  EXPECT_EQ(t.total_queries, 0u);
}

TEST(Run, BudgetAccountingAndRecording) {
  const ProblemInstance inst = separable(3, 4);
  RunConfig cfg;
  cfg.budget = 100;
  cfg.record_every = 5;
  const RunTrace t = run(inst, network(TopologyKind::ring, 3), initial_points(3, 4, 1), cfg);
  EXPECT_EQ(t.rows.back().iteration, 11);  // 11 * 9 = 99 <= 100
  EXPECT_EQ(t.rows.back().queries_per_agent, 99u);
  EXPECT_EQ(t.total_queries, 3u * 99u);
  std::vector<long> its;
  for (const auto& r : t.rows) its.push_back(r.iteration);
  EXPECT_EQ(its, (std::vector<long>{0, 5, 10, 11}));
  for (std::size_t k = 1; k < t.rows.size(); ++k) EXPECT_GE(t.rows[k].queries_per_agent, t.rows[k - 1].queries_per_agent);
}

TEST(Run, Deterministic) {
  const ProblemInstance inst = synthetic_classification({4, 10, 5, 1, 0.1, 2.0, 1.0});
  auto p = network(TopologyKind::erdos_renyi, 5);
  for (auto alg : {Algorithm::zo_jade, Algorithm::gradient_tracking, Algorithm::consensus_gd}) {
    RunConfig cfg;
    cfg.algorithm = alg;
    cfg.eta = 0.1;
    cfg.budget = 500;
    const RunTrace a = run(inst, p, initial_points(5, 4, 7), cfg);
    const RunTrace b = run(inst, p, initial_points(5, 4, 7), cfg);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t k = 0; k < a.rows.size(); ++k) EXPECT_EQ(a.rows[k].e_f, b.rows[k].e_f);
    EXPECT_EQ(a.final_x, b.final_x);
  }
}

TEST(Run, MonotoneDecreaseOnSeparableQuadraticsCompleteGraph) {
  const ProblemInstance inst = separable(6, 4, 2);
  RunConfig cfg;
  cfg.epsilon = 0.05;
  cfg.budget = 9 * 400;
  const RunTrace t = run(inst, network(TopologyKind::complete, 6), initial_points(6, 4, 1), cfg);
  for (std::size_t k = 3; k < t.rows.size(); ++k)
    if (t.rows[k].e_f > 1e-13) EXPECT_LE(t.rows[k].e_f, t.rows[k - 1].e_f) << "row " << k;
}

TEST(Run, FailureIsRecorded) {
  const ProblemInstance inst = separable(3, 2);
  RunConfig cfg;
  cfg.algorithm = Algorithm::consensus_gd;
  cfg.eta = 100.0;
  cfg.budget = 4000;
  const RunTrace t = run(inst, network(TopologyKind::ring, 3), initial_points(3, 2, 1), cfg);
  EXPECT_TRUE(t.failed);
  EXPECT_FALSE(t.diagnostic.empty());
}

TEST(Run, StopAtTarget) {
  const ProblemInstance inst = separable(4, 3);
  RunConfig cfg;
  cfg.epsilon = 0.5;
  cfg.budget = 100000;
  cfg.stop_at_ef = 1e-6;
  const RunTrace t = run(inst, network(TopologyKind::ring, 4), initial_points(4, 3, 1), cfg);
  EXPECT_LE(t.rows.back().e_f, 1e-6);
  EXPECT_GT(t.rows[t.rows.size() - 2].e_f, 1e-6);
  EXPECT_EQ(t.queries_to_reach(1e-6), t.rows.back().queries_per_agent);
}

TEST(InitialPoints, DeterministicAndSeedDependent) {
  EXPECT_EQ(initial_points(4, 3, 1), initial_points(4, 3, 1));
  EXPECT_NE(initial_points(4, 3, 1), initial_points(4, 3, 2));
  EXPECT_EQ(initial_points(4, 3, 1, 2.0), 2.0 * initial_points(4, 3, 1));
}

TEST(AlgorithmNames, RoundTrip) {
  for (auto a : {Algorithm::zo_jade, Algorithm::gradient_tracking, Algorithm::consensus_gd})
    EXPECT_EQ(algorithm_from_string(to_string(a)), a);
  EXPECT_THROW(algorithm_from_string("psgf"), ConfigError);
}
