#pragma once

// Synchronous simulation of ZO-JADE and two zeroth-order baselines over a
// fixed consensus matrix. Agent quantities are stacked as n x d matrices,
// row i belonging to agent i, so P * X is one round of neighbor averaging.

#include "zojade/core.hpp"
#include "zojade/graph.hpp"
#include "zojade/objectives.hpp"
#include "zojade/oracle.hpp"
#include "zojade/rng.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace zojade {

enum class Algorithm { zo_jade, gradient_tracking, consensus_gd };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::zo_jade: return "zo_jade";
    case Algorithm::gradient_tracking: return "gradient_tracking";
    case Algorithm::consensus_gd: return "consensus_gd";
  }
  return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  for (auto a : {Algorithm::zo_jade, Algorithm::gradient_tracking, Algorithm::consensus_gd})
    if (to_string(a) == s) return a;
  throw ConfigError("unknown algorithm '" + s + "'");
}

/// Function queries per agent per iteration.
inline std::uint64_t queries_per_iteration(Algorithm a, Index d) {
  return a == Algorithm::zo_jade ? static_cast<std::uint64_t>(2 * d + 1) : static_cast<std::uint64_t>(2 * d);
}

struct AgentState {
  Vector x, g, h, y, z;
};

struct JadeConfig {
  double epsilon = 0.05;
  double mu = 1e-3;
  double z_floor = 1e-8;

  void validate() const {
    // epsilon = 1 is admitted: it is plain tracked Jacobi and is handy in tests.
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("zo_jade: epsilon must lie in (0, 1]");
    if (!(mu > 0.0)) throw ConfigError("zo_jade: mu must be positive");
    if (!(z_floor > 0.0)) throw ConfigError("zo_jade: z_floor must be positive");
  }
};

struct BaselineConfig {
  double eta = 0.01;
  double mu = 1e-3;

  void validate() const {
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("baseline: eta must be non-negative");
    if (!(mu > 0.0)) throw ConfigError("baseline: mu must be positive");
  }
};

/// Whole-network state after `iteration` synchronous steps.
struct NetworkState {
  std::shared_ptr<const ConsensusMatrix> p;
  Matrix x, g, h, y, z;  // n x d
  long iteration = 0;
  std::uint64_t total_queries = 0;
  std::uint64_t clamp_count = 0;  // z entries lifted to z_floor, cumulative

  /// x(0) = x0; g, h, y, z start at zero.
  static NetworkState initial(std::shared_ptr<const ConsensusMatrix> p, const Matrix& x0) {
    if (!p) throw ConfigError("network state needs a consensus matrix");
    if (x0.rows() != p->size()) throw ConfigError("initial points: one row per agent required");
    NetworkState s;
    s.p = std::move(p);
    s.x = x0;
    s.g = s.h = s.y = s.z = Matrix::Zero(x0.rows(), x0.cols());
    return s;
  }

  int agents() const { return static_cast<int>(x.rows()); }
  Index dimension() const { return x.cols(); }

  AgentState agent(int i) const { return {x.row(i), g.row(i), h.row(i), y.row(i), z.row(i)}; }

  Vector mean_x() const { return x.colwise().mean(); }
  /// Displacement from the mean, x - 1 xbar^T.
  Matrix displacement() const { return x.rowwise() - x.colwise().mean(); }
  double consensus_error() const { return displacement().norm(); }

  /// ||sum_i y_i - sum_i g_i||_inf relative to ||sum_i g_i||_inf (absolute when the sum is 0).
  double tracking_residual_y() const { return relative_sum_gap(y, g); }
  double tracking_residual_z() const { return relative_sum_gap(z, h); }

 private:
  static double relative_sum_gap(const Matrix& tracked, const Matrix& signal) {
    if (signal.size() == 0) return 0.0;
    const Eigen::RowVectorXd ref = signal.colwise().sum();
    const double gap = (tracked.colwise().sum() - ref).cwiseAbs().maxCoeff();
    const double scale = ref.cwiseAbs().maxCoeff();
    return scale > 0.0 ? gap / scale : gap;
  }
};

namespace detail {
inline void check_objectives(const NetworkState& s, std::span<BlackBoxObjective> objectives) {
  if (static_cast<int>(objectives.size()) != s.agents()) throw ConfigError("one objective per agent required");
  for (const auto& f : objectives)
    if (f.dimension() != s.dimension()) throw ConfigError("objective dimension does not match state");
}
}  // namespace detail

/// One synchronous ZO-JADE iteration. Every agent reads only t-1 values:
///   g_i(t) = hess_hat_i(x_i) .* x_i - grad_hat_i(x_i),   h_i(t) = hess_hat_i(x_i)
///   y(t)   = P (y(t-1) + g(t) - g(t-1)),   z(t) = P (z(t-1) + h(t) - h(t-1))
///   x_i(t) = (1 - eps) sum_j p_ij x_j(t-1) + eps y_i(t) ./ max(z_i(t), z_floor)
/// The curvature estimate is taken at the agent's own x_i(t-1).
inline NetworkState jade_step(const NetworkState& s, std::span<BlackBoxObjective> objectives,
                              const JadeConfig& cfg) {
  cfg.validate();
  detail::check_objectives(s, objectives);
  const int n = s.agents();
  const Index d = s.dimension();
  const Matrix& w = s.p->weights();

  Matrix g_new(n, d), h_new(n, d);
  std::uint64_t queries = 0;
  for (int i = 0; i < n; ++i) {
    const Vector xi = s.x.row(i);
    const OracleOutput o = estimate_both(objectives[i], xi, cfg.mu);
    queries += o.queries_used;
    h_new.row(i) = o.hessian_diag_estimate;
    g_new.row(i) = o.hessian_diag_estimate.cwiseProduct(xi) - o.grad_estimate;
  }

  NetworkState next;
  next.p = s.p;
  next.g = std::move(g_new);
  next.h = std::move(h_new);
  next.y = w * (s.y + next.g - s.g);
  next.z = w * (s.z + next.h - s.h);
  next.x = (1.0 - cfg.epsilon) * (w * s.x);
  next.clamp_count = s.clamp_count;
  for (int i = 0; i < n; ++i) {
    for (Index k = 0; k < d; ++k) {
      double zk = next.z(i, k);
      if (!(zk >= cfg.z_floor)) {
        if (std::isnan(zk))
          throw RunAborted("zo_jade: non-finite curvature tracker at agent " + std::to_string(i) +
                           ", coordinate " + std::to_string(k));
        zk = cfg.z_floor;
        ++next.clamp_count;
      }
      const double ratio = next.y(i, k) / zk;
      if (!std::isfinite(ratio))
        throw RunAborted("zo_jade: non-finite y/z at agent " + std::to_string(i) + ", coordinate " +
                         std::to_string(k) + " (y=" + format_double(next.y(i, k)) + ", z=" + format_double(zk) + ")");
      next.x(i, k) += cfg.epsilon * ratio;
    }
  }
  next.iteration = s.iteration + 1;
  next.total_queries = s.total_queries + queries;
  return next;
}

namespace detail {
inline Matrix stacked_gradient_estimates(const NetworkState& s, std::span<BlackBoxObjective> objectives, double mu,
                                         std::uint64_t& queries) {
  Matrix grads(s.agents(), s.dimension());
  for (int i = 0; i < s.agents(); ++i) {
    const std::uint64_t before = objectives[i].query_count();
    grads.row(i) = estimate_gradient(objectives[i], s.x.row(i).transpose(), mu);
    queries += objectives[i].query_count() - before;
  }
  return grads;
}

inline void check_finite(const Matrix& x, const char* who) {
  for (Index i = 0; i < x.rows(); ++i)
    for (Index k = 0; k < x.cols(); ++k)
      if (!std::isfinite(x(i, k)))
        throw RunAborted(std::string(who) + ": non-finite iterate at agent " + std::to_string(i) + ", coordinate " +
                         std::to_string(k));
}
}  // namespace detail

/// ZO gradient tracking: y(t) = P (y(t-1) + g(t) - g(t-1)) over g = grad_hat,
/// x(t) = P x(t-1) - eta y(t). 2d queries per agent.
inline NetworkState gradient_tracking_step(const NetworkState& s, std::span<BlackBoxObjective> objectives,
                                           const BaselineConfig& cfg) {
  cfg.validate();
  detail::check_objectives(s, objectives);
  const Matrix& w = s.p->weights();
  NetworkState next;
  next.p = s.p;
  std::uint64_t queries = 0;
  next.g = detail::stacked_gradient_estimates(s, objectives, cfg.mu, queries);
  next.y = w * (s.y + next.g - s.g);
  next.h = s.h;
  next.z = s.z;
  next.x = w * s.x - cfg.eta * next.y;
  detail::check_finite(next.x, "gradient_tracking");
  next.iteration = s.iteration + 1;
  next.total_queries = s.total_queries + queries;
  next.clamp_count = s.clamp_count;
  return next;
}

/// Consensus plus local ZO gradient step: x(t) = P x(t-1) - eta grad_hat(x(t-1)).
/// g holds the latest gradient estimates for diagnostics.
inline NetworkState consensus_gd_step(const NetworkState& s, std::span<BlackBoxObjective> objectives,
                                      const BaselineConfig& cfg) {
  cfg.validate();
  detail::check_objectives(s, objectives);
  const Matrix& w = s.p->weights();
  NetworkState next;
  next.p = s.p;
  std::uint64_t queries = 0;
  next.g = detail::stacked_gradient_estimates(s, objectives, cfg.mu, queries);
  next.y = next.g;  // no tracker; keeps the sum residual at zero
  next.h = s.h;
  next.z = s.z;
  next.x = w * s.x - cfg.eta * next.g;
  detail::check_finite(next.x, "consensus_gd");
  next.iteration = s.iteration + 1;
  next.total_queries = s.total_queries + queries;
  next.clamp_count = s.clamp_count;
  return next;
}

// ---------------------------------------------------------------------------
// Loss metric and traced runs

struct LossValue {
  double e_f = 0.0;
  bool absolute = false;  // |f(x_star)| < 1e-12: reported unnormalized
};

inline constexpr double kLossDenominatorFloor = 1e-12;

/// e_f = ((1/n) sum_i f(x_i) - f(x_star)) / |f(x_star)|, where f is the
/// global average cost and x_i are the rows of `xs`.
inline LossValue loss_metric(const ProblemInstance& inst, const Matrix& xs) {
  double mean = 0.0;
  for (Index i = 0; i < xs.rows(); ++i) mean += inst.global->value(xs.row(i).transpose());
  mean /= static_cast<double>(xs.rows());
  const double gap = mean - inst.f_star;
  if (std::abs(inst.f_star) < kLossDenominatorFloor) return {gap, true};
  return {gap / std::abs(inst.f_star), false};
}

struct TraceRow {
  long iteration = 0;
  std::uint64_t queries_per_agent = 0;
  double e_f = 0.0;
  double consensus_error = 0.0;
  double tracking_residual_y = 0.0;
  double tracking_residual_z = 0.0;
  std::uint64_t clamp_count = 0;
};

struct RunTrace {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::string config_hash;
  double step_parameter = 0.0;  // epsilon for zo_jade, eta for baselines
  std::vector<TraceRow> rows;
  bool failed = false;
  std::string diagnostic;
  bool absolute_error_fallback = false;
  Matrix final_x;
  std::uint64_t total_queries = 0;

  /// Queries per agent at the first recorded row with e_f <= target.
  std::optional<std::uint64_t> queries_to_reach(double target) const {
    for (const auto& r : rows)
      if (r.e_f <= target) return r.queries_per_agent;
    return std::nullopt;
  }
};

struct RunConfig {
  Algorithm algorithm = Algorithm::zo_jade;
  double epsilon = 0.05;  // zo_jade
  double eta = 0.01;      // baselines
  double mu = 1e-3;
  double z_floor = 1e-8;
  std::uint64_t budget = 10000;  // function queries per agent
  int record_every = 1;
  std::optional<double> stop_at_ef;  // end the run once e_f falls to this level

  double step_parameter() const { return algorithm == Algorithm::zo_jade ? epsilon : eta; }
};

/// x_i(0) entries drawn N(0, scale^2) from the seed's initial-point stream.
inline Matrix initial_points(int n, Index d, std::uint64_t seed, double scale = 1.0) {
  Rng rng = make_stream(seed, stream::kInitialPoints);
  Matrix x0(n, d);
  for (int i = 0; i < n; ++i)
    for (Index k = 0; k < d; ++k) x0(i, k) = scale * rng.normal();
  return x0;
}

/// Iterates until the per-agent query budget cannot cover another step.
/// Rows are recorded at t = 0, every `record_every` iterations, and at the
/// last iteration. Failures are reported in the trace, not thrown.
inline RunTrace run(const ProblemInstance& inst, std::shared_ptr<const ConsensusMatrix> p, const Matrix& x0,
                    const RunConfig& cfg) {
  if (cfg.budget == 0) throw ConfigError("run: budget must be positive");
  if (cfg.record_every < 1) throw ConfigError("run: record_every must be at least 1");
  if (p->size() != inst.agents()) throw ConfigError("run: consensus matrix size does not match agent count");
  if (x0.cols() != inst.d) throw ConfigError("run: initial point dimension does not match instance");

  JadeConfig jade{cfg.epsilon, cfg.mu, cfg.z_floor};
  BaselineConfig base{cfg.eta, cfg.mu};
  if (cfg.algorithm == Algorithm::zo_jade)
    jade.validate();
  else
    base.validate();

  RunTrace trace;
  trace.algorithm = to_string(cfg.algorithm);
  trace.step_parameter = cfg.step_parameter();

  auto objectives = inst.make_objectives();
  NetworkState state = NetworkState::initial(std::move(p), x0);
  const std::uint64_t per_iter = queries_per_iteration(cfg.algorithm, inst.d);
  const auto n = static_cast<std::uint64_t>(inst.agents());

  auto record = [&](const NetworkState& s) {
    const LossValue loss = loss_metric(inst, s.x);
    trace.absolute_error_fallback = trace.absolute_error_fallback || loss.absolute;
    trace.rows.push_back({s.iteration, s.total_queries / n, loss.e_f, s.consensus_error(), s.tracking_residual_y(),
                          s.tracking_residual_z(), s.clamp_count});
    return loss.e_f;
  };

  double ef = record(state);
  try {
    while (state.total_queries / n + per_iter <= cfg.budget) {
      if (cfg.stop_at_ef && ef <= *cfg.stop_at_ef) break;
      switch (cfg.algorithm) {
        case Algorithm::zo_jade: state = jade_step(state, objectives, jade); break;
        case Algorithm::gradient_tracking: state = gradient_tracking_step(state, objectives, base); break;
        case Algorithm::consensus_gd: state = consensus_gd_step(state, objectives, base); break;
      }
      const bool last = state.total_queries / n + per_iter > cfg.budget;
      if (state.iteration % cfg.record_every == 0 || last || cfg.stop_at_ef) {
        ef = record(state);
        if (!std::isfinite(ef)) throw RunAborted(trace.algorithm + ": loss became non-finite");
      }
    }
  } catch (const RunAborted& e) {
    trace.failed = true;
    trace.diagnostic = e.what();
  } catch (const EvaluationError& e) {
    trace.failed = true;
    trace.diagnostic = e.what();
  }
  if (!trace.failed && trace.rows.back().iteration != state.iteration) record(state);
  trace.final_x = state.x;
  trace.total_queries = state.total_queries;
  return trace;
}

}  // namespace zojade
