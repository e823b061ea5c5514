#pragma once

// Numeric checks of the estimator theory: the mu-scaling of the estimator's
// zero Gamma(mu), the four bounds on V(x) = ||grad_hat f(x)||^2, and the
// verification battery behind `zojade verify`.

#include "zojade/algorithms.hpp"
#include "zojade/config.hpp"
#include "zojade/harness.hpp"
#include "zojade/objectives.hpp"
#include "zojade/oracle.hpp"

#include <Eigen/LU>

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace zojade {

// ---------------------------------------------------------------------------
// Gamma(mu)

namespace detail {
inline constexpr std::array<double, 5> kGaussNodes{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                                   0.9061798459386640};
inline constexpr std::array<double, 5> kGaussWeights{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                                     0.4786286704993665, 0.2369268850561891};
}  // namespace detail

/// The central-difference gradient written as an average of the analytic
/// partial derivative over [x_k - mu, x_k + mu]. Same map as the estimator,
/// without its cancellation error. Exact for polynomials up to degree 10.
inline Vector smoothed_gradient(const LocalCost& f, const Vector& x, double mu) {
  Vector out(x.size());
  Vector probe = x;
  for (Index k = 0; k < x.size(); ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < detail::kGaussNodes.size(); ++j) {
      probe[k] = x[k] + mu * detail::kGaussNodes[j];
      s += detail::kGaussWeights[j] * f.gradient(probe)[k];
    }
    probe[k] = x[k];
    out[k] = 0.5 * s;
  }
  return out;
}

/// Jacobian of the estimator: row k is (grad f(x + mu e_k) - grad f(x - mu e_k))^T / (2 mu).
inline Matrix estimator_jacobian(const LocalCost& f, const Vector& x, double mu) {
  const Index d = x.size();
  Matrix j(d, d);
  Vector probe = x;
  for (Index k = 0; k < d; ++k) {
    probe[k] = x[k] + mu;
    const Vector gp = f.gradient(probe);
    probe[k] = x[k] - mu;
    const Vector gm = f.gradient(probe);
    probe[k] = x[k];
    j.row(k) = ((gp - gm) / (2.0 * mu)).transpose();
  }
  return j;
}

inline constexpr double kGammaTolerance = 1e-12;

/// Newton's method on x -> grad_hat f(mu, x), started at `x0`.
inline Vector solve_gamma(const LocalCost& f, double mu, Vector x0, double tol = kGammaTolerance) {
  if (!(mu > 0.0)) throw ConfigError("Gamma(mu): mu must be positive");
  Vector x = std::move(x0);
  double res = smoothed_gradient(f, x, mu).norm();
  for (int it = 0; it < 100 && res > tol; ++it) {
    const Vector step = estimator_jacobian(f, x, mu).partialPivLu().solve(smoothed_gradient(f, x, mu));
    x -= step;
    const double next = smoothed_gradient(f, x, mu).norm();
    if (!std::isfinite(next)) break;
    res = next;
    if (step.norm() <= 1e-15 * (1.0 + x.norm())) break;
  }
  if (!(res <= 100.0 * tol))
    throw EvaluationError("Gamma(mu) solve stalled at residual " + format_double(res) + " for mu=" +
                          format_double(mu));
  return x;
}

// ---------------------------------------------------------------------------
// Running ZO-JADE to a fixed point

struct StationarityOptions {
  double epsilon = 0.5;
  double z_floor = 1e-8;
  long max_iterations = 200000;
  double tolerance = 1e-12;  // on max |x(t) - x(t-1)|, relative to 1 + max |x|
  std::uint64_t seed = 1;    // initial points
  double init_scale = 1.0;
};

struct StationaryRun {
  bool converged = false;
  long iterations = 0;
  Matrix x;
  std::string diagnostic;
};

inline StationaryRun run_to_stationarity(const ProblemInstance& inst, std::shared_ptr<const ConsensusMatrix> p,
                                         double mu, const StationarityOptions& opt) {
  JadeConfig cfg{opt.epsilon, mu, opt.z_floor};
  cfg.validate();
  auto objectives = inst.make_objectives();
  NetworkState s = NetworkState::initial(std::move(p), initial_points(inst.agents(), inst.d, opt.seed, opt.init_scale));
  StationaryRun out;
  try {
    for (long t = 0; t < opt.max_iterations; ++t) {
      NetworkState next = jade_step(s, objectives, cfg);
      const double change = (next.x - s.x).cwiseAbs().maxCoeff();
      const double scale = 1.0 + next.x.cwiseAbs().maxCoeff();
      s = std::move(next);
      if (s.iteration >= 2 && change <= opt.tolerance * scale) {
        out.converged = true;
        break;
      }
    }
    if (!out.converged)
      out.diagnostic = "no fixed point within " + std::to_string(opt.max_iterations) + " iterations";
  } catch (const RunAborted& e) {
    out.diagnostic = e.what();
  } catch (const EvaluationError& e) {
    out.diagnostic = e.what();
  }
  out.iterations = s.iteration;
  out.x = s.x;
  return out;
}

// ---------------------------------------------------------------------------
// mu-scaling of Gamma(mu)

struct ScalingRun {
  double mu = 0.0;
  bool converged = false;
  long iterations = 0;
  double distance = std::numeric_limits<double>::quiet_NaN();  // ||xbar_final - x_star||
  std::string diagnostic;
};

struct ScalingReport {
  std::vector<ScalingRun> runs;
  /// distance(mu_k) / distance(mu_{k+1}); empty when either run did not converge.
  std::vector<std::optional<double>> ratios;
};

/// Runs ZO-JADE to stationarity for each mu in a halving sequence and
/// compares the distances of the limits to x_star.
inline ScalingReport gamma_mu_scaling_check(const ProblemInstance& inst, std::shared_ptr<const ConsensusMatrix> p,
                                            const std::vector<double>& mus, const StationarityOptions& opt = {}) {
  if (mus.size() < 2) throw ConfigError("mu scaling: need at least two mu values");
  const double adm = admissible_mu(inst.constants.m, inst.constants.L1, inst.constants.L3, inst.d);
  for (std::size_t k = 0; k < mus.size(); ++k) {
    if (!(mus[k] > 0.0)) throw ConfigError("mu scaling: mu values must be positive");
    if (mus[k] > adm)
      throw ConfigError("mu scaling: mu=" + format_double(mus[k]) + " exceeds the admissible " + format_double(adm));
    if (k > 0 && std::abs(mus[k] - 0.5 * mus[k - 1]) > 1e-12 * mus[k - 1])
      throw ConfigError("mu scaling: each mu must be half the previous one");
  }
  ScalingReport rep;
  for (double mu : mus) {
    const StationaryRun r = run_to_stationarity(inst, p, mu, opt);
    ScalingRun sr{mu, r.converged, r.iterations, std::numeric_limits<double>::quiet_NaN(), r.diagnostic};
    if (r.converged) sr.distance = (Vector(r.x.colwise().mean().transpose()) - inst.x_star).norm();
    rep.runs.push_back(sr);
  }
  for (std::size_t k = 0; k + 1 < rep.runs.size(); ++k) {
    const auto& a = rep.runs[k];
    const auto& b = rep.runs[k + 1];
    if (a.converged && b.converged && b.distance > 0.0)
      rep.ratios.emplace_back(a.distance / b.distance);
    else
      rep.ratios.emplace_back(std::nullopt);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Bounds on V(x) = ||grad_hat f(x)||^2

/// One inequality at one point, in the form lhs <= rhs + tol.
struct BoundSample {
  double lhs = 0.0;
  double rhs = 0.0;
  double tol = 0.0;
  bool holds() const { return lhs <= rhs + tol; }
};

struct LyapunovPoint {
  double v = 0.0;
  double distance = 0.0;  // ||x - Gamma(mu)||
  BoundSample upper;       // V <= (L1 + mu sqrt(d) L2/2)^2 ||e||^2
  BoundSample lower;       // (m^2 - 2 L1 s - s^2) ||e||^2 <= V
  BoundSample derivative;  // ||dV/dx|| <= (2 L1 + mu L3 d/3)(L1 + mu sqrt(d) L2/2) ||e||
  BoundSample descent;     // dV/dx . phi <= c(mu) (L1 + mu sqrt(d) L2/2)^2 ||e||^2, phi = -grad_hat ./ hess_hat
};

namespace detail {
constexpr double kUnit = std::numeric_limits<double>::epsilon();

struct ZoGradient {
  Vector g;
  Vector err;  // rounding estimate per entry
};

inline ZoGradient zo_gradient(BlackBoxObjective& f, const Vector& x, double mu) {
  const ProbeValues pv = collect_probes(f, x, mu);
  ZoGradient out{gradient_from_probes(pv, mu), Vector(x.size())};
  for (Index k = 0; k < x.size(); ++k)
    out.err[k] = 2.0 * kUnit * (std::abs(pv.plus[k]) + std::abs(pv.minus[k])) / (2.0 * mu) + kUnit * std::abs(out.g[k]);
  return out;
}

struct VValue {
  double v;
  double err;
};

inline VValue v_value(BlackBoxObjective& f, const Vector& x, double mu) {
  const ZoGradient z = zo_gradient(f, x, mu);
  const double en = z.err.norm();
  return {z.g.squaredNorm(), 2.0 * z.g.norm() * en + en * en};
}
}  // namespace detail

/// Evaluates the four inequalities at `x`. V and its derivative are computed
/// from function values only; dV/dx uses central differences with inner
/// step mu/100 and the tolerance absorbs |D(h) - D(2h)| plus rounding.
inline LyapunovPoint lyapunov_point(BlackBoxObjective& f, const SmoothnessConstants& c, const Vector& gamma,
                                    const Vector& x, double mu) {
  const Index d = x.size();
  const double lg = gradient_estimator_lipschitz(c, mu, d);
  const double upper_coef = lg * lg;
  const double lower_coef = lyapunov_lower_coefficient(c, mu, d);
  const double deriv_coef = (2.0 * c.L1 + mu * c.L3 * static_cast<double>(d) / 3.0) * lg;
  const double descent_coef = descent_coefficient(c, mu, d) * upper_coef;
  const double slack = 1e-10;

  const ProbeValues pv = collect_probes(f, x, mu);
  const double center = f(x);
  const Vector g = gradient_from_probes(pv, mu);
  const Vector h = hessian_diag_from_probes(pv, center, mu);
  Vector g_err(d), h_err(d);
  for (Index k = 0; k < d; ++k) {
    const double mag = std::abs(pv.plus[k]) + std::abs(pv.minus[k]);
    g_err[k] = 2.0 * detail::kUnit * mag / (2.0 * mu) + detail::kUnit * std::abs(g[k]);
    h_err[k] = 2.0 * detail::kUnit * (mag + 2.0 * std::abs(center)) / (mu * mu) + detail::kUnit * std::abs(h[k]);
  }
  const double ge = g_err.norm();
  const double v_err = 2.0 * g.norm() * ge + ge * ge;
  // Gamma is the zero of the exact map; the rounded estimator's zero can sit
  // up to |g_err| / m away from it.
  const double gamma_err = ge / c.m;

  LyapunovPoint pt;
  pt.v = g.squaredNorm();
  pt.distance = (x - gamma).norm();
  const double e2 = pt.distance * pt.distance;
  const double de2 = 2.0 * pt.distance * gamma_err + gamma_err * gamma_err;

  pt.upper = {pt.v, upper_coef * e2, v_err + upper_coef * de2 + slack * upper_coef * e2};
  pt.lower = {lower_coef * e2, pt.v, v_err + std::abs(lower_coef) * de2 + slack * std::abs(lower_coef) * e2};

  const double hin = mu / 100.0;
  Vector dv(d), dv_err(d);
  Vector probe = x;
  auto central = [&](Index k, double step, double& err) {
    probe[k] = x[k] + step;
    const auto vp = detail::v_value(f, probe, mu);
    probe[k] = x[k] - step;
    const auto vm = detail::v_value(f, probe, mu);
    probe[k] = x[k];
    err = (vp.err + vm.err) / (2.0 * step);
    return (vp.v - vm.v) / (2.0 * step);
  };
  for (Index k = 0; k < d; ++k) {
    double e1 = 0.0, e2h = 0.0;
    const double d1 = central(k, hin, e1);
    const double d2 = central(k, 2.0 * hin, e2h);
    dv[k] = d1;
    dv_err[k] = std::abs(d1 - d2) + e1 + e2h;
  }
  const double dv_tol = dv_err.norm();
  pt.derivative = {dv.norm(), deriv_coef * pt.distance, dv_tol + deriv_coef * gamma_err + slack * deriv_coef * pt.distance};

  Vector phi(d), phi_err(d);
  for (Index k = 0; k < d; ++k) {
    phi[k] = -g[k] / h[k];
    phi_err[k] = (g_err[k] + std::abs(phi[k]) * h_err[k]) / std::abs(h[k]);
  }
  pt.descent = {dv.dot(phi), descent_coef * e2,
                dv_tol * phi.norm() + dv.norm() * phi_err.norm() + std::abs(descent_coef) * de2 +
                    slack * std::abs(descent_coef) * e2};
  return pt;
}

struct InequalityTally {
  explicit InequalityTally(std::string n = {}) : name(std::move(n)) {}

  std::string name;
  int checked = 0;
  int violated = 0;
  double worst_ratio = 0.0;  // max over points of (lhs - rhs) / max(tol, tiny); positive beyond tol means a violation
  std::string first_violation;

  bool passed() const { return violated == 0; }

  void add(const BoundSample& s, const Vector& x) {
    ++checked;
    const double r = (s.lhs - s.rhs) / std::max(s.tol, std::numeric_limits<double>::min());
    if (checked == 1 || r > worst_ratio) worst_ratio = r;
    if (!s.holds()) {
      if (violated == 0)
        first_violation = "lhs=" + format_double(s.lhs) + " rhs=" + format_double(s.rhs) + " tol=" +
                          format_double(s.tol) + " at " + format_point(x);
      ++violated;
    }
  }

  json to_json() const {
    json j = {{"inequality", name}, {"checked", checked}, {"violated", violated}, {"passed", passed()}};
    if (violated) j["first_violation"] = first_violation;
    return j;
  }
};

struct LyapunovSampling {
  int points = 100;
  double radius = 1.0;  // x = Gamma + r u, u a unit direction, r uniform in [0.05, 1] * radius
  std::uint64_t seed = 1;
  std::optional<double> box;  // sample uniformly in [-box + 2 mu, box - 2 mu]^d instead
};

struct LyapunovReport {
  double mu = 0.0;
  Vector gamma;
  InequalityTally upper{"upper"}, lower{"lower"}, derivative{"derivative"}, descent{"descent"};
  /// The descent inequality is established only when L1 <= 2m; beyond that
  /// it is still evaluated and reported, but does not decide `passed`.
  bool descent_applicable = true;

  bool passed() const {
    return upper.passed() && lower.passed() && derivative.passed() && (!descent_applicable || descent.passed());
  }

  json to_json() const {
    json j = {{"mu", format_double(mu)},
              {"passed", passed()},
              {"inequalities", {upper.to_json(), lower.to_json(), derivative.to_json(), descent.to_json()}},
              {"descent_applicable", descent_applicable}};
    return j;
  }
};

/// Checks the four bounds on V at sampled points around Gamma(mu).
/// Quadratics (L3 = 0) use Gamma(mu) = x_star.
inline LyapunovReport lyapunov_bounds_check(const ProblemInstance& inst, double mu, const LyapunovSampling& s = {}) {
  const SmoothnessConstants& c = inst.constants;
  const double adm = admissible_mu(c.m, c.L1, c.L3, inst.d);
  if (!(mu > 0.0)) throw ConfigError("lyapunov check: mu must be positive");
  if (mu > adm)
    throw ConfigError("lyapunov check: mu=" + format_double(mu) + " exceeds the admissible " + format_double(adm));
  if (s.points < 1) throw ConfigError("lyapunov check: need at least one point");

  LyapunovReport rep;
  rep.mu = mu;
  rep.gamma = c.L3 == 0.0 ? inst.x_star : solve_gamma(*inst.global, mu, inst.x_star);
  rep.descent_applicable = c.L1 <= 2.0 * c.m;

  double half = 0.0;
  if (s.box) {
    half = *s.box - 2.0 * mu;
    if (!(half > 0.0) || rep.gamma.cwiseAbs().maxCoeff() > half)
      throw ConfigError("lyapunov check: Gamma(mu) lies outside the sampling box");
  }

  BlackBoxObjective f = make_black_box(inst.global);
  Rng rng = make_stream(s.seed, stream::kVerification);
  const Index d = inst.d;
  for (int p = 0; p < s.points; ++p) {
    Vector x(d);
    if (s.box) {
      for (Index k = 0; k < d; ++k) x[k] = rng.uniform(-half, half);
    } else {
      Vector u(d);
      for (Index k = 0; k < d; ++k) u[k] = rng.normal();
      const double r = s.radius * rng.uniform(0.05, 1.0);
      x = rep.gamma + r * u / u.norm();
    }
    const LyapunovPoint pt = lyapunov_point(f, c, rep.gamma, x, mu);
    rep.upper.add(pt.upper, x);
    rep.lower.add(pt.lower, x);
    rep.derivative.add(pt.derivative, x);
    rep.descent.add(pt.descent, x);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Test instances with well-conditioned constants

/// Logistic data with every augmented row inside the ball of radius
/// sqrt(radius^2 + 1), so the box constants stay small.
inline ProblemInstance bounded_logistic_instance(Index features, int n, Index per_agent, std::uint64_t seed, double w,
                                                 double radius) {
  Rng rng = make_stream(seed, stream::kData);
  Vector dir(features);
  for (Index k = 0; k < features; ++k) dir[k] = rng.normal();
  const Index count = per_agent * n;
  Matrix s(count, features);
  Vector labels(count);
  for (Index r = 0; r < count; ++r) {
    Vector u(features);
    for (Index k = 0; k < features; ++k) u[k] = rng.normal();
    s.row(r) = (radius * rng.uniform(0.2, 1.0) / u.norm()) * u.transpose();
    labels[r] = s.row(r).dot(dir) + 0.3 * rng.normal() >= 0.0 ? 1.0 : -1.0;
  }
  return logistic_instance(s, labels, n, w);
}

struct NamedInstance {
  std::string name;
  ProblemInstance instance;
  std::optional<double> box;
};

/// Instances with L1 <= 1.5 m, where all four bounds on V are expected to hold.
inline std::vector<NamedInstance> lyapunov_test_instances() {
  std::vector<NamedInstance> out;
  {
    SeparableQuadraticSpec s;
    s.d = 4;
    s.n = 5;
    s.curvature_min = s.curvature_max = 1.0;
    out.push_back({"isotropic_quadratic", separable_quadratic_instance(s), std::nullopt});
  }
  {
    SeparableQuadraticSpec s;
    s.d = 6;
    s.n = 8;
    s.seed = 2;
    s.curvature_min = 1.0;
    s.curvature_max = 1.5;
    out.push_back({"separable_quadratic", separable_quadratic_instance(s), std::nullopt});
  }
  out.push_back({"bounded_logistic", bounded_logistic_instance(4, 5, 20, 3, 1.0, 0.9), std::nullopt});
  {
    QuarticSpec s;
    s.d = 3;
    s.n = 5;
    s.seed = 4;
    s.q = 1.0;
    s.box = 0.8;
    s.curvature_min = 1.0;
    s.curvature_max = 1.1;
    s.center_min = -0.3;
    s.center_max = 0.3;
    out.push_back({"box_quartic", quartic_instance(s), s.box});
  }
  return out;
}

/// Quartic instance used for the mu-scaling check: d = 1, x_star away from 0.
inline ProblemInstance scaling_quartic_instance(int n = 5) {
  QuarticSpec s;
  s.d = 1;
  s.n = n;
  return quartic_instance(s);
}

// ---------------------------------------------------------------------------
// Verification battery

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  json data;
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }

  json to_json() const {
    json j = {{"passed", passed()}, {"checks", json::array()}};
    for (const auto& c : checks) {
      json e = {{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}};
      if (!c.data.is_null()) e["data"] = c.data;
      j["checks"].push_back(e);
    }
    return j;
  }
};

namespace detail {

inline void guarded(VerifyReport& rep, const std::string& name, const std::function<CheckResult()>& body) {
  try {
    CheckResult r = body();
    r.name = name;
    rep.checks.push_back(std::move(r));
  } catch (const std::exception& e) {
    rep.checks.push_back({name, false, std::string("error: ") + e.what(), {}});
  }
}

inline CheckResult check_consensus_matrices() {
  int count = 0;
  std::string bad;
  for (auto kind : {TopologyKind::complete, TopologyKind::ring, TopologyKind::path, TopologyKind::grid,
                    TopologyKind::erdos_renyi})
    for (int n = 1; n <= 30; ++n) {
      const Graph g = topology_from_spec({kind, n, 0.3, static_cast<std::uint64_t>(n)});
      const Matrix w = metropolis_hastings(g).weights();
      ++count;
      const auto v = consensus_violations(w, &g);
      const double gap = spectral_gap(ConsensusMatrix(w, &g));
      if ((!v.empty() || (n > 1 && !(gap < 1.0))) && bad.empty())
        bad = to_string(kind) + " n=" + std::to_string(n) + ": " + (v.empty() ? "spectral gap " + format_double(gap) : v.front());
    }
  return {"", bad.empty(), bad.empty() ? std::to_string(count) + " topologies" : bad, {}};
}

inline CheckResult check_quadratic_exactness() {
  Rng rng = make_stream(11, stream::kVerification);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Index d = 1 + static_cast<Index>(rng.uniform() * 20.0) % 20;
    Matrix m(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index k = 0; k < d; ++k) m(i, k) = rng.normal();
    const Matrix a = 0.5 * (m + m.transpose());
    Vector b(d), x(d);
    for (Index k = 0; k < d; ++k) b[k] = rng.normal();
    for (Index k = 0; k < d; ++k) x[k] = rng.normal();
    auto cost = std::make_shared<const QuadraticCost>(a, b, rng.normal());
    BlackBoxObjective f = make_black_box(cost);
    const double mu = t % 2 ? 0.1 : 1.0;
    const OracleOutput o = estimate_both(f, x, mu);
    const Vector g = cost->gradient(x);
    const Vector h = a.diagonal();
    worst = std::max(worst, (o.grad_estimate - g).cwiseAbs().maxCoeff() / std::max(g.cwiseAbs().maxCoeff(), 1e-300));
    worst = std::max(worst, (o.hessian_diag_estimate - h).cwiseAbs().maxCoeff() /
                                std::max(h.cwiseAbs().maxCoeff(), 1e-300));
  }
  return {"", worst <= 1e-9, "worst relative error " + format_double(worst), {}};
}

inline CheckResult check_error_bounds() {
  double worst = 0.0;
  for (double mu : {0.125, 0.1}) {
    BlackBoxObjective cube(1, [](const Vector& x) { return x[0] * x[0] * x[0]; });
    const Vector one = Vector::Constant(1, 1.0);
    const double gerr = std::abs(estimate_gradient(cube, one, mu)[0] - 3.0);
    worst = std::max(worst, std::abs(gerr - gradient_error_bound(6.0, mu, 1)) / gradient_error_bound(6.0, mu, 1));
    BlackBoxObjective quart(1, [](const Vector& x) { return x[0] * x[0] * x[0] * x[0]; });
    const Vector zero = Vector::Zero(1);
    const double herr = std::abs(estimate_both(quart, zero, mu).hessian_diag_estimate[0]);
    worst = std::max(worst, std::abs(herr - hessian_error_bound(24.0, mu)) / hessian_error_bound(24.0, mu));
  }
  return {"", worst <= 1e-12, "worst relative deviation from the bound " + format_double(worst), {}};
}

inline CheckResult check_tracking() {
  SyntheticRidgeSpec spec;
  spec.d = 10;
  spec.n = 20;
  const ProblemInstance inst = synthetic_ridge(spec);
  auto p = std::make_shared<const ConsensusMatrix>(metropolis_hastings(topology_from_spec({TopologyKind::ring, 20})));
  auto objectives = inst.make_objectives();
  NetworkState s = NetworkState::initial(p, initial_points(20, spec.d, 1));
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    s = jade_step(s, objectives, {0.2, 1e-3, 1e-8});
    worst = std::max({worst, s.tracking_residual_y(), s.tracking_residual_z()});
  }
  return {"", worst <= 1e-9, "max relative tracking residual " + format_double(worst), {}};
}

inline CheckResult check_fixed_point() {
  SeparableQuadraticSpec spec;
  spec.d = 5;
  spec.n = 10;
  const ProblemInstance inst = separable_quadratic_instance(spec);
  Vector sa = Vector::Zero(spec.d), sb = Vector::Zero(spec.d);
  for (const auto& c : inst.costs) {
    const auto& q = dynamic_cast<const QuadraticCost&>(*c);
    sa += q.a().diagonal();
    sb += q.b();
  }
  const Vector closed = -sb.cwiseQuotient(sa);
  auto p = std::make_shared<const ConsensusMatrix>(metropolis_hastings(topology_from_spec({TopologyKind::ring, 10})));
  double worst = (closed - inst.x_star).cwiseAbs().maxCoeff();
  std::vector<Vector> limits;
  for (double mu : {1e-1, 1e-4}) {
    const StationaryRun r = run_to_stationarity(inst, p, mu, {});
    if (!r.converged) return {"", false, "mu=" + format_double(mu) + ": " + r.diagnostic, {}};
    for (Index i = 0; i < r.x.rows(); ++i)
      worst = std::max(worst, (Vector(r.x.row(i).transpose()) - closed).cwiseAbs().maxCoeff());
    limits.push_back(r.x.colwise().mean().transpose());
  }
  worst = std::max(worst, (limits[0] - limits[1]).cwiseAbs().maxCoeff());
  return {"", worst <= 1e-8, "max deviation from the closed form " + format_double(worst), {}};
}

inline CheckResult check_gamma_scaling() {
  const ProblemInstance inst = scaling_quartic_instance();
  auto p = std::make_shared<const ConsensusMatrix>(metropolis_hastings(topology_from_spec({TopologyKind::ring, 5})));
  const ScalingReport rep = gamma_mu_scaling_check(inst, p, {0.2, 0.1, 0.05});
  bool ok = true;
  json ratios = json::array();
  for (const auto& r : rep.ratios) {
    ok = ok && r && *r >= 2.0 && *r <= 8.0;
    ratios.push_back(r ? json(format_double(*r)) : json(nullptr));
  }
  return {"", ok, "distance ratios under halving mu", {{"ratios", ratios}}};
}

inline CheckResult check_lyapunov_battery(int points) {
  json data = json::array();
  bool ok = true;
  std::string first;
  for (const auto& ni : lyapunov_test_instances()) {
    const auto& c = ni.instance.constants;
    const double adm = admissible_mu(c.m, c.L1, c.L3, ni.instance.d);
    double upper = std::min(0.5 * adm, 0.5);
    if (ni.box) upper = std::min(upper, *ni.box / 8.0);
    for (double mu : {1e-3, upper}) {
      LyapunovSampling s;
      s.points = points;
      s.box = ni.box;
      const LyapunovReport r = lyapunov_bounds_check(ni.instance, mu, s);
      json j = r.to_json();
      j["instance"] = ni.name;
      data.push_back(j);
      if (!r.passed() && first.empty()) first = ni.name + " mu=" + format_double(mu);
      ok = ok && r.passed() && r.descent_applicable;
    }
  }
  return {"", ok, ok ? "all four bounds hold" : "violated on " + first, data};
}

inline CheckResult check_descent_sign_flip() {
  const auto instances = lyapunov_test_instances();
  const ProblemInstance& inst = instances.back().instance;
  const auto& c = inst.constants;
  const double mu2 = mu_limits(c.m, c.L1, c.L3, inst.d).mu2;
  const double below = descent_coefficient(c, 0.99 * mu2, inst.d);
  const double above = descent_coefficient(c, 1.01 * mu2, inst.d);
  return {"", below < 0.0 && above > 0.0,
          "c(0.99 mu2)=" + format_double(below) + " c(1.01 mu2)=" + format_double(above), {}};
}

inline CheckResult check_mu_limits_example() {
  const MuLimits lim = mu_limits(1.0, 1.0, 6.0, 1);
  const double mu1 = std::sqrt(std::sqrt(2.0) - 1.0);
  const double mu2 = std::sqrt((std::sqrt(17.0) - 3.0) / 2.0);
  const bool ok = std::abs(lim.mu1 - mu1) <= 1e-14 && std::abs(lim.mu2 - mu2) <= 1e-14 && lim.admissible() == lim.mu1;
  return {"", ok, "mu1=" + format_double(lim.mu1) + " mu2=" + format_double(lim.mu2), {}};
}

// Checks that depend on a user config.
inline void check_config(VerifyReport& rep, const ExperimentConfig& cfg) {
  bool p_ok = false;
  guarded(rep, "config_consensus_matrix", [&]() -> CheckResult {
    std::vector<std::string> v;
    double gap = 0.0;
    if (cfg.topology.weights) {
      const Matrix& w = *cfg.topology.weights;
      std::optional<Graph> g;
      try {
        g = graph_from_weights(w);
      } catch (const ConfigError& e) {
        v.push_back(e.what());
      }
      for (auto& s : consensus_violations(w, g ? &*g : nullptr)) v.push_back(s);
      if (v.empty()) gap = spectral_gap(ConsensusMatrix(w, &*g));
    } else {
      const Graph g = topology_from_spec(cfg.topology.spec);
      const Matrix w = metropolis_hastings(g).weights();
      v = consensus_violations(w, &g);
      if (v.empty()) gap = spectral_gap(ConsensusMatrix(w, &g));
    }
    if (v.empty() && cfg.topology.spec.n > 1 && !(gap < 1.0)) v.push_back("spectral gap " + format_double(gap) + " is not below 1");
    p_ok = v.empty();
    json data = json::array();
    for (const auto& s : v) data.push_back(s);
    return {"", p_ok, p_ok ? "spectral gap " + format_double(gap) : v.front(), v.empty() ? json() : data};
  });
  if (!p_ok) return;

  const Network net = build_network(cfg.topology);
  const ProblemInstance inst = build_instance(cfg.instance, static_cast<int>(net.p->size()));
  const auto& c = inst.constants;
  const MuLimits lim = mu_limits(c.m, c.L1, c.L3, inst.d);
  const bool admissible = cfg.mu <= lim.admissible();
  rep.checks.push_back({"config_mu_admissible", admissible,
                        "mu=" + format_double(cfg.mu) + " mu1=" + format_double(lim.mu1) + " mu2=" +
                            format_double(lim.mu2),
                        {}});
  const double dc = descent_coefficient(c, cfg.mu, inst.d);
  rep.checks.push_back({"config_descent_direction", dc < 0.0,
                        dc < 0.0 ? "descent coefficient " + format_double(dc)
                                 : "descent coefficient " + format_double(dc) + " is not negative: mu lies above mu2",
                        {}});
  if (!admissible) return;
  guarded(rep, "config_lyapunov_bounds", [&]() -> CheckResult {
    LyapunovSampling s;
    s.points = 20;
    if (inst.family == Family::quartic) s.box = cfg.instance.box;
    const LyapunovReport r = lyapunov_bounds_check(inst, cfg.mu, s);
    std::string detail = r.passed() ? "bounds hold" : "bounds violated";
    if (!r.descent_applicable) detail += "; descent inequality reported only (L1 > 2m)";
    return {"", r.passed(), detail, r.to_json()};
  });
}

}  // namespace detail

struct VerifyOptions {
  int lyapunov_points = 25;
};

/// The full battery; with a config, the config's network, mu and instance
/// are checked as well.
inline VerifyReport verify_suite(const std::optional<ExperimentConfig>& cfg = std::nullopt,
                                 const VerifyOptions& opt = {}) {
  VerifyReport rep;
  detail::guarded(rep, "consensus_matrix_invariants", detail::check_consensus_matrices);
  detail::guarded(rep, "quadratic_exactness", detail::check_quadratic_exactness);
  detail::guarded(rep, "error_bounds_attained", detail::check_error_bounds);
  detail::guarded(rep, "mu_limits_example", detail::check_mu_limits_example);
  detail::guarded(rep, "tracking_conservation", detail::check_tracking);
  detail::guarded(rep, "fixed_point", detail::check_fixed_point);
  detail::guarded(rep, "gamma_mu_scaling", detail::check_gamma_scaling);
  detail::guarded(rep, "lyapunov_bounds", [&] { return detail::check_lyapunov_battery(opt.lyapunov_points); });
  detail::guarded(rep, "descent_sign_flip", detail::check_descent_sign_flip);
  if (cfg) detail::check_config(rep, *cfg);
  return rep;
}

}  // namespace zojade
