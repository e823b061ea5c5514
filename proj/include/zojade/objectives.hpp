#pragma once

// Local cost families, problem instances with ground-truth minimizers,
// synthetic data, sharding and CSV ingestion.

#include "zojade/core.hpp"
#include "zojade/oracle.hpp"
#include "zojade/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace zojade {

/// Smooth local cost with analytic derivatives. The derivatives are used for
/// ground truth (minimizers, verification); algorithms only see values.
class LocalCost {
 public:
  virtual ~LocalCost() = default;
  virtual Index dimension() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  virtual Matrix hessian(const Vector& x) const = 0;
  virtual Vector hessian_diag(const Vector& x) const { return hessian(x).diagonal(); }
};

using CostPtr = std::shared_ptr<const LocalCost>;

/// 1/2 x^T A x + b^T x + c.
class QuadraticCost final : public LocalCost {
 public:
  QuadraticCost(Matrix a, Vector b, double c) : a_(std::move(a)), b_(std::move(b)), c_(c) {
    if (a_.rows() != a_.cols() || a_.rows() != b_.size()) throw ConfigError("quadratic: dimension mismatch");
    if (((a_ - a_.transpose()).array().abs() > 1e-12 * std::max(1.0, a_.cwiseAbs().maxCoeff())).any())
      throw ConfigError("quadratic: A is not symmetric");
  }

  Index dimension() const override { return b_.size(); }
  double value(const Vector& x) const override { return 0.5 * x.dot(a_ * x) + b_.dot(x) + c_; }
  Vector gradient(const Vector& x) const override { return a_ * x + b_; }
  Matrix hessian(const Vector&) const override { return a_; }
  Vector hessian_diag(const Vector&) const override { return a_.diagonal(); }

  const Matrix& a() const { return a_; }
  const Vector& b() const { return b_; }
  double c() const { return c_; }

 private:
  Matrix a_;
  Vector b_;
  double c_;
};

/// Regularized log-loss over samples s_k with labels l_k in {-1, +1}:
///   (1/|D|) sum_k log(1 + exp(-l_k [s_k^T 1] x)) + (w/2) ||x||^2.
/// The trailing coordinate of x is the bias. With no samples the loss term is
/// dropped and only the ridge term remains.
class LogisticCost final : public LocalCost {
 public:
  LogisticCost(Matrix samples, Vector labels, double w) : labels_(std::move(labels)), w_(w) {
    if (samples.rows() != labels_.size()) throw ConfigError("logistic: sample/label count mismatch");
    if (!(w > 0.0)) throw ConfigError("logistic: ridge weight w must be positive");
    for (Index k = 0; k < labels_.size(); ++k)
      if (labels_[k] != 1.0 && labels_[k] != -1.0) throw ConfigError("logistic: labels must be -1 or +1");
    augmented_.resize(samples.rows(), samples.cols() + 1);
    augmented_.leftCols(samples.cols()) = samples;
    augmented_.col(samples.cols()).setOnes();
  }

  Index dimension() const override { return augmented_.cols(); }

  double value(const Vector& x) const override {
    double loss = 0.0;
    const Index count = augmented_.rows();
    if (count > 0) {
      const Vector margins = labels_.cwiseProduct(augmented_ * x);
      for (Index k = 0; k < count; ++k) loss += softplus(-margins[k]);
      loss /= static_cast<double>(count);
    }
    return loss + 0.5 * w_ * x.squaredNorm();
  }

  Vector gradient(const Vector& x) const override {
    Vector g = w_ * x;
    const Index count = augmented_.rows();
    if (count > 0) {
      const Vector margins = labels_.cwiseProduct(augmented_ * x);
      Vector coef(count);
      for (Index k = 0; k < count; ++k) coef[k] = -labels_[k] * sigmoid(-margins[k]);
      g += augmented_.transpose() * coef / static_cast<double>(count);
    }
    return g;
  }

  Matrix hessian(const Vector& x) const override {
    const Index d = dimension();
    Matrix h = w_ * Matrix::Identity(d, d);
    const Index count = augmented_.rows();
    if (count > 0) {
      const Vector margins = labels_.cwiseProduct(augmented_ * x);
      Vector weight(count);
      for (Index k = 0; k < count; ++k) {
        const double s = sigmoid(margins[k]);
        weight[k] = s * (1.0 - s);
      }
      h += augmented_.transpose() * weight.asDiagonal() * augmented_ / static_cast<double>(count);
    }
    return h;
  }

  double ridge_weight() const { return w_; }
  Index sample_count() const { return augmented_.rows(); }
  /// max_k ||[s_k 1]||, or 0 with no samples.
  double max_row_norm() const {
    return augmented_.rows() ? augmented_.rowwise().norm().maxCoeff() : 0.0;
  }

  static double softplus(double u) { return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u))); }
  static double sigmoid(double u) {
    if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
  }

 private:
  Matrix augmented_;
  Vector labels_;
  double w_;
};

/// Separable quartic-regularized cost
///   1/2 sum_k a_k (x_k - c_k)^2 + (q / 24) sum_k x_k^4.
/// Its fourth derivative is the constant q, so L3 = q exactly, while L1 and
/// L2 only hold on a bounded box.
class QuarticCost final : public LocalCost {
 public:
  QuarticCost(Vector a, Vector center, double q) : a_(std::move(a)), c_(std::move(center)), q_(q) {
    if (a_.size() != c_.size()) throw ConfigError("quartic: dimension mismatch");
    if (!(q >= 0.0)) throw ConfigError("quartic: q must be non-negative");
  }

  Index dimension() const override { return a_.size(); }
  double value(const Vector& x) const override {
    return 0.5 * (a_.array() * (x - c_).array().square()).sum() + q_ / 24.0 * x.array().pow(4).sum();
  }
  Vector gradient(const Vector& x) const override {
    return (a_.array() * (x - c_).array() + q_ / 6.0 * x.array().cube()).matrix();
  }
  Matrix hessian(const Vector& x) const override { return hessian_diag(x).asDiagonal(); }
  Vector hessian_diag(const Vector& x) const override {
    return (a_.array() + q_ / 2.0 * x.array().square()).matrix();
  }

  const Vector& a() const { return a_; }
  const Vector& center() const { return c_; }
  double q() const { return q_; }

 private:
  Vector a_;
  Vector c_;
  double q_;
};

/// Mean of several costs over the same dimension.
class AverageCost final : public LocalCost {
 public:
  explicit AverageCost(std::vector<CostPtr> parts) : parts_(std::move(parts)) {
    if (parts_.empty()) throw ConfigError("average of zero costs");
  }
  Index dimension() const override { return parts_.front()->dimension(); }
  double value(const Vector& x) const override {
    double s = 0.0;
    for (const auto& p : parts_) s += p->value(x);
    return s / static_cast<double>(parts_.size());
  }
  Vector gradient(const Vector& x) const override {
    Vector s = Vector::Zero(dimension());
    for (const auto& p : parts_) s += p->gradient(x);
    return s / static_cast<double>(parts_.size());
  }
  Matrix hessian(const Vector& x) const override {
    Matrix s = Matrix::Zero(dimension(), dimension());
    for (const auto& p : parts_) s += p->hessian(x);
    return s / static_cast<double>(parts_.size());
  }

 private:
  std::vector<CostPtr> parts_;
};

/// Wraps a cost as a query-counting black box; analytic derivatives ride
/// along for verification only.
inline BlackBoxObjective make_black_box(const CostPtr& cost,
                                        std::optional<SmoothnessConstants> constants = std::nullopt) {
  BlackBoxObjective f(cost->dimension(), [cost](const Vector& x) { return cost->value(x); });
  f.with_gradient([cost](const Vector& x) { return cost->gradient(x); });
  f.with_hessian_diag([cost](const Vector& x) { return cost->hessian_diag(x); });
  if (constants) f.with_constants(*constants);
  return f;
}

// ---------------------------------------------------------------------------

enum class Family { quadratic, ridge, logistic, quartic };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::quadratic: return "quadratic";
    case Family::ridge: return "ridge";
    case Family::logistic: return "logistic";
    case Family::quartic: return "quartic";
  }
  return "?";
}

/// n local costs, their average f, and the ground truth x_star, f(x_star).
struct ProblemInstance {
  Family family = Family::quadratic;
  std::vector<CostPtr> costs;
  CostPtr global;  // the average cost (a single QuadraticCost for quadratic families)
  Index d = 0;
  Vector x_star;
  double f_star = 0.0;
  SmoothnessConstants constants;  // of the global cost
  std::vector<Index> shard_sizes;  // samples per agent, empty when not data-driven

  int agents() const { return static_cast<int>(costs.size()); }

  /// Fresh counters for one run.
  std::vector<BlackBoxObjective> make_objectives() const {
    std::vector<BlackBoxObjective> out;
    out.reserve(costs.size());
    for (const auto& c : costs) out.push_back(make_black_box(c));
    return out;
  }

  BlackBoxObjective make_global_objective() const { return make_black_box(global, constants); }
};

/// Features (rows = samples) and the last CSV column.
struct Dataset {
  Matrix features;
  Vector targets;
};

// ---------------------------------------------------------------------------
// Centralized ground-truth solvers

inline constexpr double kMinimizerGradientTolerance = 1e-10;
inline constexpr int kNewtonMaxIterations = 500;

/// Damped Newton with backtracking halving and Armijo constant 1e-4 on an
/// analytic cost. Throws ConfigError when ||grad|| <= tol is not reached.
inline Vector newton_minimize(const LocalCost& f, Vector x, double tol = kMinimizerGradientTolerance,
                              int max_iter = kNewtonMaxIterations) {
  constexpr double kArmijo = 1e-4;
  for (int it = 0; it < max_iter; ++it) {
    const Vector g = f.gradient(x);
    if (g.norm() <= tol) return x;
    const Vector step = f.hessian(x).ldlt().solve(-g);
    const double fx = f.value(x);
    const double slope = g.dot(step);
    double t = 1.0;
    Vector trial = x + step;
    // Below this Newton decrement the objective cannot resolve the decrease;
    // the full step is taken and the gradient test decides.
    const bool resolvable = -slope > 1e-13 * std::max(1.0, std::abs(fx));
    while (resolvable && f.value(trial) > fx + kArmijo * t * slope && t > 1e-12) {
      t *= 0.5;
      trial = x + t * step;
    }
    if (trial == x) break;  // stalled at machine precision
    x = trial;
  }
  if (f.gradient(x).norm() <= tol) return x;
  throw ConfigError("instance construction: Newton did not reach gradient norm " + format_double(tol) +
                    " within " + std::to_string(max_iter) + " iterations");
}

namespace detail {

inline SmoothnessConstants quadratic_constants(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff(), 0.0, 0.0};
}

/// Exact minimizer of a strongly convex quadratic, one refinement step.
inline Vector solve_quadratic_minimizer(const QuadraticCost& q) {
  const auto ldlt = q.a().ldlt();
  Vector x = ldlt.solve(-q.b());
  x -= ldlt.solve(q.gradient(x));
  return x;
}

inline ProblemInstance finish_quadratic(Family family, std::vector<std::shared_ptr<const QuadraticCost>> parts,
                                        std::vector<Index> shard_sizes) {
  ProblemInstance inst;
  inst.family = family;
  const Index d = parts.front()->dimension();
  Matrix a = Matrix::Zero(d, d);
  Vector b = Vector::Zero(d);
  double c = 0.0;
  for (const auto& p : parts) {
    a += p->a();
    b += p->b();
    c += p->c();
    inst.costs.push_back(p);
  }
  const double n = static_cast<double>(parts.size());
  a /= n;
  b /= n;
  c /= n;
  a = 0.5 * (a + a.transpose()).eval();
  auto global = std::make_shared<const QuadraticCost>(a, b, c);
  inst.constants = quadratic_constants(a);
  if (!(inst.constants.m > 0.0)) throw ConfigError("quadratic instance is not strongly convex");
  inst.global = global;
  inst.d = d;
  inst.x_star = solve_quadratic_minimizer(*global);
  inst.f_star = global->value(inst.x_star);
  inst.shard_sizes = std::move(shard_sizes);
  return inst;
}

inline std::vector<std::vector<Index>> round_robin(Index rows, int n) {
  std::vector<std::vector<Index>> shards(n);
  for (Index r = 0; r < rows; ++r) shards[r % n].push_back(r);
  return shards;
}

inline Matrix take_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = m.row(rows[k]);
  return out;
}

inline Vector take_rows(const Vector& v, const std::vector<Index>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out[static_cast<Index>(k)] = v[rows[k]];
  return out;
}

}  // namespace detail

/// Shard i gets rows i, i+n, i+2n, ...; f_i = (1/|D_i|) sum (s^T x - t)^2 + (lambda/2)||x||^2.
inline ProblemInstance ridge_instance_from_shards(const Matrix& features, const Vector& targets, int n,
                                                  double lambda) {
  if (n <= 0) throw ConfigError("ridge: agent count must be positive");
  if (!(lambda > 0.0)) throw ConfigError("ridge: lambda must be positive");
  if (features.rows() != targets.size()) throw ConfigError("ridge: feature/target row count mismatch");
  if (features.rows() < n) throw ConfigError("ridge: fewer rows than agents");
  if (features.cols() == 0) throw ConfigError("ridge: no feature columns");
  const Index d = features.cols();
  std::vector<std::shared_ptr<const QuadraticCost>> parts;
  std::vector<Index> sizes;
  for (const auto& rows : detail::round_robin(features.rows(), n)) {
    const Matrix s = detail::take_rows(features, rows);
    const Vector t = detail::take_rows(targets, rows);
    const double inv = 1.0 / static_cast<double>(rows.size());
    Matrix a = 2.0 * inv * (s.transpose() * s) + lambda * Matrix::Identity(d, d);
    a = 0.5 * (a + a.transpose()).eval();
    const Vector b = -2.0 * inv * (s.transpose() * t);
    parts.push_back(std::make_shared<const QuadraticCost>(a, b, inv * t.squaredNorm()));
    sizes.push_back(static_cast<Index>(rows.size()));
  }
  return detail::finish_quadratic(Family::ridge, std::move(parts), std::move(sizes));
}

/// Conservative global constants for the averaged log-loss with max sample
/// norm R = max ||[s 1]||: m = w, L1 = w + R^2/4, L2 = R^3/(6 sqrt 3), L3 = R^4/8.
/// These are the sup-norms of the 2nd-4th derivatives of log(1 + e^-u).
inline SmoothnessConstants logistic_constants(double w, double max_row_norm) {
  const double r = max_row_norm;
  return {w, w + 0.25 * r * r, r * r * r / (6.0 * std::sqrt(3.0)), r * r * r * r / 8.0};
}

namespace detail {
inline ProblemInstance finish_logistic(std::vector<std::shared_ptr<const LogisticCost>> parts, double w) {
  ProblemInstance inst;
  inst.family = Family::logistic;
  double r = 0.0;
  for (const auto& p : parts) {
    inst.costs.push_back(p);
    inst.shard_sizes.push_back(p->sample_count());
    r = std::max(r, p->max_row_norm());
  }
  inst.d = parts.front()->dimension();
  inst.global = std::make_shared<const AverageCost>(inst.costs);
  inst.constants = logistic_constants(w, r);
  inst.x_star = newton_minimize(*inst.global, Vector::Zero(inst.d));
  inst.f_star = inst.global->value(inst.x_star);
  return inst;
}
}  // namespace detail

/// Round-robin shards of labelled samples; x has d = features + 1 entries (bias last).
inline ProblemInstance logistic_instance(const Matrix& samples, const Vector& labels, int n, double w) {
  if (n <= 0) throw ConfigError("logistic: agent count must be positive");
  if (samples.rows() != labels.size()) throw ConfigError("logistic: sample/label count mismatch");
  std::vector<std::shared_ptr<const LogisticCost>> parts;
  for (const auto& rows : detail::round_robin(samples.rows(), n))
    parts.push_back(std::make_shared<const LogisticCost>(detail::take_rows(samples, rows),
                                                         detail::take_rows(labels, rows), w));
  return detail::finish_logistic(std::move(parts), w);
}

struct SyntheticClassificationSpec {
  Index d = 20;             // model dimension, features = d - 1
  Index per_agent = 50;     // even counts give exactly balanced labels
  int n = 20;
  std::uint64_t seed = 1;
  double w = 0.1;
  double separation = 2.0;  // distance between the two cluster means
  double scale_spread = 1.0;  // feature k has std spread^(k/(d-2) - 1/2)
};

namespace detail {
inline Vector feature_scales(Index count, double spread) {
  Vector s(count);
  for (Index k = 0; k < count; ++k) {
    const double frac = count > 1 ? static_cast<double>(k) / static_cast<double>(count - 1) : 0.5;
    s[k] = std::pow(spread, frac - 0.5);
  }
  return s;
}
}  // namespace detail

/// Two Gaussian clusters, means +/- (separation/2) u with u = 1/sqrt(d-1).
/// Each agent draws its own balanced set: first half label +1, second half -1.
inline ProblemInstance synthetic_classification(const SyntheticClassificationSpec& spec) {
  if (spec.d < 2) throw ConfigError("synthetic_classification: d must be at least 2");
  if (spec.n <= 0) throw ConfigError("synthetic_classification: n must be positive");
  const Index feat = spec.d - 1;
  Rng rng = make_stream(spec.seed, stream::kData);
  const Vector scales = detail::feature_scales(feat, spec.scale_spread);
  const Vector mean = Vector::Constant(feat, 0.5 * spec.separation / std::sqrt(static_cast<double>(feat)));
  std::vector<std::shared_ptr<const LogisticCost>> parts;
  for (int i = 0; i < spec.n; ++i) {
    Matrix s(spec.per_agent, feat);
    Vector l(spec.per_agent);
    const Index positives = (spec.per_agent + 1) / 2;
    for (Index k = 0; k < spec.per_agent; ++k) {
      const double label = k < positives ? 1.0 : -1.0;
      l[k] = label;
      for (Index j = 0; j < feat; ++j) s(k, j) = scales[j] * (label * mean[j] + rng.normal());
    }
    parts.push_back(std::make_shared<const LogisticCost>(std::move(s), std::move(l), spec.w));
  }
  return detail::finish_logistic(std::move(parts), spec.w);
}

struct SyntheticRidgeSpec {
  Index d = 10;
  Index per_agent = 50;
  int n = 20;
  std::uint64_t seed = 1;
  double lambda = 0.1;
  double noise = 0.1;
  double scale_spread = 1.0;
};

/// Gaussian features (per-feature std as in synthetic_classification),
/// targets = s^T w_true + noise with w_true ~ N(0, I); round-robin sharded.
inline ProblemInstance synthetic_ridge(const SyntheticRidgeSpec& spec) {
  if (spec.d < 1 || spec.n <= 0 || spec.per_agent <= 0) throw ConfigError("synthetic_ridge: bad sizes");
  Rng rng = make_stream(spec.seed, stream::kData);
  const Vector scales = detail::feature_scales(spec.d, spec.scale_spread);
  Vector truth(spec.d);
  for (Index j = 0; j < spec.d; ++j) truth[j] = rng.normal();
  const Index rows = spec.per_agent * spec.n;
  Matrix s(rows, spec.d);
  Vector t(rows);
  for (Index r = 0; r < rows; ++r) {
    for (Index j = 0; j < spec.d; ++j) s(r, j) = scales[j] * rng.normal();
    t[r] = s.row(r).dot(truth) + spec.noise * rng.normal();
  }
  return ridge_instance_from_shards(s, t, spec.n, spec.lambda);
}

struct SeparableQuadraticSpec {
  Index d = 10;
  int n = 20;
  std::uint64_t seed = 1;
  double curvature_min = 0.5;
  double curvature_max = 2.0;
};

/// f_i = 1/2 x^T diag(a_i) x + b_i^T x + c_i with a_i uniform in
/// [curvature_min, curvature_max], b_i, c_i standard normal.
inline ProblemInstance separable_quadratic_instance(const SeparableQuadraticSpec& spec) {
  if (spec.d < 1 || spec.n <= 0) throw ConfigError("separable_quadratic: bad sizes");
  if (!(spec.curvature_min > 0.0) || spec.curvature_max < spec.curvature_min)
    throw ConfigError("separable_quadratic: need 0 < curvature_min <= curvature_max");
  Rng rng = make_stream(spec.seed, stream::kData);
  std::vector<std::shared_ptr<const QuadraticCost>> parts;
  for (int i = 0; i < spec.n; ++i) {
    Vector a(spec.d), b(spec.d);
    for (Index k = 0; k < spec.d; ++k) a[k] = rng.uniform(spec.curvature_min, spec.curvature_max);
    for (Index k = 0; k < spec.d; ++k) b[k] = rng.normal();
    const double c = rng.normal();
    parts.push_back(std::make_shared<const QuadraticCost>(Matrix(a.asDiagonal()), b, c));
  }
  return detail::finish_quadratic(Family::quadratic, std::move(parts), {});
}

struct QuarticSpec {
  Index d = 1;
  int n = 5;
  std::uint64_t seed = 1;
  double q = 1.0;          // fourth-derivative constant, L3 = q
  double box = 3.0;        // constants L1, L2 hold on [-box, box]^d
  double curvature_min = 1.0;
  double curvature_max = 2.0;
  double center_min = 0.5;  // c_i entries uniform in [center_min, center_max]
  double center_max = 1.5;
};

/// Agents hold QuarticCost with random curvatures and centers and a shared q.
/// Constants on the box: m = min mean curvature, L1 = max mean curvature +
/// q box^2 / 2, L2 = q box, L3 = q.
inline ProblemInstance quartic_instance(const QuarticSpec& spec) {
  if (spec.d < 1 || spec.n <= 0) throw ConfigError("quartic: bad sizes");
  Rng rng = make_stream(spec.seed, stream::kData);
  ProblemInstance inst;
  inst.family = Family::quartic;
  inst.d = spec.d;
  Vector mean_a = Vector::Zero(spec.d);
  for (int i = 0; i < spec.n; ++i) {
    Vector a(spec.d), c(spec.d);
    for (Index k = 0; k < spec.d; ++k) a[k] = rng.uniform(spec.curvature_min, spec.curvature_max);
    for (Index k = 0; k < spec.d; ++k) c[k] = rng.uniform(spec.center_min, spec.center_max);
    mean_a += a;
    inst.costs.push_back(std::make_shared<const QuarticCost>(a, c, spec.q));
  }
  mean_a /= static_cast<double>(spec.n);
  inst.global = std::make_shared<const AverageCost>(inst.costs);
  inst.constants = {mean_a.minCoeff(), mean_a.maxCoeff() + 0.5 * spec.q * spec.box * spec.box,
                    spec.q * spec.box, spec.q};
  inst.x_star = newton_minimize(*inst.global, Vector::Zero(spec.d));
  inst.f_star = inst.global->value(inst.x_star);
  return inst;
}

// ---------------------------------------------------------------------------
// Data ingestion

/// Zero mean, unit variance per column (population std); constant columns
/// are only centered.
inline void standardize(Matrix& features) {
  if (features.rows() == 0) return;
  for (Index j = 0; j < features.cols(); ++j) {
    auto col = features.col(j);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(features.rows()));
    if (sd > 0.0) col /= sd;
  }
}

/// Comma-separated numeric file; the last column is the target or label.
/// Blank lines are skipped. Errors name the offending 1-based line.
inline Dataset parse_csv(std::istream& in, bool has_header) {
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  std::size_t width = 0;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (header_pending) {
      header_pending = false;
      continue;
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto first = cell.find_first_not_of(" \t");
      const auto last = cell.find_last_not_of(" \t");
      if (first == std::string::npos) throw ParseError("csv: empty cell", line_no);
      cell = cell.substr(first, last - first + 1);
      double v = 0.0;
      std::size_t used = 0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cell.size() || !std::isfinite(v)) throw ParseError("csv: non-numeric cell '" + cell + "'", line_no);
      row.push_back(v);
    }
    if (!line.empty() && line.back() == ',') throw ParseError("csv: empty cell", line_no);
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw ParseError("csv: expected " + std::to_string(width) + " columns, found " + std::to_string(row.size()),
                       line_no);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("csv: no data rows", 0);
  if (width < 2) throw ParseError("csv: need at least one feature column and a target column", 0);
  Dataset ds{Matrix(static_cast<Index>(rows.size()), static_cast<Index>(width - 1)),
             Vector(static_cast<Index>(rows.size()))};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c + 1 < width; ++c) ds.features(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    ds.targets[static_cast<Index>(r)] = rows[r].back();
  }
  return ds;
}

inline Dataset load_csv(const std::string& path, bool has_header = false) {
  std::ifstream in(path);
  if (!in) throw ParseError("csv: cannot open '" + path + "'", 0);
  return parse_csv(in, has_header);
}

}  // namespace zojade
