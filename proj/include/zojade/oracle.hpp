#pragma once

// Central-difference zeroth-order estimators of the gradient and of the
// Hessian diagonal, with query accounting and the closed-form error and
// step-size bounds that go with them.

#include "zojade/core.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <utility>

namespace zojade {

/// Smoothness constants of an objective: m I <= Hessian <= L1 I, Hessian is
/// L2-Lipschitz, third derivative is L3-Lipschitz. Supplied, never estimated.
struct SmoothnessConstants {
  double m = 0.0;
  double L1 = 0.0;
  double L2 = 0.0;
  double L3 = 0.0;
};

/// Scalar function of R^d with an evaluation counter.
///
/// The analytic gradient and Hessian diagonal are optional and exist only so
/// that tests and the verification suite can compare against ground truth;
/// the estimators never touch them.
class BlackBoxObjective {
 public:
  using Function = std::function<double(const Vector&)>;
  using VectorMap = std::function<Vector(const Vector&)>;

  BlackBoxObjective(Index dimension, Function f) : dim_(dimension), f_(std::move(f)) {
    if (dimension <= 0) throw ConfigError("objective dimension must be positive");
  }

  Index dimension() const { return dim_; }
  std::uint64_t query_count() const { return queries_; }

  /// One query. Throws EvaluationError on a non-finite value.
  double operator()(const Vector& x) {
    ++queries_;
    const double v = f_(x);
    if (!std::isfinite(v))
      throw EvaluationError("non-finite objective value " + format_double(v) + " at probe point " +
                            format_point(x));
    return v;
  }

  BlackBoxObjective& with_gradient(VectorMap g) {
    gradient_ = std::move(g);
    return *this;
  }
  BlackBoxObjective& with_hessian_diag(VectorMap h) {
    hessian_diag_ = std::move(h);
    return *this;
  }
  BlackBoxObjective& with_constants(SmoothnessConstants c) {
    constants_ = c;
    return *this;
  }

  const VectorMap& analytic_gradient() const { return gradient_; }
  const VectorMap& analytic_hessian_diag() const { return hessian_diag_; }
  const std::optional<SmoothnessConstants>& constants() const { return constants_; }

 private:
  Index dim_;
  Function f_;
  std::uint64_t queries_ = 0;
  VectorMap gradient_;
  VectorMap hessian_diag_;
  std::optional<SmoothnessConstants> constants_;
};

struct OracleOutput {
  Vector grad_estimate;
  Vector hessian_diag_estimate;
  double center_value = 0.0;
  std::uint64_t queries_used = 0;
};

/// Probe values f(x + mu e_k), f(x - mu e_k), collected for k = 0..d-1 with
/// the plus probe first. This order is fixed so query traces are reproducible.
struct ProbeValues {
  Vector plus;
  Vector minus;
};

inline ProbeValues collect_probes(BlackBoxObjective& f, const Vector& x, double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError("mu must be positive and finite");
  if (x.size() != f.dimension()) throw ConfigError("probe point dimension does not match objective");
  if (!x.allFinite()) throw EvaluationError("non-finite probe center " + format_point(x));
  const Index d = x.size();
  ProbeValues pv{Vector(d), Vector(d)};
  Vector probe = x;
  for (Index k = 0; k < d; ++k) {
    if (x[k] + mu == x[k] || x[k] - mu == x[k])
      throw EvaluationError("probe step " + format_double(mu) + " is lost to rounding at coordinate " +
                            std::to_string(k) + " of " + format_point(x));
    probe[k] = x[k] + mu;
    pv.plus[k] = f(probe);
    probe[k] = x[k] - mu;
    pv.minus[k] = f(probe);
    probe[k] = x[k];
  }
  return pv;
}

inline Vector gradient_from_probes(const ProbeValues& pv, double mu) {
  return (pv.plus - pv.minus) / (2.0 * mu);
}

inline Vector hessian_diag_from_probes(const ProbeValues& pv, double center, double mu) {
  return (pv.plus.array() - 2.0 * center + pv.minus.array()).matrix() / (mu * mu);
}

/// k-th entry (f(x + mu e_k) - f(x - mu e_k)) / (2 mu). Uses 2d queries.
inline Vector estimate_gradient(BlackBoxObjective& f, const Vector& x, double mu) {
  return gradient_from_probes(collect_probes(f, x, mu), mu);
}

/// k-th entry (f(x + mu e_k) - 2 f(x) + f(x - mu e_k)) / mu^2, given the
/// center value f(x). Uses 2d queries.
inline Vector estimate_hessian_diag(BlackBoxObjective& f, const Vector& x, double mu, double center) {
  return hessian_diag_from_probes(collect_probes(f, x, mu), center, mu);
}

/// Both estimates from one shared set of 2d probes plus the center: 2d + 1 queries.
inline OracleOutput estimate_both(BlackBoxObjective& f, const Vector& x, double mu) {
  const std::uint64_t before = f.query_count();
  const ProbeValues pv = collect_probes(f, x, mu);
  const double center = f(x);
  OracleOutput out;
  out.grad_estimate = gradient_from_probes(pv, mu);
  out.hessian_diag_estimate = hessian_diag_from_probes(pv, center, mu);
  out.center_value = center;
  out.queries_used = f.query_count() - before;
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form bounds

/// ||grad_hat - grad|| <= sqrt(d) L2 mu^2 / 6.
inline double gradient_error_bound(double L2, double mu, Index d) {
  return std::sqrt(static_cast<double>(d)) * L2 * mu * mu / 6.0;
}

/// |hess_hat_k - H_kk| <= L3 mu^2 / 12 for every k.
inline double hessian_error_bound(double L3, double mu) { return L3 * mu * mu / 12.0; }

/// Lipschitz constant of x -> grad_hat(mu, x): L1 + mu sqrt(d) L2 / 2.
inline double gradient_estimator_lipschitz(const SmoothnessConstants& c, double mu, Index d) {
  return c.L1 + mu * std::sqrt(static_cast<double>(d)) * c.L2 / 2.0;
}

/// Lipschitz constant of x -> hess_hat(mu, x): L2 sqrt(d) + mu sqrt(d) L3 / 3.
inline double hessian_estimator_lipschitz(const SmoothnessConstants& c, double mu, Index d) {
  const double sd = std::sqrt(static_cast<double>(d));
  return c.L2 * sd + mu * sd * c.L3 / 3.0;
}

/// Entry bound on the remainder R(mu, x) in Jacobian(grad_hat) = Hessian + R.
inline double jacobian_remainder_bound(double L3, double mu) { return L3 * mu * mu / 6.0; }

/// Coefficient of ||x - Gamma(mu)||^2 in the lower bound on ||grad_hat(x)||^2:
/// m^2 - 2 L1 s - s^2 with s = d mu^2 L3 / 6.
inline double lyapunov_lower_coefficient(const SmoothnessConstants& c, double mu, Index d) {
  const double s = static_cast<double>(d) * mu * mu * c.L3 / 6.0;
  return c.m * c.m - 2.0 * c.L1 * s - s * s;
}

/// Coefficient multiplying (L1 + mu sqrt(d) L2/2)^2 ||x - Gamma||^2 in the
/// descent inequality:  2 d mu^2 L3 / (12 m - L3 mu^2) - 12 m / (12 L1 + L3 mu^2).
/// Negative means the Jacobi direction decreases ||grad_hat||^2. Its zero is mu_2.
inline double descent_coefficient(const SmoothnessConstants& c, double mu, Index d) {
  const double q = c.L3 * mu * mu;
  return 2.0 * static_cast<double>(d) * q / (12.0 * c.m - q) - 12.0 * c.m / (12.0 * c.L1 + q);
}

/// The two step-size limits below which the lower bound is nontrivial (mu_1)
/// and the Jacobi direction is a descent direction (mu_2).
struct MuLimits {
  double mu1 = std::numeric_limits<double>::infinity();
  double mu2 = std::numeric_limits<double>::infinity();
  double admissible() const { return std::min(mu1, mu2); }
};

inline MuLimits mu_limits(double m, double L1, double L3, Index d) {
  if (!(m > 0.0) || !(L1 >= m) || d < 1) throw ConfigError("mu limits need m > 0, L1 >= m, d >= 1");
  MuLimits lim;
  if (L3 == 0.0) return lim;
  const double dd = static_cast<double>(d);
  lim.mu1 = std::sqrt(6.0 * (std::sqrt(L1 * L1 + m * m) - L1) / (dd * L3));
  const double disc = 4.0 * dd * dd * L1 * L1 + m * m + 4.0 * dd * L1 * m + 8.0 * m * m * dd;
  lim.mu2 = std::sqrt(3.0 * (std::sqrt(disc) - 2.0 * dd * L1 - m) / (dd * L3));
  return lim;
}

/// min(mu_1, mu_2); +infinity when L3 == 0 (quadratics: no constraint).
inline double admissible_mu(double m, double L1, double L3, Index d) {
  return mu_limits(m, L1, L3, d).admissible();
}

}  // namespace zojade
