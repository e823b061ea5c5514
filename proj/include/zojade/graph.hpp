#pragma once

// Network topologies and doubly stochastic consensus weights.

#include "zojade/core.hpp"
#include "zojade/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace zojade {

using Edge = std::pair<int, int>;

/// Undirected, connected, loop-free graph on nodes [0, n).
/// Edges are stored once, as (min, max), sorted.
class Graph {
 public:
  Graph(int n, std::vector<Edge> edges) : n_(n) {
    if (n <= 0) throw ConfigError("graph: node count must be positive, got " + std::to_string(n));
    for (auto& [a, b] : edges) {
      if (a < 0 || a >= n || b < 0 || b >= n)
        throw ConfigError("graph: edge (" + std::to_string(a) + "," + std::to_string(b) +
                          ") has an index outside [0," + std::to_string(n) + ")");
      if (a == b) throw ConfigError("graph: self-loop at node " + std::to_string(a));
      if (a > b) std::swap(a, b);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);

    adjacency_.assign(n, {});
    for (const auto& [a, b] : edges_) {
      adjacency_[a].push_back(b);
      adjacency_[b].push_back(a);
    }
    for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());

    if (!is_connected(n_, adjacency_)) throw ConfigError("graph: not connected");
  }

  int size() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int i) const { return adjacency_[i]; }
  int degree(int i) const { return static_cast<int>(adjacency_[i].size()); }

  bool has_edge(int a, int b) const {
    if (a > b) std::swap(a, b);
    return std::binary_search(edges_.begin(), edges_.end(), Edge{a, b});
  }

  static bool is_connected(int n, const std::vector<std::vector<int>>& adjacency) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : adjacency[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n;
  }

 private:
  int n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
};

inline constexpr double kStochasticTolerance = 1e-12;

/// Lists every violated consensus-matrix invariant. With a graph, the
/// sparsity pattern is also checked against its edges plus the diagonal.
inline std::vector<std::string> consensus_violations(const Matrix& w, const Graph* graph = nullptr) {
  std::vector<std::string> out;
  if (w.rows() != w.cols() || w.rows() == 0) {
    out.push_back("matrix is not square and non-empty");
    return out;
  }
  const Index n = w.rows();
  if (graph && graph->size() != n) out.push_back("matrix size does not match graph size");
  if (!w.allFinite()) out.push_back("matrix has non-finite entries");
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (w(i, j) != w(j, i)) {
        out.push_back("not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
        i = n;
        break;
      }
    }
  }
  if ((w.array() < 0.0).any()) out.push_back("negative entries");
  for (Index i = 0; i < n; ++i) {
    const double r = w.row(i).sum();
    if (std::abs(r - 1.0) > kStochasticTolerance) {
      out.push_back("row " + std::to_string(i) + " sums to " + format_double(r));
      break;
    }
  }
  for (Index j = 0; j < n; ++j) {
    const double c = w.col(j).sum();
    if (std::abs(c - 1.0) > kStochasticTolerance) {
      out.push_back("column " + std::to_string(j) + " sums to " + format_double(c));
      break;
    }
  }
  if (graph && graph->size() == n) {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (i != j && w(i, j) != 0.0 && !graph->has_edge(static_cast<int>(i), static_cast<int>(j))) {
          out.push_back("weight on non-edge (" + std::to_string(i) + "," + std::to_string(j) + ")");
          i = n;
          break;
        }
  }
  return out;
}

/// Symmetric doubly stochastic mixing matrix P. Immutable once built.
class ConsensusMatrix {
 public:
  explicit ConsensusMatrix(Matrix weights, const Graph* graph = nullptr) : w_(std::move(weights)) {
    const auto bad = consensus_violations(w_, graph);
    if (!bad.empty()) throw ConfigError("consensus matrix: " + bad.front());
  }

  Index size() const { return w_.rows(); }
  const Matrix& weights() const { return w_; }
  double operator()(Index i, Index j) const { return w_(i, j); }

 private:
  Matrix w_;
};

/// Metropolis-Hastings weights: p_ij = 1 / (1 + max(deg_i, deg_j)) on edges,
/// diagonal set to the row residual so each row sums to one.
inline ConsensusMatrix metropolis_hastings(const Graph& g) {
  const int n = g.size();
  Matrix w = Matrix::Zero(n, n);
  for (const auto& [a, b] : g.edges()) {
    const double p = 1.0 / (1.0 + std::max(g.degree(a), g.degree(b)));
    w(a, b) = p;
    w(b, a) = p;
  }
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j : g.neighbors(i)) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  return ConsensusMatrix(std::move(w), &g);
}

/// Second-largest eigenvalue magnitude of P: the largest |lambda| on the
/// subspace orthogonal to the all-ones vector. P is symmetric with P1 = 1,
/// so that subspace is invariant; power iteration runs on P^2 restricted to
/// it, stopping when the P^2 eigen-residual drops below `tol`.
inline double spectral_gap(const ConsensusMatrix& p, double tol = 1e-10, int max_iter = 100000) {
  const Index n = p.size();
  if (n == 1) return 0.0;
  const Matrix& w = p.weights();

  auto deflate = [](Vector& v) { v.array() -= v.mean(); };

  // Fixed, non-symmetric start so no eigen-direction is missed by accident.
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = 1.0 + std::sin(1.0 + 2.0 * static_cast<double>(i));
  deflate(v);
  if (v.norm() == 0.0) v.setLinSpaced(n, -1.0, 1.0);
  v.normalize();

  double lambda_sq = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector pv = w * v;
    Vector ppv = w * pv;
    deflate(ppv);
    lambda_sq = v.dot(ppv);
    const double residual = (ppv - lambda_sq * v).norm();
    const double norm = ppv.norm();
    if (norm == 0.0) return 0.0;
    if (residual <= tol) break;
    v = ppv / norm;
  }
  return std::sqrt(std::max(lambda_sq, 0.0));
}

// ---------------------------------------------------------------------------
// Topology generators

enum class TopologyKind { complete, ring, path, grid, erdos_renyi };

struct TopologySpec {
  TopologyKind kind = TopologyKind::ring;
  int n = 1;
  double p = 0.3;          // erdos_renyi edge probability
  std::uint64_t seed = 0;  // erdos_renyi
};

inline constexpr int kErdosRenyiMaxRetries = 1000;

namespace detail {
inline std::pair<int, int> grid_shape(int n) {
  int rows = static_cast<int>(std::sqrt(static_cast<double>(n)));
  while (rows > 1 && n % rows != 0) --rows;
  return {rows, n / rows};
}
}  // namespace detail

inline Graph topology_from_spec(const TopologySpec& spec) {
  const int n = spec.n;
  if (n <= 0) throw ConfigError("topology: n must be positive");
  std::vector<Edge> e;
  switch (spec.kind) {
    case TopologyKind::complete:
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
      return Graph(n, std::move(e));
    case TopologyKind::path:
      for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
      return Graph(n, std::move(e));
    case TopologyKind::ring:
      for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
      if (n > 2) e.emplace_back(n - 1, 0);
      return Graph(n, std::move(e));
    case TopologyKind::grid: {
      const auto [rows, cols] = detail::grid_shape(n);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          const int v = r * cols + c;
          if (c + 1 < cols) e.emplace_back(v, v + 1);
          if (r + 1 < rows) e.emplace_back(v, v + cols);
        }
      return Graph(n, std::move(e));
    }
    case TopologyKind::erdos_renyi: {
      if (!(spec.p >= 0.0 && spec.p <= 1.0)) throw ConfigError("topology: erdos_renyi p must lie in [0,1]");
      Rng rng = make_stream(spec.seed, stream::kTopology);
      for (int attempt = 0; attempt < kErdosRenyiMaxRetries; ++attempt) {
        e.clear();
        std::vector<std::vector<int>> adj(n);
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j)
            if (rng.uniform() < spec.p) {
              e.emplace_back(i, j);
              adj[i].push_back(j);
              adj[j].push_back(i);
            }
        if (Graph::is_connected(n, adj)) return Graph(n, std::move(e));
      }
      throw ConfigError("topology: erdos_renyi(n=" + std::to_string(n) + ", p=" + format_double(spec.p) +
                        ") not connected after " + std::to_string(kErdosRenyiMaxRetries) + " retries");
    }
  }
  throw ConfigError("topology: unknown kind");
}

inline std::string to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::complete: return "complete";
    case TopologyKind::ring: return "ring";
    case TopologyKind::path: return "path";
    case TopologyKind::grid: return "grid";
    case TopologyKind::erdos_renyi: return "erdos_renyi";
  }
  return "?";
}

inline TopologyKind topology_kind_from_string(const std::string& s) {
  for (auto k : {TopologyKind::complete, TopologyKind::ring, TopologyKind::path, TopologyKind::grid,
                 TopologyKind::erdos_renyi})
    if (to_string(k) == s) return k;
  throw ConfigError("topology: unknown kind '" + s + "'");
}

/// Graph implied by the off-diagonal support of a weight matrix.
inline Graph graph_from_weights(const Matrix& w) {
  if (w.rows() != w.cols()) throw ConfigError("consensus matrix must be square");
  std::vector<Edge> e;
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = i + 1; j < w.cols(); ++j)
      if (w(i, j) != 0.0 || w(j, i) != 0.0) e.emplace_back(static_cast<int>(i), static_cast<int>(j));
  return Graph(static_cast<int>(w.rows()), std::move(e));
}

}  // namespace zojade
