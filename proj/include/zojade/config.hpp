#pragma once

// Experiment configuration: JSON schema, validation and hashing.

#include "zojade/algorithms.hpp"
#include "zojade/core.hpp"
#include "zojade/graph.hpp"
#include "zojade/objectives.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace zojade {

using json = nlohmann::json;

/// Coarse step-size grid, as multiples of 1/L1 of the instance.
inline const std::vector<double> kEtaGridFactors{1.0, 0.3, 0.1, 0.03, 0.01};
/// Coarse grid for the ZO-JADE mixing parameter epsilon.
inline const std::vector<double> kEpsilonGrid{0.5, 0.2, 0.05};

struct TopologyConfig {
  TopologySpec spec;
  std::optional<Matrix> weights;  // kind "matrix": explicit consensus matrix
};

struct InstanceConfig {
  Family family = Family::logistic;
  Index dimension = 10;
  Index per_agent = 50;
  std::uint64_t seed = 1;
  double lambda = 0.1;  // ridge
  double w = 0.1;       // logistic
  double separation = 2.0;
  double scale_spread = 1.0;
  double noise = 0.1;
  double q = 1.0;  // quartic
  double box = 3.0;
  std::optional<std::string> csv;  // ridge/logistic from a file instead of synthetic data
  bool header = false;
  std::optional<bool> standardize;  // default: on for csv, off for synthetic
};

/// A step parameter is either fixed or tuned over a grid.
struct StepChoice {
  std::vector<double> candidates;  // one entry means fixed
  bool auto_grid = false;          // candidates derived from the default grid
};

struct AlgorithmEntry {
  Algorithm algorithm = Algorithm::zo_jade;
  StepChoice step;  // epsilon for zo_jade, eta for baselines
  double z_floor = 1e-8;
};

struct ExperimentConfig {
  TopologyConfig topology;
  InstanceConfig instance;
  std::vector<AlgorithmEntry> algorithms;
  double mu = 1e-3;
  std::uint64_t budget = 20000;
  std::vector<std::uint64_t> seeds{1};
  int record_every = 1;
  double init_scale = 1.0;
  std::optional<double> target_ef;
  std::string output_dir = "out";
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline StepChoice parse_step(const json& j, const char* key, const std::string& where) {
  StepChoice s;
  if (!j.contains(key) || j.at(key).is_null() || (j.at(key).is_string() && j.at(key) == "auto")) {
    s.auto_grid = true;
    return s;
  }
  const json& v = j.at(key);
  if (v.is_number()) {
    s.candidates.push_back(v.get<double>());
  } else if (v.is_array() && !v.empty()) {
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(where + "." + key + ": grid entries must be numbers");
      s.candidates.push_back(e.get<double>());
    }
  } else {
    throw ConfigError(where + "." + key + ": expected a number, a list of numbers or \"auto\"");
  }
  return s;
}

inline json step_to_json(const StepChoice& s) {
  if (s.auto_grid) return "auto";
  if (s.candidates.size() == 1) return s.candidates.front();
  return s.candidates;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  using detail::get_or;
  detail::reject_unknown(j, {"topology", "instance", "algorithms", "mu", "budget", "seeds", "record_every",
                             "init_scale", "target_ef", "output_dir"},
                         "config");
  ExperimentConfig cfg;

  if (!j.contains("topology")) throw ConfigError("config: missing 'topology'");
  {
    const json& t = j.at("topology");
    detail::reject_unknown(t, {"kind", "n", "p", "seed", "weights"}, "topology");
    const auto kind = get_or<std::string>(t, "kind", "ring", "topology");
    if (kind == "matrix") {
      if (!t.contains("weights") || !t.at("weights").is_array()) throw ConfigError("topology.weights: required");
      const json& rows = t.at("weights");
      const auto n = static_cast<Index>(rows.size());
      Matrix w(n, n);
      for (Index i = 0; i < n; ++i) {
        if (!rows[i].is_array() || static_cast<Index>(rows[i].size()) != n)
          throw ConfigError("topology.weights: must be a square matrix");
        for (Index k = 0; k < n; ++k) w(i, k) = rows[i][k].get<double>();
      }
      cfg.topology.weights = w;
      cfg.topology.spec.n = static_cast<int>(n);
    } else {
      if (t.contains("weights")) throw ConfigError("topology.weights: only valid with kind \"matrix\"");
      cfg.topology.spec.kind = topology_kind_from_string(kind);
      cfg.topology.spec.n = get_or<int>(t, "n", 20, "topology");
      cfg.topology.spec.p = get_or<double>(t, "p", 0.3, "topology");
      cfg.topology.spec.seed = get_or<std::uint64_t>(t, "seed", 0, "topology");
    }
    if (cfg.topology.spec.n <= 0) throw ConfigError("topology.n: must be positive");
  }

  if (!j.contains("instance")) throw ConfigError("config: missing 'instance'");
  {
    const json& t = j.at("instance");
    detail::reject_unknown(t, {"family", "dimension", "per_agent", "seed", "lambda", "w", "separation",
                               "scale_spread", "noise", "q", "box", "csv", "header", "standardize"},
                           "instance");
    auto& ic = cfg.instance;
    const auto fam = get_or<std::string>(t, "family", "logistic", "instance");
    bool found = false;
    for (auto f : {Family::quadratic, Family::ridge, Family::logistic, Family::quartic})
      if (to_string(f) == fam) {
        ic.family = f;
        found = true;
      }
    if (!found) throw ConfigError("instance.family: unknown family '" + fam + "'");
    ic.dimension = get_or<Index>(t, "dimension", ic.dimension, "instance");
    ic.per_agent = get_or<Index>(t, "per_agent", ic.per_agent, "instance");
    ic.seed = get_or<std::uint64_t>(t, "seed", ic.seed, "instance");
    ic.lambda = get_or<double>(t, "lambda", ic.lambda, "instance");
    ic.w = get_or<double>(t, "w", ic.w, "instance");
    ic.separation = get_or<double>(t, "separation", ic.separation, "instance");
    ic.scale_spread = get_or<double>(t, "scale_spread", ic.scale_spread, "instance");
    ic.noise = get_or<double>(t, "noise", ic.noise, "instance");
    ic.q = get_or<double>(t, "q", ic.q, "instance");
    ic.box = get_or<double>(t, "box", ic.box, "instance");
    if (t.contains("csv") && !t.at("csv").is_null()) ic.csv = get_or<std::string>(t, "csv", "", "instance");
    ic.header = get_or<bool>(t, "header", false, "instance");
    if (t.contains("standardize") && !t.at("standardize").is_null())
      ic.standardize = get_or<bool>(t, "standardize", false, "instance");
    if (ic.dimension < 1) throw ConfigError("instance.dimension: must be positive");
    if (ic.per_agent < 0) throw ConfigError("instance.per_agent: must be non-negative");
    if (!(ic.scale_spread > 0.0)) throw ConfigError("instance.scale_spread: must be positive");
    if (ic.csv && (ic.family == Family::quadratic || ic.family == Family::quartic))
      throw ConfigError("instance.csv: only ridge and logistic instances load data");
  }

  if (!j.contains("algorithms") || !j.at("algorithms").is_array() || j.at("algorithms").empty())
    throw ConfigError("config: 'algorithms' must be a non-empty list");
  std::set<std::string> seen;
  for (const auto& a : j.at("algorithms")) {
    detail::reject_unknown(a, {"name", "epsilon", "eta", "z_floor"}, "algorithms[]");
    AlgorithmEntry e;
    const auto name = get_or<std::string>(a, "name", "", "algorithms[]");
    e.algorithm = algorithm_from_string(name);
    if (!seen.insert(name).second) throw ConfigError("algorithms: '" + name + "' listed twice");
    if (e.algorithm == Algorithm::zo_jade) {
      if (a.contains("eta")) throw ConfigError("algorithms[zo_jade]: takes 'epsilon', not 'eta'");
      e.step = a.contains("epsilon") ? detail::parse_step(a, "epsilon", "algorithms[zo_jade]")
                                     : StepChoice{{0.05}, false};
      e.z_floor = get_or<double>(a, "z_floor", e.z_floor, "algorithms[zo_jade]");
      for (double eps : e.step.candidates)
        if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("algorithms[zo_jade].epsilon: must lie in (0, 1]");
      if (!(e.z_floor > 0.0)) throw ConfigError("algorithms[zo_jade].z_floor: must be positive");
    } else {
      if (a.contains("epsilon") || a.contains("z_floor"))
        throw ConfigError("algorithms[" + name + "]: takes 'eta' only");
      e.step = detail::parse_step(a, "eta", "algorithms[" + name + "]");
      for (double eta : e.step.candidates)
        if (!(eta >= 0.0)) throw ConfigError("algorithms[" + name + "].eta: must be non-negative");
    }
    cfg.algorithms.push_back(std::move(e));
  }

  cfg.mu = get_or<double>(j, "mu", cfg.mu, "config");
  cfg.budget = get_or<std::uint64_t>(j, "budget", cfg.budget, "config");
  cfg.record_every = get_or<int>(j, "record_every", cfg.record_every, "config");
  cfg.init_scale = get_or<double>(j, "init_scale", cfg.init_scale, "config");
  if (j.contains("target_ef") && !j.at("target_ef").is_null()) cfg.target_ef = get_or<double>(j, "target_ef", 0.0, "config");
  cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir, "config");
  if (j.contains("seeds")) {
    cfg.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", {}, "config");
    if (cfg.seeds.empty()) throw ConfigError("config.seeds: must be non-empty");
  }
  if (!(cfg.mu > 0.0)) throw ConfigError("config.mu: must be positive");
  if (cfg.budget == 0) throw ConfigError("config.budget: must be positive");
  if (cfg.record_every < 1) throw ConfigError("config.record_every: must be at least 1");
  if (!(cfg.init_scale >= 0.0)) throw ConfigError("config.init_scale: must be non-negative");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
    return parse_config(j);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
}

/// Fully explicit form of a config (every default filled in). output_dir is
/// left out so that the hash only depends on what determines the results.
inline json canonical_json(const ExperimentConfig& c) {
  json t;
  if (c.topology.weights) {
    t["kind"] = "matrix";
    json rows = json::array();
    for (Index i = 0; i < c.topology.weights->rows(); ++i) {
      json r = json::array();
      for (Index k = 0; k < c.topology.weights->cols(); ++k) r.push_back((*c.topology.weights)(i, k));
      rows.push_back(r);
    }
    t["weights"] = rows;
  } else {
    t = {{"kind", to_string(c.topology.spec.kind)},
         {"n", c.topology.spec.n},
         {"p", c.topology.spec.p},
         {"seed", c.topology.spec.seed}};
  }
  const auto& ic = c.instance;
  json inst = {{"family", to_string(ic.family)}, {"dimension", ic.dimension}, {"per_agent", ic.per_agent},
               {"seed", ic.seed},                {"lambda", ic.lambda},       {"w", ic.w},
               {"separation", ic.separation},    {"scale_spread", ic.scale_spread},
               {"noise", ic.noise},              {"q", ic.q},                 {"box", ic.box},
               {"header", ic.header}};
  inst["csv"] = ic.csv ? json(*ic.csv) : json(nullptr);
  inst["standardize"] = ic.standardize ? json(*ic.standardize) : json(nullptr);
  json algs = json::array();
  for (const auto& a : c.algorithms) {
    json e = {{"name", to_string(a.algorithm)}};
    if (a.algorithm == Algorithm::zo_jade) {
      e["epsilon"] = detail::step_to_json(a.step);
      e["z_floor"] = a.z_floor;
    } else {
      e["eta"] = detail::step_to_json(a.step);
    }
    algs.push_back(e);
  }
  json out = {{"topology", t},       {"instance", inst},         {"algorithms", algs},
              {"mu", c.mu},          {"budget", c.budget},       {"seeds", c.seeds},
              {"record_every", c.record_every}, {"init_scale", c.init_scale}};
  out["target_ef"] = c.target_ef ? json(*c.target_ef) : json(nullptr);
  return out;
}

/// FNV-1a 64 of the canonical JSON text, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string text = canonical_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static const char* hex = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[i] = hex[h & 0xf];
  return s;
}

// ---------------------------------------------------------------------------
// Building the objects a config describes

struct Network {
  std::optional<Graph> graph;
  std::shared_ptr<const ConsensusMatrix> p;
};

inline Network build_network(const TopologyConfig& t) {
  Network net;
  if (t.weights) {
    Graph g = graph_from_weights(*t.weights);
    net.p = std::make_shared<const ConsensusMatrix>(*t.weights, &g);
    net.graph = std::move(g);
  } else {
    net.graph = topology_from_spec(t.spec);
    net.p = std::make_shared<const ConsensusMatrix>(metropolis_hastings(*net.graph));
  }
  return net;
}

inline ProblemInstance build_instance(const InstanceConfig& ic, int n) {
  if (ic.csv) {
    Dataset ds = load_csv(*ic.csv, ic.header);
    if (ic.standardize.value_or(true)) standardize(ds.features);
    if (ic.family == Family::ridge) return ridge_instance_from_shards(ds.features, ds.targets, n, ic.lambda);
    return logistic_instance(ds.features, ds.targets, n, ic.w);
  }
  if (ic.standardize.value_or(false))
    throw ConfigError("instance.standardize: only applies to data loaded from csv");
  switch (ic.family) {
    case Family::ridge: {
      SyntheticRidgeSpec s{ic.dimension, ic.per_agent, n, ic.seed, ic.lambda, ic.noise, ic.scale_spread};
      return synthetic_ridge(s);
    }
    case Family::logistic: {
      SyntheticClassificationSpec s{ic.dimension, ic.per_agent, n, ic.seed, ic.w, ic.separation, ic.scale_spread};
      return synthetic_classification(s);
    }
    case Family::quadratic: {
      SeparableQuadraticSpec s;
      s.d = ic.dimension;
      s.n = n;
      s.seed = ic.seed;
      return separable_quadratic_instance(s);
    }
    case Family::quartic: {
      QuarticSpec s;
      s.d = ic.dimension;
      s.n = n;
      s.seed = ic.seed;
      s.q = ic.q;
      s.box = ic.box;
      return quartic_instance(s);
    }
  }
  throw ConfigError("unknown instance family");
}

}  // namespace zojade
