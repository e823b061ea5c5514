#pragma once

// Experiment runner: shared initial points per seed, step-size tuning,
// traces, aggregate curves, CSV output and exponential-rate fitting.

#include "zojade/algorithms.hpp"
#include "zojade/config.hpp"
#include "zojade/core.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace zojade {

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateCurve {
  std::string algorithm;
  std::vector<std::uint64_t> queries;
  std::vector<double> ef_mean;
  std::vector<double> ef_std;  // population standard deviation
};

/// Value of a trace at query level q: e_f of the last row with queries <= q
/// (the first row when q precedes it).
inline double last_value_at(const RunTrace& t, std::uint64_t q) {
  double v = t.rows.front().e_f;
  for (const auto& r : t.rows) {
    if (r.queries_per_agent > q) break;
    v = r.e_f;
  }
  return v;
}

/// Mean and spread across traces on the union of their query levels.
inline AggregateCurve aggregate(const std::vector<RunTrace>& traces) {
  if (traces.empty()) throw ConfigError("aggregate: no traces");
  AggregateCurve c;
  c.algorithm = traces.front().algorithm;
  std::vector<std::uint64_t> grid;
  for (const auto& t : traces)
    for (const auto& r : t.rows) grid.push_back(r.queries_per_agent);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const double k = static_cast<double>(traces.size());
  for (auto q : grid) {
    double sum = 0.0;
    std::vector<double> vals;
    for (const auto& t : traces) {
      vals.push_back(last_value_at(t, q));
      sum += vals.back();
    }
    const double mean = sum / k;
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    c.queries.push_back(q);
    c.ef_mean.push_back(mean);
    c.ef_std.push_back(std::sqrt(var / k));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Exponential rate

struct RateFit {
  double rate = 0.0;       // slope of log e_f per unit of x
  double r_squared = 0.0;
  std::size_t points = 0;  // points in the fitted window
};

inline constexpr double kRateFloor = 1e-12;
inline constexpr std::size_t kRateMinPoints = 10;

/// Least-squares line through (x, log y) over the last `tail_fraction` of the
/// points with y > floor. A flat series fits exactly: rate 0, r^2 = 1.
inline RateFit fit_exponential_rate(const std::vector<double>& x, const std::vector<double>& y,
                                    double tail_fraction = 0.5, double floor = kRateFloor) {
  if (x.size() != y.size()) throw ConfigError("rate fit: x and y lengths differ");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw ConfigError("rate fit: tail fraction must lie in (0, 1]");
  std::vector<double> xs, ls;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (y[k] > floor && std::isfinite(y[k])) {
      xs.push_back(x[k]);
      ls.push_back(std::log(y[k]));
    }
  if (xs.size() < kRateMinPoints)
    throw ConfigError("rate fit: need at least " + std::to_string(kRateMinPoints) + " points above " +
                      format_double(floor) + ", have " + std::to_string(xs.size()));
  const auto take = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(xs.size()))));
  const std::size_t start = xs.size() - std::min(take, xs.size());
  const double m = static_cast<double>(xs.size() - start);
  double mx = 0.0, my = 0.0;
  for (std::size_t k = start; k < xs.size(); ++k) {
    mx += xs[k];
    my += ls[k];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = start; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ls[k] - my);
    syy += (ls[k] - my) * (ls[k] - my);
  }
  if (sxx == 0.0) throw ConfigError("rate fit: x values in the window are all equal");
  RateFit fit;
  fit.points = xs.size() - start;
  fit.rate = sxy / sxx;
  const double ss_res = syy - fit.rate * sxy;
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  if (syy == 0.0) fit.rate = 0.0;
  return fit;
}

inline RateFit fit_exponential_rate(const RunTrace& t, double tail_fraction = 0.5) {
  std::vector<double> x, y;
  for (const auto& r : t.rows) {
    x.push_back(static_cast<double>(r.iteration));
    y.push_back(r.e_f);
  }
  return fit_exponential_rate(x, y, tail_fraction);
}

/// Fit against queries per agent (the aggregate curve's axis).
inline RateFit fit_exponential_rate(const AggregateCurve& c, double tail_fraction = 0.5) {
  std::vector<double> x(c.queries.begin(), c.queries.end());
  return fit_exponential_rate(x, c.ef_mean, tail_fraction);
}

// ---------------------------------------------------------------------------
// CSV

namespace csv {

inline void write_trace(std::ostream& os, const RunTrace& t) {
  os << "iteration,queries_per_agent,e_f,consensus_error,tracking_residual_y,tracking_residual_z,clamp_count,"
        "config_hash\n";
  for (const auto& r : t.rows)
    os << r.iteration << ',' << r.queries_per_agent << ',' << format_double(r.e_f) << ','
       << format_double(r.consensus_error) << ',' << format_double(r.tracking_residual_y) << ','
       << format_double(r.tracking_residual_z) << ',' << r.clamp_count << ',' << t.config_hash << '\n';
}

inline void write_aggregate(std::ostream& os, const AggregateCurve& c, const std::string& hash) {
  os << "queries,ef_mean,ef_std,config_hash\n";
  for (std::size_t k = 0; k < c.queries.size(); ++k)
    os << c.queries[k] << ',' << format_double(c.ef_mean[k]) << ',' << format_double(c.ef_std[k]) << ',' << hash
       << '\n';
}

inline void write_final_iterates(std::ostream& os, const RunTrace& t) {
  os << "agent";
  for (Index k = 0; k < t.final_x.cols(); ++k) os << ",x" << k;
  os << ",config_hash\n";
  for (Index i = 0; i < t.final_x.rows(); ++i) {
    os << i;
    for (Index k = 0; k < t.final_x.cols(); ++k) os << ',' << format_double(t.final_x(i, k));
    os << ',' << t.config_hash << '\n';
  }
}

/// Header-keyed numeric table; non-numeric cells (e.g. the hash) are skipped.
struct Table {
  std::vector<std::string> header;
  std::map<std::string, std::vector<double>> columns;
};

inline Table read_table(std::istream& in) {
  Table t;
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw ParseError("csv: empty file", 0);
  ++line_no;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(ss, cell, ',')) {
      if (k >= t.header.size()) throw ParseError("csv: too many cells", line_no);
      if (t.header[k] != "config_hash") {
        try {
          t.columns[t.header[k]].push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw ParseError("csv: non-numeric cell '" + cell + "'", line_no);
        }
      }
      ++k;
    }
    if (k != t.header.size()) throw ParseError("csv: expected " + std::to_string(t.header.size()) + " cells", line_no);
  }
  return t;
}

}  // namespace csv

// ---------------------------------------------------------------------------
// Tuning and experiments

struct TuneResult {
  double value = 0.0;
  std::optional<std::uint64_t> queries_to_target;
  double final_ef = std::numeric_limits<double>::infinity();
};

/// Candidate step parameters for an algorithm entry on an instance.
inline std::vector<double> step_candidates(const AlgorithmEntry& a, const ProblemInstance& inst) {
  if (!a.step.auto_grid) return a.step.candidates;
  if (a.algorithm == Algorithm::zo_jade) return kEpsilonGrid;
  std::vector<double> out;
  for (double f : kEtaGridFactors) out.push_back(f / inst.constants.L1);
  return out;
}

/// Picks the candidate reaching `target` in the fewest queries; when none
/// reaches it (or no target is set), the lowest final e_f wins. Ties go to
/// the earlier candidate. Failed runs are never chosen.
inline TuneResult tune_step(const ProblemInstance& inst, std::shared_ptr<const ConsensusMatrix> p, const Matrix& x0,
                            RunConfig base, const std::vector<double>& candidates, std::optional<double> target) {
  if (candidates.empty()) throw ConfigError("tuning: empty candidate list");
  TuneResult best;
  bool have = false;
  base.stop_at_ef = target;
  for (double v : candidates) {
    RunConfig c = base;
    (c.algorithm == Algorithm::zo_jade ? c.epsilon : c.eta) = v;
    const RunTrace t = run(inst, p, x0, c);
    if (t.failed) continue;
    TuneResult r{v, target ? t.queries_to_reach(*target) : std::nullopt, t.rows.back().e_f};
    if (!std::isfinite(r.final_ef)) continue;
    bool better = !have;
    if (have) {
      if (r.queries_to_target && best.queries_to_target)
        better = *r.queries_to_target < *best.queries_to_target;
      else if (r.queries_to_target || best.queries_to_target)
        better = r.queries_to_target.has_value();
      else
        better = r.final_ef < best.final_ef;
    }
    if (better) {
      best = r;
      have = true;
    }
  }
  if (!have) best.value = candidates.front();
  return best;
}

struct AlgorithmOutcome {
  Algorithm algorithm;
  double step_parameter = 0.0;
  bool tuned = false;
  std::vector<RunTrace> traces;  // one per seed, in seed order
  AggregateCurve curve;
};

struct ExperimentResult {
  std::string config_hash;
  std::vector<AlgorithmOutcome> outcomes;
  bool any_failed = false;
};

inline RunConfig run_config_for(const ExperimentConfig& cfg, const AlgorithmEntry& a) {
  RunConfig rc;
  rc.algorithm = a.algorithm;
  rc.mu = cfg.mu;
  rc.z_floor = a.z_floor;
  rc.budget = cfg.budget;
  rc.record_every = cfg.record_every;
  return rc;
}

/// Runs every algorithm on every seed. For each seed the initial points are
/// drawn once and handed to all algorithms. Step parameters given as a grid
/// are tuned once, on the first seed. Nothing is written here.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const Network net = build_network(cfg.topology);
  const ProblemInstance inst = build_instance(cfg.instance, static_cast<int>(net.p->size()));
  ExperimentResult res;
  res.config_hash = config_hash(cfg);

  std::vector<Matrix> starts;
  for (auto seed : cfg.seeds) starts.push_back(initial_points(inst.agents(), inst.d, seed, cfg.init_scale));

  for (const auto& a : cfg.algorithms) {
    AlgorithmOutcome out;
    out.algorithm = a.algorithm;
    RunConfig rc = run_config_for(cfg, a);
    const auto candidates = step_candidates(a, inst);
    if (candidates.size() == 1) {
      out.step_parameter = candidates.front();
    } else {
      out.tuned = true;
      out.step_parameter = tune_step(inst, net.p, starts.front(), rc, candidates, cfg.target_ef).value;
    }
    (rc.algorithm == Algorithm::zo_jade ? rc.epsilon : rc.eta) = out.step_parameter;
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
      RunTrace t = run(inst, net.p, starts[s], rc);
      t.seed = cfg.seeds[s];
      t.config_hash = res.config_hash;
      res.any_failed = res.any_failed || t.failed;
      out.traces.push_back(std::move(t));
    }
    out.curve = aggregate(out.traces);
    res.outcomes.push_back(std::move(out));
  }
  return res;
}

/// trace_<alg>_seed<s>.csv, final_<alg>_seed<s>.csv, aggregate_<alg>.csv and
/// summary.json under `dir`. Output is a pure function of the config.
inline void write_outputs(const ExperimentResult& res, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream os(fs::path(dir) / name, std::ios::binary);
    if (!os) throw ConfigError("cannot write '" + (fs::path(dir) / name).string() + "'");
    return os;
  };
  json summary = {{"config_hash", res.config_hash}, {"algorithms", json::array()}};
  for (const auto& o : res.outcomes) {
    const std::string alg = to_string(o.algorithm);
    json runs = json::array();
    for (const auto& t : o.traces) {
      const std::string tag = alg + "_seed" + std::to_string(t.seed);
      {
        auto os = open("trace_" + tag + ".csv");
        csv::write_trace(os, t);
      }
      {
        auto os = open("final_" + tag + ".csv");
        csv::write_final_iterates(os, t);
      }
      json r = {{"seed", t.seed},
                {"failed", t.failed},
                {"iterations", t.rows.back().iteration},
                {"queries_per_agent", t.rows.back().queries_per_agent},
                {"final_ef", format_double(t.rows.back().e_f)},
                {"absolute_error_fallback", t.absolute_error_fallback}};
      if (t.failed) r["diagnostic"] = t.diagnostic;
      runs.push_back(r);
    }
    {
      auto os = open("aggregate_" + alg + ".csv");
      csv::write_aggregate(os, o.curve, res.config_hash);
    }
    summary["algorithms"].push_back({{"name", alg},
                                     {o.algorithm == Algorithm::zo_jade ? "epsilon" : "eta",
                                      format_double(o.step_parameter)},
                                     {"tuned", o.tuned},
                                     {"runs", runs}});
  }
  auto os = open("summary.json");
  os << summary.dump(2) << '\n';
}

inline void print_summary(std::ostream& os, const ExperimentResult& res, std::optional<double> target) {
  os << "config " << res.config_hash << '\n';
  for (const auto& o : res.outcomes) {
    double mean_ef = 0.0;
    int failed = 0;
    for (const auto& t : o.traces) {
      mean_ef += t.rows.back().e_f;
      failed += t.failed;
    }
    mean_ef /= static_cast<double>(o.traces.size());
    os << to_string(o.algorithm) << (o.algorithm == Algorithm::zo_jade ? " epsilon=" : " eta=")
       << format_double(o.step_parameter) << (o.tuned ? " (tuned)" : "") << " mean final e_f=" << format_double(mean_ef);
    if (target) {
      int reached = 0;
      double q = 0.0;
      for (const auto& t : o.traces)
        if (auto r = t.queries_to_reach(*target)) {
          ++reached;
          q += static_cast<double>(*r);
        }
      os << " reached " << reached << "/" << o.traces.size();
      if (reached) os << " mean queries/agent=" << format_double(q / reached);
    }
    if (failed) os << " FAILED " << failed;
    os << '\n';
  }
}

}  // namespace zojade
