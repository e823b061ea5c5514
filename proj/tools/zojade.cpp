#include "zojade/harness.hpp"
#include "zojade/verification.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

enum Exit { kOk = 0, kRunFailure = 1, kConfigError = 2, kVerifyFailure = 3 };

int cmd_run(const std::string& config, const std::string& out, const std::vector<std::uint64_t>& seeds) {
  zojade::ExperimentConfig cfg = zojade::load_config(config);
  if (!seeds.empty()) cfg.seeds = seeds;
  if (!out.empty()) cfg.output_dir = out;
  const auto res = zojade::run_experiment(cfg);
  zojade::write_outputs(res, cfg.output_dir);
  zojade::print_summary(std::cout, res, cfg.target_ef);
  for (const auto& o : res.outcomes)
    for (const auto& t : o.traces)
      if (t.failed) std::cerr << t.algorithm << " seed " << t.seed << ": " << t.diagnostic << '\n';
  return res.any_failed ? kRunFailure : kOk;
}

int cmd_verify(const std::string& config) {
  std::optional<zojade::ExperimentConfig> cfg;
  if (!config.empty()) cfg = zojade::load_config(config);
  const auto rep = zojade::verify_suite(cfg);
  std::cout << rep.to_json().dump(2) << '\n';
  for (const auto& c : rep.checks)
    std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
  return rep.passed() ? kOk : kVerifyFailure;
}

int cmd_rate(const std::string& path, double tail) {
  std::ifstream in(path);
  if (!in) throw zojade::ConfigError("cannot open trace '" + path + "'");
  const auto table = zojade::csv::read_table(in);
  const char* xs = table.columns.count("iteration") ? "iteration" : "queries";
  const char* ys = table.columns.count("e_f") ? "e_f" : "ef_mean";
  if (!table.columns.count(xs) || !table.columns.count(ys))
    throw zojade::ConfigError("trace '" + path + "' has neither iteration/e_f nor queries/ef_mean columns");
  const auto fit = zojade::fit_exponential_rate(table.columns.at(xs), table.columns.at(ys), tail);
  std::cout << "rate,r_squared,points\n"
            << zojade::format_double(fit.rate) << ',' << zojade::format_double(fit.r_squared) << ',' << fit.points
            << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized zeroth-order Jacobi optimization: experiments and checks"};
  app.require_subcommand(1);

  std::string config, out, trace;
  std::vector<std::uint64_t> seeds;
  double tail = 0.5;

  auto* run = app.add_subcommand("run", "Run an experiment config and write CSV traces");
  run->add_option("--config", config, "Experiment config (JSON)")->required();
  run->add_option("--out", out, "Output directory (overrides output_dir)");
  run->add_option("--seeds", seeds, "Comma-separated seeds (overrides seeds)")->delimiter(',');

  auto* verify = app.add_subcommand("verify", "Run the verification battery");
  verify->add_option("--config", config, "Also check this config's network, mu and instance");

  auto* rate = app.add_subcommand("rate", "Fit an exponential rate to a trace or aggregate CSV");
  rate->add_option("--trace", trace, "CSV file")->required();
  rate->add_option("--tail", tail, "Fraction of points above the floor to fit")->default_val(0.5);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(config, out, seeds);
    if (*verify) return cmd_verify(config);
    if (*rate) return cmd_rate(trace, tail);
  } catch (const zojade::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const zojade::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRunFailure;
  }
  return kOk;
}
