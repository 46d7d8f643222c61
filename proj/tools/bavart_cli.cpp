// bavart: estimate, backtest, girf, simulate and importance from the shell.
// Exit codes: 0 success, 1 runtime failure, 2 configuration error. Failures
// print one line `error <key>: <message>` on stderr.

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>

#include "bavart/commands.hpp"

namespace {

int report(const bavart::Error& e) {
  std::cerr << "error " << e.key() << ": " << e.what() << '\n';
  return e.kind() == bavart::ErrorKind::Config ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-based Bayesian VAR with stochastic volatility"};
  app.require_subcommand(1);
  std::string config;
  std::string spec;

  auto* est = app.add_subcommand("estimate", "fit the model and write posterior draws to <output.dir>/draws");
  est->add_option("config", config, "run configuration file")->required();
  auto* bt = app.add_subcommand("backtest", "expanding-window MSFE and CRPS tables");
  bt->add_option("config", config, "run configuration file")->required();
  auto* gi = app.add_subcommand("girf", "impulse-response percentiles from stored draws");
  gi->add_option("config", config, "run configuration file")->required();
  auto* imp = app.add_subcommand("importance", "posterior-median splitting counts per covariate and equation");
  imp->add_option("config", config, "run configuration file")->required();
  auto* sim = app.add_subcommand("simulate", "synthetic data with a ground-truth sidecar");
  sim->add_option("spec", spec, "data-generating process specification")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      bavart::cmd_simulate(spec);
      return 0;
    }
    const bavart::RunConfig cfg = bavart::load_run_config(config);
    if (est->parsed()) bavart::cmd_estimate(cfg);
    if (bt->parsed()) bavart::cmd_backtest(cfg);
    if (gi->parsed()) bavart::cmd_girf(cfg);
    if (imp->parsed()) bavart::cmd_importance(cfg);
  } catch (const bavart::Error& e) {
    return report(e);
  } catch (const std::exception& e) {
    std::cerr << "error runtime: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
