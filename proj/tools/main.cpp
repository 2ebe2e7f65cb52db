// Command-line front end: scenario validation, reproduction of the built-in
// 2-d scenarios, CF convergence tables, path simulation, and 3-tensor
// diagonalization. See README.md for the config schema.

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "obtuse/commands.hpp"
#include "obtuse/config.hpp"
#include "obtuse/errors.hpp"

namespace {

struct CliState {
  std::string config_spec;
  obtuse::CommandOptions opts;
};

void add_common(CLI::App* cmd, CliState& st, bool with_config) {
  if (with_config)
    cmd->add_option("--config", st.config_spec,
                    "config file path, or a built-in scenario name "
                    "(example-1, example-2, example-3)")
        ->required();
  cmd->add_option("--tol", st.opts.tol, "validation tolerance");
  cmd->add_option("--seed", st.opts.seed, "override the scenario seed");
  cmd->add_option("--paths", st.opts.paths, "override the scenario path count");
  cmd->add_option("--out", st.opts.out_dir, "output directory for CSV/report files");
  cmd->add_option("--threads", st.opts.threads, "worker threads for sampling");
  cmd->add_option("--max-chain-dim", st.opts.max_chain_states,
                  "state cap for truncated chain spaces");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"obtuse random walks, chain operators, and their limit processes"};
  app.require_subcommand(1);
  CliState st;

  auto* validate = app.add_subcommand("validate", "check scenario invariants");
  add_common(validate, st, true);

  auto* reproduce =
      app.add_subcommand("reproduce-paper", "recompute the built-in 2-d scenarios, "
                                            "flagging deviations from the printed values");
  add_common(reproduce, st, false);

  auto* converge = app.add_subcommand("converge", "tabulate |discrete CF - limit CF|");
  add_common(converge, st, true);
  converge->add_flag("--monte-carlo", st.opts.monte_carlo,
                     "append empirical CF columns with standard errors");

  auto* simulate = app.add_subcommand("simulate", "emit sampled trajectories as CSV");
  add_common(simulate, st, true);
  simulate->add_option("--kind", st.opts.kind, "walk (default) or limit");

  auto* diagonalize = app.add_subcommand("diagonalize", "diagonalize a doubly symmetric tensor");
  add_common(diagonalize, st, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (reproduce->parsed()) return obtuse::cmd_reproduce_paper(st.opts, std::cout);
    const obtuse::ScenarioConfig cfg = obtuse::load_scenario(st.config_spec);
    if (validate->parsed()) return obtuse::cmd_validate(cfg, st.opts, std::cout);
    if (converge->parsed()) return obtuse::cmd_converge(cfg, st.opts, std::cout);
    if (simulate->parsed()) return obtuse::cmd_simulate(cfg, st.opts, std::cout);
    if (diagonalize->parsed()) return obtuse::cmd_diagonalize(cfg, st.opts, std::cout);
  } catch (const obtuse::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const obtuse::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
