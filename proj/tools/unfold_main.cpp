#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <string>

#include "unfold/config.hpp"
#include "unfold/errors.hpp"
#include "unfold/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Poisson intensity unfolding with wavelet-Galerkin inversion"};
  app.require_subcommand(1);

  std::string config_path, out_dir, counts_path;
  std::uint64_t seed = 0;
  bool no_timestamp = false;

  CLI::App* sim = app.add_subcommand("simulate", "sample counts from a folded intensity");
  CLI::App* est = app.add_subcommand("estimate", "estimate an intensity from counts");
  CLI::App* exp = app.add_subcommand("experiment", "Monte Carlo loss sweep over t");
  CLI::App* diag = app.add_subcommand("diagnose", "approximation and stability report");
  for (CLI::App* cmd : {sim, est, exp, diag}) {
    cmd->add_option("--config", config_path, "JSON config path")->required();
    cmd->add_option("--out", out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", seed, "master seed (overrides config)");
    cmd->add_flag("--no-timestamp", no_timestamp,
                  "omit timestamps and timings for byte-stable outputs");
  }
  est->add_option("--counts", counts_path, "counts CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : int(unfold::ExitCode::exit_config);
  }

  CLI::App* active = app.get_subcommands().front();
  unfold::RunOptions opts;
  opts.out_override = out_dir;
  opts.no_timestamp = no_timestamp;
  if (active->count("--seed") > 0) {
    opts.has_seed = true;
    opts.seed = seed;
  }

  try {
    const unfold::ExperimentConfig cfg = unfold::load_config(config_path);
    unfold::RunSummary sum;
    if (active == sim)
      sum = unfold::run_simulate(cfg, opts);
    else if (active == est)
      sum = unfold::run_estimate(cfg, counts_path, opts);
    else if (active == exp)
      sum = unfold::run_experiment(cfg, opts);
    else
      sum = unfold::run_diagnose(cfg, opts);
    std::printf("wrote %zu files to %s\n", sum.outputs.size(), sum.out_dir.c_str());
    return int(unfold::ExitCode::exit_ok);
  } catch (const unfold::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
