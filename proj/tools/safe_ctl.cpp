#include <iostream>

#include <CLI11.hpp>

#include "safe/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"safe_ctl: KL-controlled policy optimization on a synthetic environment"};
  app.require_subcommand(1);

  safe::RunOptions run_opts;
  std::string run_config, run_mode, run_out;
  int run_steps = 0;
  std::uint64_t run_seed = 0;
  CLI::App* run = app.add_subcommand("run", "train one (mode, seed) cell and write its trace");
  auto* run_config_opt = run->add_option("--config", run_config, "JSON run configuration");
  auto* run_mode_opt = run->add_option("--mode", run_mode, "ppo | asym-kl | safe");
  auto* run_steps_opt = run->add_option("--steps", run_steps, "number of training steps");
  auto* run_seed_opt = run->add_option("--seed", run_seed, "RNG seed");
  auto* run_out_opt = run->add_option("--out", run_out, "output directory");

  safe::CompareOptions cmp_opts;
  std::string cmp_config, cmp_out;
  int cmp_steps = 0;
  CLI::App* compare = app.add_subcommand("compare", "run every (mode, seed) cell and write a comparison report");
  auto* cmp_config_opt = compare->add_option("--config", cmp_config, "JSON run configuration");
  auto* cmp_steps_opt = compare->add_option("--steps", cmp_steps, "number of training steps");
  compare->add_option("--seeds", cmp_opts.seeds, "seeds (comma or space separated)")->required()->delimiter(',');
  compare->add_option("--modes", cmp_opts.modes, "modes (comma or space separated)")->required()->delimiter(',');
  auto* cmp_out_opt = compare->add_option("--out", cmp_out, "output directory");

  safe::ReplayOptions rep_opts;
  std::string rep_config;
  CLI::App* replay = app.add_subcommand("replay", "stream a step,kl,reward CSV through the controllers");
  replay->add_option("--trace", rep_opts.trace, "CSV input")->required();
  auto* rep_config_opt = replay->add_option("--config", rep_config, "JSON run configuration");

  safe::ReportOptions report_opts;
  std::string report_out;
  CLI::App* report = app.add_subcommand("report", "recompute the comparison report from trace files");
  report->add_option("--trace", report_opts.traces, "trace files (JSONL)")->required();
  auto* report_out_opt = report->add_option("--out", report_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    if (*run_config_opt) run_opts.overrides.config = run_config;
    if (*run_mode_opt) run_opts.overrides.mode = run_mode;
    if (*run_steps_opt) run_opts.overrides.steps = run_steps;
    if (*run_seed_opt) run_opts.overrides.seed = run_seed;
    if (*run_out_opt) run_opts.out = run_out;
    return safe::cmd_run(run_opts, std::cout, std::cerr);
  }
  if (compare->parsed()) {
    if (*cmp_config_opt) cmp_opts.overrides.config = cmp_config;
    if (*cmp_steps_opt) cmp_opts.overrides.steps = cmp_steps;
    if (*cmp_out_opt) cmp_opts.out = cmp_out;
    return safe::cmd_compare(cmp_opts, std::cout, std::cerr);
  }
  if (replay->parsed()) {
    if (*rep_config_opt) rep_opts.config = rep_config;
    return safe::cmd_replay(rep_opts, std::cout, std::cerr);
  }
  if (*report_out_opt) report_opts.out = report_out;
  return safe::cmd_report(report_opts, std::cout, std::cerr);
}
