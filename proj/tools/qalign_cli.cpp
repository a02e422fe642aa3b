#include <CLI11.hpp>

#include <iostream>
#include <set>

#include "qalign/core.hpp"
#include "qalign/harness.hpp"
#include "qalign/verify.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"qalign: Metropolis-Hastings test-time alignment and baselines"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Execute (or resume) a run described by a TOML config");
  fs::path run_config;
  fs::path run_out = "runs";
  std::size_t run_workers = 0;
  run->add_option("--config", run_config, "Run config (TOML)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Root directory for run outputs")->capture_default_str();
  run->add_option("--workers", run_workers, "Parallel prompts (overrides the config)");

  // curve
  auto* curve = app.add_subcommand("curve", "Error-vs-FLOPs curves (CSV + SVG) from finished runs");
  std::vector<fs::path> curve_runs;
  fs::path curve_out = "curve";
  std::optional<fs::path> curve_gold;
  curve->add_option("runs", curve_runs, "Run directories")->required()->check(CLI::ExistingDirectory);
  curve->add_option("--out", curve_out, "Output directory")->capture_default_str();
  curve->add_option("--gold", curve_gold, "Prompts JSONL with gold answers")->check(CLI::ExistingFile);

  // tune-beta
  auto* tune = app.add_subcommand("tune-beta", "Bisect beta towards the target acceptance rate on pilot prompts");
  fs::path tune_config;
  std::size_t tune_pilots = 8;
  tune->add_option("--config", tune_config, "Run config (TOML) with a [tuning] section")
      ->required()
      ->check(CLI::ExistingFile);
  tune->add_option("--pilots", tune_pilots, "Number of pilot prompts")->capture_default_str();

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Reward mixture fits, Gumbel parameters, beta*, TV curves");
  qalign::AnalyzeOptions ao;
  analyze->add_option("--run", ao.run_dir, "Run directory with samples.jsonl files")->check(CLI::ExistingDirectory);
  analyze->add_option("--rewards", ao.rewards, "JSONL of {id, rewards}")->check(CLI::ExistingFile);
  analyze->add_option("--space", ao.space, "Enumerable space JSON for a TV curve")->check(CLI::ExistingFile);
  analyze->add_option("--beta", ao.beta, "Beta for the TV curve chain")->capture_default_str();
  analyze->add_option("--steps", ao.steps, "Chain length for the TV curve")->capture_default_str();
  analyze->add_option("--seed", ao.seed, "Seed")->capture_default_str();
  analyze->add_option("--n", ao.ns, "Sample counts for gumbel.csv");
  analyze->add_option("--gumbel-n", ao.gumbel_n, "n for the simulated max histogram")->capture_default_str();
  analyze->add_option("--trials", ao.gumbel_trials, "Simulated maxima per histogram")->capture_default_str();
  analyze->add_option("--out", ao.out_dir, "Output directory")->capture_default_str();

  // verify
  auto* verify = app.add_subcommand("verify", "Run the acceptance criteria; exits non-zero on failure");
  qalign::VerifyOptions vo;
  std::vector<int> only;
  bool verify_json = false;
  std::vector<std::string> mutations(std::begin(qalign::kMutations), std::end(qalign::kMutations));
  verify->add_option("--mutation", vo.mutation, "Inject a known fault")->check(CLI::IsMember(mutations));
  verify->add_option("--only", only, "Criteria to run (1-10)")->delimiter(',')->check(CLI::Range(1, 10));
  verify->add_option("--seed", vo.seed, "Master seed")->capture_default_str();
  verify->add_option("--scratch", vo.scratch_dir, "Keep the end-to-end run files here");
  verify->add_flag("--json", verify_json, "Print the machine-readable report");

  // replay
  auto* replay = app.add_subcommand("replay", "Re-run a recorded run from its fixtures and compare outputs");
  fs::path replay_run;
  fs::path replay_out = "replays";
  replay->add_option("run_dir", replay_run, "Finished run directory")->required()->check(CLI::ExistingDirectory);
  replay->add_option("--out", replay_out, "Root directory for the replayed run")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      qalign::RunOptions ro;
      ro.runs_root = run_out;
      ro.config_source = run_config;
      if (run_workers > 0) ro.workers = run_workers;
      std::cout << qalign::cmd_run(qalign::RunConfig::load(run_config), ro).string() << "\n";
    } else if (*curve) {
      qalign::CurveResult r = qalign::cmd_curve(curve_runs, curve_out, curve_gold);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << r.csv.string() << "\n" << r.svg.string() << "\n";
    } else if (*tune) {
      qalign::TuneResult r = qalign::cmd_tune_beta(qalign::RunConfig::load(tune_config), tune_pilots);
      if (r.warning) std::cerr << "warning: " << *r.warning << "\n";
      std::cout << qalign::to_json(r).dump(2) << "\n";
    } else if (*analyze) {
      for (const auto& p : qalign::cmd_analyze(ao)) std::cout << p.string() << "\n";
    } else if (*verify) {
      vo.only = std::set<int>(only.begin(), only.end());
      auto results = qalign::run_verify(vo);
      if (verify_json) {
        std::cout << qalign::verify_report_json(results, vo.mutation).dump(2) << "\n";
      } else {
        std::cout << qalign::verify_report_text(results);
      }
      for (const auto& r : results) {
        if (!r.pass) return 1;
      }
    } else if (*replay) {
      qalign::ReplayResult r = qalign::cmd_replay(replay_run, replay_out);
      std::cout << r.replay_dir.string() << "\n";
      for (const auto& m : r.mismatches) std::cerr << "differs: " << m << "\n";
      if (!r.identical()) return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
