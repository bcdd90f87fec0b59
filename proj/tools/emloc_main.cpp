#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "emloc/el.hpp"
#include "emloc/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"emloc: expected-likelihood near-field localization experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::uint64_t seed_override = 0;
  int trials_override = -1, workers_override = 0;
  bool have_seed = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
    cmd->add_option("--out-dir", out_dir, "output directory");
    cmd->add_option("--seed", seed_override, "override the config seed")
        ->each([&](const std::string&) { have_seed = true; });
    cmd->add_option("--trials", trials_override, "override the trial count");
    cmd->add_option("--workers", workers_override, "worker thread count");
  };

  auto* run = app.add_subcommand("run", "run the configured experiment");
  add_common(run);

  auto* validate = app.add_subcommand("validate", "validate a config and print the effective one");
  validate->add_option("--config", config_path, "experiment config (JSON)")->required();

  auto* lr = app.add_subcommand("lr-dist", "build a reference LR distribution");
  int lr_n = 64, lr_t = 10, lr_draws = 10000;
  double lr_pbeta = 0.01;
  std::uint64_t lr_seed = 99;
  std::string lr_out;
  lr->add_option("--n", lr_n, "receive elements");
  lr->add_option("--t", lr_t, "snapshots");
  lr->add_option("--draws", lr_draws, "Monte Carlo draws");
  lr->add_option("--p-beta", lr_pbeta, "threshold probability");
  lr->add_option("--seed", lr_seed, "RNG seed");
  lr->add_option("--out", lr_out, "cache file to write (optional)");

  auto* verify = app.add_subcommand("verify", "recompute aggregates from rows and compare");
  verify->add_option("--out-dir", out_dir, "experiment output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      auto cfg = emloc::load_experiment_config(config_path);
      if (have_seed) cfg.seed = seed_override;
      if (trials_override >= 0) cfg.trials = trials_override;
      if (workers_override > 0) cfg.workers = workers_override;
      for (const auto& n : cfg.notices) std::fprintf(stderr, "notice: %s\n", n.c_str());
      return emloc::run_experiment(cfg, out_dir);
    }
    if (validate->parsed()) {
      std::string report;
      emloc::validate_config(config_path, &report);
      std::fputs(report.c_str(), stdout);
      return 0;
    }
    if (lr->parsed()) {
      emloc::Rng rng(lr_seed);
      const auto dist = emloc::lr_reference_distribution(lr_n, lr_t, lr_draws, rng);
      const double beta = emloc::lr_threshold(dist, lr_pbeta);
      std::printf("N=%d T=%d draws=%d seed=%llu\n", lr_n, lr_t, lr_draws,
                  static_cast<unsigned long long>(lr_seed));
      std::printf("beta(p=%.4g) = %.6f  mean = %.6f  min = %.6f  max = %.6f\n", lr_pbeta, beta,
                  dist.mean(), dist.samples.front(), dist.samples.back());
      if (!lr_out.empty()) {
        emloc::save_lr_distribution(dist, lr_out);
        std::printf("cache written to %s\n", lr_out.c_str());
      }
      return 0;
    }
    if (verify->parsed()) {
      std::string report;
      const int rc = emloc::verify_out_dir(out_dir, &report);
      std::fputs(report.c_str(), stdout);
      std::printf("verify: %s\n", rc == 0 ? "OK" : "MISMATCH");
      return rc;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
