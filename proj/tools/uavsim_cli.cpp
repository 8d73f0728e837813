// Command-line front end: scenario runs, canned experiment reproduction,
// policy training and estimator-envelope analysis.
//
// Exit codes: 0 clean, 1 config or I/O error, 2 scenario infeasibility.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "uavsim/attack.hpp"
#include "uavsim/config.hpp"
#include "uavsim/harness.hpp"
#include "uavsim/td3.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitInfeasible = 2;

std::string default_out_dir() {
  if (const char* env = std::getenv("UAVSIM_OUT_DIR")) return env;
  return "out";
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed) {
  auto cfg = uavsim::harness::load_config(config_path);
  if (seed) cfg.seed = *seed;
  const auto run = uavsim::harness::run_scenario(cfg);
  uavsim::harness::export_run(run, out_dir, "run");
  std::cout << "verdict=" << uavsim::harness::to_string(run.verdict.kind)
            << " t=" << run.verdict.t << " max_test_ratio=" << run.max_test_ratio
            << "\n";
  return kExitOk;
}

int cmd_replicate(const std::string& id, const std::string& out_dir,
                  const std::string& policy_source) {
  const auto summary = uavsim::harness::replicate(id, out_dir, policy_source);
  for (const auto& [k, v] : summary.fields) std::cout << k << "=" << v << "\n";
  return kExitOk;
}

int cmd_train(const std::string& out_path, long steps, std::uint64_t seed) {
  uavsim::world::Environment env;
  env.start = {0.0, 0.0};
  env.target = {0.0, 150.0};
  env.obstacles.push_back({{0.0, 100.0}, 5.0});
  env.bounds = {-500.0, -500.0, 500.0, 500.0};

  uavsim::td3::Td3Config cfg;
  cfg.total_steps = steps;
  cfg.seed = seed;
  const auto result = uavsim::td3::train(env, cfg);
  uavsim::policy::save_policy(result.policy, out_path);

  std::ofstream curve(out_path + ".curve.csv");
  curve << "episode,return,success,length\n";
  for (const auto& s : result.curve)
    curve << s.episode << "," << s.episode_return << "," << (s.success ? 1 : 0) << ","
          << s.length << "\n";
  std::cout << "policy written to " << out_path << " (" << result.curve.size()
            << " episodes)\n";
  return kExitOk;
}

int cmd_analyze_envelope(const std::string& out_path) {
  const uavsim::estimator::FusionConfig fusion{};
  const auto report = uavsim::attack::max_undetected_rate(fusion);
  const double step_per_sample_m = report.max_rate_mps / fusion.gps_rate_hz;
  const double offset_30_samples_m = 30.0 * step_per_sample_m;

  std::ofstream out(out_path);
  if (!out) throw uavsim::harness::ConfigError("cannot write report: " + out_path);
  out << "max_undetected_rate_mps=" << report.max_rate_mps << "\n"
      << "run_duration_s=" << report.run_duration_s << "\n"
      << "run_max_test_ratio=" << report.run_max_test_ratio << "\n"
      << "run_final_offset_m=" << report.run_final_offset_m << "\n"
      << "per_sample_step_m=" << step_per_sample_m << "\n"
      << "offset_per_30_samples_m=" << offset_30_samples_m << "\n"
      << "offset_per_30_samples_deg=" << offset_30_samples_m / 111000.0 << "\n"
      << "offset_per_3s_m=" << 3.0 * report.max_rate_mps << "\n"
      << "offset_per_3s_deg=" << 3.0 * report.max_rate_mps / 111000.0 << "\n";
  std::cout << "max_undetected_rate_mps=" << report.max_rate_mps << " report=" << out_path
            << "\n";
  return kExitOk;
}

int cmd_analyze_delay(double offset_m) {
  const uavsim::estimator::FusionConfig fusion{};
  const auto delay =
      uavsim::attack::measure_reflection_delay(fusion, {0.0, offset_m});
  std::cout << "offset_m=" << offset_m << " samples_to_absorb=" << delay.samples
            << " max_test_ratio=" << delay.max_test_ratio << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planar UAV navigation spoofing simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir = default_out_dir();
  std::optional<std::uint64_t> seed_override;
  auto* run = app.add_subcommand("run", "run a scenario from a config file");
  run->add_option("--config", config_path, "scenario config file")->required();
  run->add_option("--out", out_dir, "output directory");
  std::uint64_t seed_val = 0;
  auto* seed_opt = run->add_option("--seed", seed_val, "override run.seed");

  std::string rep_id, rep_policy = "surrogate", rep_out = default_out_dir();
  auto* rep = app.add_subcommand("replicate", "reproduce a canned experiment");
  rep->add_option("id", rep_id, "fig5|fig7-envelope|fig8a|fig8b")->required();
  rep->add_option("--out", rep_out, "output directory");
  rep->add_option("--policy", rep_policy, "policy weights file (default: surrogate)");

  std::string train_out;
  long train_steps = 40000;
  std::uint64_t train_seed = 0;
  auto* train = app.add_subcommand("train", "train a navigation policy");
  train->add_option("--out", train_out, "output policy file")->required();
  train->add_option("--steps", train_steps, "environment steps");
  train->add_option("--seed", train_seed, "training seed");

  auto* analyze = app.add_subcommand("analyze", "estimator attack-envelope analysis");
  analyze->require_subcommand(1);
  std::string env_out = "envelope_report.txt";
  auto* envelope = analyze->add_subcommand("envelope", "max undetected drift rate");
  envelope->add_option("--out", env_out, "report file");
  double delay_offset = 3.3;
  auto* delay = analyze->add_subcommand("delay", "step-offset absorption delay");
  delay->add_option("--offset-m", delay_offset, "spoofed step offset in meters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // usage mistakes map onto the config-error exit code; --help stays 0
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      if (*seed_opt) seed_override = seed_val;
      return cmd_run(config_path, out_dir, seed_override);
    }
    if (*rep) return cmd_replicate(rep_id, rep_out, rep_policy);
    if (*train) return cmd_train(train_out, train_steps, train_seed);
    if (*envelope) return cmd_analyze_envelope(env_out);
    if (*delay) return cmd_analyze_delay(delay_offset);
  } catch (const uavsim::harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const uavsim::policy::FormatError& e) {
    std::cerr << "policy file error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const uavsim::attack::DegenerateDirection& e) {
    std::cerr << "infeasible scenario: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const uavsim::attack::NeverConverges& e) {
    std::cerr << "infeasible scenario: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const uavsim::estimator::NoConvergence& e) {
    std::cerr << "infeasible scenario: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
