#include <iostream>

#include <CLI11.hpp>

#include "shapestab/cli.hpp"

using namespace shapestab::cli;

int main(int argc, char** argv) {
  CLI::App app{"Shape stability analysis for storage networks with local routing"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.fallthrough();

  std::string output_dir;
  app.add_option("--output-dir", output_dir, "Directory for JSON/CSV outputs and manifest.json");

  std::string net_file;

  auto* validate = app.add_subcommand("validate", "Check a network file against the model invariants");
  validate->add_option("network", net_file, "Network JSON file")->required();

  auto* analyze = app.add_subcommand("analyze", "Feasibility report: status, allocation, certificate");
  analyze->add_option("network", net_file, "Network JSON file")->required();

  DriftCheckArgs drift;
  auto* drift_cmd = app.add_subcommand("drift-check", "Exact one-step drift against the closed forms");
  drift_cmd->add_option("network", drift.net_file, "Network JSON file")->required();
  drift_cmd->add_option("--policy", drift.policy, "jsq | serp | erp | pserp | table, or a JSON policy object")
      ->capture_default_str();
  drift_cmd->add_option("--x", drift.configurations, "Configuration such as 2,1,0 (repeatable)");
  drift_cmd->add_option("--cases", drift.cases_file, "JSON file with an array of configurations");
  drift_cmd->add_option("--sweep-seed", drift.sweep_seed, "Random sweep seed");
  drift_cmd->add_option("--sweep-count", drift.sweep_count, "Random sweep size")->capture_default_str();
  drift_cmd->add_option("--max-load", drift.max_load, "Largest sampled load")->capture_default_str();

  std::string sim_config;
  Overrides overrides;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo run of the embedded chain");
  simulate->add_option("config", sim_config, "Simulation config JSON file")->required();
  simulate->add_option("--seed", overrides.seed, "Override the config seed");
  simulate->add_option("--replicas", overrides.replicas, "Override the replica count")->check(CLI::PositiveNumber);
  simulate->add_option("--steps", overrides.steps, "Override max_steps")->check(CLI::NonNegativeNumber);

  CertifyArgs certify;
  auto* certify_cmd = app.add_subcommand("certify", "Separating functional and sampled drift checks");
  certify_cmd->add_option("network", certify.net_file, "Network JSON file")->required();
  certify_cmd->add_option("--policy", certify.policy, "Policy to sample besides random tables")
      ->capture_default_str();
  certify_cmd->add_option("--samples", certify.samples, "Sampled states")->capture_default_str();
  certify_cmd->add_option("--seed", certify.sample_seed, "Sampling seed")->capture_default_str();
  certify_cmd->add_option("--max-load", certify.max_load, "Largest sampled load")->capture_default_str();
  certify_cmd->add_option("--random-policies", certify.random_policies, "Random table policies to include")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  const Output io{output_dir, std::cout, std::cerr};
  return guarded(io, [&]() -> int {
    if (*validate) return cmd_validate(net_file, io);
    if (*analyze) return cmd_analyze(net_file, io);
    if (*drift_cmd) return cmd_drift_check(drift, io);
    if (*simulate) return cmd_simulate(sim_config, overrides, io);
    return cmd_certify(certify, io);
  });
}
