#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "shapestab/json_io.hpp"
#include "shapestab/network.hpp"
#include "shapestab/policy.hpp"
#include "shapestab/simulate.hpp"

namespace shapestab::cli {

inline constexpr const char* kToolName = "shapestab";
inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kInternal = 2 };

struct Output {
  std::string output_dir;  // empty: stdout only
  std::ostream& out;
  std::ostream& err;
};

/// Inputs that identify a run. The timestamp is kept out of `id()` and out of
/// the copy embedded in analysis outputs, so equal manifests give
/// byte-identical outputs.
struct Manifest {
  std::string subcommand;
  std::vector<std::string> input_files;
  std::string input_hash;
  json parameters = json::object();

  [[nodiscard]] json to_json(bool with_timestamp) const;
  [[nodiscard]] std::string id() const;
};

std::string read_file(const std::string& path);

/// "jsq", "pserp", ... or an inline JSON policy object.
PolicySpec parse_policy_option(const std::string& text);

/// Parses "2,1,0" into a configuration.
Configuration parse_configuration(const std::string& text);

/// Uniform loads in [0, max_load], deterministic in seed.
std::vector<Configuration> sweep_configurations(int n, std::uint64_t seed, int count, int max_load);

/// {"valid": false, "violations": [...]} or the full feasibility report.
json analyze_report(const StorageNetwork& net);

json drift_check_report(const StorageNetwork& net, const PolicySpec& spec, const std::vector<Configuration>& cases);

json certify_report(const StorageNetwork& net, const PolicySpec& spec, const std::vector<Configuration>& states,
                    int random_policies, std::uint64_t policy_seed);

struct SimulationResult {
  SimConfig config;
  json policy;
  std::vector<TrajectoryStats> runs;
  RecurrenceDiagnostic diagnostic;
  MgfTable mgf;
};

SimulationResult run_simulation(const SimConfig& cfg, const std::vector<double>& mgf_grid = default_mgf_grid());
json simulation_report(const SimulationResult& result);
std::string magnitude_csv(const SimulationResult& result);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> replicas;
  std::optional<std::int64_t> steps;
};

struct DriftCheckArgs {
  std::string net_file;
  std::string policy = "jsq";
  std::string cases_file;
  std::vector<std::string> configurations;
  std::optional<std::uint64_t> sweep_seed;
  int sweep_count = 100;
  int max_load = 20;
};

struct CertifyArgs {
  std::string net_file;
  std::string policy = "jsq";
  int samples = 100;
  std::uint64_t sample_seed = 0;
  int max_load = 20;
  int random_policies = 5;
};

int cmd_validate(const std::string& net_file, const Output& io);
int cmd_analyze(const std::string& net_file, const Output& io);
int cmd_drift_check(const DriftCheckArgs& args, const Output& io);
int cmd_simulate(const std::string& config_file, const Overrides& overrides, const Output& io);
int cmd_certify(const CertifyArgs& args, const Output& io);

/// Maps exceptions to exit codes and prints the message to io.err.
int guarded(const Output& io, const std::function<int()>& body);

}  // namespace shapestab::cli
