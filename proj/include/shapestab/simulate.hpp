#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "shapestab/execution.hpp"
#include "shapestab/json_io.hpp"
#include "shapestab/network.hpp"
#include "shapestab/policy.hpp"
#include "shapestab/rational.hpp"
#include "shapestab/rng.hpp"

namespace shapestab {

struct SimConfig {
  StorageNetwork net;
  PolicySpec policy;
  Configuration initial;
  std::int64_t max_steps = 0;
  int replicas = 1;
  std::uint64_t seed = 0;
  std::int64_t record_every = 1;
  std::int64_t tau_cutoff = 0;
  bool continuous_time = false;
  bool record_trace = false;  // keep the (neighborhood, node) sequence
};

/// max(ceil(max_steps / 10), min(max_steps, 1000)).
std::int64_t default_tau_cutoff(std::int64_t max_steps);
/// max(1, max_steps / 1000).
std::int64_t default_record_every(std::int64_t max_steps);

/// Fills defaults and checks invariants; throws std::invalid_argument.
void validate_sim_config(const SimConfig& cfg);

/// Parses a simulation config. "network" is either an inline network object
/// or a path (resolved against base_dir). Throws ParseError naming the field.
SimConfig sim_config_from_json(const json& j, const std::string& base_dir);
json sim_config_to_json(const SimConfig& cfg);

struct MagnitudePoint {
  std::int64_t step;
  __int128 scaled;  // n^2 times the shape magnitude

  [[nodiscard]] Rational magnitude(int n) const;
  [[nodiscard]] double magnitude_double(int n) const;

  friend bool operator==(const MagnitudePoint&, const MagnitudePoint&) = default;
};

struct TrajectoryStats {
  std::int64_t steps = 0;
  std::vector<std::int64_t> tau_samples;  // completed excursions from the zero shape, <= tau_cutoff
  std::int64_t censored_count = 0;        // excursions that outlived tau_cutoff
  std::optional<std::int64_t> first_hit;  // hitting time of the zero shape from a non-zero start
  std::int64_t returns_to_initial = 0;
  std::vector<MagnitudePoint> magnitude_series;
  Configuration final_config;
  Shape final_shape;
  Rational max_abs_shape_coord;
  std::vector<std::int64_t> neighborhood_counts;
  std::vector<std::int64_t> node_counts;
  std::vector<std::pair<int, int>> trace;
  double elapsed_time = 0;  // continuous-time clock, when enabled

  friend bool operator==(const TrajectoryStats&, const TrajectoryStats&) = default;
};

/// Cumulative thresholds round(c_j * 2^64) for a probability row; the last one
/// is exactly 2^64. Index j is chosen by the first t_j > u.
std::vector<unsigned __int128> sampling_thresholds(const std::vector<Rational>& probs);
std::size_t sample_index(const std::vector<unsigned __int128>& thresholds, std::uint64_t u);

struct StepOutcome {
  Configuration next;
  int neighborhood;
  int node;
};

/// One embedded-chain transition driven by the uniform pair `u` (first word
/// picks the neighborhood, second the node).
StepOutcome step(const StorageNetwork& net, const Policy& policy, const Configuration& x, UniformPair u);

/// Sampler with per-row threshold caches; equivalent to step() draw by draw.
class Stepper {
 public:
  Stepper(const StorageNetwork& net, const Policy& policy);
  /// Returns (neighborhood, node) and applies the increment to `loads`.
  std::pair<int, int> advance(std::vector<std::int64_t>& loads, UniformPair u);

 private:
  const StorageNetwork& net_;
  const Policy& policy_;
  std::vector<unsigned __int128> rate_thresholds_;
  std::vector<std::unordered_map<std::uint64_t, std::vector<unsigned __int128>>> cache_;
};

TrajectoryStats run_replica(const SimConfig& cfg, const Policy& policy, int replica_id);
TrajectoryStats run_replica(const SimConfig& cfg, int replica_id);
std::vector<TrajectoryStats> run_replicas(const SimConfig& cfg, const Policy& policy,
                                          Execution exec = Execution::Parallel);

struct VerdictThresholds {
  double transient_censoring = 0.5;
  double recurrent_censoring = 0.01;
  double min_r_squared = 0.9;
  double confidence = 0.99;
  double burn_in_fraction = 0.1;
  std::int64_t min_at_risk = 10;
};

enum class Verdict { PositiveRecurrentConsistent, TransientConsistent, Inconclusive };
std::string to_string(Verdict v);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  std::size_t points = 0;
};

/// Ordinary least squares; r_squared is 1 for a perfect (or constant) fit.
LinearFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys);

struct RecurrenceDiagnostic {
  Verdict verdict = Verdict::Inconclusive;
  double slope = 0;  // d sqrt(magnitude) / d step, mean over replicas
  double slope_ci_low = 0;
  double slope_ci_high = 0;
  std::vector<double> replica_slopes;
  double tail_exponent = 0;  // c in P(tau > t) ~ A exp(-c t)
  double tail_prefactor = 0;
  double tail_r_squared = 0;
  std::size_t tail_points = 0;
  double mean_tau = 0;  // censored-adjusted
  double censoring_fraction = 0;  // runs with at least one censored excursion
  std::int64_t tau_count = 0;
  std::int64_t censored_excursions = 0;
  std::int64_t tau_cutoff = 0;
  VerdictThresholds thresholds;
};

/// (sum tau + cutoff * censored) / (count + censored).
double censored_mean_tau(const std::vector<TrajectoryStats>& runs, std::int64_t tau_cutoff);

RecurrenceDiagnostic aggregate(const std::vector<TrajectoryStats>& runs, std::int64_t tau_cutoff,
                               const VerdictThresholds& thresholds = {});

std::map<std::int64_t, std::int64_t> tau_histogram(const std::vector<TrajectoryStats>& runs);

struct MgfRow {
  double c;
  double value;       // mean of exp(c tau) over all samples
  double half_value;  // same over the first half of the samples
  bool stable;        // |half_value - value| <= 10% of value
};

struct MgfTable {
  std::vector<MgfRow> rows;
  std::optional<double> largest_stable;
  std::string censoring_note;
};

inline constexpr double kMgfStabilityTolerance = 0.10;
std::vector<double> default_mgf_grid();

MgfTable mgf_probe(const std::vector<std::int64_t>& tau_samples, const std::vector<double>& c_grid,
                   std::int64_t censored = 0);

/// Samples in replica order.
std::vector<std::int64_t> pooled_taus(const std::vector<TrajectoryStats>& runs);

}  // namespace shapestab
