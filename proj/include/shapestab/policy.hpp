#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shapestab/feasibility.hpp"
#include "shapestab/json_io.hpp"
#include "shapestab/network.hpp"
#include "shapestab/rational.hpp"

namespace shapestab {

/// Row i is a probability vector over the nodes of S_i.
struct PolicyDecision {
  std::vector<std::vector<Rational>> p;
  friend bool operator==(const PolicyDecision&, const PolicyDecision&) = default;
};

enum class PolicyKind { Equilibrium, Jsq, Pserp, Table, Uniform };

inline constexpr int kDefaultTableClip = 32;
inline constexpr int kTableGranularity = 64;  // table rows are multiples of 1/64

/// First node of S attaining the minimal load.
int argmin_node(std::span<const std::int64_t> loads, const std::vector<int>& S);
/// Last node of S attaining the maximal load.
int argmax_node(std::span<const std::int64_t> loads, const std::vector<int>& S);
int argmin_position(std::span<const std::int64_t> loads, const std::vector<int>& S);
int argmax_position(std::span<const std::int64_t> loads, const std::vector<int>& S);

/// A local, shape-invariant routing policy. Every variant reads only the loads
/// of S_i when deciding row i, and only through load differences.
class Policy {
 public:
  /// ERP (strict = false) or SERP (strict = true): p_ij = alpha_ij / lambda_i.
  static Policy equilibrium(const StorageNetwork& net, AllocationMatrix alpha, bool strict);
  static Policy jsq();
  /// Requires 0 < epsilon < min alpha_ij.
  static Policy pserp(const StorageNetwork& net, AllocationMatrix alpha, Rational epsilon);
  /// Pseudo-random table keyed by the within-neighborhood load differences
  /// x_{s_j} - x_{s_0}, each clipped to [-clip, clip]. Rows are points of the
  /// simplex with denominator 64. The table is never materialized: each row is
  /// regenerated from (seed, i, key).
  static Policy table(const StorageNetwork& net, std::uint64_t seed, int clip = kDefaultTableClip);
  /// p_ij = 1/kappa_i. With `perturbed`, mass 1/(2 kappa_i) moves from the
  /// last-max node to the first-min node, as PSERP does around SERP. Stand-in
  /// when the balance system has no solution to build SERP/PSERP from.
  static Policy uniform(const StorageNetwork& net, bool perturbed);

  [[nodiscard]] PolicyKind kind() const { return kind_; }
  [[nodiscard]] std::string name() const;
  [[nodiscard]] bool strict() const { return strict_; }
  [[nodiscard]] const std::optional<AllocationMatrix>& alpha() const { return alpha_; }
  [[nodiscard]] const Rational& epsilon() const { return epsilon_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] int clip() const { return clip_; }

  [[nodiscard]] PolicyDecision decide(const StorageNetwork& net, const Configuration& x) const;
  [[nodiscard]] std::vector<Rational> decide_row(const StorageNetwork& net, std::span<const std::int64_t> loads,
                                                 std::size_t i) const;

  /// Equal keys for the same row imply equal decisions; lets the simulator
  /// cache sampling thresholds per (row, key).
  [[nodiscard]] std::uint64_t row_key(const StorageNetwork& net, std::span<const std::int64_t> loads,
                                      std::size_t i) const;

  /// Table rows as integer counts out of 64 (only for PolicyKind::Table).
  [[nodiscard]] std::vector<int> table_counts(std::size_t i, int kappa, std::uint64_t key) const;

  [[nodiscard]] json describe() const;

 private:
  Policy() = default;

  PolicyKind kind_ = PolicyKind::Jsq;
  bool strict_ = false;
  std::optional<AllocationMatrix> alpha_;
  std::vector<std::vector<Rational>> base_rows_;  // alpha / lambda
  std::vector<Rational> row_shift_;               // epsilon / lambda_i
  Rational epsilon_;
  std::uint64_t seed_ = 0;
  int clip_ = kDefaultTableClip;
};

Policy random_policy(const StorageNetwork& net, std::uint64_t seed);

Rational default_pserp_epsilon(const AllocationMatrix& alpha);

/// Parsed {"policy": "jsq" | "serp" | "erp" | "pserp" | "table", ...}.
struct PolicySpec {
  std::string name = "jsq";
  std::optional<Rational> epsilon;
  std::uint64_t seed = 0;
  int clip = kDefaultTableClip;
};

PolicySpec parse_policy_spec(const json& j);
json policy_spec_json(const PolicySpec& spec);

/// The requested policy cannot exist on this network (e.g. SERP without a
/// positive allocation).
class PolicyUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds a policy, solving for the allocation it needs. ERP uses the
/// non-negative flow solution, SERP/PSERP the strictly positive one.
Policy build_policy(const StorageNetwork& net, const PolicySpec& spec);

/// Like build_policy, but falls back to Policy::uniform (perturbed for pserp)
/// when the requested policy cannot exist; `notice` then explains the swap.
Policy build_policy_or_fallback(const StorageNetwork& net, const PolicySpec& spec, std::string& notice);

}  // namespace shapestab
