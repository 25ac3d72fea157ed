#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shapestab/execution.hpp"
#include "shapestab/network.hpp"
#include "shapestab/rational.hpp"

namespace shapestab {

/// Ragged matrix alpha[i][j]: rate of stream i routed to node S_i[j].
struct AllocationMatrix {
  std::vector<std::vector<Rational>> alpha;

  [[nodiscard]] bool strictly_positive() const;
  [[nodiscard]] Rational min_entry() const;
};

enum class FeasibilityStatus { Positive, NonnegOnly, Infeasible, Undecided };
std::string to_string(FeasibilityStatus status);

/// min over proper non-empty J of n_J/n - sum_{j in J} lambda_j, together with
/// the lexicographically smallest minimizing J (sorted neighborhood indices).
/// With K = 1 there is no proper subset; slack is reported as 1 with an empty
/// witness (every genuine subset slack is < 1).
struct SubsetCondition {
  Rational slack;
  std::vector<int> witness;
};

inline constexpr std::size_t kMaxEnumeratedNeighborhoods = 24;
inline constexpr std::uint64_t kMaxChoiceFunctions = 1'000'000;

class EnumerationLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SubsetCondition check_subset_condition(const StorageNetwork& net, Execution exec = Execution::Parallel);

/// n_J/n - sum_{j in J} lambda_j for one subset.
Rational subset_slack(const StorageNetwork& net, const std::vector<int>& subset);

/// Result of the plain max-flow decision. When infeasible, `violating_subset`
/// is the set of neighborhoods on the source side of a minimum cut; it always
/// satisfies sum lambda_J > n_J / n.
struct NonnegFlowResult {
  std::optional<AllocationMatrix> allocation;
  std::vector<int> violating_subset;
};

NonnegFlowResult solve_nonneg_flow(const StorageNetwork& net);
std::optional<AllocationMatrix> solve_nonneg_allocation(const StorageNetwork& net);

/// Feasible allocation with every alpha_ij >= eps, via the lower-bound
/// reduction to plain max-flow; nullopt when none exists.
std::optional<AllocationMatrix> allocation_with_lower_bound(const StorageNetwork& net, const Rational& eps);

enum class PositiveSearch { Found, None, Undecided };

struct PositiveAllocationResult {
  PositiveSearch outcome = PositiveSearch::None;
  std::optional<AllocationMatrix> allocation;
  Rational epsilon;  // lower bound that succeeded (when found)
  int halvings = 0;
};

inline constexpr int kMaxEpsilonHalvings = 64;

PositiveAllocationResult solve_positive_allocation(const StorageNetwork& net);

/// Every violated row and node constraint, with residuals. Throws
/// std::invalid_argument when the matrix shape does not match the network.
std::vector<std::string> verify_allocation(const StorageNetwork& net, const AllocationMatrix& alloc);

/// Vertex candidates of D = F(E(Lambda_1 x ... x Lambda_K)), one per choice
/// function, duplicates removed (first occurrence kept, enumeration order with
/// neighborhood 0 varying fastest). Coordinates are stored scaled by `scale`.
struct Polytope {
  std::int64_t scale = 1;
  std::vector<std::vector<std::int64_t>> scaled_vertices;
  std::uint64_t choice_functions = 0;

  [[nodiscard]] std::vector<std::vector<Rational>> vertices() const;
};

Polytope polytope_vertices(const StorageNetwork& net, Execution exec = Execution::Parallel);

bool origin_in_ri_D(const StorageNetwork& net);

/// Zero-sum functional b that is non-negative on every vertex of D.
struct SeparatingFunctional {
  std::vector<Rational> b;
  std::vector<int> subset;  // the J the functional was built from
  bool proper = false;      // some vertex has <v, b> > 0
  std::size_t vertex_count = 0;
  Rational min_vertex_product;
  std::vector<Rational> vertex_products;  // aligned with polytope_vertices order
};

class CertificateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Builds b from subset J: b_l = 1 - n_J/n on S_J and -n_J/n elsewhere, then
/// checks every polytope vertex. Throws CertificateError on a negative product.
SeparatingFunctional separating_functional_for(const StorageNetwork& net, const std::vector<int>& subset,
                                               Execution exec = Execution::Parallel);

/// Uses the minimizing subset. Throws std::invalid_argument when slack > 0.
SeparatingFunctional separating_functional(const StorageNetwork& net, Execution exec = Execution::Parallel);

struct FeasibilityReport {
  FeasibilityStatus status = FeasibilityStatus::Undecided;
  bool connected = false;
  std::optional<Rational> slack;
  std::vector<int> witness_subset;
  std::optional<AllocationMatrix> allocation;
  std::optional<SeparatingFunctional> certificate;
  std::vector<std::string> notes;

  [[nodiscard]] bool erp_exists() const {
    return status == FeasibilityStatus::Positive || status == FeasibilityStatus::NonnegOnly ||
           status == FeasibilityStatus::Undecided;
  }
  [[nodiscard]] bool serp_exists() const { return status == FeasibilityStatus::Positive; }
};

FeasibilityReport analyze_feasibility(const StorageNetwork& net, Execution exec = Execution::Parallel);

namespace kernels {

struct SubsetScanResult {
  std::int64_t scaled_slack = 0;  // slack * n * L
  std::uint32_t mask = 0;
};

/// Integer-scaled 2^K scan. Weights are lambda_i * L; requires n * L < 2^61.
SubsetScanResult subset_scan_serial(int n, const std::vector<std::vector<int>>& hoods,
                                    const std::vector<std::int64_t>& weights, std::int64_t lcm);
SubsetScanResult subset_scan_parallel(int n, const std::vector<std::vector<int>>& hoods,
                                      const std::vector<std::int64_t>& weights, std::int64_t lcm);

/// Exact rational scan kept as the reference for the integer kernels.
SubsetCondition subset_scan_reference(const StorageNetwork& net);

/// Scaled vertex of choice function number `index` (neighborhood 0 fastest).
void choice_vertex(int n, const std::vector<std::vector<int>>& hoods, const std::vector<std::int64_t>& weights,
                   std::int64_t lcm, std::uint64_t index, std::span<std::int64_t> out);

Polytope enumerate_vertices_serial(const StorageNetwork& net);
Polytope enumerate_vertices_parallel(const StorageNetwork& net);

/// true when subset `a` precedes `b` as sorted index lists.
bool lex_less(std::uint32_t a, std::uint32_t b);

}  // namespace kernels

}  // namespace shapestab
