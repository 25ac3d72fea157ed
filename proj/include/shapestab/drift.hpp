#pragma once

#include <optional>
#include <vector>

#include "shapestab/feasibility.hpp"
#include "shapestab/network.hpp"
#include "shapestab/policy.hpp"
#include "shapestab/rational.hpp"

namespace shapestab {

/// f(x + e_l) - f(x) = 2 (x_l - m(x)) + 1 - 1/n for f the shape magnitude.
Rational delta_f_unit(const Configuration& x, int node, const StorageNetwork& net);

struct DriftReport {
  Rational expected_delta_f;
  std::vector<Rational> contributions;  // E[delta f | arrival at S_i]
  std::optional<Rational> closed_form;
  bool match = true;  // closed_form == expected_delta_f (true when absent)
};

/// Exact one-step expected change of the shape magnitude, by enumerating the
/// single-arrival outcomes. When a closed form exists for the policy it is
/// evaluated too: SERP/ERP give 1 - 1/n, PSERP the perturbation formula, and
/// JSQ the allocation formula (needs `jsq_alpha`).
DriftReport expected_drift_f(const StorageNetwork& net, const Policy& policy, const Configuration& x,
                             const AllocationMatrix* jsq_alpha = nullptr);

/// -2 eps sum_i (x_max(S_i) - x_min(S_i)) + 1 - 1/n.
Rational pserp_drift_closed_form(const StorageNetwork& net, const AllocationMatrix& alpha, const Rational& epsilon,
                                 const Configuration& x);

/// -2 sum_i sum_{j != jmin} alpha_ij (x_{s_j} - x_{s_jmin}) + 1 - 1/n.
Rational jsq_drift_closed_form(const StorageNetwork& net, const AllocationMatrix& alpha, const Configuration& x);

struct JumpCounterexample {
  int node;
  Rational delta;
  Rational magnitude;
};

/// Checks |f(x+e_l) - f(x)|^2 <= 16 f(x) for every node. Throws
/// std::invalid_argument when f(x) = 0 (the bound needs a non-zero shape).
std::optional<JumpCounterexample> jump_bound_check(const Configuration& x, const StorageNetwork& net);

/// Closed interval with exact rational endpoints.
struct Interval {
  Rational lo;
  Rational hi;
  [[nodiscard]] double mid() const { return (lo.to_double() + hi.to_double()) / 2; }
  [[nodiscard]] Rational width() const { return hi - lo; }
};

/// Certified bracket of sqrt(q): lo^2 <= q <= hi^2, endpoints adjacent doubles.
Interval sqrt_interval(const Rational& q);

inline constexpr double kDriftGWidth = 1e-12;
inline constexpr double kDriftGSlack = 1e-9;

class PrecisionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DriftGReport {
  Interval drift;        // E[g(x')] - g(x)
  Interval bound;        // E[f(x') - f(x)] / (2 g(x))
  Interval max_abs_jump; // max over outcomes of |g(x') - g(x)|
  bool bound_ok = false; // drift.hi <= bound.hi + 1e-9
  bool jumps_ok = false; // max_abs_jump.hi <= 4
};

/// Exact enumeration of the one-step drift of g = sqrt(f) with certified
/// square roots. Throws std::invalid_argument when f(x) = 0 and PrecisionError
/// when the enclosure is wider than 1e-12.
DriftGReport expected_drift_g(const StorageNetwork& net, const Policy& policy, const Configuration& x);

struct OptimalityCounterexample {
  Rational jsq_drift;
  Rational other_drift;
};

/// JSQ has the smallest expected one-step magnitude change among all policies.
std::optional<OptimalityCounterexample> jsq_optimality_check(const StorageNetwork& net, const Configuration& x,
                                                             const Policy& other);

/// E(p)_l = sum_{i,j} lambda_i p_ij [s_ij = l] for a decision p.
std::vector<Rational> expected_increment(const StorageNetwork& net, const PolicyDecision& p);

/// <F(E(p)), b> for p = policy decision at x; throws CertificateError when
/// negative.
Rational certificate_drift_check(const StorageNetwork& net, const Policy& policy, const Configuration& x,
                                 const std::vector<Rational>& b);

/// Empirical constants for drift_f(x) <= -c sqrt(f(x)) once the largest
/// absolute shape coordinate reaches a.
struct DriftFit {
  double a = 0;
  double c = 0;
  std::size_t points = 0;  // samples with max |x_l - m| >= a
  bool found = false;
};

/// Scans candidate thresholds a (ascending) and returns the smallest one whose
/// sampled region has strictly negative drift, with the largest c valid there.
DriftFit fit_drift_constants(const StorageNetwork& net, const Policy& policy, const std::vector<Configuration>& samples,
                             const std::vector<double>& a_grid);

}  // namespace shapestab
