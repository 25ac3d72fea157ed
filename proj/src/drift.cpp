#include "shapestab/drift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace shapestab {

namespace {

void require_dimension(const Configuration& x, const StorageNetwork& net) {
  if (x.size() != static_cast<std::size_t>(net.n)) {
    throw std::invalid_argument("configuration has " + std::to_string(x.size()) + " entries, network has " +
                                std::to_string(net.n) + " nodes");
  }
}

Rational one_minus_inv_n(const StorageNetwork& net) { return Rational(1) - Rational(1, net.n); }

Rational load_at(const Configuration& x, int node) { return Rational(x.loads[static_cast<std::size_t>(node)]); }

// Probability that the next item lands on each node under decision p.
std::vector<Rational> node_distribution(const StorageNetwork& net, const PolicyDecision& p) {
  std::vector<Rational> e(static_cast<std::size_t>(net.n));
  for (std::size_t i = 0; i < net.K(); ++i) {
    const auto& S = net.neighborhoods[i];
    for (std::size_t j = 0; j < S.size(); ++j) {
      if (!p.p[i][j].is_zero()) e[static_cast<std::size_t>(S[j])] += net.rates[i] * p.p[i][j];
    }
  }
  return e;
}

Rational next_up(const Rational& r) {
  return Rational::from_double(std::nextafter(r.to_double(), std::numeric_limits<double>::infinity()));
}

}  // namespace

Rational delta_f_unit(const Configuration& x, int node, const StorageNetwork& net) {
  require_dimension(x, net);
  if (node < 0 || node >= net.n) throw std::out_of_range("node index out of range");
  const Rational mean(x.total(), net.n);
  return Rational(2) * (load_at(x, node) - mean) + one_minus_inv_n(net);
}

Rational pserp_drift_closed_form(const StorageNetwork& net, const AllocationMatrix& alpha, const Rational& epsilon,
                                 const Configuration& x) {
  require_dimension(x, net);
  if (epsilon.sign() <= 0 || !(epsilon < alpha.min_entry())) {
    throw std::invalid_argument("epsilon must satisfy 0 < epsilon < min alpha_ij");
  }
  Rational gaps;
  for (const auto& S : net.neighborhoods) {
    gaps += load_at(x, argmax_node(x.loads, S)) - load_at(x, argmin_node(x.loads, S));
  }
  return Rational(-2) * epsilon * gaps + one_minus_inv_n(net);
}

Rational jsq_drift_closed_form(const StorageNetwork& net, const AllocationMatrix& alpha, const Configuration& x) {
  require_dimension(x, net);
  Rational sum;
  for (std::size_t i = 0; i < net.K(); ++i) {
    const auto& S = net.neighborhoods[i];
    const auto jmin = static_cast<std::size_t>(argmin_position(x.loads, S));
    const Rational base = load_at(x, S[jmin]);
    for (std::size_t j = 0; j < S.size(); ++j) {
      if (j == jmin) continue;
      sum += alpha.alpha[i][j] * (load_at(x, S[j]) - base);
    }
  }
  return Rational(-2) * sum + one_minus_inv_n(net);
}

DriftReport expected_drift_f(const StorageNetwork& net, const Policy& policy, const Configuration& x,
                             const AllocationMatrix* jsq_alpha) {
  require_valid(net);
  require_dimension(x, net);
  std::vector<Rational> unit(static_cast<std::size_t>(net.n));
  for (int l = 0; l < net.n; ++l) unit[static_cast<std::size_t>(l)] = delta_f_unit(x, l, net);

  DriftReport report;
  const auto decision = policy.decide(net, x);
  for (std::size_t i = 0; i < net.K(); ++i) {
    Rational c;
    const auto& S = net.neighborhoods[i];
    for (std::size_t j = 0; j < S.size(); ++j) c += decision.p[i][j] * unit[static_cast<std::size_t>(S[j])];
    report.expected_delta_f += net.rates[i] * c;
    report.contributions.push_back(std::move(c));
  }

  switch (policy.kind()) {
    case PolicyKind::Equilibrium: report.closed_form = one_minus_inv_n(net); break;
    case PolicyKind::Pserp:
      report.closed_form = pserp_drift_closed_form(net, *policy.alpha(), policy.epsilon(), x);
      break;
    case PolicyKind::Jsq:
      if (jsq_alpha != nullptr) report.closed_form = jsq_drift_closed_form(net, *jsq_alpha, x);
      break;
    case PolicyKind::Table:
    case PolicyKind::Uniform: break;
  }
  if (report.closed_form) report.match = *report.closed_form == report.expected_delta_f;
  return report;
}

std::optional<JumpCounterexample> jump_bound_check(const Configuration& x, const StorageNetwork& net) {
  const Rational f = shape_magnitude(x, net);
  if (f.is_zero()) throw std::invalid_argument("jump bound needs a configuration with non-zero shape magnitude");
  const Rational limit = Rational(16) * f;
  for (int l = 0; l < net.n; ++l) {
    const Rational delta = delta_f_unit(x, l, net);
    if (delta * delta > limit) return JumpCounterexample{l, delta, f};
  }
  return std::nullopt;
}

Interval sqrt_interval(const Rational& q) {
  if (q.sign() < 0) throw std::domain_error("square root of a negative rational");
  if (q.is_zero()) return {Rational(0), Rational(0)};
  const double guess = std::sqrt(q.to_double());
  const double inf = std::numeric_limits<double>::infinity();
  double lo = guess;
  while (lo > 0 && Rational::from_double(lo) * Rational::from_double(lo) > q) lo = std::nextafter(lo, 0.0);
  while (true) {
    const double up = std::nextafter(lo, inf);
    if (Rational::from_double(up) * Rational::from_double(up) > q) break;
    lo = up;
  }
  const Rational lo_r = Rational::from_double(lo);
  if (lo_r * lo_r == q) return {lo_r, lo_r};
  return {lo_r, next_up(lo_r)};
}

DriftGReport expected_drift_g(const StorageNetwork& net, const Policy& policy, const Configuration& x) {
  require_valid(net);
  const Rational f = shape_magnitude(x, net);
  if (f.is_zero()) throw std::invalid_argument("g-drift needs a configuration with non-zero shape magnitude");
  const Interval g = sqrt_interval(f);
  const auto e = node_distribution(net, policy.decide(net, x));

  DriftGReport report;
  Rational lo_sum, hi_sum, drift_f;
  Rational jump(0);
  for (int l = 0; l < net.n; ++l) {
    const auto& prob = e[static_cast<std::size_t>(l)];
    if (prob.is_zero()) continue;
    const Rational delta = delta_f_unit(x, l, net);
    drift_f += prob * delta;
    const Interval g_next = sqrt_interval(f + delta);
    lo_sum += prob * g_next.lo;
    hi_sum += prob * g_next.hi;
    jump = max(jump, max(abs(g_next.hi - g.lo), abs(g_next.lo - g.hi)));
  }
  report.drift = {lo_sum - g.hi, hi_sum - g.lo};
  if (report.drift.width().to_double() > kDriftGWidth) {
    throw PrecisionError("g-drift enclosure width " + format_double(report.drift.width().to_double()) +
                         " exceeds " + format_double(kDriftGWidth));
  }
  const Rational two_lo = Rational(2) * g.lo;
  const Rational two_hi = Rational(2) * g.hi;
  if (drift_f.sign() >= 0) {
    report.bound = {drift_f / two_hi, drift_f / two_lo};
  } else {
    report.bound = {drift_f / two_lo, drift_f / two_hi};
  }
  report.max_abs_jump = {jump, jump};
  report.bound_ok = report.drift.hi.to_double() <= report.bound.hi.to_double() + kDriftGSlack;
  report.jumps_ok = jump <= Rational(4);
  return report;
}

std::optional<OptimalityCounterexample> jsq_optimality_check(const StorageNetwork& net, const Configuration& x,
                                                             const Policy& other) {
  const Rational jsq = expected_drift_f(net, Policy::jsq(), x).expected_delta_f;
  const Rational alt = expected_drift_f(net, other, x).expected_delta_f;
  if (jsq > alt) return OptimalityCounterexample{jsq, alt};
  return std::nullopt;
}

std::vector<Rational> expected_increment(const StorageNetwork& net, const PolicyDecision& p) {
  return node_distribution(net, p);
}

Rational certificate_drift_check(const StorageNetwork& net, const Policy& policy, const Configuration& x,
                                 const std::vector<Rational>& b) {
  require_valid(net);
  require_dimension(x, net);
  if (b.size() != static_cast<std::size_t>(net.n)) throw std::invalid_argument("certificate dimension mismatch");
  const auto e = expected_increment(net, policy.decide(net, x));
  Rational mean;
  for (const auto& v : e) mean += v;
  mean /= Rational(net.n);
  Rational value;
  for (std::size_t l = 0; l < e.size(); ++l) value += (e[l] - mean) * b[l];
  if (value.sign() < 0) {
    throw CertificateError("certificate drift " + value.to_string() + " < 0 under policy " + policy.name());
  }
  return value;
}

DriftFit fit_drift_constants(const StorageNetwork& net, const Policy& policy, const std::vector<Configuration>& samples,
                             const std::vector<double>& a_grid) {
  struct Point {
    double spread;
    double ratio;  // -drift_f / sqrt(f)
  };
  std::vector<Point> points;
  for (const auto& x : samples) {
    const Rational f = shape_magnitude(x, net);
    if (f.is_zero()) continue;
    const auto d = shape_of(x, net).scaled;
    std::int64_t top = 0;
    for (auto v : d) top = std::max(top, v < 0 ? -v : v);
    const double drift = expected_drift_f(net, policy, x).expected_delta_f.to_double();
    points.push_back({static_cast<double>(top) / net.n, -drift / std::sqrt(f.to_double())});
  }
  auto grid = a_grid;
  std::sort(grid.begin(), grid.end());
  for (double a : grid) {
    DriftFit fit;
    fit.a = a;
    fit.c = std::numeric_limits<double>::infinity();
    for (const auto& p : points) {
      if (p.spread < a) continue;
      ++fit.points;
      fit.c = std::min(fit.c, p.ratio);
    }
    if (fit.points > 0 && fit.c > 0) {
      fit.found = true;
      return fit;
    }
  }
  return {};
}

}  // namespace shapestab
