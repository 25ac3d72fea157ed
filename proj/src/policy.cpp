#include "shapestab/policy.hpp"

#include <algorithm>
#include <set>

#include "shapestab/rng.hpp"

namespace shapestab {

std::vector<std::uint64_t> sample_distinct(CounterStream& rng, std::uint64_t m, std::uint64_t k) {
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = m - k; j < m; ++j) {
    const std::uint64_t t = rng.below(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

int argmin_position(std::span<const std::int64_t> loads, const std::vector<int>& S) {
  int best = 0;
  for (std::size_t j = 1; j < S.size(); ++j) {
    if (loads[static_cast<std::size_t>(S[j])] < loads[static_cast<std::size_t>(S[static_cast<std::size_t>(best)])]) {
      best = static_cast<int>(j);
    }
  }
  return best;
}

int argmax_position(std::span<const std::int64_t> loads, const std::vector<int>& S) {
  int best = 0;
  for (std::size_t j = 1; j < S.size(); ++j) {
    if (loads[static_cast<std::size_t>(S[j])] >= loads[static_cast<std::size_t>(S[static_cast<std::size_t>(best)])]) {
      best = static_cast<int>(j);
    }
  }
  return best;
}

int argmin_node(std::span<const std::int64_t> loads, const std::vector<int>& S) {
  return S[static_cast<std::size_t>(argmin_position(loads, S))];
}

int argmax_node(std::span<const std::int64_t> loads, const std::vector<int>& S) {
  return S[static_cast<std::size_t>(argmax_position(loads, S))];
}

namespace {

std::vector<std::vector<Rational>> ratio_rows(const StorageNetwork& net, const AllocationMatrix& alpha) {
  std::vector<std::vector<Rational>> rows;
  for (std::size_t i = 0; i < net.K(); ++i) {
    std::vector<Rational> row;
    for (const auto& a : alpha.alpha[i]) row.push_back(a / net.rates[i]);
    rows.push_back(std::move(row));
  }
  return rows;
}

void require_solution(const StorageNetwork& net, const AllocationMatrix& alpha) {
  const auto violations = verify_allocation(net, alpha);
  if (!violations.empty()) {
    throw std::invalid_argument("allocation does not solve the balance system: " + violations.front());
  }
}

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Policy Policy::equilibrium(const StorageNetwork& net, AllocationMatrix alpha, bool strict) {
  require_valid(net);
  require_solution(net, alpha);
  if (strict && !alpha.strictly_positive()) {
    throw std::invalid_argument("SERP needs a strictly positive allocation");
  }
  Policy p;
  p.kind_ = PolicyKind::Equilibrium;
  p.strict_ = strict;
  p.base_rows_ = ratio_rows(net, alpha);
  p.alpha_ = std::move(alpha);
  return p;
}

Policy Policy::jsq() { return Policy{}; }

Policy Policy::pserp(const StorageNetwork& net, AllocationMatrix alpha, Rational epsilon) {
  require_valid(net);
  require_solution(net, alpha);
  if (epsilon.sign() <= 0 || !(epsilon < alpha.min_entry())) {
    throw std::invalid_argument("PSERP epsilon must satisfy 0 < epsilon < min alpha_ij (got " + epsilon.to_string() +
                                ", min alpha " + alpha.min_entry().to_string() + ")");
  }
  Policy p;
  p.kind_ = PolicyKind::Pserp;
  p.strict_ = true;
  p.base_rows_ = ratio_rows(net, alpha);
  for (const auto& r : net.rates) p.row_shift_.push_back(epsilon / r);
  p.alpha_ = std::move(alpha);
  p.epsilon_ = std::move(epsilon);
  return p;
}

Policy Policy::table(const StorageNetwork& net, std::uint64_t seed, int clip) {
  require_valid(net);
  if (clip < 0) throw std::invalid_argument("table clip must be >= 0");
  Policy p;
  p.kind_ = PolicyKind::Table;
  p.seed_ = seed;
  p.clip_ = clip;
  return p;
}

Policy Policy::uniform(const StorageNetwork& net, bool perturbed) {
  require_valid(net);
  Policy p;
  p.kind_ = PolicyKind::Uniform;
  p.strict_ = perturbed;
  for (std::size_t i = 0; i < net.K(); ++i) {
    const int kappa = net.kappa(i);
    p.base_rows_.emplace_back(static_cast<std::size_t>(kappa), Rational(1, kappa));
    p.row_shift_.emplace_back(perturbed ? Rational(1, 2 * kappa) : Rational(0));
  }
  return p;
}

std::string Policy::name() const {
  switch (kind_) {
    case PolicyKind::Equilibrium: return strict_ ? "serp" : "erp";
    case PolicyKind::Jsq: return "jsq";
    case PolicyKind::Pserp: return "pserp";
    case PolicyKind::Table: return "table";
    case PolicyKind::Uniform: return strict_ ? "pserp-degraded" : "uniform";
  }
  return "unknown";
}

std::uint64_t Policy::row_key(const StorageNetwork& net, std::span<const std::int64_t> loads, std::size_t i) const {
  const auto& S = net.neighborhoods[i];
  switch (kind_) {
    case PolicyKind::Equilibrium: return 0;
    case PolicyKind::Jsq: return static_cast<std::uint64_t>(argmin_position(loads, S));
    case PolicyKind::Uniform:
      if (!strict_) return 0;
      [[fallthrough]];
    case PolicyKind::Pserp:
      if (S.size() == 1) return 0;
      return static_cast<std::uint64_t>(argmin_position(loads, S)) * S.size() +
             static_cast<std::uint64_t>(argmax_position(loads, S));
    case PolicyKind::Table: {
      std::uint64_t h = 0xcbf29ce484222325ULL;
      const std::int64_t base = loads[static_cast<std::size_t>(S[0])];
      for (std::size_t j = 1; j < S.size(); ++j) {
        const std::int64_t d = std::clamp<std::int64_t>(loads[static_cast<std::size_t>(S[j])] - base, -clip_, clip_);
        auto u = static_cast<std::uint64_t>(d);
        for (int b = 0; b < 8; ++b) {
          h ^= (u >> (8 * b)) & 0xffu;
          h *= 0x100000001b3ULL;
        }
      }
      return h;
    }
  }
  return 0;
}

std::vector<int> Policy::table_counts(std::size_t i, int kappa, std::uint64_t key) const {
  if (kappa == 1) return {kTableGranularity};
  CounterStream rng(mix64(seed_ ^ mix64(key)), static_cast<std::uint32_t>(i), 0x7AB1Eu);
  // stars and bars: kappa - 1 bars among granularity + kappa - 1 slots
  const auto slots = static_cast<std::uint64_t>(kTableGranularity + kappa - 1);
  const auto bars = sample_distinct(rng, slots, static_cast<std::uint64_t>(kappa - 1));
  std::vector<int> counts;
  std::int64_t prev = -1;
  for (auto b : bars) {
    counts.push_back(static_cast<int>(static_cast<std::int64_t>(b) - prev - 1));
    prev = static_cast<std::int64_t>(b);
  }
  counts.push_back(static_cast<int>(static_cast<std::int64_t>(slots) - prev - 1));
  return counts;
}

std::vector<Rational> Policy::decide_row(const StorageNetwork& net, std::span<const std::int64_t> loads,
                                         std::size_t i) const {
  const auto& S = net.neighborhoods[i];
  const auto kappa = S.size();
  switch (kind_) {
    case PolicyKind::Equilibrium: return base_rows_[i];
    case PolicyKind::Jsq: {
      std::vector<Rational> row(kappa);
      row[static_cast<std::size_t>(argmin_position(loads, S))] = Rational(1);
      return row;
    }
    case PolicyKind::Uniform:
      if (!strict_) return base_rows_[i];
      [[fallthrough]];
    case PolicyKind::Pserp: {
      if (kappa == 1) return {Rational(1)};
      std::vector<Rational> row = base_rows_[i];
      row[static_cast<std::size_t>(argmin_position(loads, S))] += row_shift_[i];
      row[static_cast<std::size_t>(argmax_position(loads, S))] -= row_shift_[i];
      return row;
    }
    case PolicyKind::Table: {
      const auto counts = table_counts(i, static_cast<int>(kappa), row_key(net, loads, i));
      std::vector<Rational> row;
      for (int c : counts) row.emplace_back(c, kTableGranularity);
      return row;
    }
  }
  return {};
}

PolicyDecision Policy::decide(const StorageNetwork& net, const Configuration& x) const {
  if (x.size() != static_cast<std::size_t>(net.n)) throw std::invalid_argument("configuration dimension mismatch");
  PolicyDecision d;
  d.p.reserve(net.K());
  for (std::size_t i = 0; i < net.K(); ++i) d.p.push_back(decide_row(net, x.loads, i));
  return d;
}

json Policy::describe() const {
  json j;
  j["policy"] = name();
  if (alpha_) j["alpha"] = rational_matrix(alpha_->alpha);
  if (kind_ == PolicyKind::Pserp) j["epsilon"] = epsilon_.to_string();
  if (kind_ == PolicyKind::Table) {
    j["seed"] = seed_;
    j["clip"] = clip_;
  }
  return j;
}

Policy random_policy(const StorageNetwork& net, std::uint64_t seed) { return Policy::table(net, seed); }

Rational default_pserp_epsilon(const AllocationMatrix& alpha) { return alpha.min_entry() / Rational(2); }

PolicySpec parse_policy_spec(const json& j) {
  if (!j.is_object() || !j.contains("policy") || !j["policy"].is_string()) {
    throw ParseError("field 'policy': expected {\"policy\": \"jsq\" | \"serp\" | \"erp\" | \"pserp\" | \"table\"}");
  }
  PolicySpec spec;
  spec.name = j["policy"].get<std::string>();
  if (spec.name != "jsq" && spec.name != "serp" && spec.name != "erp" && spec.name != "pserp" &&
      spec.name != "table") {
    throw ParseError("field 'policy': unknown policy \"" + spec.name + "\"");
  }
  if (j.contains("epsilon")) {
    if (spec.name != "pserp") throw ParseError("field 'epsilon': only valid for pserp");
    spec.epsilon = rational_from_json(j["epsilon"], "epsilon");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
      throw ParseError("field 'seed': expected non-negative integer");
    }
    spec.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("clip")) {
    if (!j["clip"].is_number_integer() || j["clip"].get<int>() < 0) {
      throw ParseError("field 'clip': expected non-negative integer");
    }
    spec.clip = j["clip"].get<int>();
  }
  return spec;
}

json policy_spec_json(const PolicySpec& spec) {
  json j;
  j["policy"] = spec.name;
  if (spec.epsilon) j["epsilon"] = spec.epsilon->to_string();
  if (spec.name == "table") {
    j["seed"] = spec.seed;
    j["clip"] = spec.clip;
  }
  return j;
}

Policy build_policy(const StorageNetwork& net, const PolicySpec& spec) {
  require_valid(net);
  if (spec.name == "jsq") return Policy::jsq();
  if (spec.name == "table") return Policy::table(net, spec.seed, spec.clip);
  if (spec.name == "erp") {
    auto alpha = solve_nonneg_allocation(net);
    if (!alpha) throw PolicyUnavailable("no non-negative solution of the balance system: ERP does not exist");
    return Policy::equilibrium(net, std::move(*alpha), false);
  }
  auto pos = solve_positive_allocation(net);
  if (pos.outcome != PositiveSearch::Found) {
    throw PolicyUnavailable("no strictly positive solution of the balance system: " + spec.name +
                            " does not exist");
  }
  if (spec.name == "serp") return Policy::equilibrium(net, std::move(*pos.allocation), true);
  const Rational eps = spec.epsilon ? *spec.epsilon : default_pserp_epsilon(*pos.allocation);
  return Policy::pserp(net, std::move(*pos.allocation), eps);
}

Policy build_policy_or_fallback(const StorageNetwork& net, const PolicySpec& spec, std::string& notice) {
  try {
    return build_policy(net, spec);
  } catch (const PolicyUnavailable& e) {
    const bool perturbed = spec.name == "pserp";
    notice = std::string(e.what()) + "; using " + (perturbed ? "pserp-degraded" : "uniform") +
             " routing with oracle-only drift";
    return Policy::uniform(net, perturbed);
  }
}

}  // namespace shapestab
