#include "shapestab/feasibility.hpp"

#include <limits>

#include "shapestab/flow.hpp"

namespace shapestab {

bool AllocationMatrix::strictly_positive() const {
  for (const auto& row : alpha) {
    for (const auto& a : row) {
      if (a.sign() <= 0) return false;
    }
  }
  return true;
}

Rational AllocationMatrix::min_entry() const {
  bool first = true;
  Rational m;
  for (const auto& row : alpha) {
    for (const auto& a : row) {
      if (first || a < m) m = a;
      first = false;
    }
  }
  if (first) throw std::logic_error("empty allocation has no minimum");
  return m;
}

std::string to_string(FeasibilityStatus status) {
  switch (status) {
    case FeasibilityStatus::Positive: return "POSITIVE";
    case FeasibilityStatus::NonnegOnly: return "NONNEG_ONLY";
    case FeasibilityStatus::Infeasible: return "INFEASIBLE";
    case FeasibilityStatus::Undecided: return "UNDECIDED";
  }
  return "UNDECIDED";
}

Rational subset_slack(const StorageNetwork& net, const std::vector<int>& subset) {
  std::vector<bool> in_union(static_cast<std::size_t>(net.n), false);
  Rational rate_sum;
  for (int i : subset) {
    rate_sum += net.rates[static_cast<std::size_t>(i)];
    for (int node : net.neighborhoods[static_cast<std::size_t>(i)]) in_union[static_cast<std::size_t>(node)] = true;
  }
  long long covered = 0;
  for (bool b : in_union) covered += b ? 1 : 0;
  return Rational(covered, net.n) - rate_sum;
}

SubsetCondition check_subset_condition(const StorageNetwork& net, Execution exec) {
  require_valid(net);
  if (net.K() > kMaxEnumeratedNeighborhoods) {
    throw EnumerationLimit("K = " + std::to_string(net.K()) +
                           " exceeds the subset enumeration limit of 24; use flow-based decision only");
  }
  if (net.K() == 1) return {Rational(1), {}};

  const mpz_class L = rate_denominator_lcm(net);
  const mpz_class nl = L * net.n;
  if (mpz_sizeinbase(nl.get_mpz_t(), 2) > 56) return kernels::subset_scan_reference(net);

  std::vector<std::int64_t> weights;
  for (const auto& r : net.rates) weights.push_back(to_int64(r.numerator() * (L / r.denominator())));
  const std::int64_t lcm64 = to_int64(L);
  const auto res = exec == Execution::Parallel
                       ? kernels::subset_scan_parallel(net.n, net.neighborhoods, weights, lcm64)
                       : kernels::subset_scan_serial(net.n, net.neighborhoods, weights, lcm64);
  SubsetCondition out;
  out.slack = Rational(mpq_class(mpz_class(static_cast<long>(res.scaled_slack)), nl));
  for (std::size_t i = 0; i < net.K(); ++i) {
    if (res.mask >> i & 1u) out.witness.push_back(static_cast<int>(i));
  }
  return out;
}

namespace {

using Cap = __int128;

// Bipartite supply/demand network: source -> stream i (supply_i) -> nodes of
// S_i (unbounded) -> sink (demand_l). All quantities share one scale.
struct Transport {
  MaxFlow<Cap> graph;
  std::vector<std::vector<int>> edge_ids;
  int source;
  int sink;
  std::size_t K;
};

Transport build_transport(const StorageNetwork& net, const std::vector<Cap>& supply, const std::vector<Cap>& demand) {
  const std::size_t K = net.K();
  const int source = static_cast<int>(K) + net.n;
  const int sink = source + 1;
  Transport t{MaxFlow<Cap>(sink + 1), {}, source, sink, K};
  t.edge_ids.resize(K);
  for (std::size_t i = 0; i < K; ++i) {
    t.graph.add_edge(source, static_cast<int>(i), supply[i]);
    for (int node : net.neighborhoods[i]) {
      t.edge_ids[i].push_back(t.graph.add_edge(static_cast<int>(i), static_cast<int>(K) + node, MaxFlow<Cap>::infinity()));
    }
  }
  for (int l = 0; l < net.n; ++l) t.graph.add_edge(static_cast<int>(K) + l, sink, demand[static_cast<std::size_t>(l)]);
  return t;
}

std::vector<int> degrees(const StorageNetwork& net) {
  std::vector<int> deg(static_cast<std::size_t>(net.n), 0);
  for (const auto& s : net.neighborhoods) {
    for (int node : s) ++deg[static_cast<std::size_t>(node)];
  }
  return deg;
}

Cap scaled(const Rational& r, const mpz_class& scale) {
  const mpq_class v = r.raw() * scale;
  if (v.get_den() != 1) throw std::logic_error("scaled capacity is not integral");
  return to_int128(v.get_num());
}

mpz_class from_int128(Cap v) {
  const bool neg = v < 0;
  unsigned __int128 mag = neg ? static_cast<unsigned __int128>(-v) : static_cast<unsigned __int128>(v);
  mpz_class hi(static_cast<unsigned long>(mag >> 64));
  mpz_class lo(static_cast<unsigned long>(mag & std::numeric_limits<unsigned long>::max()));
  mpz_class r = (hi << 64) + lo;
  return neg ? mpz_class(-r) : r;
}

// Runs the transport problem; returns per-edge flows divided by scale when the
// supply is fully routed.
std::optional<AllocationMatrix> run_transport(const StorageNetwork& net, const std::vector<Rational>& supply,
                                              const std::vector<Rational>& demand, std::vector<int>* cut_subset) {
  mpz_class scale(1);
  for (const auto& r : supply) scale = lcm(scale, r.denominator());
  for (const auto& r : demand) scale = lcm(scale, r.denominator());
  std::vector<Cap> sup;
  std::vector<Cap> dem;
  Cap total{0};
  for (const auto& r : supply) {
    sup.push_back(scaled(r, scale));
    total += sup.back();
  }
  for (const auto& r : demand) dem.push_back(scaled(r, scale));

  Transport t = build_transport(net, sup, dem);
  const Cap flow = t.graph.run(t.source, t.sink);
  if (flow != total) {
    if (cut_subset) {
      const auto reach = t.graph.residual_reachable(t.source);
      cut_subset->clear();
      for (std::size_t i = 0; i < net.K(); ++i) {
        if (reach[i]) cut_subset->push_back(static_cast<int>(i));
      }
    }
    return std::nullopt;
  }
  AllocationMatrix alloc;
  alloc.alpha.resize(net.K());
  for (std::size_t i = 0; i < net.K(); ++i) {
    for (int id : t.edge_ids[i]) {
      alloc.alpha[i].push_back(Rational(mpq_class(from_int128(t.graph.flow_on(id)), scale)));
    }
  }
  return alloc;
}

}  // namespace

NonnegFlowResult solve_nonneg_flow(const StorageNetwork& net) {
  require_valid(net);
  const std::vector<Rational> demand(static_cast<std::size_t>(net.n), Rational(1, net.n));
  NonnegFlowResult out;
  out.allocation = run_transport(net, net.rates, demand, &out.violating_subset);
  if (out.allocation) out.violating_subset.clear();
  return out;
}

std::optional<AllocationMatrix> solve_nonneg_allocation(const StorageNetwork& net) {
  return solve_nonneg_flow(net).allocation;
}

std::optional<AllocationMatrix> allocation_with_lower_bound(const StorageNetwork& net, const Rational& eps) {
  require_valid(net);
  if (eps.sign() < 0) throw std::invalid_argument("lower bound must be non-negative");
  std::vector<Rational> supply;
  for (std::size_t i = 0; i < net.K(); ++i) {
    supply.push_back(net.rates[i] - eps * Rational(net.kappa(i)));
    if (supply.back().sign() < 0) return std::nullopt;
  }
  const auto deg = degrees(net);
  std::vector<Rational> demand;
  for (int l = 0; l < net.n; ++l) {
    demand.push_back(Rational(1, net.n) - eps * Rational(deg[static_cast<std::size_t>(l)]));
    if (demand.back().sign() < 0) return std::nullopt;
  }
  auto alloc = run_transport(net, supply, demand, nullptr);
  if (!alloc) return std::nullopt;
  for (auto& row : alloc->alpha) {
    for (auto& a : row) a += eps;
  }
  return alloc;
}

PositiveAllocationResult solve_positive_allocation(const StorageNetwork& net) {
  require_valid(net);
  PositiveAllocationResult out;
  Rational start;
  const bool enumerable = net.K() <= kMaxEnumeratedNeighborhoods;
  if (enumerable) {
    const auto cond = check_subset_condition(net);
    if (cond.slack.sign() <= 0) return out;
    start = cond.slack;
  } else {
    if (!solve_nonneg_allocation(net)) return out;
    // without the slack, start from the largest lower bound the row and node
    // capacities could possibly admit
    const auto deg = degrees(net);
    start = Rational(1, net.n);
    for (std::size_t i = 0; i < net.K(); ++i) start = min(start, net.rates[i] / Rational(net.kappa(i)));
    for (int d : deg) start = min(start, Rational(1, net.n) / Rational(d));
  }
  Rational eps = start;
  for (int k = 1; k <= kMaxEpsilonHalvings; ++k) {
    eps /= Rational(2);
    if (auto alloc = allocation_with_lower_bound(net, eps)) {
      out.outcome = PositiveSearch::Found;
      out.allocation = std::move(alloc);
      out.epsilon = eps;
      out.halvings = k;
      return out;
    }
  }
  if (enumerable) {
    throw std::logic_error("positive allocation search exceeded 64 halvings although slack > 0");
  }
  out.outcome = PositiveSearch::Undecided;
  return out;
}

std::vector<std::string> verify_allocation(const StorageNetwork& net, const AllocationMatrix& alloc) {
  if (net.K() == 0 || alloc.alpha.size() != net.K()) {
    throw std::invalid_argument("allocation has " + std::to_string(alloc.alpha.size()) + " rows, network has " +
                                std::to_string(net.K()) + " neighborhoods");
  }
  for (std::size_t i = 0; i < net.K(); ++i) {
    if (alloc.alpha[i].size() != net.neighborhoods[i].size()) {
      throw std::invalid_argument("allocation row " + std::to_string(i) + " has wrong length");
    }
  }
  std::vector<std::string> out;
  std::vector<Rational> node_sum(static_cast<std::size_t>(net.n));
  for (std::size_t i = 0; i < net.K(); ++i) {
    Rational row;
    for (std::size_t j = 0; j < alloc.alpha[i].size(); ++j) {
      const auto& a = alloc.alpha[i][j];
      if (a.sign() < 0) {
        out.push_back("alpha[" + std::to_string(i) + "][" + std::to_string(j) + "] = " + a.to_string() + " < 0");
      }
      row += a;
      node_sum[static_cast<std::size_t>(net.neighborhoods[i][j])] += a;
    }
    if (row != net.rates[i]) {
      out.push_back("row " + std::to_string(i) + " sums to " + row.to_string() + ", expected " +
                    net.rates[i].to_string() + " (residual " + (row - net.rates[i]).to_string() + ")");
    }
  }
  const Rational target(1, net.n);
  for (int l = 0; l < net.n; ++l) {
    const auto& s = node_sum[static_cast<std::size_t>(l)];
    if (s != target) {
      out.push_back("node " + std::to_string(l) + " receives " + s.to_string() + ", expected " + target.to_string() +
                    " (residual " + (s - target).to_string() + ")");
    }
  }
  return out;
}

std::vector<std::vector<Rational>> Polytope::vertices() const {
  std::vector<std::vector<Rational>> out;
  out.reserve(scaled_vertices.size());
  const mpz_class den(static_cast<long>(scale));
  for (const auto& v : scaled_vertices) {
    std::vector<Rational> row;
    row.reserve(v.size());
    for (auto x : v) row.emplace_back(mpq_class(mpz_class(static_cast<long>(x)), den));
    out.push_back(std::move(row));
  }
  return out;
}

Polytope polytope_vertices(const StorageNetwork& net, Execution exec) {
  return exec == Execution::Parallel ? kernels::enumerate_vertices_parallel(net)
                                     : kernels::enumerate_vertices_serial(net);
}

bool origin_in_ri_D(const StorageNetwork& net) { return check_subset_condition(net).slack.sign() > 0; }

SeparatingFunctional separating_functional_for(const StorageNetwork& net, const std::vector<int>& subset,
                                               Execution exec) {
  require_valid(net);
  std::vector<bool> in_union(static_cast<std::size_t>(net.n), false);
  for (int i : subset) {
    for (int node : net.neighborhoods.at(static_cast<std::size_t>(i))) in_union[static_cast<std::size_t>(node)] = true;
  }
  long long nj = 0;
  for (bool b : in_union) nj += b ? 1 : 0;

  SeparatingFunctional sf;
  sf.subset = subset;
  // n * b_l, kept integral for the vertex products
  std::vector<std::int64_t> nb(static_cast<std::size_t>(net.n));
  for (int l = 0; l < net.n; ++l) {
    nb[static_cast<std::size_t>(l)] = (in_union[static_cast<std::size_t>(l)] ? net.n : 0) - nj;
    sf.b.emplace_back(nb[static_cast<std::size_t>(l)], net.n);
  }
  bool nonzero = false;
  for (auto v : nb) nonzero = nonzero || v != 0;
  if (!nonzero) throw CertificateError("subset covers every node; its functional is zero");

  const Polytope poly = polytope_vertices(net, exec);
  sf.vertex_count = poly.scaled_vertices.size();
  const mpz_class den = mpz_class(static_cast<long>(poly.scale)) * net.n;
  bool first = true;
  for (const auto& v : poly.scaled_vertices) {
    __int128 acc = 0;
    for (std::size_t l = 0; l < v.size(); ++l) acc += static_cast<__int128>(v[l]) * nb[l];
    if (acc < 0) {
      throw CertificateError("separating functional is negative on a vertex of D; certificate invalid");
    }
    const Rational product(mpq_class(from_int128(acc), den));
    if (first || product < sf.min_vertex_product) sf.min_vertex_product = product;
    first = false;
    sf.proper = sf.proper || acc > 0;
    sf.vertex_products.push_back(product);
  }
  return sf;
}

SeparatingFunctional separating_functional(const StorageNetwork& net, Execution exec) {
  const auto cond = check_subset_condition(net, exec);
  if (cond.slack.sign() > 0) {
    throw std::invalid_argument("no certificate: positive solution exists");
  }
  return separating_functional_for(net, cond.witness, exec);
}

FeasibilityReport analyze_feasibility(const StorageNetwork& net, Execution exec) {
  require_valid(net);
  FeasibilityReport rep;
  rep.connected = is_connected(net);
  if (!rep.connected) {
    rep.notes.push_back(
        "neighborhood graph is disconnected: positive recurrence in shape is impossible for any routing policy");
  }
  const NonnegFlowResult nonneg = solve_nonneg_flow(net);

  if (net.K() <= kMaxEnumeratedNeighborhoods) {
    const auto cond = check_subset_condition(net, exec);
    rep.slack = cond.slack;
    rep.witness_subset = cond.witness;
    const int s = cond.slack.sign();
    rep.status = s > 0 ? FeasibilityStatus::Positive
                       : (s == 0 ? FeasibilityStatus::NonnegOnly : FeasibilityStatus::Infeasible);
    if ((s >= 0) != nonneg.allocation.has_value()) {
      throw std::logic_error("subset condition and max-flow disagree on non-negative feasibility");
    }
  } else {
    rep.notes.push_back("K exceeds 24: subset enumeration skipped, decision from max-flow and epsilon probing");
    if (!nonneg.allocation) {
      rep.status = FeasibilityStatus::Infeasible;
      rep.witness_subset = nonneg.violating_subset;
      rep.slack = subset_slack(net, nonneg.violating_subset);
    }
  }

  if (rep.status == FeasibilityStatus::Positive ||
      (rep.status == FeasibilityStatus::Undecided && nonneg.allocation)) {
    auto pos = solve_positive_allocation(net);
    if (pos.outcome == PositiveSearch::Found) {
      rep.status = FeasibilityStatus::Positive;
      rep.allocation = std::move(pos.allocation);
    } else if (rep.status == FeasibilityStatus::Positive) {
      throw std::logic_error("positive slack but epsilon probing found no strictly positive allocation");
    } else {
      rep.allocation = nonneg.allocation;
      rep.notes.push_back("epsilon probing found no strictly positive allocation; strictness undecided");
    }
  } else if (rep.status == FeasibilityStatus::NonnegOnly) {
    rep.allocation = nonneg.allocation;
  }

  if (rep.status == FeasibilityStatus::NonnegOnly || rep.status == FeasibilityStatus::Infeasible) {
    try {
      rep.certificate = separating_functional_for(net, rep.witness_subset, exec);
      if (!rep.certificate->proper) {
        rep.notes.push_back("certificate annihilates every vertex of D (improper separation)");
      }
    } catch (const EnumerationLimit& e) {
      rep.notes.push_back(std::string("certificate not verified: ") + e.what());
    }
  }
  return rep;
}

}  // namespace shapestab
