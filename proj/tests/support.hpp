#pragma once

// Generators and independent oracles shared by the unit tests and the
// acceptance runner. Nothing here calls the library routine it checks.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include "shapestab/network.hpp"
#include "shapestab/policy.hpp"
#include "shapestab/rational.hpp"
#include "shapestab/rng.hpp"

namespace shapestab::testing {

inline StorageNetwork make_net(int n, std::vector<std::vector<int>> hoods, std::vector<Rational> rates) {
  return StorageNetwork{n, std::move(hoods), std::move(rates)};
}

inline StorageNetwork pairs3(Rational a = Rational(1, 3), Rational b = Rational(1, 3), Rational c = Rational(1, 3)) {
  return make_net(3, {{0, 1}, {0, 2}, {1, 2}}, {a, b, c});
}

inline StorageNetwork star3() { return make_net(3, {{0}, {0, 1, 2}}, {Rational(1, 2), Rational(1, 2)}); }

inline StorageNetwork pairs4(const std::vector<Rational>& rates) {
  return make_net(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}, rates);
}

inline StorageNetwork single2() { return make_net(2, {{0, 1}}, {Rational(1)}); }

inline Configuration cfg(std::vector<std::int64_t> loads) { return Configuration{std::move(loads)}; }

/// Rates w_i / D with D <= max_den and positive integer weights.
inline std::vector<Rational> random_rates(CounterStream& rng, int K, int max_den) {
  const int D = static_cast<int>(rng.between(std::max(K, 1), std::max(K, max_den)));
  // K-1 distinct cut points in [1, D-1]
  const auto cuts = sample_distinct(rng, static_cast<std::uint64_t>(D - 1), static_cast<std::uint64_t>(K - 1));
  std::vector<Rational> rates;
  std::int64_t prev = 0;
  for (auto c : cuts) {
    rates.emplace_back(static_cast<long long>(c + 1) - prev, D);
    prev = static_cast<std::int64_t>(c + 1);
  }
  rates.emplace_back(D - prev, D);
  return rates;
}

/// Valid random network: every node covered, neighborhoods sorted.
inline StorageNetwork random_net(CounterStream& rng, int min_n, int max_n, int max_K, int max_kappa, int max_den) {
  const int n = static_cast<int>(rng.between(min_n, max_n));
  const int K = static_cast<int>(rng.between(1, max_K));
  std::vector<std::set<int>> hoods(static_cast<std::size_t>(K));
  for (auto& h : hoods) {
    const int kappa = static_cast<int>(rng.between(1, std::min(max_kappa, n)));
    for (auto v : sample_distinct(rng, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(kappa))) {
      h.insert(static_cast<int>(v));
    }
  }
  for (int l = 0; l < n; ++l) {
    bool covered = false;
    for (const auto& h : hoods) covered = covered || h.count(l) > 0;
    if (!covered) hoods[rng.below(static_cast<std::uint64_t>(K))].insert(l);
  }
  StorageNetwork net;
  net.n = n;
  for (const auto& h : hoods) net.neighborhoods.emplace_back(h.begin(), h.end());
  net.rates = random_rates(rng, K, max_den);
  return net;
}

inline Configuration random_configuration(CounterStream& rng, int n, int max_load) {
  Configuration x;
  for (int l = 0; l < n; ++l) x.loads.push_back(rng.between(0, max_load));
  return x;
}

/// Brute-force min over proper non-empty J of n_J/n - lambda_J.
inline Rational brute_force_slack(const StorageNetwork& net) {
  const auto K = net.K();
  if (K == 1) return Rational(1);
  std::optional<Rational> best;
  for (std::uint64_t mask = 1; mask + 1 < (std::uint64_t{1} << K); ++mask) {
    std::set<int> nodes;
    Rational lam;
    for (std::size_t i = 0; i < K; ++i) {
      if (mask >> i & 1) {
        nodes.insert(net.neighborhoods[i].begin(), net.neighborhoods[i].end());
        lam += net.rates[i];
      }
    }
    const Rational s = Rational(static_cast<long long>(nodes.size()), net.n) - lam;
    if (!best || s < *best) best = s;
  }
  return *best;
}

/// Vertex enumeration of {alpha >= 0 : rows sum to lambda_i, nodes receive 1/n}
/// over all column bases, with exact Gauss-Jordan elimination.
struct LpOracle {
  bool nonneg_feasible = false;
  bool positive_feasible = false;
};

inline LpOracle lp_oracle(const StorageNetwork& net) {
  struct Var {
    std::size_t i;
    int node;
  };
  std::vector<Var> vars;
  for (std::size_t i = 0; i < net.K(); ++i) {
    for (int node : net.neighborhoods[i]) vars.push_back({i, node});
  }
  const std::size_t rows = net.K() + static_cast<std::size_t>(net.n);
  const auto coeff = [&](std::size_t r, std::size_t v) {
    if (r < net.K()) return vars[v].i == r ? 1 : 0;
    return vars[v].node == static_cast<int>(r - net.K()) ? 1 : 0;
  };
  const auto rhs = [&](std::size_t r) { return r < net.K() ? net.rates[r] : Rational(1, net.n); };

  // Gauss-Jordan on the columns in `cols`; returns the unique solution when
  // the columns are independent and the system is consistent.
  const auto solve = [&](const std::vector<std::size_t>& cols) -> std::optional<std::vector<Rational>> {
    const std::size_t m = cols.size();
    std::vector<std::vector<Rational>> a(rows, std::vector<Rational>(m + 1));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < m; ++c) a[r][c] = Rational(coeff(r, cols[c]));
      a[r][m] = rhs(r);
    }
    std::size_t pivot_row = 0;
    for (std::size_t c = 0; c < m; ++c) {
      std::size_t p = pivot_row;
      while (p < rows && a[p][c].is_zero()) ++p;
      if (p == rows) return std::nullopt;  // dependent columns
      std::swap(a[p], a[pivot_row]);
      const Rational inv = Rational(1) / a[pivot_row][c];
      for (auto& e : a[pivot_row]) e *= inv;
      for (std::size_t r = 0; r < rows; ++r) {
        if (r == pivot_row || a[r][c].is_zero()) continue;
        const Rational f = a[r][c];
        for (std::size_t k = 0; k <= m; ++k) a[r][k] -= f * a[pivot_row][k];
      }
      ++pivot_row;
    }
    for (std::size_t r = pivot_row; r < rows; ++r) {
      if (!a[r][m].is_zero()) return std::nullopt;  // inconsistent
    }
    std::vector<Rational> sol(m);
    for (std::size_t c = 0; c < m; ++c) sol[c] = a[c][m];
    return sol;
  };

  // rank of the full constraint matrix (as 0/1 rationals)
  std::size_t rank = 0;
  {
    std::vector<std::vector<Rational>> a(rows, std::vector<Rational>(vars.size()));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t v = 0; v < vars.size(); ++v) a[r][v] = Rational(coeff(r, v));
    }
    for (std::size_t c = 0; c < vars.size() && rank < rows; ++c) {
      std::size_t p = rank;
      while (p < rows && a[p][c].is_zero()) ++p;
      if (p == rows) continue;
      std::swap(a[p], a[rank]);
      for (std::size_t r = 0; r < rows; ++r) {
        if (r == rank || a[r][c].is_zero()) continue;
        const Rational f = a[r][c] / a[rank][c];
        for (std::size_t k = 0; k < vars.size(); ++k) a[r][k] -= f * a[rank][k];
      }
      ++rank;
    }
  }

  LpOracle out;
  std::vector<bool> support(vars.size(), false);
  std::vector<std::size_t> cols;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (cols.size() == rank) {
      const auto sol = solve(cols);
      if (!sol) return;
      for (const auto& v : *sol) {
        if (v.sign() < 0) return;
      }
      out.nonneg_feasible = true;
      for (std::size_t c = 0; c < cols.size(); ++c) {
        if ((*sol)[c].sign() > 0) support[cols[c]] = true;
      }
      return;
    }
    for (std::size_t v = start; v < vars.size(); ++v) {
      if (vars.size() - v < rank - cols.size()) break;
      cols.push_back(v);
      rec(v + 1);
      cols.pop_back();
    }
  };
  rec(0);
  out.positive_feasible =
      out.nonneg_feasible && std::all_of(support.begin(), support.end(), [](bool b) { return b; });
  return out;
}

/// f(x + e_l) - f(x) computed from two magnitudes, not from the unit formula.
inline Rational magnitude_jump(const StorageNetwork& net, const Configuration& x, int node) {
  Configuration y = x;
  ++y.loads[static_cast<std::size_t>(node)];
  return shape_magnitude(y, net) - shape_magnitude(x, net);
}

/// sum_i lambda_i sum_j p_ij (f(x + e_{s_ij}) - f(x)) for an explicit decision.
inline Rational drift_oracle(const StorageNetwork& net, const std::vector<std::vector<Rational>>& p,
                             const Configuration& x) {
  Rational total;
  for (std::size_t i = 0; i < net.K(); ++i) {
    for (std::size_t j = 0; j < net.neighborhoods[i].size(); ++j) {
      if (p[i][j].is_zero()) continue;
      total += net.rates[i] * p[i][j] * magnitude_jump(net, x, net.neighborhoods[i][j]);
    }
  }
  return total;
}

/// JSQ decision written out independently: mass 1 on the first minimum.
inline std::vector<std::vector<Rational>> jsq_rows(const StorageNetwork& net, const Configuration& x) {
  std::vector<std::vector<Rational>> p;
  for (const auto& S : net.neighborhoods) {
    std::vector<Rational> row(S.size());
    std::size_t best = 0;
    for (std::size_t j = 1; j < S.size(); ++j) {
      if (x.loads[static_cast<std::size_t>(S[j])] < x.loads[static_cast<std::size_t>(S[best])]) best = j;
    }
    row[best] = Rational(1);
    p.push_back(std::move(row));
  }
  return p;
}

}  // namespace shapestab::testing
