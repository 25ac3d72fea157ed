#include <bit>
#include <stdexcept>
#include <unordered_set>

#include "shapestab/feasibility.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace shapestab {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace kernels {

bool lex_less(std::uint32_t a, std::uint32_t b) {
  if (a == b) return false;
  const std::uint32_t diff = a ^ b;
  const int e = std::countr_zero(diff);
  const std::uint32_t above = e >= 31 ? 0u : ~((2u << e) - 1u);
  if (a & (1u << e)) {
    // a holds e where b holds something larger, or b has already ended
    return (b & above) != 0;
  }
  return (a & above) == 0;
}

namespace {

// Precomputed node-union bitsets and weight sums for the low and high halves
// of the subset mask.
struct HalfTables {
  int lo_bits = 0;
  int hi_bits = 0;
  std::size_t words = 0;
  std::vector<std::uint64_t> lo_union, hi_union;
  std::vector<std::int64_t> lo_weight, hi_weight;
};

HalfTables build_tables(int n, const std::vector<std::vector<int>>& hoods, const std::vector<std::int64_t>& weights) {
  HalfTables t;
  const int K = static_cast<int>(hoods.size());
  t.lo_bits = std::min(K, 12);
  t.hi_bits = K - t.lo_bits;
  t.words = (static_cast<std::size_t>(n) + 63) / 64;

  auto fill = [&](int offset, int bits, std::vector<std::uint64_t>& uni, std::vector<std::int64_t>& wt) {
    const std::size_t count = std::size_t{1} << bits;
    uni.assign(count * t.words, 0);
    wt.assign(count, 0);
    for (std::size_t m = 1; m < count; ++m) {
      const int low = std::countr_zero(m);
      const std::size_t prev = m & (m - 1);
      for (std::size_t w = 0; w < t.words; ++w) uni[m * t.words + w] = uni[prev * t.words + w];
      for (int node : hoods[static_cast<std::size_t>(offset + low)]) {
        uni[m * t.words + static_cast<std::size_t>(node) / 64] |= std::uint64_t{1} << (node % 64);
      }
      wt[m] = wt[prev] + weights[static_cast<std::size_t>(offset + low)];
    }
  };
  fill(0, t.lo_bits, t.lo_union, t.lo_weight);
  fill(t.lo_bits, t.hi_bits, t.hi_union, t.hi_weight);
  return t;
}

void consider(SubsetScanResult& best, bool& have, std::int64_t value, std::uint32_t mask) {
  if (!have || value < best.scaled_slack || (value == best.scaled_slack && lex_less(mask, best.mask))) {
    best = {value, mask};
    have = true;
  }
}

// Scans all masks whose high part equals `h`.
void scan_high(const HalfTables& t, int n, std::int64_t lcm, std::uint32_t full, std::uint32_t h,
               SubsetScanResult& best, bool& have) {
  const std::size_t lo_count = std::size_t{1} << t.lo_bits;
  const std::uint64_t* hu = &t.hi_union[h * t.words];
  for (std::size_t l = 0; l < lo_count; ++l) {
    const std::uint32_t mask = (h << t.lo_bits) | static_cast<std::uint32_t>(l);
    if (mask == 0 || mask == full) continue;
    const std::uint64_t* lu = &t.lo_union[l * t.words];
    std::int64_t nodes = 0;
    for (std::size_t w = 0; w < t.words; ++w) nodes += std::popcount(lu[w] | hu[w]);
    const std::int64_t value = nodes * lcm - static_cast<std::int64_t>(n) * (t.lo_weight[l] + t.hi_weight[h]);
    consider(best, have, value, mask);
  }
}

void check_kernel_input(const std::vector<std::vector<int>>& hoods) {
  if (hoods.size() < 2 || hoods.size() > kMaxEnumeratedNeighborhoods) {
    throw std::invalid_argument("subset scan needs 2 <= K <= 24");
  }
}

}  // namespace

SubsetScanResult subset_scan_serial(int n, const std::vector<std::vector<int>>& hoods,
                                    const std::vector<std::int64_t>& weights, std::int64_t lcm) {
  check_kernel_input(hoods);
  const HalfTables t = build_tables(n, hoods, weights);
  const std::uint32_t full = static_cast<std::uint32_t>((std::uint64_t{1} << hoods.size()) - 1);
  SubsetScanResult best;
  bool have = false;
  for (std::uint32_t h = 0; h < (1u << t.hi_bits); ++h) scan_high(t, n, lcm, full, h, best, have);
  return best;
}

SubsetScanResult subset_scan_parallel(int n, const std::vector<std::vector<int>>& hoods,
                                      const std::vector<std::int64_t>& weights, std::int64_t lcm) {
  check_kernel_input(hoods);
  const HalfTables t = build_tables(n, hoods, weights);
  const std::uint32_t full = static_cast<std::uint32_t>((std::uint64_t{1} << hoods.size()) - 1);
  const long hi_count = 1L << t.hi_bits;
  SubsetScanResult best;
  bool have = false;
#pragma omp parallel
  {
    SubsetScanResult local;
    bool local_have = false;
#pragma omp for schedule(static)
    for (long h = 0; h < hi_count; ++h) {
      scan_high(t, n, lcm, full, static_cast<std::uint32_t>(h), local, local_have);
    }
#pragma omp critical(shapestab_subset_reduce)
    {
      // the comparison is a total order, so the merge order does not matter
      if (local_have) consider(best, have, local.scaled_slack, local.mask);
    }
  }
  return best;
}

SubsetCondition subset_scan_reference(const StorageNetwork& net) {
  const std::size_t K = net.K();
  if (K > kMaxEnumeratedNeighborhoods) throw EnumerationLimit("reference scan limited to K <= 24");
  SubsetCondition out{Rational(1), {}};
  bool have = false;
  std::uint32_t best_mask = 0;
  const std::uint32_t full = static_cast<std::uint32_t>((std::uint64_t{1} << K) - 1);
  for (std::uint32_t mask = 1; mask < full; ++mask) {
    std::vector<bool> in_union(static_cast<std::size_t>(net.n), false);
    Rational rate_sum;
    for (std::size_t i = 0; i < K; ++i) {
      if (!(mask >> i & 1u)) continue;
      rate_sum += net.rates[i];
      for (int node : net.neighborhoods[i]) in_union[static_cast<std::size_t>(node)] = true;
    }
    long long covered = 0;
    for (bool b : in_union) covered += b ? 1 : 0;
    const Rational slack = Rational(covered, net.n) - rate_sum;
    if (!have || slack < out.slack || (slack == out.slack && lex_less(mask, best_mask))) {
      out.slack = slack;
      best_mask = mask;
      have = true;
    }
  }
  if (have) {
    for (std::size_t i = 0; i < K; ++i) {
      if (best_mask >> i & 1u) out.witness.push_back(static_cast<int>(i));
    }
  }
  return out;
}

void choice_vertex(int n, const std::vector<std::vector<int>>& hoods, const std::vector<std::int64_t>& weights,
                   std::int64_t lcm, std::uint64_t index, std::span<std::int64_t> out) {
  std::fill(out.begin(), out.end(), -lcm);
  for (std::size_t i = 0; i < hoods.size(); ++i) {
    const auto k = static_cast<std::uint64_t>(hoods[i].size());
    const auto node = hoods[i][static_cast<std::size_t>(index % k)];
    index /= k;
    out[static_cast<std::size_t>(node)] += static_cast<std::int64_t>(n) * weights[i];
  }
}

namespace {

struct VectorHash {
  std::size_t operator()(const std::vector<std::int64_t>& v) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (auto x : v) {
      h ^= static_cast<std::uint64_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

struct VertexSetup {
  std::vector<std::int64_t> weights;
  std::int64_t lcm = 1;
  std::uint64_t count = 1;
};

VertexSetup vertex_setup(const StorageNetwork& net) {
  require_valid(net);
  VertexSetup s;
  for (std::size_t i = 0; i < net.K(); ++i) {
    s.count *= static_cast<std::uint64_t>(net.kappa(i));
    if (s.count > kMaxChoiceFunctions) {
      throw EnumerationLimit("polytope enumeration needs prod kappa_i <= 1000000");
    }
  }
  const mpz_class L = rate_denominator_lcm(net);
  const mpz_class scale = L * net.n;
  if (mpz_sizeinbase(scale.get_mpz_t(), 2) > 60) throw std::overflow_error("vertex scale n*L exceeds 2^60");
  s.lcm = to_int64(L);
  for (const auto& r : net.rates) s.weights.push_back(to_int64(r.numerator() * (L / r.denominator())));
  return s;
}

constexpr std::uint64_t kVertexBlock = 1u << 15;

template <bool Parallel>
Polytope enumerate_vertices(const StorageNetwork& net) {
  const VertexSetup s = vertex_setup(net);
  const auto n = static_cast<std::size_t>(net.n);
  Polytope poly;
  poly.scale = s.lcm * net.n;
  poly.choice_functions = s.count;
  std::unordered_set<std::vector<std::int64_t>, VectorHash> seen;
  std::vector<std::int64_t> block(kVertexBlock * n);
  for (std::uint64_t start = 0; start < s.count; start += kVertexBlock) {
    const auto len = static_cast<long>(std::min(kVertexBlock, s.count - start));
    if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
      for (long k = 0; k < len; ++k) {
        choice_vertex(net.n, net.neighborhoods, s.weights, s.lcm, start + static_cast<std::uint64_t>(k),
                      std::span(block).subspan(static_cast<std::size_t>(k) * n, n));
      }
    } else {
      for (long k = 0; k < len; ++k) {
        choice_vertex(net.n, net.neighborhoods, s.weights, s.lcm, start + static_cast<std::uint64_t>(k),
                      std::span(block).subspan(static_cast<std::size_t>(k) * n, n));
      }
    }
    for (long k = 0; k < len; ++k) {
      std::vector<std::int64_t> v(block.begin() + k * static_cast<long>(n),
                                  block.begin() + (k + 1) * static_cast<long>(n));
      if (seen.insert(v).second) poly.scaled_vertices.push_back(std::move(v));
    }
  }
  return poly;
}

}  // namespace

Polytope enumerate_vertices_serial(const StorageNetwork& net) { return enumerate_vertices<false>(net); }
Polytope enumerate_vertices_parallel(const StorageNetwork& net) { return enumerate_vertices<true>(net); }

}  // namespace kernels
}  // namespace shapestab
