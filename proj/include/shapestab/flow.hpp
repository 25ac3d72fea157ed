#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

namespace shapestab {

/// Dinic max-flow over an integral capacity type. Capacities are exact, so the
/// returned flow is exact as well.
template <typename Cap>
class MaxFlow {
 public:
  struct Edge {
    int to;
    Cap cap;  // residual capacity
    Cap original;
  };

  explicit MaxFlow(int nodes) : adj_(static_cast<std::size_t>(nodes)), level_(nodes), iter_(nodes) {}

  /// Returns the id of the forward edge; edge id ^ 1 is its reverse.
  int add_edge(int from, int to, Cap cap) {
    const int id = static_cast<int>(edges_.size());
    edges_.push_back({to, cap, cap});
    adj_[static_cast<std::size_t>(from)].push_back(id);
    edges_.push_back({from, Cap{0}, Cap{0}});
    adj_[static_cast<std::size_t>(to)].push_back(id + 1);
    return id;
  }

  Cap run(int source, int sink) {
    Cap total{0};
    while (bfs(source, sink)) {
      std::fill(iter_.begin(), iter_.end(), 0);
      while (true) {
        const Cap pushed = dfs(source, sink, infinity());
        if (pushed == Cap{0}) break;
        total += pushed;
      }
    }
    return total;
  }

  [[nodiscard]] Cap flow_on(int edge_id) const {
    const auto& e = edges_[static_cast<std::size_t>(edge_id)];
    return e.original - e.cap;
  }

  /// Nodes reachable from `source` in the residual graph (source side of a
  /// minimum cut once run() has finished).
  [[nodiscard]] std::vector<bool> residual_reachable(int source) const {
    std::vector<bool> seen(adj_.size(), false);
    std::vector<int> stack{source};
    seen[static_cast<std::size_t>(source)] = true;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int id : adj_[static_cast<std::size_t>(v)]) {
        const auto& e = edges_[static_cast<std::size_t>(id)];
        if (e.cap > Cap{0} && !seen[static_cast<std::size_t>(e.to)]) {
          seen[static_cast<std::size_t>(e.to)] = true;
          stack.push_back(e.to);
        }
      }
    }
    return seen;
  }

  static constexpr Cap infinity() {
    if constexpr (std::is_same_v<Cap, __int128>) {
      return static_cast<Cap>((static_cast<unsigned __int128>(1) << 126) - 1);
    } else {
      return std::numeric_limits<Cap>::max() / 4;
    }
  }

 private:
  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<int> q;
    level_[static_cast<std::size_t>(s)] = 0;
    q.push(s);
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int id : adj_[static_cast<std::size_t>(v)]) {
        const auto& e = edges_[static_cast<std::size_t>(id)];
        if (e.cap > Cap{0} && level_[static_cast<std::size_t>(e.to)] < 0) {
          level_[static_cast<std::size_t>(e.to)] = level_[static_cast<std::size_t>(v)] + 1;
          q.push(e.to);
        }
      }
    }
    return level_[static_cast<std::size_t>(t)] >= 0;
  }

  Cap dfs(int v, int t, Cap limit) {
    if (v == t) return limit;
    auto& it = iter_[static_cast<std::size_t>(v)];
    const auto& out = adj_[static_cast<std::size_t>(v)];
    for (; it < static_cast<int>(out.size()); ++it) {
      const int id = out[static_cast<std::size_t>(it)];
      auto& e = edges_[static_cast<std::size_t>(id)];
      if (e.cap <= Cap{0} ||
          level_[static_cast<std::size_t>(e.to)] != level_[static_cast<std::size_t>(v)] + 1) {
        continue;
      }
      const Cap pushed = dfs(e.to, t, std::min(limit, e.cap));
      if (pushed > Cap{0}) {
        e.cap -= pushed;
        edges_[static_cast<std::size_t>(id ^ 1)].cap += pushed;
        return pushed;
      }
    }
    return Cap{0};
  }

  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> level_;
  std::vector<int> iter_;
};

}  // namespace shapestab
