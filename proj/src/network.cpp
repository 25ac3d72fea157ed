#include "shapestab/network.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

namespace shapestab {

std::int64_t Configuration::total() const {
  return std::accumulate(loads.begin(), loads.end(), std::int64_t{0});
}

bool Shape::is_zero() const {
  for (auto d : scaled) {
    if (d != 0) return false;
  }
  return true;
}

std::vector<Rational> Shape::coordinates() const {
  const auto n = static_cast<long long>(scaled.size());
  std::vector<Rational> out;
  out.reserve(scaled.size());
  for (auto d : scaled) out.emplace_back(d, n);
  return out;
}

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += "; ";
    out += items[i];
  }
  return out;
}

}  // namespace

InvalidNetwork::InvalidNetwork(std::vector<std::string> violations)
    : std::runtime_error("invalid network: " + join(violations)), violations_(std::move(violations)) {}

std::vector<std::string> validate(const StorageNetwork& net) {
  std::vector<std::string> out;
  if (net.n < 1) out.push_back("node count n must be >= 1 (got " + std::to_string(net.n) + ")");
  if (net.K() < 1) out.push_back("at least one neighborhood is required");
  if (net.rates.size() != net.K()) {
    out.push_back("rate count " + std::to_string(net.rates.size()) + " does not match neighborhood count " +
                  std::to_string(net.K()));
  }

  std::vector<bool> covered(static_cast<std::size_t>(std::max(net.n, 0)), false);
  for (std::size_t i = 0; i < net.K(); ++i) {
    const auto& s = net.neighborhoods[i];
    const std::string name = "neighborhood " + std::to_string(i);
    if (s.empty()) {
      out.push_back(name + " is empty");
      continue;
    }
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j] < 0 || s[j] >= net.n) {
        out.push_back(name + " references node " + std::to_string(s[j]) + " outside [0, " +
                      std::to_string(net.n) + ")");
      } else {
        covered[static_cast<std::size_t>(s[j])] = true;
      }
      if (j > 0 && s[j] <= s[j - 1]) {
        out.push_back(name + " is not strictly increasing at position " + std::to_string(j));
      }
    }
  }
  for (int l = 0; l < net.n; ++l) {
    if (!covered[static_cast<std::size_t>(l)]) out.push_back("union does not cover node " + std::to_string(l));
  }

  Rational sum;
  for (std::size_t i = 0; i < net.rates.size(); ++i) {
    if (net.rates[i].sign() <= 0) {
      out.push_back("rate " + std::to_string(i) + " must be positive (got " + net.rates[i].to_string() + ")");
    }
    sum += net.rates[i];
  }
  if (!net.rates.empty() && sum != Rational(1)) {
    out.push_back("rates sum to " + sum.to_string() + " ≠ 1");
  }
  return out;
}

void require_valid(const StorageNetwork& net) {
  auto violations = validate(net);
  if (!violations.empty()) throw InvalidNetwork(std::move(violations));
}

bool is_connected(const StorageNetwork& net) {
  // union-find over nodes; each neighborhood merges its members
  std::vector<int> parent(static_cast<std::size_t>(net.n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  int components = net.n;
  for (const auto& s : net.neighborhoods) {
    for (std::size_t j = 1; j < s.size(); ++j) {
      const int a = find(s[0]);
      const int b = find(s[j]);
      if (a != b) {
        parent[a] = b;
        --components;
      }
    }
  }
  return components == 1;
}

namespace {

void check_dimension(const Configuration& x, const StorageNetwork& net) {
  if (x.size() != static_cast<std::size_t>(net.n)) {
    throw std::invalid_argument("configuration has " + std::to_string(x.size()) + " entries, network has " +
                                std::to_string(net.n) + " nodes");
  }
}

}  // namespace

Shape shape_of(const Configuration& x, const StorageNetwork& net) {
  check_dimension(x, net);
  const std::int64_t total = x.total();
  Shape s;
  s.scaled.reserve(x.size());
  for (auto v : x.loads) s.scaled.push_back(static_cast<std::int64_t>(net.n) * v - total);
  return s;
}

mpz_class scaled_magnitude(const Shape& shape) {
  mpz_class sum;
  for (auto d : shape.scaled) {
    const mpz_class z(static_cast<long>(d));
    sum += z * z;
  }
  return sum;
}

Rational shape_magnitude(const Configuration& x, const StorageNetwork& net) {
  const mpz_class n(net.n);
  return Rational(mpq_class(scaled_magnitude(shape_of(x, net)), n * n));
}

mpz_class rate_denominator_lcm(const StorageNetwork& net) {
  mpz_class l(1);
  for (const auto& r : net.rates) l = lcm(l, r.denominator());
  return l;
}

int position_in(const StorageNetwork& net, std::size_t i, int node) {
  const auto& s = net.neighborhoods[i];
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s[j] == node) return static_cast<int>(j);
  }
  return -1;
}

StorageNetwork load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open network file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_network(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace shapestab
