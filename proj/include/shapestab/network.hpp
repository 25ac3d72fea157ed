#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shapestab/rational.hpp"

namespace shapestab {

/// A static problem instance: n nodes, K neighborhoods with exact arrival
/// rates. Node indices are 0-based. Construction does not validate; call
/// validate() or require_valid().
struct StorageNetwork {
  int n = 0;
  std::vector<std::vector<int>> neighborhoods;
  std::vector<Rational> rates;

  [[nodiscard]] std::size_t K() const { return neighborhoods.size(); }
  [[nodiscard]] int kappa(std::size_t i) const { return static_cast<int>(neighborhoods[i].size()); }
};

/// Item counts per node.
struct Configuration {
  std::vector<std::int64_t> loads;

  [[nodiscard]] std::size_t size() const { return loads.size(); }
  [[nodiscard]] std::int64_t total() const;
  friend bool operator==(const Configuration&, const Configuration&) = default;
};

/// The shape F(x) scaled by n: d_l = n*x_l - sum(x). Integral and zero-sum.
struct Shape {
  std::vector<std::int64_t> scaled;

  [[nodiscard]] bool is_zero() const;
  [[nodiscard]] std::vector<Rational> coordinates() const;  // d / n
  friend bool operator==(const Shape&, const Shape&) = default;
};

class InvalidNetwork : public std::runtime_error {
 public:
  explicit InvalidNetwork(std::vector<std::string> violations);
  [[nodiscard]] const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Empty result means the network satisfies every model invariant.
std::vector<std::string> validate(const StorageNetwork& net);
void require_valid(const StorageNetwork& net);

/// Connectivity of the graph where j~k iff j and k share a neighborhood.
bool is_connected(const StorageNetwork& net);

Shape shape_of(const Configuration& x, const StorageNetwork& net);

/// Sum over nodes of (x_l - mean)^2, exact.
Rational shape_magnitude(const Configuration& x, const StorageNetwork& net);

/// Sum of squared scaled shape coordinates, i.e. n^2 times the magnitude.
mpz_class scaled_magnitude(const Shape& shape);

/// Least common multiple of the rate denominators.
mpz_class rate_denominator_lcm(const StorageNetwork& net);

/// Node-membership matrix helper: position of `node` inside S_i, or -1.
int position_in(const StorageNetwork& net, std::size_t i, int node);

// Network file: {"n": int, "neighborhoods": [[int,...],...], "rates": ["p/q",...]}
StorageNetwork parse_network(std::string_view text);
StorageNetwork load_network(const std::string& path);
std::string network_to_json(const StorageNetwork& net);

}  // namespace shapestab
