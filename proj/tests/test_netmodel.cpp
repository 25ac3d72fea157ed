#include <doctest.h>

#include <algorithm>

#include "shapestab/json_io.hpp"
#include "shapestab/network.hpp"
#include "support.hpp"

using namespace shapestab;
using namespace shapestab::testing;

TEST_CASE("rational stays reduced with positive denominator") {
  const Rational r(6, -4);
  CHECK(r.numerator() == -3);
  CHECK(r.denominator() == 2);
  CHECK(r.to_string() == "-3/2");
  CHECK(Rational(2).to_string() == "2/1");
  CHECK(Rational().to_string() == "0/1");
  CHECK_THROWS_AS(Rational(1, 0), std::domain_error);
  CHECK_THROWS(Rational(1) / Rational(0));
}

TEST_CASE("rational parse accepts p/q and integers only") {
  CHECK(Rational::parse("1/3") == Rational(1, 3));
  CHECK(Rational::parse("-2/6") == Rational(-1, 3));
  CHECK(Rational::parse("5") == Rational(5));
  CHECK_THROWS(Rational::parse("0.5"));
  CHECK_THROWS(Rational::parse("1e3"));
  CHECK_THROWS(Rational::parse("1/0"));
  CHECK_THROWS(Rational::parse(""));
  CHECK_THROWS(Rational::parse("1/-3"));
}

TEST_CASE("rational arithmetic agrees with integer cross-multiplication") {
  CounterStream rng(11, 0);
  for (int t = 0; t < 500; ++t) {
    const long long a = rng.between(-50, 50), b = rng.between(1, 40);
    const long long c = rng.between(-50, 50), d = rng.between(1, 40);
    const Rational sum = Rational(a, b) + Rational(c, d);
    CHECK(sum == Rational(a * d + c * b, b * d));
    CHECK(Rational(a, b) * Rational(c, d) == Rational(a * c, b * d));
    CHECK((Rational(a, b) < Rational(c, d)) == (a * d < c * b));
  }
}

TEST_CASE("rational has no silent wraparound") {
  Rational big(std::numeric_limits<long long>::max());
  big *= big;
  CHECK(big > Rational(std::numeric_limits<long long>::max()));
  CHECK_THROWS_AS(to_int64(big.numerator()), std::overflow_error);
  CHECK(to_int64(mpz_class(-7)) == -7);
}

TEST_CASE("validate: triangle of pairs is ok") { CHECK(validate(pairs3()).empty()); }

TEST_CASE("validate: coverage failure") {
  const auto v = validate(make_net(2, {{0}}, {Rational(1)}));
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "union does not cover node 1");
}

TEST_CASE("validate: normalization failure") {
  const auto v = validate(make_net(3, {{0, 1}, {1, 2}}, {Rational(1, 2), Rational(1, 3)}));
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "rates sum to 5/6 ≠ 1");
}

TEST_CASE("validate: structural violations are each named") {
  CHECK_FALSE(validate(make_net(2, {{0, 1}, {}}, {Rational(1, 2), Rational(1, 2)})).empty());
  CHECK_FALSE(validate(make_net(2, {{1, 0}}, {Rational(1)})).empty());
  CHECK_FALSE(validate(make_net(2, {{0, 2}}, {Rational(1)})).empty());
  CHECK_FALSE(validate(make_net(2, {{0, 1}, {0}}, {Rational(3, 2), Rational(-1, 2)})).empty());
  CHECK_FALSE(validate(make_net(2, {{0, 1}}, {Rational(1), Rational(0)})).empty());
  CHECK_FALSE(validate(make_net(0, {}, {})).empty());
  CHECK_THROWS_AS(require_valid(make_net(2, {{0}}, {Rational(1)})), InvalidNetwork);
}

TEST_CASE("is_connected") {
  CHECK(is_connected(make_net(3, {{0, 1}, {1, 2}}, {Rational(1, 2), Rational(1, 2)})));
  CHECK_FALSE(is_connected(make_net(4, {{0, 1}, {2, 3}}, {Rational(1, 2), Rational(1, 2)})));
  CHECK(is_connected(make_net(1, {{0}}, {Rational(1)})));
}

TEST_CASE("shape_of examples") {
  const auto net3 = pairs3();
  CHECK(shape_of(cfg({2, 1, 0}), net3).scaled == std::vector<std::int64_t>{3, 0, -3});
  CHECK(shape_of(cfg({2, 1, 0}), net3).coordinates() == std::vector<Rational>{1, 0, -1});
  CHECK(shape_of(cfg({5, 5, 5}), net3).is_zero());
  const auto s2 = shape_of(cfg({3, 0}), single2());
  CHECK(s2.scaled == std::vector<std::int64_t>{3, -3});
  CHECK(s2.coordinates() == std::vector<Rational>{Rational(3, 2), Rational(-3, 2)});
  CHECK_THROWS_AS(shape_of(cfg({1, 2}), net3), std::invalid_argument);
}

TEST_CASE("shape_magnitude examples") {
  CHECK(shape_magnitude(cfg({2, 1, 0}), pairs3()) == Rational(2));
  CHECK(shape_magnitude(cfg({7, 7, 7}), pairs3()) == Rational(0));
  CHECK(shape_magnitude(cfg({3, 0}), single2()) == Rational(9, 2));
  CHECK_THROWS_AS(shape_magnitude(cfg({3}), single2()), std::invalid_argument);
}

TEST_CASE("shape properties on random configurations") {
  CounterStream rng(2024, 1);
  for (int t = 0; t < 300; ++t) {
    const auto net = random_net(rng, 1, 7, 4, 4, 12);
    const auto x = random_configuration(rng, net.n, 15);
    const auto s = shape_of(x, net);
    std::int64_t sum = 0;
    for (auto d : s.scaled) sum += d;
    CHECK(sum == 0);

    const auto c = rng.between(0, 9);
    Configuration shifted = x;
    for (auto& v : shifted.loads) v += c;
    CHECK(shape_of(shifted, net) == s);

    const bool all_equal = std::adjacent_find(x.loads.begin(), x.loads.end(), std::not_equal_to<>()) ==
                           x.loads.end();
    CHECK(shape_magnitude(x, net).is_zero() == all_equal);
    CHECK(shape_magnitude(x, net) == Rational(mpq_class(scaled_magnitude(s), mpz_class(net.n) * net.n)));

    const int l = static_cast<int>(rng.below(static_cast<std::uint64_t>(net.n)));
    Configuration y = x;
    ++y.loads[static_cast<std::size_t>(l)];
    const auto sy = shape_of(y, net);
    for (int k = 0; k < net.n; ++k) {
      const std::int64_t expect = s.scaled[static_cast<std::size_t>(k)] + (k == l ? net.n : 0) - 1;
      CHECK(sy.scaled[static_cast<std::size_t>(k)] == expect);
    }
  }
}

TEST_CASE("network file parsing") {
  const auto net = parse_network(R"({"n": 3, "neighborhoods": [[0, 1], [1, 2]], "rates": ["1/2", "1/2"]})");
  CHECK(net.n == 3);
  CHECK(net.rates[1] == Rational(1, 2));
  CHECK(parse_network(network_to_json(net)).neighborhoods == net.neighborhoods);

  const auto message = [](const char* text) {
    try {
      parse_network(text);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(R"({"n": 2, "neighborhoods": [[0, 1]], "rates": [0.5]})").find("rates[0]") != std::string::npos);
  CHECK(message(R"({"n": 2, "neighborhoods": [[0, 1]]})").find("rates") != std::string::npos);
  CHECK(message(R"({"n": 2, "neighborhoods": [[0, "a"]], "rates": ["1"]})").find("neighborhoods[0][1]") !=
        std::string::npos);
  CHECK(message("{\"n\": 2,\n \"neighborhoods\": [[0, 1]],\n \"rates\": [\"1\" }").find("line 3") !=
        std::string::npos);
}

TEST_CASE("dump_json writes 17 significant digits") {
  json j;
  j["x"] = 0.1;
  j["r"] = Rational(1, 3).to_string();
  j["v"] = std::vector<int>{1, 2};
  CHECK(dump_json(j, -1) == R"({"x":0.10000000000000001,"r":"1/3","v":[1, 2]})");
  CHECK(fnv1a64_hex("") == "cbf29ce484222325");
  CHECK(fnv1a64_hex("a") == "af63dc4c8601ec8c");
}
