#include <doctest.h>

#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>

#include "shapestab/simulate.hpp"
#include "support.hpp"

using namespace shapestab;
using namespace shapestab::testing;

namespace {

SimConfig config(const StorageNetwork& net, const std::string& policy, std::int64_t steps, int replicas = 1,
                 std::uint64_t seed = 0) {
  SimConfig cfg;
  cfg.net = net;
  cfg.policy.name = policy;
  cfg.initial.loads.assign(static_cast<std::size_t>(net.n), 0);
  cfg.max_steps = steps;
  cfg.replicas = replicas;
  cfg.seed = seed;
  cfg.record_every = default_record_every(steps);
  cfg.tau_cutoff = default_tau_cutoff(steps);
  return cfg;
}

double chi_square_p(const std::vector<std::int64_t>& counts, const std::vector<double>& probs) {
  double total = 0;
  for (auto c : counts) total += static_cast<double>(c);
  double chi2 = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double e = total * probs[k];
    chi2 += (static_cast<double>(counts[k]) - e) * (static_cast<double>(counts[k]) - e) / e;
  }
  const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, chi2));
}

}  // namespace

TEST_CASE("sampling thresholds") {
  const auto t = sampling_thresholds({Rational(1, 2), Rational(1, 4), Rational(1, 4)});
  const unsigned __int128 two64 = static_cast<unsigned __int128>(1) << 64;
  CHECK(t[0] == two64 / 2);
  CHECK(t[1] == two64 / 4 * 3);
  CHECK(t[2] == two64);
  CHECK(sample_index(t, 0) == 0);
  CHECK(sample_index(t, (std::uint64_t{1} << 63) - 1) == 0);
  CHECK(sample_index(t, std::uint64_t{1} << 63) == 1);
  CHECK(sample_index(t, ~std::uint64_t{0}) == 2);
  const auto z = sampling_thresholds({Rational(0), Rational(1), Rational(0)});
  CHECK(sample_index(z, 0) == 1);
  CHECK(sample_index(z, ~std::uint64_t{0}) == 1);
  // 1/3 * 2^64 rounds to nearest
  const auto third = sampling_thresholds({Rational(1, 3), Rational(2, 3)});
  CHECK(third[0] == (two64 + 1) / 3);
}

TEST_CASE("step: JSQ on a single neighborhood follows the tie-break") {
  const auto net = single2();
  const auto jsq = Policy::jsq();
  for (std::uint64_t k = 0; k < 20; ++k) {
    const auto u = draw(k, 0, k);
    CHECK(step(net, jsq, cfg({0, 0}), u).node == 0);
    CHECK(step(net, jsq, cfg({1, 0}), u).node == 1);
    CHECK(step(net, jsq, cfg({1, 0}), u).next == cfg({1, 1}));
  }
}

TEST_CASE("step: SERP halves on a single neighborhood") {
  const auto net = single2();
  const auto serp = build_policy(net, PolicySpec{"serp", {}, 0, kDefaultTableClip});
  std::int64_t zero = 0;
  constexpr std::int64_t kSteps = 1'000'000;
  Stepper stepper(net, serp);
  std::vector<std::int64_t> loads{0, 0};
  for (std::int64_t m = 0; m < kSteps; ++m) {
    std::vector<std::int64_t> fresh{0, 0};
    if (stepper.advance(fresh, draw(17, 0, static_cast<std::uint64_t>(m))).second == 0) ++zero;
  }
  CHECK(std::abs(static_cast<double>(zero) / kSteps - 0.5) <= 0.002);
}

TEST_CASE("Stepper agrees with step draw by draw") {
  CounterStream rng(12, 0);
  for (int t = 0; t < 10; ++t) {
    const auto net = random_net(rng, 2, 6, 5, 4, 12);
    std::vector<Policy> policies{Policy::jsq(), random_policy(net, static_cast<std::uint64_t>(t)),
                                 Policy::uniform(net, true)};
    if (auto pos = solve_positive_allocation(net); pos.outcome == PositiveSearch::Found) {
      policies.push_back(Policy::pserp(net, *pos.allocation, default_pserp_epsilon(*pos.allocation)));
    }
    for (const auto& policy : policies) {
      Stepper stepper(net, policy);
      Configuration x = random_configuration(rng, net.n, 5);
      for (std::uint64_t m = 0; m < 300; ++m) {
        const auto u = draw(99, 1, m);
        const auto ref = step(net, policy, x, u);
        const auto got = stepper.advance(x.loads, u);
        CHECK(got.first == ref.neighborhood);
        CHECK(got.second == ref.node);
        CHECK(x == ref.next);
      }
    }
  }
}

TEST_CASE("run_replica: deterministic alternation on two nodes") {
  auto cfg = config(single2(), "jsq", 1000);
  cfg.record_every = 1;
  const auto st = run_replica(cfg, 0);
  CHECK(st.tau_samples.size() == 500);
  for (auto t : st.tau_samples) CHECK(t == 2);
  CHECK(st.censored_count == 0);
  CHECK(st.magnitude_series[0].magnitude(2) == Rational(1, 2));
  CHECK(st.magnitude_series[1].magnitude(2) == Rational(0));
  CHECK(st.returns_to_initial == 500);
}

TEST_CASE("run_replica: zero steps") {
  const auto st = run_replica(config(pairs3(), "jsq", 0), 0);
  CHECK(st.magnitude_series.empty());
  CHECK(st.tau_samples.empty());
  CHECK(st.final_config == cfg({0, 0, 0}));
}

TEST_CASE("run_replica: node 0 of the star outgrows the mean at rate 1/6 under JSQ") {
  constexpr std::int64_t kSteps = 100'000;
  const auto st = run_replica(config(star3(), "jsq", kSteps, 1, 5), 0);
  const double slope = st.final_shape.scaled[0] / 3.0 / kSteps;
  CHECK(std::abs(slope - 1.0 / 6) <= 0.05 / 6);
}

TEST_CASE("run_replica: a fixed routing row on the star shifts the slope by half its node-0 share") {
  constexpr std::int64_t kSteps = 100'000;
  const auto net = star3();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto cfg = config(net, "table", kSteps, 1, 11);
    cfg.policy.seed = seed;
    cfg.policy.clip = 0;
    const auto policy = build_policy(net, cfg.policy);
    const double share = policy.decide_row(net, cfg.initial.loads, 1)[0].to_double();
    const auto st = run_replica(cfg, policy, 0);
    const double slope = st.final_shape.scaled[0] / 3.0 / kSteps;
    const double predicted = 1.0 / 6 + share / 2;
    CHECK(std::abs(slope - predicted) <= 0.05 * predicted);
  }
}

TEST_CASE("run_replica: invariants on random nets") {
  CounterStream rng(21, 0);
  for (int t = 0; t < 12; ++t) {
    const auto net = random_net(rng, 2, 5, 4, 3, 12);
    for (const auto* name : {"jsq", "table"}) {
      auto cfg = config(net, name, 3000, 1, static_cast<std::uint64_t>(t));
      cfg.initial = random_configuration(rng, net.n, 4);
      cfg.record_trace = true;
      cfg.record_every = 7;
      const auto policy = build_policy(net, cfg.policy);
      const auto a = run_replica(cfg, policy, 2);
      CHECK(a == run_replica(cfg, policy, 2));
      CHECK(a.final_config.total() == cfg.initial.total() + cfg.max_steps);
      for (auto tau : a.tau_samples) CHECK(tau % net.n == 0);
      for (const auto& p : a.magnitude_series) {
        CHECK(p.scaled >= 0);
        CHECK(p.step % 7 == 0);
      }
      auto shifted = cfg;
      for (auto& v : shifted.initial.loads) v += 3;
      const auto b = run_replica(shifted, policy, 2);
      CHECK(b.trace == a.trace);
      CHECK(b.tau_samples == a.tau_samples);
      CHECK(b.final_shape == a.final_shape);
    }
  }
}

TEST_CASE("run_replicas: parallel schedule does not change results") {
  auto cfg = config(pairs3(), "pserp", 5000, 6, 9);
  const auto policy = build_policy(cfg.net, cfg.policy);
  CHECK(run_replicas(cfg, policy, Execution::Serial) == run_replicas(cfg, policy, Execution::Parallel));
}

TEST_CASE("neighborhood frequencies follow the rates; SERP node frequencies are uniform") {
  const auto net = pairs4({Rational(1, 12), Rational(1, 6), Rational(1, 4), Rational(1, 12), Rational(1, 4),
                           Rational(1, 6)});
  auto cfg = config(net, "serp", 1'000'000, 1, 77);
  const auto st = run_replica(cfg, 0);
  std::vector<double> rates;
  for (const auto& r : net.rates) rates.push_back(r.to_double());
  CHECK(chi_square_p(st.neighborhood_counts, rates) > 1e-6);
  CHECK(chi_square_p(st.node_counts, std::vector<double>(4, 0.25)) > 1e-6);
}

TEST_CASE("continuous-time wrapper has unit-rate clock") {
  auto cfg = config(pairs3(), "jsq", 100'000, 1, 4);
  cfg.continuous_time = true;
  const auto st = run_replica(cfg, 0);
  CHECK(std::abs(st.elapsed_time / 100'000 - 1.0) < 0.02);
  cfg.continuous_time = false;
  const auto plain = run_replica(cfg, 0);
  CHECK(plain.tau_samples == st.tau_samples);
}

TEST_CASE("censoring counts excursions that outlive the cutoff") {
  auto cfg = config(star3(), "jsq", 20'000, 1, 8);
  cfg.tau_cutoff = 100;
  const auto st = run_replica(cfg, 0);
  CHECK(st.censored_count >= 1);
  for (auto t : st.tau_samples) CHECK(t <= 100);
}

TEST_CASE("non-zero start records the first hit separately") {
  auto c = config(single2(), "jsq", 10);
  c.initial = cfg({1, 0});
  const auto st = run_replica(c, 0);
  REQUIRE(st.first_hit);
  CHECK(*st.first_hit == 1);
  CHECK(st.tau_samples == std::vector<std::int64_t>{2, 2, 2, 2});
  CHECK(st.returns_to_initial == 5);
}

TEST_CASE("simulation config parsing") {
  const auto j = json::parse(R"({"network":{"n":2,"neighborhoods":[[0,1]],"rates":["1"]},
    "policy":{"policy":"jsq"},"initial":[0,0],"max_steps":100,"replicas":2})");
  const auto c = sim_config_from_json(j, ".");
  CHECK(c.seed == 0);
  CHECK(c.record_every == 1);
  CHECK(c.tau_cutoff == 100);
  CHECK(default_tau_cutoff(100'000) == 10'000);
  CHECK(default_tau_cutoff(5'000) == 1'000);
  CHECK(default_tau_cutoff(5) == 5);
  CHECK(default_record_every(100'000) == 100);
  auto bad = j;
  bad["initial"] = json::array({0});
  CHECK_THROWS(sim_config_from_json(bad, "."));
  bad = j;
  bad["bogus"] = 1;
  CHECK_THROWS_AS(sim_config_from_json(bad, "."), ParseError);
  bad = j;
  bad["max_steps"] = -1;
  CHECK_THROWS(sim_config_from_json(bad, "."));
  const auto round = sim_config_from_json(sim_config_to_json(c), ".");
  CHECK(round.max_steps == c.max_steps);
  CHECK(round.net.rates == c.net.rates);
  CHECK(round.net.neighborhoods == c.net.neighborhoods);
}

TEST_CASE("least squares") {
  const auto fit = least_squares({0, 1, 2, 3}, {1, 3, 5, 7});
  CHECK(fit.slope == doctest::Approx(2));
  CHECK(fit.intercept == doctest::Approx(1));
  CHECK(fit.r_squared == doctest::Approx(1));
}

TEST_CASE("mgf probe") {
  const std::vector<std::int64_t> constant(50, 2);
  const auto t = mgf_probe(constant, {0.01, 0.1, 1.0});
  REQUIRE(t.rows.size() == 3);
  for (const auto& r : t.rows) {
    CHECK(r.value == std::exp(2 * r.c));
    CHECK(r.stable);
  }
  CHECK(*t.largest_stable == 1.0);
  CHECK(mgf_probe(constant, {}).rows.empty());
  CHECK_THROWS(mgf_probe({}, {0.1}));
  // heavy tail in the second half only
  std::vector<std::int64_t> drift(100, 2);
  for (std::size_t k = 50; k < 100; ++k) drift[k] = 200;
  const auto h = mgf_probe(drift, {0.001, 0.1});
  CHECK_FALSE(h.rows[1].stable);
  CHECK(mgf_probe(constant, {0.1}, 3).censoring_note.size() > 0);
}

TEST_CASE("aggregate verdicts") {
  auto recurrent = run_replicas(config(pairs3(), "jsq", 20'000, 8, 1), Policy::jsq());
  const auto rec = aggregate(recurrent, default_tau_cutoff(20'000));
  CHECK(rec.verdict == Verdict::PositiveRecurrentConsistent);
  CHECK(rec.censoring_fraction == 0);
  CHECK(rec.tail_exponent > 0);

  auto transient = run_replicas(config(star3(), "jsq", 20'000, 8, 1), Policy::jsq());
  const auto tr = aggregate(transient, default_tau_cutoff(20'000));
  CHECK(tr.verdict == Verdict::TransientConsistent);
  CHECK(tr.slope_ci_low > 0);
  CHECK(to_string(tr.verdict) == "TRANSIENT_CONSISTENT");
  std::vector<TrajectoryStats> synthetic(2);
  synthetic[0].tau_samples = {3, 6};
  synthetic[1].tau_samples = {3};
  synthetic[1].censored_count = 1;
  CHECK(censored_mean_tau(synthetic, 12) == doctest::Approx(6.0));
  const auto hist = tau_histogram(recurrent);
  std::int64_t total = 0;
  for (const auto& [tau, count] : hist) total += count;
  CHECK(total == rec.tau_count);
  CHECK(pooled_taus(recurrent).size() == static_cast<std::size_t>(rec.tau_count));
}
