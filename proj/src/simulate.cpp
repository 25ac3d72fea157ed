#include "shapestab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace shapestab {

namespace {

constexpr unsigned __int128 kTwo64 = static_cast<unsigned __int128>(1) << 64;

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ParseError("field '" + field + "': " + what);
}

std::int64_t require_int(const json& j, const std::string& field, std::int64_t min_value) {
  if (!j.is_number_integer()) field_error(field, std::string("expected integer, got ") + j.type_name());
  const auto v = j.get<std::int64_t>();
  if (v < min_value) field_error(field, "must be >= " + std::to_string(min_value));
  return v;
}

__int128 scaled_square_sum(const std::vector<std::int64_t>& x, std::int64_t total, int n) {
  __int128 s = 0;
  for (auto v : x) {
    const __int128 d = static_cast<__int128>(n) * v - total;
    s += d * d;
  }
  return s;
}

mpz_class to_mpz(__int128 v) {
  const bool neg = v < 0;
  unsigned __int128 u = neg ? static_cast<unsigned __int128>(-(v + 1)) + 1 : static_cast<unsigned __int128>(v);
  mpz_class r(static_cast<unsigned long>(u >> 64));
  r <<= 64;
  r += mpz_class(static_cast<unsigned long>(u));
  return neg ? mpz_class(-r) : r;
}

}  // namespace

std::int64_t default_tau_cutoff(std::int64_t max_steps) {
  return std::max((max_steps + 9) / 10, std::min<std::int64_t>(max_steps, 1000));
}

std::int64_t default_record_every(std::int64_t max_steps) { return std::max<std::int64_t>(1, max_steps / 1000); }

void validate_sim_config(const SimConfig& cfg) {
  const auto violations = validate(cfg.net);
  if (!violations.empty()) throw std::invalid_argument("network: " + violations.front());
  if (cfg.initial.size() != static_cast<std::size_t>(cfg.net.n)) {
    throw std::invalid_argument("initial configuration has " + std::to_string(cfg.initial.size()) +
                                " entries, network has " + std::to_string(cfg.net.n) + " nodes");
  }
  for (auto v : cfg.initial.loads) {
    if (v < 0) throw std::invalid_argument("initial loads must be non-negative");
  }
  if (cfg.max_steps < 0) throw std::invalid_argument("max_steps must be >= 0");
  if (cfg.replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  if (cfg.record_every < 1) throw std::invalid_argument("record_every must be >= 1");
  if (cfg.tau_cutoff < 1) throw std::invalid_argument("tau_cutoff must be >= 1");
}

SimConfig sim_config_from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) field_error("<root>", "expected an object");
  static const std::vector<std::string> known = {"network",      "policy",     "initial",         "max_steps",
                                                 "replicas",     "seed",       "record_every",    "tau_cutoff",
                                                 "continuous_time"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) field_error(it.key(), "unknown field");
  }
  SimConfig cfg;
  if (!j.contains("network")) field_error("network", "missing (inline object or path to a network file)");
  const json& net = j["network"];
  if (net.is_string()) {
    std::filesystem::path p = net.get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    cfg.net = load_network(p.string());
  } else {
    cfg.net = network_from_json(net, "network.");
  }
  const auto violations = validate(cfg.net);
  if (!violations.empty()) field_error("network", violations.front());

  if (!j.contains("policy")) field_error("policy", "missing (e.g. {\"policy\": \"jsq\"})");
  cfg.policy = parse_policy_spec(j["policy"]);

  if (!j.contains("max_steps")) field_error("max_steps", "missing");
  cfg.max_steps = require_int(j["max_steps"], "max_steps", 0);

  if (j.contains("initial")) {
    const json& init = j["initial"];
    if (!init.is_array()) field_error("initial", "expected array of non-negative integers");
    if (init.size() != static_cast<std::size_t>(cfg.net.n)) {
      field_error("initial", "has " + std::to_string(init.size()) + " entries, network has " +
                                 std::to_string(cfg.net.n) + " nodes");
    }
    for (std::size_t k = 0; k < init.size(); ++k) {
      cfg.initial.loads.push_back(require_int(init[k], "initial[" + std::to_string(k) + "]", 0));
    }
  } else {
    cfg.initial.loads.assign(static_cast<std::size_t>(cfg.net.n), 0);
  }

  cfg.replicas = j.contains("replicas") ? static_cast<int>(require_int(j["replicas"], "replicas", 1)) : 1;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || (j["seed"].is_number_integer() && !j["seed"].is_number_unsigned() &&
                                           j["seed"].get<std::int64_t>() < 0)) {
      field_error("seed", "expected non-negative integer");
    }
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  cfg.record_every = j.contains("record_every") ? require_int(j["record_every"], "record_every", 1)
                                                : default_record_every(cfg.max_steps);
  cfg.tau_cutoff =
      j.contains("tau_cutoff") ? require_int(j["tau_cutoff"], "tau_cutoff", 1) : default_tau_cutoff(cfg.max_steps);
  if (j.contains("continuous_time")) {
    if (!j["continuous_time"].is_boolean()) field_error("continuous_time", "expected boolean");
    cfg.continuous_time = j["continuous_time"].get<bool>();
  }
  if (cfg.tau_cutoff < 1) cfg.tau_cutoff = 1;
  return cfg;
}

json sim_config_to_json(const SimConfig& cfg) {
  json j;
  j["network"] = network_as_json(cfg.net);
  j["policy"] = policy_spec_json(cfg.policy);
  j["initial"] = cfg.initial.loads;
  j["max_steps"] = cfg.max_steps;
  j["replicas"] = cfg.replicas;
  j["seed"] = cfg.seed;
  j["record_every"] = cfg.record_every;
  j["tau_cutoff"] = cfg.tau_cutoff;
  j["continuous_time"] = cfg.continuous_time;
  return j;
}

Rational MagnitudePoint::magnitude(int n) const {
  return Rational(mpq_class(to_mpz(scaled), mpz_class(n) * n));
}

double MagnitudePoint::magnitude_double(int n) const {
  return static_cast<double>(scaled) / (static_cast<double>(n) * n);
}

std::vector<unsigned __int128> sampling_thresholds(const std::vector<Rational>& probs) {
  std::vector<unsigned __int128> out;
  out.reserve(probs.size());
  Rational cum;
  const mpz_class two64 = mpz_class(1) << 64;
  for (const auto& p : probs) {
    cum += p;
    // round-half-up of cum * 2^64
    mpz_class t = (cum.numerator() * two64 * 2 + cum.denominator()) / (cum.denominator() * 2);
    if (t > two64) t = two64;
    if (t < 0) t = 0;
    const mpz_class hi = t >> 64;
    const mpz_class lo = t - (hi << 64);
    out.push_back((static_cast<unsigned __int128>(hi.get_ui()) << 64) | lo.get_ui());
  }
  if (!out.empty() && cum == Rational(1)) out.back() = kTwo64;
  return out;
}

std::size_t sample_index(const std::vector<unsigned __int128>& thresholds, std::uint64_t u) {
  for (std::size_t j = 0; j < thresholds.size(); ++j) {
    if (u < thresholds[j]) return j;
  }
  return thresholds.size() - 1;
}

StepOutcome step(const StorageNetwork& net, const Policy& policy, const Configuration& x, UniformPair u) {
  const auto i = sample_index(sampling_thresholds(net.rates), u.first);
  const auto row = policy.decide_row(net, x.loads, i);
  const auto j = sample_index(sampling_thresholds(row), u.second);
  StepOutcome out{x, static_cast<int>(i), net.neighborhoods[i][j]};
  ++out.next.loads[static_cast<std::size_t>(out.node)];
  return out;
}

Stepper::Stepper(const StorageNetwork& net, const Policy& policy)
    : net_(net), policy_(policy), rate_thresholds_(sampling_thresholds(net.rates)), cache_(net.K()) {}

std::pair<int, int> Stepper::advance(std::vector<std::int64_t>& loads, UniformPair u) {
  const auto i = sample_index(rate_thresholds_, u.first);
  const auto& S = net_.neighborhoods[i];
  int node;
  if (policy_.kind() == PolicyKind::Jsq) {
    node = argmin_node(loads, S);
  } else {
    const auto key = policy_.row_key(net_, loads, i);
    auto& rows = cache_[i];
    auto it = rows.find(key);
    if (it == rows.end()) it = rows.emplace(key, sampling_thresholds(policy_.decide_row(net_, loads, i))).first;
    node = S[sample_index(it->second, u.second)];
  }
  ++loads[static_cast<std::size_t>(node)];
  return {static_cast<int>(i), node};
}

TrajectoryStats run_replica(const SimConfig& cfg, const Policy& policy, int replica_id) {
  const int n = cfg.net.n;
  const auto N = static_cast<std::size_t>(n);
  if (cfg.initial.size() != N) throw std::invalid_argument("initial configuration dimension mismatch");

  TrajectoryStats st;
  st.neighborhood_counts.assign(cfg.net.K(), 0);
  st.node_counts.assign(N, 0);
  std::vector<std::int64_t> x = cfg.initial.loads;
  const std::vector<std::int64_t>& x0 = cfg.initial.loads;
  std::int64_t total = std::accumulate(x.begin(), x.end(), std::int64_t{0});

  std::int64_t xmax = *std::max_element(x.begin(), x.end());
  std::int64_t xmin = *std::min_element(x.begin(), x.end());
  auto count_eq = [&](std::int64_t v) { return std::count(x.begin(), x.end(), v); };
  std::int64_t at_max = count_eq(xmax);
  std::int64_t at_min = count_eq(xmin);
  std::int64_t ymax = 0;  // y = x - x0 is >= 0 and non-decreasing
  std::int64_t at_ymax = n;

  const auto spread = [&] { return std::max(n * xmax - total, total - n * xmin); };
  std::int64_t max_spread = spread();

  bool from_zero = at_max == n;
  std::int64_t age = 0;
  bool censored_now = false;

  Stepper stepper(cfg.net, policy);
  const auto replica = static_cast<std::uint32_t>(replica_id);
  for (std::int64_t m = 1; m <= cfg.max_steps; ++m) {
    const auto u = draw(cfg.seed, replica, static_cast<std::uint64_t>(m - 1), 0);
    const auto [i, node] = stepper.advance(x, u);
    const auto l = static_cast<std::size_t>(node);
    ++st.neighborhood_counts[static_cast<std::size_t>(i)];
    ++st.node_counts[l];
    if (cfg.record_trace) st.trace.emplace_back(i, node);
    if (cfg.continuous_time) {
      const auto e = draw(cfg.seed, replica, static_cast<std::uint64_t>(m - 1), 1);
      st.elapsed_time += -std::log1p(-to_unit(e.first));
    }
    ++total;

    const std::int64_t v = x[l];
    if (v > xmax) {
      xmax = v;
      at_max = 1;
    } else if (v == xmax) {
      ++at_max;
    }
    if (v - 1 == xmin && --at_min == 0) {
      xmin = *std::min_element(x.begin(), x.end());
      at_min = count_eq(xmin);
    }
    const std::int64_t y = v - x0[l];
    if (y > ymax) {
      ymax = y;
      at_ymax = 1;
    } else if (y == ymax) {
      ++at_ymax;
    }
    if (at_ymax == n) ++st.returns_to_initial;
    max_spread = std::max(max_spread, spread());

    ++age;
    if (at_max == n) {
      if (!from_zero) {
        st.first_hit = m;
        from_zero = true;
      } else if (!censored_now) {
        st.tau_samples.push_back(age);
      }
      age = 0;
      censored_now = false;
    } else if (!censored_now && age == cfg.tau_cutoff) {
      ++st.censored_count;
      censored_now = true;
    }

    if (m % cfg.record_every == 0) st.magnitude_series.push_back({m, scaled_square_sum(x, total, n)});
  }
  st.steps = cfg.max_steps;
  st.final_config.loads = x;
  st.final_shape = shape_of(st.final_config, cfg.net);
  st.max_abs_shape_coord = Rational(max_spread, n);
  return st;
}

TrajectoryStats run_replica(const SimConfig& cfg, int replica_id) {
  const Policy policy = build_policy(cfg.net, cfg.policy);
  return run_replica(cfg, policy, replica_id);
}

std::vector<TrajectoryStats> run_replicas(const SimConfig& cfg, const Policy& policy, Execution exec) {
  validate_sim_config(cfg);
  std::vector<TrajectoryStats> out(static_cast<std::size_t>(cfg.replicas));
  if (exec == Execution::Serial) {
    for (int r = 0; r < cfg.replicas; ++r) out[static_cast<std::size_t>(r)] = run_replica(cfg, policy, r);
    return out;
  }
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < cfg.replicas; ++r) {
    try {
      out[static_cast<std::size_t>(r)] = run_replica(cfg, policy, r);
    } catch (...) {
#pragma omp critical(shapestab_sim_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::PositiveRecurrentConsistent: return "POSITIVE_RECURRENT_CONSISTENT";
    case Verdict::TransientConsistent: return "TRANSIENT_CONSISTENT";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

LinearFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
  LinearFit fit;
  fit.points = xs.size();
  if (xs.size() < 2) return fit;
  const double k = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / k;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / k;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    sxx += (xs[t] - mx) * (xs[t] - mx);
    sxy += (xs[t] - mx) * (ys[t] - my);
    syy += (ys[t] - my) * (ys[t] - my);
  }
  if (sxx == 0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy == 0) {
    fit.r_squared = 1;
  } else {
    double ss_res = 0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
      const double r = ys[t] - (fit.intercept + fit.slope * xs[t]);
      ss_res += r * r;
    }
    fit.r_squared = 1 - ss_res / syy;
  }
  return fit;
}

std::vector<std::int64_t> pooled_taus(const std::vector<TrajectoryStats>& runs) {
  std::vector<std::int64_t> all;
  for (const auto& r : runs) all.insert(all.end(), r.tau_samples.begin(), r.tau_samples.end());
  return all;
}

std::map<std::int64_t, std::int64_t> tau_histogram(const std::vector<TrajectoryStats>& runs) {
  std::map<std::int64_t, std::int64_t> h;
  for (const auto& r : runs) {
    for (auto t : r.tau_samples) ++h[t];
  }
  return h;
}

double censored_mean_tau(const std::vector<TrajectoryStats>& runs, std::int64_t tau_cutoff) {
  double sum = 0;
  std::int64_t count = 0, censored = 0;
  for (const auto& r : runs) {
    for (auto t : r.tau_samples) sum += static_cast<double>(t);
    count += static_cast<std::int64_t>(r.tau_samples.size());
    censored += r.censored_count;
  }
  if (count + censored == 0) return std::numeric_limits<double>::quiet_NaN();
  return (sum + static_cast<double>(tau_cutoff) * static_cast<double>(censored)) /
         static_cast<double>(count + censored);
}

RecurrenceDiagnostic aggregate(const std::vector<TrajectoryStats>& runs, std::int64_t tau_cutoff,
                               const VerdictThresholds& thresholds) {
  if (runs.empty()) throw std::invalid_argument("aggregate needs at least one replica");
  RecurrenceDiagnostic d;
  d.thresholds = thresholds;
  d.tau_cutoff = tau_cutoff;
  const int n = runs.front().final_config.size() == 0 ? 1 : static_cast<int>(runs.front().final_config.size());

  std::size_t censored_runs = 0;
  for (const auto& r : runs) {
    const auto& s = r.magnitude_series;
    const auto skip = static_cast<std::size_t>(thresholds.burn_in_fraction * static_cast<double>(s.size()));
    std::vector<double> xs, ys;
    for (std::size_t t = skip; t < s.size(); ++t) {
      xs.push_back(static_cast<double>(s[t].step));
      ys.push_back(std::sqrt(s[t].magnitude_double(n)));
    }
    d.replica_slopes.push_back(least_squares(xs, ys).slope);
    d.tau_count += static_cast<std::int64_t>(r.tau_samples.size());
    d.censored_excursions += r.censored_count;
    if (r.censored_count > 0) ++censored_runs;
  }
  d.censoring_fraction = static_cast<double>(censored_runs) / static_cast<double>(runs.size());

  const double R = static_cast<double>(runs.size());
  d.slope = std::accumulate(d.replica_slopes.begin(), d.replica_slopes.end(), 0.0) / R;
  if (runs.size() >= 2) {
    double var = 0;
    for (double s : d.replica_slopes) var += (s - d.slope) * (s - d.slope);
    var /= R - 1;
    const boost::math::students_t dist(R - 1);
    const double tq = boost::math::quantile(dist, 1 - (1 - thresholds.confidence) / 2);
    const double half = tq * std::sqrt(var / R);
    d.slope_ci_low = d.slope - half;
    d.slope_ci_high = d.slope + half;
  } else {
    d.slope_ci_low = -std::numeric_limits<double>::infinity();
    d.slope_ci_high = std::numeric_limits<double>::infinity();
  }

  // log-survival of tau; censoring only happens beyond the cutoff
  const auto hist = tau_histogram(runs);
  const double population = static_cast<double>(d.tau_count + d.censored_excursions);
  std::int64_t at_risk = d.tau_count + d.censored_excursions;
  std::vector<double> ts, logs;
  for (const auto& [t, c] : hist) {
    at_risk -= c;
    if (at_risk < thresholds.min_at_risk) break;
    ts.push_back(static_cast<double>(t));
    logs.push_back(std::log(static_cast<double>(at_risk) / population));
  }
  const auto tail = least_squares(ts, logs);
  d.tail_points = ts.size();
  if (ts.size() >= 2) {
    d.tail_exponent = -tail.slope;
    d.tail_prefactor = std::exp(tail.intercept);
    d.tail_r_squared = tail.r_squared;
  }
  d.mean_tau = censored_mean_tau(runs, tau_cutoff);

  const bool ci_contains_zero = d.slope_ci_low <= 0 && d.slope_ci_high >= 0;
  if (d.slope_ci_low > 0 && d.censoring_fraction > thresholds.transient_censoring) {
    d.verdict = Verdict::TransientConsistent;
  } else if (ci_contains_zero && d.censoring_fraction < thresholds.recurrent_censoring && d.tail_exponent > 0 &&
             d.tail_r_squared >= thresholds.min_r_squared) {
    d.verdict = Verdict::PositiveRecurrentConsistent;
  } else {
    d.verdict = Verdict::Inconclusive;
  }
  return d;
}

std::vector<double> default_mgf_grid() { return {0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2}; }

MgfTable mgf_probe(const std::vector<std::int64_t>& tau_samples, const std::vector<double>& c_grid,
                   std::int64_t censored) {
  MgfTable table;
  if (censored > 0) {
    table.censoring_note = std::to_string(censored) + " censored excursions excluded; values are lower bounds";
  }
  if (c_grid.empty()) return table;
  if (tau_samples.empty()) throw std::invalid_argument("mgf probe needs at least one return time");

  const auto histogram = [](auto begin, auto end) {
    std::map<std::int64_t, std::int64_t> h;
    for (auto it = begin; it != end; ++it) ++h[*it];
    return h;
  };
  const auto half_len = std::max<std::size_t>(1, tau_samples.size() / 2);
  const auto full = histogram(tau_samples.begin(), tau_samples.end());
  const auto half = histogram(tau_samples.begin(), tau_samples.begin() + static_cast<std::ptrdiff_t>(half_len));
  const auto mean_exp = [](const std::map<std::int64_t, std::int64_t>& h, double total, double c) {
    double s = 0;
    for (const auto& [t, k] : h) s += (static_cast<double>(k) / total) * std::exp(c * static_cast<double>(t));
    return s;
  };

  for (double c : c_grid) {
    MgfRow row{c, mean_exp(full, static_cast<double>(tau_samples.size()), c),
               mean_exp(half, static_cast<double>(half_len), c), false};
    row.stable = std::isfinite(row.value) && std::isfinite(row.half_value) &&
                 std::abs(row.half_value - row.value) <= kMgfStabilityTolerance * row.value;
    if (row.stable && (!table.largest_stable || c > *table.largest_stable)) table.largest_stable = c;
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace shapestab
