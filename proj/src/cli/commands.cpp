#include "shapestab/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "shapestab/drift.hpp"
#include "shapestab/feasibility.hpp"
#include "shapestab/rng.hpp"

namespace shapestab::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kDisconnectedWarning =
    "neighborhood graph is disconnected: positive recurrence in shape is impossible for any routing policy";

constexpr const char* kProxyNote =
    "finite-sample diagnostic: verdicts are consistent-with statements, not proofs of recurrence or transience";

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
}

// Prints `report` (with the manifest embedded) and, when an output directory
// is set, writes it together with manifest.json.
void emit(const Output& io, const Manifest& manifest, json report, const std::string& file_name) {
  report["manifest"] = manifest.to_json(false);
  const std::string text = dump_json(report) + "\n";
  io.out << text;
  if (io.output_dir.empty()) return;
  fs::create_directories(io.output_dir);
  write_file(fs::path(io.output_dir) / file_name, text);
  write_file(fs::path(io.output_dir) / "manifest.json", dump_json(manifest.to_json(true)) + "\n");
}

Manifest manifest_for(const std::string& subcommand, const std::vector<std::string>& files) {
  Manifest m;
  m.subcommand = subcommand;
  m.input_files = files;
  std::string bytes;
  for (const auto& f : files) bytes += read_file(f);
  m.input_hash = fnv1a64_hex(bytes);
  return m;
}

json configuration_json(const Configuration& x) { return x.loads; }

json certificate_json(const SeparatingFunctional& sf) {
  json c;
  c["b"] = rational_list(sf.b);
  c["subset"] = sf.subset;
  c["proper"] = sf.proper;
  c["vertex_count"] = sf.vertex_count;
  c["min_vertex_product"] = sf.min_vertex_product.to_string();
  c["vertex_products"] = rational_list(sf.vertex_products);
  return c;
}

}  // namespace

json Manifest::to_json(bool with_timestamp) const {
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["subcommand"] = subcommand;
  j["input_files"] = input_files;
  j["input_hash"] = input_hash;
  j["parameters"] = parameters;
  j["manifest_id"] = id();
  if (with_timestamp) j["timestamp"] = utc_timestamp();
  return j;
}

std::string Manifest::id() const {
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["subcommand"] = subcommand;
  j["input_hash"] = input_hash;
  j["parameters"] = parameters;
  return fnv1a64_hex(dump_json(j, -1));
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError(path + ": cannot open file");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

PolicySpec parse_policy_option(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("policy: ") + e.what());
    }
    return parse_policy_spec(j);
  }
  json j;
  j["policy"] = text;
  return parse_policy_spec(j);
}

Configuration parse_configuration(const std::string& text) {
  Configuration x;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      throw ParseError("configuration '" + text + "': '" + item + "' is not an integer");
    }
    if (used != item.size() || v < 0) {
      throw ParseError("configuration '" + text + "': entries must be non-negative integers");
    }
    x.loads.push_back(v);
  }
  if (x.loads.empty()) throw ParseError("configuration is empty");
  return x;
}

std::vector<Configuration> sweep_configurations(int n, std::uint64_t seed, int count, int max_load) {
  CounterStream rng(seed, 0, 0x5EE9u);
  std::vector<Configuration> out;
  for (int c = 0; c < count; ++c) {
    Configuration x;
    for (int l = 0; l < n; ++l) x.loads.push_back(rng.between(0, max_load));
    out.push_back(std::move(x));
  }
  return out;
}

json analyze_report(const StorageNetwork& net) {
  json j;
  const auto violations = validate(net);
  if (!violations.empty()) {
    j["valid"] = false;
    j["violations"] = violations;
    return j;
  }
  const auto rep = analyze_feasibility(net);
  j["valid"] = true;
  j["n"] = net.n;
  j["K"] = net.K();
  j["connected"] = rep.connected;
  j["status"] = to_string(rep.status);
  j["erp_exists"] = rep.erp_exists();
  j["serp_exists"] = rep.serp_exists();
  if (rep.status == FeasibilityStatus::Undecided) {
    j["origin_in_ri_D"] = nullptr;
  } else {
    j["origin_in_ri_D"] = rep.status == FeasibilityStatus::Positive;
  }
  j["slack"] = rep.slack ? json(rep.slack->to_string()) : json(nullptr);
  j["witness_subset"] = rep.witness_subset;
  j["allocation"] = rep.allocation ? rational_matrix(rep.allocation->alpha) : json(nullptr);
  j["allocation_strictly_positive"] = rep.allocation ? json(rep.allocation->strictly_positive()) : json(nullptr);
  j["certificate"] = rep.certificate ? certificate_json(*rep.certificate) : json(nullptr);
  json warnings = json::array();
  json notes = json::array();
  for (const auto& note : rep.notes) {
    if (note == kDisconnectedWarning) {
      warnings.push_back(note);
    } else {
      notes.push_back(note);
    }
  }
  j["warnings"] = warnings;
  j["notes"] = notes;
  return j;
}

json drift_check_report(const StorageNetwork& net, const PolicySpec& spec, const std::vector<Configuration>& cases) {
  require_valid(net);
  std::string notice;
  const Policy policy = build_policy_or_fallback(net, spec, notice);
  json notices = json::array();
  if (!notice.empty()) notices.push_back(notice);

  std::optional<AllocationMatrix> jsq_alpha;
  bool closed_form_available = policy.kind() == PolicyKind::Equilibrium || policy.kind() == PolicyKind::Pserp;
  if (policy.kind() == PolicyKind::Jsq) {
    jsq_alpha = solve_nonneg_allocation(net);
    closed_form_available = jsq_alpha.has_value();
    if (!jsq_alpha) notices.push_back("no non-negative solution of the balance system: JSQ closed form unavailable");
  }
  if (policy.kind() == PolicyKind::Table) notices.push_back("table policies have no closed form");

  json records = json::array();
  bool all_match = true;
  for (const auto& x : cases) {
    if (x.size() != static_cast<std::size_t>(net.n)) {
      throw std::invalid_argument("configuration has " + std::to_string(x.size()) + " entries, network has " +
                                  std::to_string(net.n) + " nodes");
    }
    const auto rep = expected_drift_f(net, policy, x, jsq_alpha ? &*jsq_alpha : nullptr);
    json r;
    r["x"] = configuration_json(x);
    r["magnitude"] = shape_magnitude(x, net).to_string();
    r["delta_f"] = rep.expected_delta_f.to_string();
    r["contributions"] = rational_list(rep.contributions);
    r["closed_form"] = rep.closed_form ? json(rep.closed_form->to_string()) : json(nullptr);
    r["match"] = rep.closed_form ? json(rep.match) : json(nullptr);
    if (shape_magnitude(x, net).is_zero()) {
      r["jump_bound_ok"] = nullptr;
      r["drift_g"] = nullptr;
    } else {
      r["jump_bound_ok"] = !jump_bound_check(x, net).has_value();
      const auto g = expected_drift_g(net, policy, x);
      json gj;
      gj["low"] = g.drift.lo.to_double();
      gj["high"] = g.drift.hi.to_double();
      gj["bound"] = g.bound.hi.to_double();
      gj["bound_ok"] = g.bound_ok;
      gj["jumps_ok"] = g.jumps_ok;
      r["drift_g"] = gj;
    }
    if (rep.closed_form && !rep.match) all_match = false;
    records.push_back(r);
  }

  json j;
  j["policy"] = policy.describe();
  j["mode"] = closed_form_available ? "closed-form" : "oracle-only";
  j["notices"] = notices;
  j["all_match"] = all_match;
  j["cases"] = records;
  return j;
}

json certify_report(const StorageNetwork& net, const PolicySpec& spec, const std::vector<Configuration>& states,
                    int random_policies, std::uint64_t policy_seed) {
  require_valid(net);
  const auto sf = separating_functional(net);

  std::string notice;
  std::vector<Policy> policies{build_policy_or_fallback(net, spec, notice)};
  for (int k = 0; k < random_policies; ++k) {
    policies.push_back(random_policy(net, policy_seed + static_cast<std::uint64_t>(k)));
  }

  json drifts = json::array();
  Rational min_value;
  bool first = true;
  for (const auto& policy : policies) {
    for (const auto& x : states) {
      const Rational v = certificate_drift_check(net, policy, x, sf.b);
      json r;
      r["policy"] = policy.name();
      if (policy.kind() == PolicyKind::Table) r["seed"] = policy.seed();
      r["x"] = configuration_json(x);
      r["value"] = v.to_string();
      drifts.push_back(r);
      if (first || v < min_value) min_value = v;
      first = false;
    }
  }

  json j;
  j["certificate"] = certificate_json(sf);
  j["vertex_check"] = "all vertex products >= 0";
  j["notices"] = notice.empty() ? json::array() : json::array({notice});
  j["policies"] = json::array();
  for (const auto& p : policies) j["policies"].push_back(p.describe());
  j["samples"] = states.size();
  j["min_drift"] = first ? json(nullptr) : json(min_value.to_string());
  j["all_nonnegative"] = true;
  j["drift"] = drifts;
  return j;
}

SimulationResult run_simulation(const SimConfig& cfg, const std::vector<double>& mgf_grid) {
  validate_sim_config(cfg);
  SimulationResult res;
  res.config = cfg;
  const Policy policy = build_policy(cfg.net, cfg.policy);
  res.policy = policy.describe();
  res.runs = run_replicas(cfg, policy);
  res.diagnostic = aggregate(res.runs, cfg.tau_cutoff);
  const auto taus = pooled_taus(res.runs);
  if (taus.empty()) {
    res.mgf.censoring_note = "no completed returns to the zero shape";
  } else {
    res.mgf = mgf_probe(taus, mgf_grid, res.diagnostic.censored_excursions);
  }
  return res;
}

json simulation_report(const SimulationResult& res) {
  const auto& d = res.diagnostic;
  json j;
  j["note"] = kProxyNote;
  j["policy"] = res.policy;

  json diag;
  diag["verdict"] = to_string(d.verdict);
  diag["sqrt_magnitude_slope"] = d.slope;
  diag["slope_ci"] = json::array({d.slope_ci_low, d.slope_ci_high});
  diag["tail_exponent"] = d.tail_exponent;
  diag["tail_prefactor"] = d.tail_prefactor;
  diag["tail_r_squared"] = d.tail_r_squared;
  diag["tail_points"] = d.tail_points;
  diag["mean_tau"] = d.mean_tau;
  diag["censoring_fraction"] = d.censoring_fraction;
  diag["tau_count"] = d.tau_count;
  diag["censored_excursions"] = d.censored_excursions;
  diag["tau_cutoff"] = d.tau_cutoff;
  json th;
  th["transient_censoring_above"] = d.thresholds.transient_censoring;
  th["recurrent_censoring_below"] = d.thresholds.recurrent_censoring;
  th["min_tail_r_squared"] = d.thresholds.min_r_squared;
  th["slope_confidence"] = d.thresholds.confidence;
  th["burn_in_fraction"] = d.thresholds.burn_in_fraction;
  th["min_at_risk"] = d.thresholds.min_at_risk;
  diag["thresholds"] = th;
  j["diagnostic"] = diag;

  json hist = json::object();
  for (const auto& [t, c] : tau_histogram(res.runs)) hist[std::to_string(t)] = c;
  j["tau_histogram"] = hist;

  json mgf;
  json rows = json::array();
  for (const auto& r : res.mgf.rows) {
    json row;
    row["c"] = r.c;
    row["value"] = r.value;
    row["half_sample_value"] = r.half_value;
    row["stable"] = r.stable;
    rows.push_back(row);
  }
  mgf["rows"] = rows;
  mgf["largest_stable_c"] = res.mgf.largest_stable ? json(*res.mgf.largest_stable) : json(nullptr);
  mgf["stability_tolerance"] = kMgfStabilityTolerance;
  mgf["censoring_note"] = res.mgf.censoring_note;
  j["mgf"] = mgf;

  json reps = json::array();
  for (std::size_t r = 0; r < res.runs.size(); ++r) {
    const auto& st = res.runs[r];
    json rj;
    rj["replica"] = r;
    rj["steps"] = st.steps;
    rj["tau_samples"] = st.tau_samples.size();
    rj["censored"] = st.censored_count;
    rj["first_hit"] = st.first_hit ? json(*st.first_hit) : json(nullptr);
    rj["returns_to_initial"] = st.returns_to_initial;
    rj["final_config"] = st.final_config.loads;
    rj["final_shape_scaled"] = st.final_shape.scaled;
    rj["final_magnitude"] = shape_magnitude(st.final_config, res.config.net).to_string();
    rj["max_abs_shape_coord"] = st.max_abs_shape_coord.to_string();
    rj["sqrt_magnitude_slope"] = d.replica_slopes[r];
    rj["neighborhood_counts"] = st.neighborhood_counts;
    rj["node_counts"] = st.node_counts;
    if (res.config.continuous_time) rj["elapsed_time"] = st.elapsed_time;
    reps.push_back(rj);
  }
  j["replicas"] = reps;
  return j;
}

std::string magnitude_csv(const SimulationResult& res) {
  const int n = res.config.net.n;
  std::string out = "replica,step,magnitude\n";
  for (std::size_t r = 0; r < res.runs.size(); ++r) {
    for (const auto& p : res.runs[r].magnitude_series) {
      out += std::to_string(r) + "," + std::to_string(p.step) + "," + format_double(p.magnitude_double(n)) + "\n";
    }
  }
  return out;
}

int cmd_validate(const std::string& net_file, const Output& io) {
  const auto net = load_network(net_file);
  const auto violations = validate(net);
  json j;
  j["valid"] = violations.empty();
  j["violations"] = violations;
  if (violations.empty()) j["connected"] = is_connected(net);
  io.out << dump_json(j) << "\n";
  return violations.empty() ? kOk : kUsage;
}

int cmd_analyze(const std::string& net_file, const Output& io) {
  const auto net = load_network(net_file);
  auto report = analyze_report(net);
  Manifest m = manifest_for("analyze", {net_file});
  emit(io, m, report, "analyze.json");
  if (!report["valid"].get<bool>()) {
    io.err << "network violates model invariants\n";
    return kUsage;
  }
  for (const auto& w : report["warnings"]) io.err << "warning: " << w.get<std::string>() << "\n";
  return kOk;
}

int cmd_drift_check(const DriftCheckArgs& args, const Output& io) {
  const auto net = load_network(args.net_file);
  require_valid(net);
  const PolicySpec spec = parse_policy_option(args.policy);
  std::vector<std::string> files{args.net_file};
  std::vector<Configuration> cases;
  json params;
  if (!args.cases_file.empty()) {
    files.push_back(args.cases_file);
    json j;
    try {
      j = json::parse(read_file(args.cases_file));
    } catch (const json::parse_error& e) {
      throw ParseError(args.cases_file + ": " + e.what());
    }
    const json& arr = j.is_object() && j.contains("cases") ? j["cases"] : j;
    if (!arr.is_array()) throw ParseError(args.cases_file + ": expected an array of configurations");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      if (!arr[k].is_array()) throw ParseError(args.cases_file + ": cases[" + std::to_string(k) + "] is not an array");
      Configuration x;
      for (const auto& v : arr[k]) {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
          throw ParseError(args.cases_file + ": cases[" + std::to_string(k) + "] must hold non-negative integers");
        }
        x.loads.push_back(v.get<long long>());
      }
      cases.push_back(std::move(x));
    }
  }
  for (const auto& c : args.configurations) cases.push_back(parse_configuration(c));
  if (args.sweep_seed) {
    const auto sweep = sweep_configurations(net.n, *args.sweep_seed, args.sweep_count, args.max_load);
    cases.insert(cases.end(), sweep.begin(), sweep.end());
    params["sweep"] = {{"seed", *args.sweep_seed}, {"count", args.sweep_count}, {"max_load", args.max_load}};
  }
  if (cases.empty()) throw std::invalid_argument("no configurations: give --x, --cases or --sweep-seed");

  auto report = drift_check_report(net, spec, cases);
  Manifest m = manifest_for("drift-check", files);
  params["policy"] = report["policy"];
  params["explicit_cases"] = args.configurations;
  m.parameters = params;
  for (const auto& notice : report["notices"]) io.err << "notice: " << notice.get<std::string>() << "\n";
  emit(io, m, report, "drift_check.json");
  return kOk;
}

int cmd_simulate(const std::string& config_file, const Overrides& overrides, const Output& io) {
  json j;
  try {
    j = json::parse(read_file(config_file));
  } catch (const json::parse_error& e) {
    throw ParseError(config_file + ": " + e.what());
  }
  SimConfig cfg;
  try {
    cfg = sim_config_from_json(j, fs::path(config_file).parent_path().string());
  } catch (const ParseError& e) {
    throw ParseError(config_file + ": " + e.what());
  }
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.replicas) cfg.replicas = *overrides.replicas;
  if (overrides.steps) {
    const bool cutoff_default = !j.contains("tau_cutoff");
    const bool record_default = !j.contains("record_every");
    cfg.max_steps = *overrides.steps;
    if (cutoff_default) cfg.tau_cutoff = default_tau_cutoff(cfg.max_steps);
    if (record_default) cfg.record_every = default_record_every(cfg.max_steps);
  }
  validate_sim_config(cfg);

  const auto grid = default_mgf_grid();
  const auto res = run_simulation(cfg, grid);
  Manifest m = manifest_for("simulate", {config_file});
  m.parameters = sim_config_to_json(cfg);
  m.parameters["resolved_policy"] = res.policy;
  m.parameters["mgf_grid"] = grid;
  m.parameters["rng"] = "philox4x32-10, counter (step, replica, lane), thresholds round-half-up to 2^-64";

  const std::string dir = io.output_dir.empty() ? "." : io.output_dir;
  Output files{dir, io.out, io.err};
  emit(files, m, simulation_report(res), "stats.json");
  write_file(fs::path(dir) / "magnitude.csv", magnitude_csv(res));
  return kOk;
}

int cmd_certify(const CertifyArgs& args, const Output& io) {
  const auto net = load_network(args.net_file);
  require_valid(net);
  const auto cond = check_subset_condition(net);
  if (cond.slack.sign() > 0) throw std::invalid_argument("no certificate: positive solution exists");
  const auto states = sweep_configurations(net.n, args.sample_seed, args.samples, args.max_load);
  auto report = certify_report(net, parse_policy_option(args.policy), states, args.random_policies,
                               args.sample_seed);
  Manifest m = manifest_for("certify", {args.net_file});
  m.parameters["policy"] = report["policies"];
  m.parameters["samples"] = args.samples;
  m.parameters["sample_seed"] = args.sample_seed;
  m.parameters["max_load"] = args.max_load;
  m.parameters["random_policies"] = args.random_policies;
  emit(io, m, report, "certify.json");
  return kOk;
}

int guarded(const Output& io, const std::function<int()>& body) {
  try {
    return body();
  } catch (const CertificateError& e) {
    io.err << "internal assertion: " << e.what() << "\n";
    return kInternal;
  } catch (const PrecisionError& e) {
    io.err << "internal assertion: " << e.what() << "\n";
    return kInternal;
  } catch (const InvalidNetwork& e) {
    io.err << "error: invalid network\n";
    for (const auto& v : e.violations()) io.err << "  " << v << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    io.err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::logic_error& e) {
    io.err << "internal assertion: " << e.what() << "\n";
    return kInternal;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace shapestab::cli
