#include "hjnet/cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace hjnet::cli {

namespace {

using json = nlohmann::ordered_json;

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json hamiltonian_json(const HamiltonianEntry& h) {
  return json{{"name", h.name}, {"coefficients", h.coefficients}, {"offset", h.offset}};
}

json source_json(const SourceEntry& s) {
  return json{{"name", s.name},
              {"value", s.value},
              {"coefficients", s.coefficients},
              {"table", s.table}};
}

json to_json(const RunConfig& c) {
  const auto& p = c.problem;
  const auto& n = c.numerics;
  const auto& a = c.acceptance;
  json j;
  j["mode"] = c.mode;
  j["problem"] = json{{"kind", p.kind},
                      {"edges", p.edges},
                      {"edge_length", p.edge_length},
                      {"B", p.B},
                      {"T", p.T},
                      {"hamiltonian", hamiltonian_json(p.hamiltonian)},
                      {"source", source_json(p.source)},
                      {"initial", source_json(p.initial)},
                      {"manufactured", optional_json(p.manufactured)},
                      {"far_end", optional_json(p.far_end)},
                      {"M", optional_json(p.M)}};
  j["numerics"] = json{{"dx", n.dx},
                       {"eps", optional_json(n.eps)},
                       {"dt", optional_json(n.dt)},
                       {"L2", optional_json(n.L2)},
                       {"dx_list", n.dx_list},
                       {"eps_list", n.eps_list},
                       {"tol_solve", optional_json(n.tol_solve)},
                       {"max_sweeps", n.max_sweeps},
                       {"seed", n.seed},
                       {"method", n.method},
                       {"study_method", n.study_method},
                       {"n_theta", n.n_theta},
                       {"slope_order", n.slope_order},
                       {"reference_factor", n.reference_factor},
                       {"checkpoints", n.checkpoints},
                       {"dx_rule_scale", n.dx_rule_scale},
                       {"dx_rule_power", n.dx_rule_power},
                       {"trials", n.trials},
                       {"rng_seed", n.rng_seed},
                       {"node_budget", n.node_budget},
                       {"update_budget", n.update_budget},
                       {"time_stride", n.time_stride}};
  j["acceptance"] = json{{"min_order", optional_json(a.min_order)},
                         {"min_r_squared", optional_json(a.min_r_squared)},
                         {"monotone_errors", optional_json(a.monotone_errors)},
                         {"junction", optional_json(a.junction)},
                         {"junction_tol", optional_json(a.junction_tol)}};
  j["output"] = json{{"dir", c.output.dir}};
  j["workers"] = c.workers;
  return j;
}

template <typename T>
T convert(const json& j, const std::string& path);

template <>
double convert<double>(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

template <>
long long convert<long long>(const json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<long long>();
  if (j.is_number_float()) {
    const double d = j.get<double>();
    if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<long long>(d);
  }
  throw ConfigError(path, "expected an integer");
}

template <>
int convert<int>(const json& j, const std::string& path) {
  const long long v = convert<long long>(j, path);
  if (v < -2147483647LL || v > 2147483647LL) throw ConfigError(path, "integer out of range");
  return static_cast<int>(v);
}

template <>
std::uint64_t convert<std::uint64_t>(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  const long long v = convert<long long>(j, path);
  if (v < 0) throw ConfigError(path, "expected a nonnegative integer");
  return static_cast<std::uint64_t>(v);
}

template <>
bool convert<bool>(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

template <>
std::string convert<std::string>(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

template <>
std::vector<double> convert<std::vector<double>>(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected a list of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    out.push_back(convert<double>(j[k], path + "[" + std::to_string(k) + "]"));
  }
  return out;
}

// Reads the keys of one object, rejecting any it does not know.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) out = convert<T>(*it, name(key));
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) {
      if (it->is_null()) {
        out.reset();
      } else {
        out = convert<T>(*it, name(key));
      }
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string name(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(name(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_hamiltonian(const json& j, const std::string& path, HamiltonianEntry& h) {
  Section s(j, path);
  s.get("name", h.name);
  s.get("coefficients", h.coefficients);
  s.get("offset", h.offset);
  s.finish();
}

void read_source(const json& j, const std::string& path, SourceEntry& src) {
  Section s(j, path);
  s.get("name", src.name);
  s.get("value", src.value);
  s.get("coefficients", src.coefficients);
  s.get("table", src.table);
  s.finish();
}

RunConfig from_json(const json& j) {
  RunConfig c;
  Section root(j, "");
  root.get("mode", c.mode);
  root.get("workers", c.workers);
  if (const json* p = root.child("problem")) {
    Section s(*p, "problem");
    auto& pc = c.problem;
    s.get("kind", pc.kind);
    s.get("edges", pc.edges);
    s.get("edge_length", pc.edge_length);
    s.get("B", pc.B);
    s.get("T", pc.T);
    if (const json* h = s.child("hamiltonian")) read_hamiltonian(*h, "problem.hamiltonian", pc.hamiltonian);
    if (const json* src = s.child("source")) read_source(*src, "problem.source", pc.source);
    if (const json* u0 = s.child("initial")) read_source(*u0, "problem.initial", pc.initial);
    s.get("manufactured", pc.manufactured);
    s.get("far_end", pc.far_end);
    s.get("M", pc.M);
    s.finish();
  }
  if (const json* n = root.child("numerics")) {
    Section s(*n, "numerics");
    auto& nc = c.numerics;
    s.get("dx", nc.dx);
    s.get("eps", nc.eps);
    s.get("dt", nc.dt);
    s.get("L2", nc.L2);
    s.get("dx_list", nc.dx_list);
    s.get("eps_list", nc.eps_list);
    s.get("tol_solve", nc.tol_solve);
    s.get("max_sweeps", nc.max_sweeps);
    s.get("seed", nc.seed);
    s.get("method", nc.method);
    s.get("study_method", nc.study_method);
    s.get("n_theta", nc.n_theta);
    s.get("slope_order", nc.slope_order);
    s.get("reference_factor", nc.reference_factor);
    s.get("checkpoints", nc.checkpoints);
    s.get("dx_rule_scale", nc.dx_rule_scale);
    s.get("dx_rule_power", nc.dx_rule_power);
    s.get("trials", nc.trials);
    s.get("rng_seed", nc.rng_seed);
    s.get("node_budget", nc.node_budget);
    s.get("update_budget", nc.update_budget);
    s.get("time_stride", nc.time_stride);
    s.finish();
  }
  if (const json* a = root.child("acceptance")) {
    Section s(*a, "acceptance");
    auto& ac = c.acceptance;
    s.get("min_order", ac.min_order);
    s.get("min_r_squared", ac.min_r_squared);
    s.get("monotone_errors", ac.monotone_errors);
    s.get("junction", ac.junction);
    s.get("junction_tol", ac.junction_tol);
    s.finish();
  }
  if (const json* o = root.child("output")) {
    Section s(*o, "output");
    s.get("dir", c.output.dir);
    s.finish();
  }
  root.finish();
  return c;
}

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(where, std::string("not valid JSON: ") + e.what());
  }
}

bool one_of(const std::string& v, std::initializer_list<const char*> options) {
  return std::any_of(options.begin(), options.end(), [&](const char* o) { return v == o; });
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

void check_list(const std::vector<double>& xs, const std::string& field) {
  require(xs.size() >= 3, field, "needs at least 3 entries");
  for (std::size_t k = 0; k < xs.size(); ++k) {
    require(xs[k] > 0, field, "entries must be positive");
    if (k > 0) require(xs[k] < xs[k - 1], field, "entries must be strictly decreasing");
  }
}

void check_source(const SourceEntry& s, int edges, const std::string& field) {
  require(one_of(s.name, {"zero", "constant", "sin_profile", "custom_table"}), field + ".name",
          "unknown source '" + s.name + "'");
  if (s.name == "sin_profile") {
    require(static_cast<int>(s.coefficients.size()) == edges, field + ".coefficients",
            "needs one coefficient per edge");
  }
  if (s.name == "custom_table") require(!s.table.empty(), field + ".table", "needs a file path");
}

}  // namespace

std::string emit_config(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

RunConfig parse_config(const std::string& text) {
  return from_json(parse_json(text, "<config>"));
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(parse_json(ss.str(), path));
}

RunConfig apply_overrides(const RunConfig& config, const std::vector<std::string>& overrides) {
  json j = to_json(config);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(o, "override must look like key.path=value");
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!node->is_object() || !node->contains(part)) throw ConfigError(key, "unknown key");
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    *node = value;
  }
  return from_json(j);
}

void validate_config(const RunConfig& c) {
  const auto& modes = run_modes();
  require(std::find(modes.begin(), modes.end(), c.mode) != modes.end(), "mode",
          "unknown mode '" + c.mode + "'");
  const auto& p = c.problem;
  require(one_of(p.kind, {"stationary", "cauchy"}), "problem.kind",
          "must be 'stationary' or 'cauchy'");
  if (c.mode == "solve-stationary" || c.mode == "verify-junction") {
    require(p.kind == "stationary", "problem.kind", "mode " + c.mode + " needs a stationary problem");
  }
  if (c.mode == "solve-cauchy") {
    require(p.kind == "cauchy", "problem.kind", "mode solve-cauchy needs a cauchy problem");
  }
  require(p.edges >= 2, "problem.edges", "needs at least 2 edges");
  require(p.edge_length > 0, "problem.edge_length", "must be positive");
  require(std::isfinite(p.B), "problem.B", "must be finite");
  if (p.kind == "cauchy") require(p.T > 0, "problem.T", "must be positive");
  require(one_of(p.hamiltonian.name, {"abs", "quadratic", "poly", "shifted_quadratic"}),
          "problem.hamiltonian.name", "unknown hamiltonian '" + p.hamiltonian.name + "'");
  if (p.hamiltonian.name == "poly") {
    require(!p.hamiltonian.coefficients.empty(), "problem.hamiltonian.coefficients",
            "poly needs coefficients");
  }
  if (p.manufactured) {
    require(static_cast<int>(p.manufactured->size()) == p.edges, "problem.manufactured",
            "needs one coefficient per edge");
    const double sum = std::accumulate(p.manufactured->begin(), p.manufactured->end(), 0.0);
    require(std::abs(sum - p.B) <= 1e-12, "problem.manufactured",
            "coefficients must sum to problem.B");
  } else {
    check_source(p.source, p.edges, "problem.source");
    if (p.kind == "cauchy") check_source(p.initial, p.edges, "problem.initial");
  }
  if (p.M) require(*p.M >= 0, "problem.M", "must be nonnegative");

  const auto& n = c.numerics;
  require(n.dx > 0, "numerics.dx", "must be positive");
  if (n.eps) require(*n.eps > 0, "numerics.eps", "must be positive");
  if (n.dt) require(*n.dt > 0, "numerics.dt", "must be positive");
  if (n.L2) require(*n.L2 > 0, "numerics.L2", "must be positive");
  if (n.tol_solve) require(*n.tol_solve > 0, "numerics.tol_solve", "must be positive");
  require(n.max_sweeps >= 1, "numerics.max_sweeps", "must be at least 1");
  require(one_of(n.seed, {"lower", "upper"}), "numerics.seed", "must be 'lower' or 'upper'");
  require(one_of(n.method, {"gauss_seidel", "newton"}), "numerics.method",
          "must be 'gauss_seidel' or 'newton'");
  require(one_of(n.study_method, {"gauss_seidel", "newton"}), "numerics.study_method",
          "must be 'gauss_seidel' or 'newton'");
  require(n.n_theta >= 2, "numerics.n_theta", "must be at least 2");
  require(n.slope_order == 1 || n.slope_order == 2, "numerics.slope_order", "must be 1 or 2");
  require(n.reference_factor >= 1, "numerics.reference_factor", "must be at least 1");
  require(n.checkpoints >= 1, "numerics.checkpoints", "must be at least 1");
  require(n.dx_rule_scale > 0, "numerics.dx_rule_scale", "must be positive");
  require(n.dx_rule_power > 0, "numerics.dx_rule_power", "must be positive");
  require(n.trials >= 1, "numerics.trials", "must be at least 1");
  require(n.node_budget > 0, "numerics.node_budget", "must be positive");
  require(n.update_budget > 0, "numerics.update_budget", "must be positive");
  require(n.time_stride >= 0, "numerics.time_stride", "must be nonnegative");
  if (c.mode == "rates") {
    check_list(n.dx_list, "numerics.dx_list");
    require(p.manufactured.has_value(), "problem.manufactured", "rates needs a manufactured problem");
  }
  if (c.mode == "viscosity-sweep") {
    check_list(n.eps_list, "numerics.eps_list");
    require(p.manufactured.has_value(), "problem.manufactured",
            "viscosity-sweep needs a manufactured problem");
  }
  if (c.acceptance.junction_tol) {
    require(*c.acceptance.junction_tol >= 0, "acceptance.junction_tol", "must be nonnegative");
  }
  require(!c.output.dir.empty(), "output.dir", "must not be empty");
  require(c.workers >= 0, "workers", "must be nonnegative");
}

}  // namespace hjnet::cli
