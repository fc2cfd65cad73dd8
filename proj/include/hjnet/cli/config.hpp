#ifndef HJNET_CLI_CONFIG_HPP_
#define HJNET_CLI_CONFIG_HPP_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hjnet/catalog.hpp"

namespace hjnet::cli {

// Raised for anything wrong in a config file or override; what() names the
// offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

inline const std::vector<std::string>& run_modes() {
  static const std::vector<std::string> modes = {
      "solve-stationary", "solve-cauchy",    "rates",
      "viscosity-sweep",  "verify-junction", "certify-monotone"};
  return modes;
}

struct ProblemConfig {
  std::string kind = "stationary";  // stationary | cauchy
  int edges = 3;
  double edge_length = 5.0;
  double B = 0.0;
  double T = 1.0;
  HamiltonianEntry hamiltonian;
  SourceEntry source;
  SourceEntry initial;  // u0 of a cauchy problem, read at t = 0
  // Coefficients c_i of the manufactured solution c_i sin x (e^{-t}); when
  // present, source and initial are ignored.
  std::optional<std::vector<double>> manufactured;
  // Constant far-end value. Unset: pre-solve (stationary) or u0 held in
  // time (cauchy).
  std::optional<double> far_end;
  std::optional<double> M;  // analytic override of the sampled bound

  bool operator==(const ProblemConfig&) const = default;
};

struct NumericsConfig {
  double dx = 0.05;
  std::optional<double> eps;  // default 2 L1 dx
  std::optional<double> dt;   // default from the CFL helper
  std::optional<double> L2;   // default unbounded
  std::vector<double> dx_list = {0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125};
  std::vector<double> eps_list = {0.4, 0.2, 0.1, 0.05, 0.025};
  std::optional<double> tol_solve;  // default 1e-10 (1 + M)
  long long max_sweeps = 1000000;
  std::string seed = "lower";            // lower | upper
  std::string method = "gauss_seidel";   // gauss_seidel | newton (single solves)
  std::string study_method = "newton";   // gauss_seidel | newton (studies)
  int n_theta = 1000;
  int slope_order = 2;
  int reference_factor = 4;
  int checkpoints = 64;
  double dx_rule_scale = 0.25;  // dx = min(scale eps^power, eps / (2 L1))
  double dx_rule_power = 1.5;
  int trials = 100;
  std::uint64_t rng_seed = 1;
  double node_budget = 1e7;
  double update_budget = 5e9;
  int time_stride = 0;  // solve-cauchy output every k-th level; 0 = about 100 levels

  bool operator==(const NumericsConfig&) const = default;
};

// Unset thresholds take the defaults of the mode and problem kind.
struct AcceptanceConfig {
  std::optional<double> min_order;
  std::optional<double> min_r_squared;
  std::optional<bool> monotone_errors;
  std::optional<bool> junction;
  std::optional<double> junction_tol;

  bool operator==(const AcceptanceConfig&) const = default;
};

struct OutputConfig {
  std::string dir = "hjnet-out";

  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  std::string mode = "solve-stationary";
  ProblemConfig problem;
  NumericsConfig numerics;
  AcceptanceConfig acceptance;
  OutputConfig output;
  int workers = 0;  // 0: HJNET_WORKERS, then hardware concurrency

  bool operator==(const RunConfig&) const = default;
};

std::string emit_config(const RunConfig& config);
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// key.path=value, value read as JSON when it parses and as a string
// otherwise. Applied on the JSON form, so unknown keys are rejected.
RunConfig apply_overrides(const RunConfig& config, const std::vector<std::string>& overrides);

// Field-level checks that do not need a solve.
void validate_config(const RunConfig& config);

}  // namespace hjnet::cli

#endif  // HJNET_CLI_CONFIG_HPP_
