#include "hjnet/cli/run.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "artifacts.hpp"
#include "hjnet/cli/config.hpp"
#include "hjnet/hjnet.hpp"
#include "json.hpp"

namespace hjnet::cli {

namespace {

using json = nlohmann::ordered_json;
constexpr double kInf = std::numeric_limits<double>::infinity();

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

HamiltonianSpec<double> catalog_spec(const RunConfig& c) {
  return make_catalog_spec<double>(c.problem.edges, c.problem.hamiltonian, c.problem.source);
}

NetworkGrid<double> dense_grid(const ProblemConfig& p) {
  return NetworkGrid<double>(p.edges, p.edge_length, p.edge_length / double(kConstantsSamplesPerEdge));
}

void apply_constant_overrides(const RunConfig& c, const HamiltonianSpec<double>& spec,
                              const NetworkGrid<double>& grid, ConstantsOptions<double> opts,
                              SchemeConstants<double>& consts) {
  if (c.problem.M) {
    opts.M = *c.problem.M;
    consts = derive_constants(spec, grid, opts);
  }
  consts.L2 = c.numerics.L2.value_or(kInf);
}

std::optional<ManufacturedStationary<double>> stationary_manufactured(const RunConfig& c) {
  if (!c.problem.manufactured) return std::nullopt;
  auto mp = manufactured_stationary<double>(*c.problem.manufactured, c.problem.hamiltonian,
                                            c.problem.edge_length, c.problem.B);
  apply_constant_overrides(c, mp.problem.spec, dense_grid(c.problem), {}, mp.problem.consts);
  return mp;
}

std::optional<ManufacturedCauchy<double>> cauchy_manufactured(const RunConfig& c) {
  if (!c.problem.manufactured) return std::nullopt;
  auto mp = manufactured_cauchy<double>(*c.problem.manufactured, c.problem.hamiltonian,
                                        c.problem.edge_length, c.problem.T, c.problem.B);
  ConstantsOptions<double> opts;
  opts.times.clear();
  for (int k = 0; k <= 64; ++k) opts.times.push_back(c.problem.T * k / 64.0);
  opts.min_radius = *mp.problem.u0_lipschitz + 1.0;
  apply_constant_overrides(c, mp.problem.spec, dense_grid(c.problem), opts, mp.problem.consts);
  return mp;
}

StationaryProblem<double> stationary_problem(const RunConfig& c,
                                             const std::optional<ManufacturedStationary<double>>& mp) {
  if (mp) return mp->problem;
  StationaryProblem<double> prob;
  prob.spec = catalog_spec(c);
  // Without far-end data the pre-solve reads the source out to twice the
  // edge length, so the constants are sampled there too.
  const double reach = c.problem.far_end ? 1.0 : 2.0;
  const NetworkGrid<double> grid(c.problem.edges, reach * c.problem.edge_length, c.numerics.dx);
  prob.consts = derive_constants(prob.spec, grid);
  apply_constant_overrides(c, prob.spec, grid, {}, prob.consts);
  prob.edge_length = c.problem.edge_length;
  prob.B = c.problem.B;
  if (c.problem.far_end) {
    const double v = *c.problem.far_end;
    prob.far_end = [v](int, double) { return v; };
  }
  return prob;
}

SchemeParams<double> stationary_params(const RunConfig& c, const SchemeConstants<double>& consts) {
  SchemeParams<double> params;
  params.dx = c.numerics.dx;
  params.eps = c.numerics.eps.value_or(2.0 * consts.L1 * c.numerics.dx);
  params.tol_solve = c.numerics.tol_solve;
  params.max_sweeps = static_cast<long>(c.numerics.max_sweeps);
  return params;
}

CauchyProblem<double> cauchy_problem(const RunConfig& c,
                                     const std::optional<ManufacturedCauchy<double>>& mp) {
  if (mp) return mp->problem;
  CauchyProblem<double> prob;
  prob.spec = catalog_spec(c);
  const auto u0 = make_catalog_source<double>(c.problem.initial, c.problem.edges);
  std::vector<std::function<double(double, double)>> fs;
  double lip = 0;
  for (const auto& s : u0) {
    fs.push_back(s.f);
    lip = std::max(lip, s.lipschitz.value_or(0.0));
  }
  prob.u0 = [fs](int i, double x) { return fs[static_cast<std::size_t>(i)](0.0, x); };
  prob.u0_lipschitz = lip;
  const NetworkGrid<double> grid(c.problem.edges, c.problem.edge_length, c.numerics.dx);
  ConstantsOptions<double> opts;
  opts.times.clear();
  for (int k = 0; k <= 64; ++k) opts.times.push_back(c.problem.T * k / 64.0);
  opts.min_radius = lip + 1.0;
  prob.consts = derive_constants(prob.spec, grid, opts);
  apply_constant_overrides(c, prob.spec, grid, opts, prob.consts);
  prob.edge_length = c.problem.edge_length;
  prob.T = c.problem.T;
  prob.B = c.problem.B;
  if (c.problem.far_end) {
    const double v = *c.problem.far_end;
    prob.far_end = [v](int, double, double) { return v; };
  }
  return prob;
}

CauchyParams<double> cauchy_params(const RunConfig& c, const CauchyProblem<double>& prob) {
  CauchyParams<double> params;
  params.dx = c.numerics.dx;
  params.eps = c.numerics.eps.value_or(2.0 * prob.consts.L1 * params.dx);
  if (c.numerics.dt) {
    params.dt = *c.numerics.dt;
  } else {
    const double raw = cauchy_time_step(params.dx, params.eps, prob.consts.L1);
    params.dt = prob.T / std::ceil(prob.T / raw * (1 - 1e-12));
  }
  return params;
}

json constants_json(const SchemeConstants<double>& k) {
  return json{{"M", k.M},
              {"caps", k.caps},
              {"slope_radius", k.slope_radius},
              {"L1", k.L1},
              {"L2", number(k.L2)}};
}

json extremum_json(const JunctionExtremum<double>& e) {
  return json{{"value", e.value}, {"edge", e.edge + 1}, {"theta", e.theta}};
}

std::string stationary_csv(const GridFunction<double>& u) {
  std::ostringstream ss;
  ss << "edge,m,x,value\n";
  ss << "0,0,0," << csv_number(u.junction()) << "\n";
  const auto& g = u.grid();
  for (int i = 0; i < g.edges(); ++i) {
    for (int m = 1; m <= g.nodes_per_edge(); ++m) {
      ss << i + 1 << ',' << m << ',' << csv_number(g.coordinate(m)) << ',' << csv_number(u(i, m))
         << '\n';
    }
  }
  return ss.str();
}

void append_level_csv(std::ostringstream& ss, const GridFunction<double>& u, int s, double t) {
  const auto& g = u.grid();
  const std::string st = std::to_string(s) + ',' + csv_number(t) + ',';
  ss << "0,0,0," << st << csv_number(u.junction()) << "\n";
  for (int i = 0; i < g.edges(); ++i) {
    for (int m = 1; m <= g.nodes_per_edge(); ++m) {
      ss << i + 1 << ',' << m << ',' << csv_number(g.coordinate(m)) << ',' << st
         << csv_number(u(i, m)) << '\n';
    }
  }
}

std::string rates_csv(const RateReport& rep) {
  std::ostringstream ss;
  ss << "h,eps,dt,nodes,sweeps_or_steps,sup_error,dx,secondary_error,junction_sub,"
        "junction_super,junction_tol,newton_iterations\n";
  for (const auto& r : rep.rows) {
    ss << csv_number(r.h) << ',' << csv_number(r.eps) << ',' << csv_number(r.dt) << ','
       << r.nodes << ',' << r.sweeps_or_steps << ',' << csv_number(r.sup_error) << ','
       << csv_number(r.dx) << ',' << csv_number(r.secondary_error) << ','
       << csv_number(r.junction_sub) << ',' << csv_number(r.junction_super) << ','
       << csv_number(r.junction_tol) << ',' << r.newton_iterations << '\n';
  }
  return ss.str();
}

double default_junction_tol(double dx, const std::optional<std::vector<double>>& c) {
  double third = 0;
  if (c) {
    for (double x : *c) third = std::max(third, std::abs(x));
  }
  return 10.0 * (dx + dx * dx * third / 3.0);
}

StudyOptions<double> study_options(const RunConfig& c) {
  StudyOptions<double> o;
  o.workers = c.workers;
  o.method = c.numerics.study_method == "newton" ? StationaryMethod::newton
                                                 : StationaryMethod::gauss_seidel;
  o.tol_solve = c.numerics.tol_solve;
  o.n_theta = c.numerics.n_theta;
  const double scale = c.numerics.dx_rule_scale, power = c.numerics.dx_rule_power;
  o.dx_rule = [scale, power](double eps, double L1) {
    return std::min(scale * std::pow(eps, power), eps / (2.0 * L1));
  };
  o.reference_factor = c.numerics.reference_factor;
  o.checkpoints = c.numerics.checkpoints;
  o.node_budget = c.numerics.node_budget;
  o.update_budget = c.numerics.update_budget;
  return o;
}

struct Thresholds {
  double min_order;
  std::optional<double> min_r_squared;
  bool monotone_errors;
  bool junction;
};

Thresholds thresholds(const RunConfig& c) {
  const bool stationary = c.problem.kind == "stationary";
  const bool sweep = c.mode == "viscosity-sweep";
  Thresholds t;
  t.min_order = c.acceptance.min_order.value_or(stationary ? (sweep ? 0.40 : 0.45) : 0.16);
  t.min_r_squared = c.acceptance.min_r_squared;
  if (!t.min_r_squared && stationary && !sweep) t.min_r_squared = 0.95;
  t.monotone_errors = c.acceptance.monotone_errors.value_or(stationary && !sweep);
  t.junction = c.acceptance.junction.value_or(stationary);
  return t;
}

int run_study(const RunConfig& c, Artifacts& art, std::ostream& out) {
  const auto opts = study_options(c);
  RateReport rep;
  if (c.problem.kind == "stationary") {
    auto mp = *stationary_manufactured(c);
    rep = c.mode == "rates" ? refinement_study(mp, c.numerics.dx_list, opts)
                            : viscosity_sweep(mp, c.numerics.eps_list, opts);
  } else {
    auto mp = *cauchy_manufactured(c);
    rep = c.mode == "rates" ? refinement_study(mp, c.numerics.dx_list, opts)
                            : viscosity_sweep(mp, c.numerics.eps_list, opts);
  }
  const Thresholds th = thresholds(c);
  json checks = json::object();
  bool pass = true;
  if (rep.degenerate) {
    checks["fit"] = json{{"pass", true}, {"note", rep.note}};
  } else {
    const bool ok = rep.fit->order >= th.min_order;
    checks["min_order"] = json{{"threshold", th.min_order}, {"value", rep.fit->order}, {"pass", ok}};
    pass = pass && ok;
    if (th.min_r_squared) {
      const bool r2 = rep.fit->r_squared >= *th.min_r_squared;
      checks["min_r_squared"] =
          json{{"threshold", *th.min_r_squared}, {"value", rep.fit->r_squared}, {"pass", r2}};
      pass = pass && r2;
    }
  }
  if (th.monotone_errors) {
    const bool ok = rep.errors_nonincreasing();
    checks["monotone_errors"] = json{{"increases", rep.error_increases},
                                     {"worst_increase", rep.worst_increase},
                                     {"pass", ok}};
    pass = pass && ok;
  }
  if (th.junction && rep.kind == "stationary") {
    const bool ok = rep.junction_within_tolerance();
    checks["junction"] = json{{"pass", ok}};
    pass = pass && ok;
  }

  json summary;
  summary["mode"] = c.mode;
  summary["kind"] = rep.kind;
  summary["variable"] = rep.variable;
  summary["rows"] = rep.rows.size();
  summary["fitted_order"] = rep.fit ? json(rep.fit->order) : json(nullptr);
  summary["intercept"] = rep.fit ? json(rep.fit->intercept) : json(nullptr);
  summary["r_squared"] = rep.fit ? json(rep.fit->r_squared) : json(nullptr);
  summary["degenerate"] = rep.degenerate;
  summary["L2"] = number(rep.L2);
  summary["checks"] = checks;
  summary["pass"] = pass;
  art.add("rates.csv", rates_csv(rep));
  art.add("summary.json", summary.dump(2) + "\n");
  out << rep.kind << ' ' << c.mode << ": ";
  if (rep.fit) {
    out << "fitted order " << rep.fit->order << " (r^2 " << rep.fit->r_squared << ")";
  } else {
    out << rep.note;
  }
  out << (pass ? ", thresholds met\n" : ", threshold FAILED\n");
  return pass ? kExitOk : kExitThreshold;
}

int run_solve_stationary(const RunConfig& c, Artifacts& art, std::ostream& out, bool junction_only) {
  const auto mp = stationary_manufactured(c);
  auto prob = stationary_problem(c, mp);
  const auto params = stationary_params(c, prob.consts);
  check_cfl_stationary(params, prob.consts);
  if (!mp && !c.problem.far_end) prob = with_presolved_far_end(prob, params);
  const Seed seed = c.numerics.seed == "upper" ? Seed::upper : Seed::lower;
  const StationaryMethod method =
      c.numerics.method == "newton" ? StationaryMethod::newton : StationaryMethod::gauss_seidel;
  const auto [u, stats] = solve_stationary(prob, params, seed, method);

  const auto state = junction_slopes(u, c.numerics.slope_order);
  const auto res = junction_residual(state, prob.spec, std::optional<double>{}, c.numerics.n_theta);
  const double tol = c.acceptance.junction_tol.value_or(
      default_junction_tol(params.dx, c.problem.manufactured));

  json summary;
  summary["mode"] = c.mode;
  summary["nodes_per_edge"] = u.grid().nodes_per_edge();
  summary["dx"] = params.dx;
  summary["eps"] = params.eps;
  summary["constants"] = constants_json(prob.consts);
  summary["sweeps"] = stats.sweeps;
  summary["newton_iterations"] = stats.newton_iterations;
  summary["final_update"] = stats.final_update;
  summary["monotone"] = stats.monotone;
  summary["sup_abs"] = u.values().cwiseAbs().maxCoeff();
  summary["lipschitz"] = discrete_lipschitz(u);
  summary["lipschitz_bound"] = prob.consts.slope_radius * params.dx;
  summary["residual_sup"] = stationary_residual(u, prob, params).values().cwiseAbs().maxCoeff();
  if (mp) summary["error_vs_exact"] = sup_error(u, mp->exact);
  summary["junction"] = json{{"slope_order", c.numerics.slope_order},
                             {"sub", extremum_json(res.sub)},
                             {"super", extremum_json(res.super)},
                             {"tolerance", tol},
                             {"pass", res.sub.value <= tol && res.super.value >= -tol}};

  if (junction_only) {
    std::ostringstream ss;
    ss << "kind,edge,value,theta\n";
    for (std::size_t i = 0; i < state.xi.size(); ++i) {
      ss << "slope," << i + 1 << ',' << csv_number(state.xi[i]) << ",\n";
    }
    ss << "flux,," << csv_number(state.flux) << ",\n";
    ss << "u0,," << csv_number(state.u0) << ",\n";
    ss << "sub_residual," << res.sub.edge + 1 << ',' << csv_number(res.sub.value) << ','
       << csv_number(res.sub.theta) << '\n';
    ss << "super_residual," << res.super.edge + 1 << ',' << csv_number(res.super.value) << ','
       << csv_number(res.super.theta) << '\n';
    ss << "tolerance,," << csv_number(tol) << ",\n";
    art.add("junction.csv", ss.str());
    out << "junction residuals: sub " << res.sub.value << ", super " << res.super.value
        << " (tolerance " << tol << ")\n";
  } else {
    art.add("solution.csv", stationary_csv(u));
    out << "solved on " << u.grid().size() << " nodes in " << stats.sweeps << " sweeps\n";
  }
  art.add("summary.json", summary.dump(2) + "\n");
  return kExitOk;
}

int run_solve_cauchy(const RunConfig& c, Artifacts& art, std::ostream& out) {
  const auto mp = cauchy_manufactured(c);
  const auto prob = cauchy_problem(c, mp);
  const auto params = cauchy_params(c, prob);
  check_cfl_cauchy(params, prob.consts);
  const int steps = cauchy_step_count(prob.T, params.dt);
  const int stride = c.numerics.time_stride > 0 ? c.numerics.time_stride
                                                : std::max(1, (steps + 99) / 100);
  std::ostringstream csv;
  csv << "edge,m,x,s,t,value\n";
  SpacetimeLipschitz<double> lip;
  double err = 0, sup_abs = 0;
  march_cauchy(prob, params, [&](int s, const GridFunction<double>& level) {
    const double t = s * params.dt;
    lip.add(level);
    sup_abs = std::max(sup_abs, level.values().cwiseAbs().maxCoeff());
    if (mp) err = std::max(err, sup_error(level, [&](int i, double x) { return mp->exact(i, x, t); }));
    if (s % stride == 0 || s == steps) append_level_csv(csv, level, s, t);
  });
  json summary;
  summary["mode"] = c.mode;
  summary["dx"] = params.dx;
  summary["dt"] = params.dt;
  summary["eps"] = params.eps;
  summary["steps"] = steps;
  summary["output_stride"] = stride;
  summary["constants"] = constants_json(prob.consts);
  summary["sup_abs"] = sup_abs;
  summary["spacetime_lipschitz"] = lip.value();
  if (mp) summary["error_vs_exact"] = err;
  art.add("solution.csv", csv.str());
  art.add("summary.json", summary.dump(2) + "\n");
  out << "marched " << steps << " steps on " << NetworkGrid<double>(static_cast<int>(prob.spec.edges.size()), prob.edge_length, params.dx).size()
      << " nodes\n";
  return kExitOk;
}

int run_certify(const RunConfig& c, Artifacts& art, std::ostream& out) {
  json summary;
  summary["mode"] = c.mode;
  summary["kind"] = c.problem.kind;
  summary["trials"] = c.numerics.trials;
  summary["rng_seed"] = c.numerics.rng_seed;
  std::optional<MonotoneCounterexample<double>> cx;
  if (c.problem.kind == "cauchy") {
    const auto mp = cauchy_manufactured(c);
    const auto prob = cauchy_problem(c, mp);
    const auto params = cauchy_params(c, prob);
    bool cfl = true;
    try {
      check_cfl_cauchy(params, prob.consts);
    } catch (const CflViolation& e) {
      cfl = false;
      summary["cfl_violation"] = e.what();
    }
    summary["cfl_satisfied"] = cfl;
    summary["dx"] = params.dx;
    summary["dt"] = params.dt;
    summary["eps"] = params.eps;
    cx = certify_monotone(prob, params, c.numerics.trials, c.numerics.rng_seed);
  } else {
    const auto mp = stationary_manufactured(c);
    auto prob = stationary_problem(c, mp);
    if (!prob.far_end) prob.far_end = [](int, double) { return 0.0; };
    const auto params = stationary_params(c, prob.consts);
    bool cfl = true;
    try {
      check_cfl_stationary(params, prob.consts);
    } catch (const CflViolation& e) {
      cfl = false;
      summary["cfl_violation"] = e.what();
    }
    summary["cfl_satisfied"] = cfl;
    summary["dx"] = params.dx;
    summary["eps"] = params.eps;
    cx = certify_monotone(prob, params, c.numerics.trials, c.numerics.rng_seed);
  }
  if (cx) {
    summary["result"] = "counterexample";
    summary["counterexample"] = json{{"what", cx->what},
                                     {"edge", cx->edge + 1},
                                     {"m", cx->m},
                                     {"perturbation", cx->perturbation},
                                     {"out_edge", cx->out_edge + 1},
                                     {"out_m", cx->out_m},
                                     {"change", cx->change}};
    out << "counterexample: " << cx->describe() << "\n";
  } else {
    summary["result"] = "pass";
    out << "monotone on all " << c.numerics.trials << " trials\n";
  }
  art.add("summary.json", summary.dump(2) + "\n");
  return kExitOk;
}

int dispatch(const RunConfig& c, std::ostream& out) {
  Artifacts art;
  int code = kExitOk;
  if (c.mode == "solve-stationary") {
    code = run_solve_stationary(c, art, out, false);
  } else if (c.mode == "verify-junction") {
    code = run_solve_stationary(c, art, out, true);
  } else if (c.mode == "solve-cauchy") {
    code = run_solve_cauchy(c, art, out);
  } else if (c.mode == "rates" || c.mode == "viscosity-sweep") {
    code = run_study(c, art, out);
  } else {
    code = run_certify(c, art, out);
  }
  art.write(c.output.dir);
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hamilton-Jacobi equations on star networks with Kirchhoff junctions"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::vector<std::string> sets;
  int workers = -1;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON config file");
    sub->add_option("-s,--set", sets, "override, e.g. --set numerics.dx=0.01")->take_all();
    sub->add_option("-o,--out", out_dir, "output directory");
    sub->add_option("-w,--workers", workers, "worker threads for study rows");
  };
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"solve-stationary", "solve the stationary junction problem"},
      {"solve-cauchy", "march the time-dependent problem"},
      {"rates", "grid refinement study with a fitted order"},
      {"viscosity-sweep", "vanishing viscosity study with a fitted order"},
      {"verify-junction", "junction residuals of a stationary solve"},
      {"certify-monotone", "search for monotonicity counterexamples"},
      {"print-config", "print the effective config"}};
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

  std::vector<std::string> argv_store(args.begin(), args.end());
  if (argv_store.empty()) argv_store.push_back("hjnet");
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    if (command != "print-config") cfg.mode = command;
    cfg = apply_overrides(cfg, sets);
    if (!out_dir.empty()) cfg.output.dir = out_dir;
    if (workers >= 0) cfg.workers = workers;
    validate_config(cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (command == "print-config") {
    out << emit_config(cfg);
    return kExitOk;
  }

  try {
    return dispatch(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CflViolation& e) {
    err << e.what() << "\n";
    return kExitCfl;
  } catch (const InvalidInput& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SolverFailure& e) {
    err << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}

int run_cli(int argc, char** argv) {
  return run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace hjnet::cli
