#ifndef HJNET_LAB_HPP_
#define HJNET_LAB_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "hjnet/analysis.hpp"
#include "hjnet/catalog.hpp"
#include "hjnet/cauchy.hpp"
#include "hjnet/errors.hpp"
#include "hjnet/hamiltonian.hpp"
#include "hjnet/netgrid.hpp"
#include "hjnet/stationary.hpp"

namespace hjnet {

inline constexpr double kCoefficientTolerance = 1e-12;
// Constants of manufactured problems are sampled on a grid this much finer
// than the edge length, independent of any study resolution.
inline constexpr int kConstantsSamplesPerEdge = 1 << 14;

// v_i(x) = c_i sin x solves u + H(u_x) = f_i with f_i = v_i + H(v_i').
template <typename Scalar = double>
struct ManufacturedStationary {
  StationaryProblem<Scalar> problem;
  std::vector<Scalar> c;
  HamiltonianEntry hamiltonian;
  std::function<Scalar(int, Scalar)> exact;
  std::function<Scalar(int, Scalar)> exact_slope;
  Scalar third_derivative_bound = 0;  // sup |v_i'''|, for slope error bounds
};

// v_i(x, t) = c_i sin(x) e^{-t} with f_i = v_t + H(v_x).
template <typename Scalar = double>
struct ManufacturedCauchy {
  CauchyProblem<Scalar> problem;
  std::vector<Scalar> c;
  HamiltonianEntry hamiltonian;
  std::function<Scalar(int, Scalar, Scalar)> exact;
};

namespace detail {

template <typename Scalar>
void check_coefficients(const std::vector<Scalar>& c, Scalar B) {
  const Scalar sum = std::accumulate(c.begin(), c.end(), Scalar(0));
  using std::abs;
  if (!(abs(sum - B) <= Scalar(kCoefficientTolerance))) {
    std::ostringstream ss;
    ss << "coefficients sum to " << sum << " but the junction flux B is " << B;
    throw InvalidCoefficients(ss.str());
  }
}

template <typename Scalar>
Scalar max_abs(const std::vector<Scalar>& c) {
  Scalar m = 0;
  for (Scalar x : c) m = std::max(m, std::abs(x));
  return m;
}

// Separable expansion of H(a(x) e^{-t}) for the catalog entries.
template <typename Scalar>
void hamiltonian_modes(const HamiltonianEntry& h, std::vector<Scalar>& weights,
                       std::vector<int>& powers, bool& absolute) {
  absolute = false;
  weights.clear();
  powers.clear();
  if (h.name == "abs") {
    absolute = true;
    weights = {Scalar(1)};
    powers = {1};
  } else if (h.name == "quadratic") {
    weights = {Scalar(1)};
    powers = {2};
  } else if (h.name == "shifted_quadratic") {
    const Scalar a = Scalar(h.offset);
    weights = {a * a, -Scalar(2) * a, Scalar(1)};
    powers = {0, 1, 2};
  } else if (h.name == "poly") {
    for (std::size_t k = 0; k < h.coefficients.size(); ++k) {
      weights.push_back(Scalar(h.coefficients[k]));
      powers.push_back(static_cast<int>(k));
    }
  } else {
    throw InvalidInput("unknown hamiltonian '" + h.name + "'");
  }
}

}  // namespace detail

template <typename Scalar = double>
ManufacturedStationary<Scalar> manufactured_stationary(const std::vector<Scalar>& c,
                                                       const HamiltonianEntry& h,
                                                       Scalar edge_length, Scalar B = 0) {
  detail::check_coefficients(c, B);
  const int K = static_cast<int>(c.size());
  const NetworkGrid<Scalar> dense(K, edge_length,
                                  edge_length / Scalar(kConstantsSamplesPerEdge));
  const auto ham = make_catalog_hamiltonian<Scalar>(h);

  ManufacturedStationary<Scalar> out;
  out.c = c;
  out.hamiltonian = h;
  out.third_derivative_bound = detail::max_abs(c);
  out.exact = [c](int i, Scalar x) { return c[i] * std::sin(x); };
  out.exact_slope = [c](int i, Scalar x) { return c[i] * std::cos(x); };

  auto& spec = out.problem.spec;
  for (int i = 0; i < K; ++i) {
    EdgeHamiltonian<Scalar> e;
    e.H = ham.H;
    e.dH = ham.dH;
    const Scalar ci = c[i];
    const auto H = ham.H;
    e.f = [ci, H](Scalar, Scalar x) { return ci * std::sin(x) + H(ci * std::cos(x)); };
    spec.edges.push_back(std::move(e));
  }
  out.problem.consts = derive_constants(spec, dense);
  out.problem.edge_length = edge_length;
  out.problem.B = B;
  out.problem.far_end = out.exact;
  return out;
}

template <typename Scalar = double>
ManufacturedCauchy<Scalar> manufactured_cauchy(const std::vector<Scalar>& c,
                                               const HamiltonianEntry& h, Scalar edge_length,
                                               Scalar T, Scalar B = 0) {
  detail::check_coefficients(c, B);
  if (!(T > 0)) throw InvalidInput("horizon T must be positive");
  const int K = static_cast<int>(c.size());
  const NetworkGrid<Scalar> dense(K, edge_length,
                                  edge_length / Scalar(kConstantsSamplesPerEdge));
  const auto ham = make_catalog_hamiltonian<Scalar>(h);

  ManufacturedCauchy<Scalar> out;
  out.c = c;
  out.hamiltonian = h;
  out.exact = [c](int i, Scalar x, Scalar t) { return c[i] * std::sin(x) * std::exp(-t); };

  auto& prob = out.problem;
  for (int i = 0; i < K; ++i) {
    EdgeHamiltonian<Scalar> e;
    e.H = ham.H;
    e.dH = ham.dH;
    const Scalar ci = c[i];
    const auto H = ham.H;
    e.f = [ci, H](Scalar t, Scalar x) {
      const Scalar decay = std::exp(-t);
      return -ci * std::sin(x) * decay + H(ci * std::cos(x) * decay);
    };
    prob.spec.edges.push_back(std::move(e));
  }

  // f = -c sin(x) e^{-t} + sum_k w_k (c cos x)^k e^{-kt}  (|c cos x| e^{-t} for abs)
  std::vector<Scalar> weights;
  std::vector<int> powers;
  bool absolute = false;
  detail::hamiltonian_modes(h, weights, powers, absolute);
  SeparableSource<Scalar> src;
  src.time_factors.push_back([](Scalar t) { return std::exp(-t); });
  src.space_factors.push_back([c](int i, Scalar x) { return -c[i] * std::sin(x); });
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const int p = powers[k];
    const Scalar w = weights[k];
    src.time_factors.push_back([p](Scalar t) { return std::exp(-Scalar(p) * t); });
    src.space_factors.push_back([c, p, w, absolute](int i, Scalar x) {
      const Scalar a = c[i] * std::cos(x);
      return w * (absolute ? std::abs(a) : std::pow(a, p));
    });
  }
  prob.separable_source = std::move(src);

  ConstantsOptions<Scalar> opts;
  opts.times.clear();
  for (int k = 0; k <= 64; ++k) opts.times.push_back(T * Scalar(k) / Scalar(64));
  opts.min_radius = detail::max_abs(c) + Scalar(1);
  prob.consts = derive_constants(prob.spec, dense, opts);
  prob.edge_length = edge_length;
  prob.T = T;
  prob.B = B;
  prob.u0 = [c](int i, Scalar x) { return c[i] * std::sin(x); };
  prob.u0_lipschitz = detail::max_abs(c);
  const auto exact = out.exact;
  prob.far_end = [exact](int i, Scalar x, Scalar t) { return exact(i, x, t); };
  return out;
}

template <typename Scalar>
Scalar sup_error(const GridFunction<Scalar>& u, const GridFunction<Scalar>& ref) {
  if (!(u.grid() == ref.grid())) throw ShapeMismatch("grid functions live on different grids");
  return (u.values() - ref.values()).cwiseAbs().maxCoeff();
}

template <typename Scalar, typename Exact>
  requires std::is_invocable_r_v<Scalar, Exact&, int, Scalar> &&
           (!std::is_same_v<std::remove_cvref_t<Exact>, GridFunction<Scalar>>)
Scalar sup_error(const GridFunction<Scalar>& u, Exact&& exact) {
  const auto& g = u.grid();
  using std::abs;
  Scalar e = abs(u.junction() - exact(0, Scalar(0)));
  for (int i = 0; i < g.edges(); ++i) {
    for (int m = 1; m <= g.nodes_per_edge(); ++m) {
      e = std::max(e, abs(u(i, m) - exact(i, g.coordinate(m))));
    }
  }
  return e;
}

template <typename Scalar>
Scalar sup_error(const SpaceTimeGridFunction<Scalar>& u, const SpaceTimeGridFunction<Scalar>& ref) {
  if (!(u.grid() == ref.grid()) || u.steps() != ref.steps()) {
    throw ShapeMismatch("space-time fields differ in grid or level count");
  }
  Scalar e = 0;
  for (int s = 0; s <= u.steps(); ++s) e = std::max(e, sup_error(u.level(s), ref.level(s)));
  return e;
}

template <typename Scalar, typename Exact>
  requires std::is_invocable_r_v<Scalar, Exact&, int, Scalar, Scalar>
Scalar sup_error(const SpaceTimeGridFunction<Scalar>& u, Exact&& exact) {
  Scalar e = 0;
  for (int s = 0; s <= u.steps(); ++s) {
    const Scalar t = u.time(s);
    e = std::max(e, sup_error(u.level(s), [&](int i, Scalar x) { return exact(i, x, t); }));
  }
  return e;
}

struct LogLogFit {
  double order = 0;
  double intercept = 0;
  double r_squared = 0;
};

// Least-squares line through (log h, log e).
inline LogLogFit fit_loglog_order(const std::vector<std::pair<double, double>>& rows) {
  if (rows.size() < 3) throw InvalidInput("a rate fit needs at least 3 rows");
  for (const auto& [h, e] : rows) {
    if (e == 0.0) throw DegenerateFit("error at machine precision: an error is exactly zero");
    if (!(h > 0) || !(e > 0) || !std::isfinite(h) || !std::isfinite(e)) {
      throw InvalidInput("rate fit needs positive finite resolutions and errors");
    }
  }
  const double n = double(rows.size());
  double sx = 0, sy = 0;
  for (const auto& [h, e] : rows) {
    sx += std::log(h);
    sy += std::log(e);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [h, e] : rows) {
    const double dx = std::log(h) - mx, dy = std::log(e) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0)) throw DegenerateFit("all resolutions coincide");
  LogLogFit fit;
  fit.order = sxy / sxx;
  fit.intercept = my - fit.order * mx;
  const double ss_res = std::max(0.0, syy - fit.order * sxy);
  fit.r_squared = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RateRow {
  double h = 0;    // dx for refinement studies, eps for viscosity sweeps
  double dx = 0;
  double eps = 0;
  double dt = kNaN;
  long long nodes = 0;
  long long sweeps_or_steps = 0;
  double sup_error = 0;
  double secondary_error = kNaN;  // vs the manufactured exact (cauchy)
  double junction_sub = kNaN;
  double junction_super = kNaN;
  double junction_tol = kNaN;
  int newton_iterations = 0;
  bool monotone = true;
};

struct RateReport {
  std::string kind;      // stationary | cauchy
  std::string variable;  // dx | eps
  std::vector<RateRow> rows;
  std::optional<LogLogFit> fit;
  bool degenerate = false;
  std::string note;
  int error_increases = 0;       // consecutive rows whose error grew
  double worst_increase = 0;     // largest relative growth among those
  double L2 = kNaN;              // max dx/dt over a cauchy study

  // At most one increase, and by no more than 10%.
  bool errors_nonincreasing() const {
    return error_increases == 0 || (error_increases == 1 && worst_increase <= 0.10);
  }
  bool junction_within_tolerance() const {
    for (const auto& r : rows) {
      if (std::isnan(r.junction_tol)) continue;
      if (!(r.junction_sub <= r.junction_tol) || !(r.junction_super >= -r.junction_tol)) {
        return false;
      }
    }
    return true;
  }
};

// Worker count: explicit request, then HJNET_WORKERS, then the hardware.
inline int resolve_workers(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HJNET_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs job(k) for k in [0, n) on up to `workers` threads. The first
// exception (lowest index) is rethrown after all threads finish.
template <typename Job>
void parallel_rows(int n, int workers, Job&& job) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int k = next++; k < n; k = next++) {
      try {
        job(k);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min(workers, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <typename Scalar = double>
struct StudyOptions {
  int workers = 0;
  StationaryMethod method = StationaryMethod::newton;
  std::optional<Scalar> tol_solve;
  int n_theta = kDefaultThetaPoints;
  // eps as a function of (dx, L1) in refinement studies.
  std::function<Scalar(Scalar, Scalar)> coupling = [](Scalar dx, Scalar L1) {
    return Scalar(2) * L1 * dx;
  };
  // dx as a function of (eps, L1) in viscosity sweeps. Capped so that the
  // lower CFL bound 2 L1 dx <= eps always holds.
  std::function<Scalar(Scalar, Scalar)> dx_rule = [](Scalar eps, Scalar L1) {
    return std::min(std::pow(eps, Scalar(1.5)) / Scalar(4), eps / (Scalar(2) * L1));
  };
  int reference_factor = 4;       // cauchy refinement reference at dx_min / factor
  int viscous_reference_factor = 2;
  int checkpoints = 64;           // cauchy viscosity sweep comparison times
  double node_budget = 1e7;       // stationary: total grid nodes in a study
  double update_budget = 5e9;     // cauchy: total node updates in a study
};

namespace detail {

template <typename Scalar>
void check_decreasing(const std::vector<Scalar>& xs, const char* what) {
  if (xs.size() < 3) {
    throw InvalidInput(std::string(what) + " needs at least 3 entries");
  }
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (!(xs[k] > 0)) throw InvalidInput(std::string(what) + " entries must be positive");
    if (k > 0 && !(xs[k] < xs[k - 1])) {
      throw InvalidInput(std::string(what) + " must be strictly decreasing");
    }
  }
}

inline void finish_report(RateReport& rep) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rep.rows) pts.emplace_back(r.h, r.sup_error);
  for (std::size_t k = 1; k < rep.rows.size(); ++k) {
    const double prev = rep.rows[k - 1].sup_error, cur = rep.rows[k].sup_error;
    if (cur > prev) {
      ++rep.error_increases;
      rep.worst_increase =
          std::max(rep.worst_increase, prev > 0 ? (cur - prev) / prev : std::numeric_limits<double>::infinity());
    }
  }
  try {
    rep.fit = fit_loglog_order(pts);
  } catch (const DegenerateFit& e) {
    rep.degenerate = true;
    rep.note = e.what();
  }
}

template <typename Scalar>
RateRow stationary_row(const ManufacturedStationary<Scalar>& mp, Scalar dx, Scalar eps,
                       const StudyOptions<Scalar>& opts) {
  SchemeParams<Scalar> params;
  params.dx = dx;
  params.eps = eps;
  params.tol_solve = opts.tol_solve;
  const auto [u, stats] = solve_stationary(mp.problem, params, Seed::lower, opts.method);
  RateRow row;
  row.dx = double(dx);
  row.eps = double(eps);
  row.nodes = u.grid().size();
  row.sweeps_or_steps = stats.sweeps;
  row.newton_iterations = stats.newton_iterations;
  row.monotone = stats.monotone;
  row.sup_error = double(sup_error(u, mp.exact));
  const auto res = junction_residual(junction_slopes(u, 2), mp.problem.spec,
                                     std::optional<Scalar>{}, opts.n_theta);
  row.junction_sub = double(res.sub.value);
  row.junction_super = double(res.super.value);
  row.junction_tol = double(Scalar(10) * (dx + dx * dx * mp.third_derivative_bound / Scalar(3)));
  return row;
}

template <typename Scalar>
void check_node_budget(const ManufacturedStationary<Scalar>& mp, const std::vector<Scalar>& dxs,
                       double budget) {
  double total = 0;
  for (Scalar dx : dxs) {
    total += double(NetworkGrid<Scalar>(mp.problem.spec.size(), mp.problem.edge_length, dx).size());
  }
  if (total > budget) {
    std::ostringstream ss;
    ss << "study needs " << total << " grid nodes, budget is " << budget;
    throw ResourceGuard(ss.str());
  }
}

template <typename Scalar>
double march_cost(const CauchyProblem<Scalar>& prob, Scalar dx, Scalar dt) {
  const NetworkGrid<Scalar> g(prob.spec.size(), prob.edge_length, dx);
  return double(g.size()) * double(cauchy_step_count(prob.T, dt));
}

inline void check_update_budget(double total, double budget) {
  if (total > budget) {
    std::ostringstream ss;
    ss << "study needs " << total << " node updates, budget is " << budget;
    throw ResourceGuard(ss.str());
  }
}

// Integer ratio a/b, or -1 when a/b is not an integer to 1e-9.
template <typename Scalar>
long long integer_ratio(Scalar a, Scalar b) {
  const Scalar r = a / b;
  const Scalar k = std::round(r);
  return std::abs(r - k) <= Scalar(1e-9) * std::max(Scalar(1), k) ? static_cast<long long>(k) : -1;
}

// Time step of the form T / (multiple * k), no larger than the CFL helper's.
template <typename Scalar>
Scalar snapped_time_step(Scalar T, Scalar dx, Scalar eps, Scalar L1, int multiple) {
  const Scalar raw = cauchy_time_step(dx, eps, L1);
  const Scalar blocks = std::ceil(T / (Scalar(multiple) * raw) * (Scalar(1) - Scalar(1e-12)));
  return T / (Scalar(multiple) * std::max(Scalar(1), blocks));
}

}  // namespace detail

// Grid refinement with eps = coupling(dx, L1); errors against the exact
// solution, junction residuals with second-order slopes.
template <typename Scalar>
RateReport refinement_study(const ManufacturedStationary<Scalar>& mp,
                            const std::vector<Scalar>& dx_list,
                            const StudyOptions<Scalar>& opts = {}) {
  detail::check_decreasing(dx_list, "dx_list");
  detail::check_node_budget(mp, dx_list, opts.node_budget);
  RateReport rep;
  rep.kind = "stationary";
  rep.variable = "dx";
  rep.rows.resize(dx_list.size());
  const Scalar L1 = mp.problem.consts.L1;
  parallel_rows(static_cast<int>(dx_list.size()), resolve_workers(opts.workers), [&](int k) {
    const Scalar dx = dx_list[static_cast<std::size_t>(k)];
    rep.rows[static_cast<std::size_t>(k)] = detail::stationary_row(mp, dx, opts.coupling(dx, L1), opts);
    rep.rows[static_cast<std::size_t>(k)].h = double(dx);
  });
  detail::finish_report(rep);
  return rep;
}

// Fixed eps per row with dx = dx_rule(eps, L1); errors against the inviscid
// exact solution.
template <typename Scalar>
RateReport viscosity_sweep(const ManufacturedStationary<Scalar>& mp,
                           const std::vector<Scalar>& eps_list,
                           const StudyOptions<Scalar>& opts = {}) {
  detail::check_decreasing(eps_list, "eps_list");
  const Scalar L1 = mp.problem.consts.L1;
  std::vector<Scalar> dxs;
  for (Scalar eps : eps_list) dxs.push_back(opts.dx_rule(eps, L1));
  detail::check_node_budget(mp, dxs, opts.node_budget);
  RateReport rep;
  rep.kind = "stationary";
  rep.variable = "eps";
  rep.rows.resize(eps_list.size());
  parallel_rows(static_cast<int>(eps_list.size()), resolve_workers(opts.workers), [&](int k) {
    const auto idx = static_cast<std::size_t>(k);
    rep.rows[idx] = detail::stationary_row(mp, dxs[idx], eps_list[idx], opts);
    rep.rows[idx].h = double(eps_list[idx]);
  });
  detail::finish_report(rep);
  return rep;
}

// Self-convergence: rows share dx/dt so grids nest in space and time; the
// reference runs at dx_min / reference_factor and is compared by injection
// at every level of every row. The exact solution gives a secondary error.
template <typename Scalar>
RateReport refinement_study(const ManufacturedCauchy<Scalar>& mp,
                            const std::vector<Scalar>& dx_list,
                            const StudyOptions<Scalar>& opts = {}) {
  detail::check_decreasing(dx_list, "dx_list");
  const auto& prob = mp.problem;
  const Scalar L1 = prob.consts.L1;
  const Scalar T = prob.T;
  const Scalar dx0 = dx_list.front();
  const Scalar dt0 =
      T / std::ceil(T / cauchy_time_step(dx0, opts.coupling(dx0, L1), L1) * (Scalar(1) - Scalar(1e-12)));
  const std::size_t nrows = dx_list.size();
  std::vector<CauchyParams<Scalar>> params(nrows);
  for (std::size_t k = 0; k < nrows; ++k) {
    params[k].dx = dx_list[k];
    params[k].eps = opts.coupling(dx_list[k], L1);
    params[k].dt = dt0 * dx_list[k] / dx0;
  }
  CauchyParams<Scalar> ref;
  ref.dx = dx_list.back() / Scalar(opts.reference_factor);
  ref.eps = opts.coupling(ref.dx, L1);
  ref.dt = dt0 * ref.dx / dx0;

  double cost = detail::march_cost(prob, ref.dx, ref.dt);
  for (const auto& p : params) cost += detail::march_cost(prob, p.dx, p.dt);
  detail::check_update_budget(cost, opts.update_budget);

  RateReport rep;
  rep.kind = "cauchy";
  rep.variable = "dx";
  rep.rows.resize(nrows);
  std::vector<long long> time_ratio(nrows), space_ratio(nrows);
  for (std::size_t k = 0; k < nrows; ++k) {
    time_ratio[k] = detail::integer_ratio(params[k].dt, ref.dt);
    space_ratio[k] = detail::integer_ratio(params[k].dx, ref.dx);
    if (time_ratio[k] < 1 || space_ratio[k] < 1) {
      throw InvalidInput("cauchy refinement grids must nest in the reference grid");
    }
  }

  std::vector<std::optional<SpaceTimeGridFunction<Scalar>>> fields(nrows);
  parallel_rows(static_cast<int>(nrows), resolve_workers(opts.workers), [&](int k) {
    const auto idx = static_cast<std::size_t>(k);
    const auto& p = params[idx];
    RateRow& row = rep.rows[idx];
    row.h = double(p.dx);
    row.dx = double(p.dx);
    row.eps = double(p.eps);
    row.dt = double(p.dt);
    fields[idx] = solve_cauchy(prob, p);
    row.nodes = fields[idx]->grid().size();
    row.sweeps_or_steps = fields[idx]->steps();
    row.secondary_error = double(sup_error(*fields[idx], mp.exact));
  });

  std::vector<Scalar> err(nrows, Scalar(0));
  march_cauchy(prob, ref, [&](int s, const GridFunction<Scalar>& level) {
    for (std::size_t k = 0; k < nrows; ++k) {
      if (s % time_ratio[k] != 0) continue;
      const int sk = static_cast<int>(s / time_ratio[k]);
      if (sk > fields[k]->steps()) continue;
      const auto& coarse = fields[k]->level(sk);
      const auto& g = coarse.grid();
      const int r = static_cast<int>(space_ratio[k]);
      Scalar e = std::abs(coarse.junction() - level.junction());
      for (int i = 0; i < g.edges(); ++i) {
        for (int m = 1; m <= g.nodes_per_edge(); ++m) {
          e = std::max(e, std::abs(coarse(i, m) - level(i, m * r)));
        }
      }
      err[k] = std::max(err[k], e);
    }
  });
  for (std::size_t k = 0; k < nrows; ++k) {
    rep.rows[k].sup_error = double(err[k]);
    rep.L2 = std::isnan(rep.L2) ? double(params[k].dx / params[k].dt)
                                : std::max(rep.L2, double(params[k].dx / params[k].dt));
  }
  detail::finish_report(rep);
  return rep;
}

// Fixed eps per row, compared at `checkpoints` uniform times against an
// inviscid (eps = 2 L1 dx) run at dx_min / viscous_reference_factor,
// interpolated linearly in space.
template <typename Scalar>
RateReport viscosity_sweep(const ManufacturedCauchy<Scalar>& mp,
                           const std::vector<Scalar>& eps_list,
                           const StudyOptions<Scalar>& opts = {}) {
  detail::check_decreasing(eps_list, "eps_list");
  const auto& prob = mp.problem;
  const Scalar L1 = prob.consts.L1;
  const Scalar T = prob.T;
  const int C = opts.checkpoints;
  if (C < 1) throw InvalidInput("checkpoints must be positive");
  const std::size_t nrows = eps_list.size();
  std::vector<CauchyParams<Scalar>> params(nrows);
  Scalar dx_min = std::numeric_limits<Scalar>::infinity();
  for (std::size_t k = 0; k < nrows; ++k) {
    params[k].eps = eps_list[k];
    params[k].dx = opts.dx_rule(eps_list[k], L1);
    params[k].dt = detail::snapped_time_step(T, params[k].dx, params[k].eps, L1, C);
    dx_min = std::min(dx_min, params[k].dx);
  }
  CauchyParams<Scalar> ref;
  ref.dx = dx_min / Scalar(opts.viscous_reference_factor);
  ref.eps = Scalar(2) * L1 * ref.dx;
  ref.dt = detail::snapped_time_step(T, ref.dx, ref.eps, L1, C);

  double cost = detail::march_cost(prob, ref.dx, ref.dt);
  for (const auto& p : params) cost += detail::march_cost(prob, p.dx, p.dt);
  detail::check_update_budget(cost, opts.update_budget);

  const int ref_steps = cauchy_step_count(T, ref.dt);
  const int ref_stride = ref_steps / C;
  std::vector<GridFunction<Scalar>> ref_levels;
  march_cauchy(prob, ref, [&](int s, const GridFunction<Scalar>& level) {
    if (s % ref_stride == 0) ref_levels.push_back(level);
  });

  RateReport rep;
  rep.kind = "cauchy";
  rep.variable = "eps";
  rep.rows.resize(nrows);
  parallel_rows(static_cast<int>(nrows), resolve_workers(opts.workers), [&](int k) {
    const auto idx = static_cast<std::size_t>(k);
    const auto& p = params[idx];
    RateRow& row = rep.rows[idx];
    row.h = double(p.eps);
    row.dx = double(p.dx);
    row.eps = double(p.eps);
    row.dt = double(p.dt);
    const int steps = cauchy_step_count(T, p.dt);
    const int stride = steps / C;
    Scalar e_ref = 0, e_exact = 0;
    long long nodes = 0;
    march_cauchy(prob, p, [&](int s, const GridFunction<Scalar>& level) {
      const auto& g = level.grid();
      nodes = g.size();
      const Scalar t = Scalar(s) * p.dt;
      e_exact = std::max(e_exact, sup_error(level, [&](int i, Scalar x) { return mp.exact(i, x, t); }));
      if (s % stride != 0) return;
      const auto& r = ref_levels[static_cast<std::size_t>(s / stride)];
      Scalar e = std::abs(level.junction() - r.junction());
      for (int i = 0; i < g.edges(); ++i) {
        for (int m = 1; m <= g.nodes_per_edge(); ++m) {
          e = std::max(e, std::abs(level(i, m) - interpolate(r, i, g.coordinate(m))));
        }
      }
      e_ref = std::max(e_ref, e);
    });
    row.nodes = nodes;
    row.sweeps_or_steps = steps;
    row.sup_error = double(e_ref);
    row.secondary_error = double(e_exact);
  });
  for (const auto& p : params) {
    rep.L2 = std::isnan(rep.L2) ? double(p.dx / p.dt) : std::max(rep.L2, double(p.dx / p.dt));
  }
  detail::finish_report(rep);
  return rep;
}

// Error of one stationary solve at (eps, dx) on edges of length l and 2l.
// The doubled run is also measured on the common window [-l, 0].
struct TruncationSensitivity {
  double error = 0;
  double error_doubled = 0;
  double error_doubled_window = 0;
  double relative_change = 0;         // full-domain errors
  double relative_change_window = 0;  // errors on [-l, 0]
};

template <typename Scalar>
TruncationSensitivity truncation_sensitivity(const std::vector<Scalar>& c,
                                             const HamiltonianEntry& h, Scalar edge_length,
                                             Scalar eps, Scalar dx, Scalar B = 0,
                                             StationaryMethod method = StationaryMethod::newton) {
  SchemeParams<Scalar> params;
  params.dx = dx;
  params.eps = eps;
  const auto a = manufactured_stationary(c, h, edge_length, B);
  const auto b = manufactured_stationary(c, h, Scalar(2) * edge_length, B);
  const auto [ua, sa] = solve_stationary(a.problem, params, Seed::lower, method);
  const auto [ub, sb] = solve_stationary(b.problem, params, Seed::lower, method);
  TruncationSensitivity out;
  out.error = double(sup_error(ua, a.exact));
  out.error_doubled = double(sup_error(ub, b.exact));
  Scalar window = std::abs(ub.junction() - b.exact(0, Scalar(0)));
  for (int i = 0; i < ub.grid().edges(); ++i) {
    for (int m = 1; m <= ua.grid().nodes_per_edge(); ++m) {
      window = std::max(window, std::abs(ub(i, m) - b.exact(i, ub.grid().coordinate(m))));
    }
  }
  out.error_doubled_window = double(window);
  out.relative_change = std::abs(out.error_doubled - out.error) / out.error;
  out.relative_change_window = std::abs(out.error_doubled_window - out.error) / out.error;
  return out;
}

}  // namespace hjnet

#endif  // HJNET_LAB_HPP_
