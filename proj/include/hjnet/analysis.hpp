#ifndef HJNET_ANALYSIS_HPP_
#define HJNET_ANALYSIS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hjnet/cauchy.hpp"
#include "hjnet/errors.hpp"
#include "hjnet/hamiltonian.hpp"
#include "hjnet/netgrid.hpp"
#include "hjnet/stationary.hpp"

namespace hjnet {

template <typename Scalar = double>
struct JunctionState {
  Scalar u0 = 0;
  std::vector<Scalar> xi;  // one-sided slope u_x(0-) per edge
  Scalar flux = 0;         // sum of xi
};

template <typename Scalar>
JunctionState<Scalar> make_junction_state(Scalar u0, std::vector<Scalar> xi) {
  JunctionState<Scalar> s;
  s.u0 = u0;
  s.xi = std::move(xi);
  for (Scalar x : s.xi) s.flux += x;
  return s;
}

// order 1: (U(0) - U(1_i))/dx, the scheme's own D+.
// order 2: (3U(0) - 4U(1_i) + U(2_i))/(2dx).
template <typename Scalar>
JunctionState<Scalar> junction_slopes(const GridFunction<Scalar>& u, int order = 2) {
  if (order != 1 && order != 2) throw InvalidInput("slope order must be 1 or 2");
  const auto& g = u.grid();
  std::vector<Scalar> xi(g.edges());
  for (int i = 0; i < g.edges(); ++i) {
    xi[i] = order == 1 ? (u(i, 0) - u(i, 1)) / g.dx()
                       : (Scalar(3) * u(i, 0) - Scalar(4) * u(i, 1) + u(i, 2)) /
                             (Scalar(2) * g.dx());
  }
  return make_junction_state(u.junction(), std::move(xi));
}

template <typename Scalar = double>
struct JunctionExtremum {
  Scalar value = 0;
  int edge = 0;
  Scalar theta = 0;
};

template <typename Scalar = double>
struct JunctionResidual {
  JunctionExtremum<Scalar> sub;
  JunctionExtremum<Scalar> super;
};

inline constexpr int kDefaultThetaPoints = 1000;

// u0 + min_i min_theta [H_i(xi_i + theta (sum xi)^-) - f_i(t, 0)], theta on a
// uniform grid of n_theta + 1 points in [0, 1]. At most 0 for a subsolution.
template <typename Scalar>
JunctionExtremum<Scalar> junction_sub_residual(const JunctionState<Scalar>& state,
                                               const HamiltonianSpec<Scalar>& spec,
                                               std::optional<Scalar> t = std::nullopt,
                                               int n_theta = kDefaultThetaPoints) {
  if (n_theta < 2) throw InvalidInput("n_theta must be at least 2");
  if (static_cast<int>(state.xi.size()) != spec.size()) {
    throw ShapeMismatch("junction state and Hamiltonian disagree on K");
  }
  const Scalar neg = std::max(-state.flux, Scalar(0));
  const Scalar time = t.value_or(Scalar(0));
  JunctionExtremum<Scalar> best{std::numeric_limits<Scalar>::infinity(), 0, 0};
  for (int i = 0; i < spec.size(); ++i) {
    const Scalar f0 = spec[i].f(time, Scalar(0));
    for (int k = 0; k <= n_theta; ++k) {
      const Scalar theta = Scalar(k) / Scalar(n_theta);
      const Scalar v = spec[i].H(state.xi[i] + theta * neg) - f0;
      if (v < best.value) best = {v, i, theta};
    }
  }
  best.value += state.u0;
  return best;
}

// u0 + max_i max_theta [H_i(xi_i - theta (sum xi)^+) - f_i(t, 0)]. At least 0
// for a supersolution.
template <typename Scalar>
JunctionExtremum<Scalar> junction_super_residual(const JunctionState<Scalar>& state,
                                                 const HamiltonianSpec<Scalar>& spec,
                                                 std::optional<Scalar> t = std::nullopt,
                                                 int n_theta = kDefaultThetaPoints) {
  if (n_theta < 2) throw InvalidInput("n_theta must be at least 2");
  if (static_cast<int>(state.xi.size()) != spec.size()) {
    throw ShapeMismatch("junction state and Hamiltonian disagree on K");
  }
  const Scalar pos = std::max(state.flux, Scalar(0));
  const Scalar time = t.value_or(Scalar(0));
  JunctionExtremum<Scalar> best{-std::numeric_limits<Scalar>::infinity(), 0, 0};
  for (int i = 0; i < spec.size(); ++i) {
    const Scalar f0 = spec[i].f(time, Scalar(0));
    for (int k = 0; k <= n_theta; ++k) {
      const Scalar theta = Scalar(k) / Scalar(n_theta);
      const Scalar v = spec[i].H(state.xi[i] - theta * pos) - f0;
      if (v > best.value) best = {v, i, theta};
    }
  }
  best.value += state.u0;
  return best;
}

template <typename Scalar>
JunctionResidual<Scalar> junction_residual(const JunctionState<Scalar>& state,
                                           const HamiltonianSpec<Scalar>& spec,
                                           std::optional<Scalar> t = std::nullopt,
                                           int n_theta = kDefaultThetaPoints) {
  return {junction_sub_residual(state, spec, t, n_theta),
          junction_super_residual(state, spec, t, n_theta)};
}

// U^theta(k, t) = max_s [U(k, s) - (t - s dt)^2 / (2 theta)], exact over the
// stored levels. Also reports the maximizing level through `argmax`.
template <typename Scalar>
Scalar sup_convolution_time(const SpaceTimeGridFunction<Scalar>& u, Scalar theta,
                            int edge, int m, Scalar t, int* argmax = nullptr) {
  if (!(theta > 0)) throw InvalidInput("theta must be positive");
  Scalar best = -std::numeric_limits<Scalar>::infinity();
  int at = 0;
  const auto idx = u.grid().checked_index(edge, m);
  for (int s = 0; s <= u.steps(); ++s) {
    const Scalar d = t - u.time(s);
    const Scalar v = u.level(s).values()[idx] - d * d / (Scalar(2) * theta);
    if (v > best) {
      best = v;
      at = s;
    }
  }
  if (argmax) *argmax = at;
  return best;
}

// Whole-grid U^theta(., t) together with the maximizing level per node.
template <typename Scalar>
GridFunction<Scalar> sup_convolution_level(const SpaceTimeGridFunction<Scalar>& u,
                                           Scalar theta, Scalar t,
                                           std::vector<int>* argmax = nullptr) {
  if (!(theta > 0)) throw InvalidInput("theta must be positive");
  const auto n = u.grid().size();
  GridFunction<Scalar> out(u.grid(), -std::numeric_limits<Scalar>::infinity());
  std::vector<int> at(static_cast<std::size_t>(n), 0);
  for (int s = 0; s <= u.steps(); ++s) {
    const Scalar d = t - u.time(s);
    const Scalar pen = d * d / (Scalar(2) * theta);
    const auto& level = u.level(s).values();
    for (Eigen::Index k = 0; k < n; ++k) {
      const Scalar v = level[k] - pen;
      if (v > out.values()[k]) {
        out.values()[k] = v;
        at[static_cast<std::size_t>(k)] = s;
      }
    }
  }
  if (argmax) *argmax = std::move(at);
  return out;
}

// u_theta(t) = min_k [values_k + (t - times_k)^2 / (2 theta)].
template <typename Scalar>
Scalar inf_convolution_time(const std::vector<Scalar>& values,
                            const std::vector<Scalar>& times, Scalar theta, Scalar t) {
  if (!(theta > 0)) throw InvalidInput("theta must be positive");
  if (values.size() != times.size() || values.empty()) {
    throw ShapeMismatch("inf-convolution needs matching, nonempty samples");
  }
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (std::size_t k = 0; k < values.size(); ++k) {
    const Scalar d = t - times[k];
    best = std::min(best, values[k] + d * d / (Scalar(2) * theta));
  }
  return best;
}

template <typename Scalar = double>
struct SupConvolutionReport {
  Scalar theta = 0;
  Scalar lipschitz = 0;  // L in T_theta = 2 L theta
  Scalar T_theta = 0;
  int admissible_times = 0;
  Scalar worst_interior = -std::numeric_limits<Scalar>::infinity();
  Scalar worst_junction = -std::numeric_limits<Scalar>::infinity();
  int maximizer_at_zero = 0;  // nodes whose maximizer was level 0
  bool passed = false;
};

// Checks the discrete subsolution inequalities satisfied by U^theta at every
// lattice time t >= 2 T_theta - dt with t + dt inside the run:
//   U^th(k,t+dt) - U^th(k,t) + dt F(D+U^th, D-U^th) <= dt f(s0 dt, x_k)
//   U^th(0,t+dt) <= (sum_i U^th(1_i,t+dt) + B dx) / K
// where s0 + 1 is the level maximizing U^th(k, t+dt). L is the larger of the
// time and space difference quotients of U.
template <typename Scalar>
SupConvolutionReport<Scalar> check_sup_convolution_subsolution(
    const SpaceTimeGridFunction<Scalar>& u, const CauchyProblem<Scalar>& prob,
    const CauchyParams<Scalar>& params, Scalar theta,
    Scalar tol_interior = Scalar(1e-9), Scalar tol_junction = Scalar(1e-12)) {
  const CauchyScheme<Scalar> scheme(prob, params);
  if (!(u.grid() == scheme.grid())) throw ShapeMismatch("field is not on the scheme grid");
  const auto& grid = u.grid();
  const Scalar dx = grid.dx();
  const Scalar dt = u.dt();
  const int n = grid.nodes_per_edge();
  const auto& g = scheme.numerical_hamiltonian();

  SupConvolutionReport<Scalar> rep;
  rep.theta = theta;
  Scalar time_quot = 0;
  for (int s = 0; s < u.steps(); ++s) {
    time_quot = std::max(time_quot,
                         (u.level(s + 1).values() - u.level(s).values()).cwiseAbs().maxCoeff());
  }
  Scalar space_quot = 0;
  for (const auto& level : u.levels()) space_quot = std::max(space_quot, discrete_lipschitz(level));
  rep.lipschitz = std::max(time_quot / dt, space_quot / dx);
  rep.T_theta = Scalar(2) * rep.lipschitz * theta;
  if (!(rep.T_theta - Scalar(2) * dt > 0)) {
    rep.passed = false;
    return rep;
  }

  const int first = std::max(0, static_cast<int>(std::ceil((Scalar(2) * rep.T_theta - dt) / dt *
                                                           (Scalar(1) - Scalar(1e-12)))));
  std::vector<int> at_next;
  std::optional<GridFunction<Scalar>> w_cur;
  typename CauchyScheme<Scalar>::Vector src;
  for (int s = first; s + 1 <= u.steps(); ++s) {
    if (!w_cur) w_cur = sup_convolution_level(u, theta, u.time(s));
    const GridFunction<Scalar> w_next = sup_convolution_level(u, theta, u.time(s + 1), &at_next);
    ++rep.admissible_times;
    for (int i = 0; i < grid.edges(); ++i) {
      for (int m = 1; m < n; ++m) {
        const int smax = at_next[static_cast<std::size_t>(grid.index(i, m))];
        if (smax == 0) {
          ++rep.maximizer_at_zero;
          continue;
        }
        scheme.source_level(u.time(smax - 1), src);
        const Scalar p1 = (w_cur->at(i, m - 1) - (*w_cur)(i, m)) / dx;
        const Scalar p2 = ((*w_cur)(i, m) - (*w_cur)(i, m + 1)) / dx;
        const Scalar F = flux_operator(g, params.eps, dx, p1, p2, i);
        const Scalar lhs = w_next(i, m) - (*w_cur)(i, m) + dt * F - dt * src[grid.index(i, m)];
        rep.worst_interior = std::max(rep.worst_interior, lhs);
      }
    }
    if (at_next[0] == 0) ++rep.maximizer_at_zero;
    Scalar sum = 0;
    for (int i = 0; i < grid.edges(); ++i) sum += w_next(i, 1);
    rep.worst_junction = std::max(
        rep.worst_junction, w_next.junction() - (sum + prob.B * dx) / Scalar(grid.edges()));
    w_cur = w_next;
  }
  rep.passed = rep.admissible_times > 0 && rep.maximizer_at_zero == 0 &&
               rep.worst_interior <= tol_interior && rep.worst_junction <= tol_junction;
  return rep;
}

template <typename Scalar = double>
struct MonotoneCounterexample {
  int edge = 0;       // perturbed node (edge, m); m == 0 is the junction
  int m = 0;
  Scalar perturbation = 0;
  int out_edge = 0;   // output that moved the wrong way
  int out_m = 0;
  Scalar change = 0;  // signed change of that output
  std::string what;

  std::string describe() const {
    std::ostringstream ss;
    ss << what << ": raising node (" << edge << ", " << m << ") by " << perturbation
       << " changed output (" << out_edge << ", " << out_m << ") by " << change;
    return ss.str();
  }
};

inline constexpr int kCertifyMaxNodesPerEdge = 10;
inline constexpr int kCertifyMaxEdges = 4;

namespace detail {

template <typename Scalar>
void check_small_grid(const NetworkGrid<Scalar>& g) {
  if (g.nodes_per_edge() > kCertifyMaxNodesPerEdge || g.edges() > kCertifyMaxEdges) {
    std::ostringstream ss;
    ss << "certification runs on small grids only (K <= " << kCertifyMaxEdges
       << ", N <= " << kCertifyMaxNodesPerEdge << "), got K = " << g.edges()
       << ", N = " << g.nodes_per_edge();
    throw InvalidInput(ss.str());
  }
}

// Random-walk field with increments up to `slope * dx`, centred on zero.
template <typename Scalar>
GridFunction<Scalar> random_field(const NetworkGrid<Scalar>& g, Scalar slope,
                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  GridFunction<Scalar> u(g);
  u.junction() = Scalar(unit(rng));
  for (int i = 0; i < g.edges(); ++i) {
    for (int m = 1; m <= g.nodes_per_edge(); ++m) {
      u(i, m) = u(i, m - 1) + slope * g.dx() * Scalar(unit(rng));
    }
  }
  return u;
}

}  // namespace detail

inline constexpr double kMonotoneSlack = 1e-12;

// One explicit step must not lower any output when any single input node is
// raised by delta. Every node of every random field is perturbed in turn.
// CFL is deliberately not enforced here.
template <typename Scalar>
std::optional<MonotoneCounterexample<Scalar>> certify_monotone(
    const CauchyProblem<Scalar>& prob, const CauchyParams<Scalar>& params, int trials,
    std::uint64_t seed, Scalar delta = Scalar(1e-3)) {
  const CauchyScheme<Scalar> scheme(prob, params);
  const auto& g = scheme.grid();
  detail::check_small_grid(g);
  std::mt19937_64 rng(seed);
  const Scalar slope = Scalar(1.5) * prob.consts.slope_radius;
  typename CauchyScheme<Scalar>::Vector src;
  GridFunction<Scalar> base_out(g), out(g);
  for (int trial = 0; trial < trials; ++trial) {
    GridFunction<Scalar> u = detail::random_field(g, slope, rng);
    const int s = static_cast<int>(rng() % 4);
    scheme.source_level(Scalar(s) * params.dt, src);
    scheme.step_with_source(u, s, base_out, src);
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      GridFunction<Scalar> v = u;
      v.values()[k] += delta;
      scheme.step_with_source(v, s, out, src);
      const auto diff = (out.values() - base_out.values()).eval();
      Eigen::Index worst;
      const Scalar lowest = diff.minCoeff(&worst);
      if (lowest < -Scalar(kMonotoneSlack)) {
        MonotoneCounterexample<Scalar> c;
        const int n = g.nodes_per_edge();
        c.edge = k == 0 ? 0 : static_cast<int>((k - 1) / n);
        c.m = k == 0 ? 0 : static_cast<int>((k - 1) % n) + 1;
        c.perturbation = delta;
        c.out_edge = worst == 0 ? 0 : static_cast<int>((worst - 1) / n);
        c.out_m = worst == 0 ? 0 : static_cast<int>((worst - 1) % n) + 1;
        c.change = lowest;
        c.what = "explicit step not monotone";
        return c;
      }
    }
  }
  return std::nullopt;
}

// F_i must be nonincreasing in p1 and nondecreasing in p2 on sampled slope
// pairs, and the node solve must be nondecreasing in both neighbours.
template <typename Scalar>
std::optional<MonotoneCounterexample<Scalar>> certify_monotone(
    const StationaryProblem<Scalar>& prob, const SchemeParams<Scalar>& params, int trials,
    std::uint64_t seed, Scalar delta = Scalar(1e-3)) {
  const StationaryScheme<Scalar> scheme(prob, params);
  const auto& g = scheme.grid();
  detail::check_small_grid(g);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Scalar box = Scalar(1.5) * prob.consts.slope_radius;
  const auto& G = scheme.numerical_hamiltonian();
  for (int trial = 0; trial < trials; ++trial) {
    for (int i = 0; i < g.edges(); ++i) {
      for (int k = 0; k < 100; ++k) {
        const Scalar p1 = box * Scalar(unit(rng));
        const Scalar p2 = box * Scalar(unit(rng));
        const Scalar h = (k % 2 == 0 ? box : delta) * std::abs(Scalar(unit(rng)));
        const Scalar f = flux_operator(G, params.eps, g.dx(), p1, p2, i);
        const Scalar up1 = flux_operator(G, params.eps, g.dx(), p1 + h, p2, i) - f;
        const Scalar up2 = flux_operator(G, params.eps, g.dx(), p1, p2 + h, i) - f;
        if (up1 > Scalar(kMonotoneSlack) * (Scalar(1) + std::abs(f)) ||
            up2 < -Scalar(kMonotoneSlack) * (Scalar(1) + std::abs(f))) {
          MonotoneCounterexample<Scalar> c;
          c.edge = i;
          c.perturbation = h;
          c.change = up1 > 0 ? up1 : up2;
          c.what = up1 > 0 ? "F increases in p1" : "F decreases in p2";
          return c;
        }
      }
    }
    GridFunction<Scalar> u = detail::random_field(g, box, rng);
    for (int i = 0; i < g.edges(); ++i) {
      for (int m = 1; m < g.nodes_per_edge(); ++m) {
        const Scalar v = scheme.node_update(u, i, m);
        for (int side : {-1, 1}) {
          GridFunction<Scalar> w = u;
          w(i, m + side) += delta;
          const Scalar v2 = scheme.node_update(w, i, m);
          if (v2 - v < -Scalar(1e-10)) {
            MonotoneCounterexample<Scalar> c;
            c.edge = i;
            c.m = m + side;
            c.perturbation = delta;
            c.out_edge = i;
            c.out_m = m;
            c.change = v2 - v;
            c.what = "node solve not monotone";
            return c;
          }
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace hjnet

#endif  // HJNET_ANALYSIS_HPP_
