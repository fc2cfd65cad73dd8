#ifndef HJNET_STATIONARY_HPP_
#define HJNET_STATIONARY_HPP_

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "hjnet/errors.hpp"
#include "hjnet/hamiltonian.hpp"
#include "hjnet/netgrid.hpp"

namespace hjnet {

// u + H_i(u_x) = f_i on each edge, sum_i u_x(0-) = B at the junction, with a
// Dirichlet pin at the truncated far end of every edge.
template <typename Scalar = double>
struct StationaryProblem {
  HamiltonianSpec<Scalar> spec;
  SchemeConstants<Scalar> consts;
  Scalar edge_length = 1;
  Scalar B = 0;
  // Dirichlet data g(edge, x) read at the far node coordinate x = -N*dx.
  std::function<Scalar(int, Scalar)> far_end = [](int, Scalar) { return Scalar(0); };
};

template <typename Scalar = double>
struct SchemeParams {
  Scalar dx = Scalar(0.1);
  Scalar eps = Scalar(0.2);
  std::optional<Scalar> tol_solve;  // default 1e-10 * (1 + M)
  long max_sweeps = 1'000'000;

  Scalar tolerance(const SchemeConstants<Scalar>& consts) const {
    return tol_solve ? *tol_solve : Scalar(1e-10) * (Scalar(1) + consts.M);
  }
};

struct SolveStats {
  long sweeps = 0;
  double final_update = 0;
  bool monotone = true;
  int newton_iterations = 0;
};

enum class Seed { lower, upper };
enum class StationaryMethod { gauss_seidel, newton };

namespace detail {

// Relative slack for CFL comparisons so that parameters chosen exactly on
// the boundary (eps = 2 L1 dx) are not rejected over one ulp.
inline constexpr double kCflSlack = 1e-12;

template <typename Scalar>
bool leq(Scalar a, Scalar b) {
  using std::abs;
  return a <= b + Scalar(kCflSlack) * std::max({abs(a), abs(b), Scalar(1e-300)});
}

// Root of a nondecreasing scalar map on a sign-changing bracket by the
// Illinois variant of regula falsi, falling back to bisection when the
// secant point leaves the bracket. With slope >= 1, |fn(v)| <= tol also
// bounds the distance to the root.
template <typename Scalar, typename Fn>
Scalar increasing_root(Fn&& fn, Scalar lo, Scalar hi, Scalar flo, Scalar fhi,
                       Scalar tol) {
  using std::abs;
  int side = 0;
  for (int it = 0; it < 400; ++it) {
    if (hi - lo <= tol) break;
    Scalar c = (lo * fhi - hi * flo) / (fhi - flo);
    if (!(c > lo && c < hi) || it >= 100) c = Scalar(0.5) * (lo + hi);
    const Scalar fc = fn(c);
    if (fc == Scalar(0) || abs(fc) <= tol) return c;
    if (fc < Scalar(0)) {
      lo = c;
      flo = fc;
      if (side == -1) fhi /= Scalar(2);
      side = -1;
    } else {
      hi = c;
      fhi = fc;
      if (side == 1) flo /= Scalar(2);
      side = 1;
    }
  }
  return Scalar(0.5) * (lo + hi);
}

}  // namespace detail

template <typename Scalar>
const SchemeParams<Scalar>& check_cfl_stationary(const SchemeParams<Scalar>& params,
                                                 const SchemeConstants<Scalar>& consts) {
  const Scalar lower = Scalar(2) * consts.L1 * params.dx;
  if (!detail::leq(lower, params.eps)) {
    std::ostringstream ss;
    ss << "CFL violated: 2L₁Δx ≤ ε fails (2L₁Δx = " << lower
       << ", ε = " << params.eps << ")";
    throw CflViolation(ss.str());
  }
  if (!detail::leq(params.eps, consts.L2)) {
    std::ostringstream ss;
    ss << "CFL violated: ε ≤ L₂ fails (ε = " << params.eps
       << ", L₂ = " << consts.L2 << ")";
    throw CflViolation(ss.str());
  }
  return params;
}

// The assembled difference equations on one grid: numerical Hamiltonian,
// sources sampled at the nodes and the far-end pins.
template <typename Scalar = double>
class StationaryScheme {
 public:
  using Vector = typename GridFunction<Scalar>::Vector;

  StationaryScheme(const StationaryProblem<Scalar>& prob,
                   const SchemeParams<Scalar>& params)
      : prob_(prob),
        params_(params),
        grid_(prob.spec.size(), prob.edge_length, params.dx),
        g_(make_numerical_hamiltonian(prob.spec, prob.consts)),
        eps_(params.eps),
        B_(prob.B),
        M_(prob.consts.M),
        L1_(prob.consts.L1),
        tol_(params.tolerance(prob.consts)),
        max_sweeps_(params.max_sweeps),
        source_(grid_.size()),
        far_(prob.spec.size()) {
    const int n = grid_.nodes_per_edge();
    source_[0] = 0;
    for (int i = 0; i < grid_.edges(); ++i) {
      for (int m = 1; m <= n; ++m) {
        source_[grid_.index(i, m)] = prob.spec[i].f(Scalar(0), grid_.coordinate(m));
      }
      far_[i] = prob.far_end(i, grid_.far_coordinate());
      using std::abs;
      if (!(abs(far_[i]) <= M_ + Scalar(1))) {
        std::ostringstream ss;
        ss << "far-end value " << far_[i] << " on edge " << i
           << " lies outside [-M-1, M+1] with M = " << M_;
        throw InvalidInput(ss.str());
      }
    }
  }

  const NetworkGrid<Scalar>& grid() const { return grid_; }
  const NumericalHamiltonian<Scalar>& numerical_hamiltonian() const { return g_; }
  Scalar tolerance() const { return tol_; }
  Scalar far_value(int edge) const { return far_[edge]; }
  Scalar source(int edge, int m) const { return source_[grid_.index(edge, m)]; }

  // v + F_i((left - v)/dx, (v - right)/dx) - f_i at interior node m.
  Scalar node_map(int edge, int m, Scalar left, Scalar v, Scalar right) const {
    const Scalar dx = grid_.dx();
    const Scalar p1 = (left - v) / dx;
    const Scalar p2 = (v - right) / dx;
    return v - (eps_ / dx) * (p1 - p2) + g_(edge, p1, p2) -
           source_[grid_.index(edge, m)];
  }

  Scalar junction_value(const GridFunction<Scalar>& u) const {
    Scalar sum = 0;
    for (int i = 0; i < grid_.edges(); ++i) sum += u(i, 1);
    return (sum + B_ * grid_.dx()) / Scalar(grid_.edges());
  }

  // Solves the interior equation at (edge, m) for U(m), neighbours fixed.
  Scalar node_update(const GridFunction<Scalar>& u, int edge, int m) const {
    if (m < 1 || m > grid_.nodes_per_edge() - 1) {
      std::ostringstream ss;
      ss << "node_update needs an interior node, got m = " << m;
      throw IndexError(ss.str());
    }
    const Scalar left = u(edge, m - 1);
    const Scalar right = u(edge, m + 1);
    auto phi = [&](Scalar v) { return node_map(edge, m, left, v, right); };
    const Scalar tol = root_tolerance(u(edge, m));

    // The map has slope in [1, S] under the CFL bound, so one residual
    // evaluation at the current value already brackets the root.
    const Scalar v0 = u(edge, m);
    const Scalar r0 = phi(v0);
    using std::abs;
    if (abs(r0) <= tol) return v0;
    if (r0 > 0) {
      const Scalar lo = v0 - r0;
      const Scalar flo = phi(lo);
      if (flo <= 0) {
        return flo == 0 ? lo : detail::increasing_root(phi, lo, v0, flo, r0, tol);
      }
    } else {
      const Scalar hi = v0 - r0;
      const Scalar fhi = phi(hi);
      if (fhi >= 0) {
        return fhi == 0 ? hi : detail::increasing_root(phi, v0, hi, r0, fhi, tol);
      }
    }
    return bracketed_update(phi, edge, m, tol);
  }

  GridFunction<Scalar> residual(const GridFunction<Scalar>& u) const {
    GridFunction<Scalar> r(grid_);
    const int n = grid_.nodes_per_edge();
    r.junction() = u.junction() - junction_value(u);
    for (int i = 0; i < grid_.edges(); ++i) {
      for (int m = 1; m < n; ++m) {
        r(i, m) = node_map(i, m, u(i, m - 1), u(i, m), u(i, m + 1));
      }
      r(i, n) = u(i, n) - far_[i];
    }
    return r;
  }

  std::pair<GridFunction<Scalar>, SolveStats> solve(
      Seed seed, StationaryMethod method = StationaryMethod::gauss_seidel,
      const std::function<void(const GridFunction<Scalar>&)>& on_sweep = {}) const {
    GridFunction<Scalar> u(grid_, seed == Seed::lower ? -M_ : M_);
    SolveStats stats;
    if (method == StationaryMethod::newton) {
      if (grid_.nodes_per_edge() >= kNestedIterationNodes) u = coarse_guess(seed);
      impose_far_end(u);
      stats.newton_iterations = newton(u);
    }
    impose_far_end(u);
    sweep_until_converged(u, seed, stats, on_sweep);
    return {std::move(u), stats};
  }

 private:
  static constexpr int kNestedIterationNodes = 128;

  // Newton start on fine grids: the solution at twice the spacing (eps
  // raised to the CFL bound there if needed), interpolated to this grid.
  GridFunction<Scalar> coarse_guess(Seed seed) const {
    SchemeParams<Scalar> coarse = params_;
    coarse.dx = Scalar(2) * params_.dx;
    coarse.eps = std::max(params_.eps, Scalar(2) * L1_ * coarse.dx);
    const auto [uc, stats] =
        StationaryScheme(prob_, coarse).solve(seed, StationaryMethod::newton);
    GridFunction<Scalar> u(grid_);
    u.junction() = uc.junction();
    for (int i = 0; i < grid_.edges(); ++i) {
      for (int m = 1; m <= grid_.nodes_per_edge(); ++m) {
        u(i, m) = interpolate(uc, i, grid_.coordinate(m));
      }
    }
    return u;
  }

  Scalar root_tolerance(Scalar v) const {
    using std::abs;
    return std::max(Scalar(1e-13),
                    Scalar(4) * std::numeric_limits<Scalar>::epsilon() * abs(v));
  }

  template <typename Fn>
  Scalar bracketed_update(Fn& phi, int edge, int m, Scalar tol) const {
    Scalar lo = -(M_ + Scalar(1));
    Scalar hi = M_ + Scalar(1);
    Scalar flo = phi(lo);
    Scalar fhi = phi(hi);
    if (flo > 0 || fhi < 0) {
      lo *= Scalar(10);
      hi *= Scalar(10);
      flo = phi(lo);
      fhi = phi(hi);
    }
    if (flo > 0 || fhi < 0) {
      std::ostringstream ss;
      ss << "no sign change for node (" << edge << ", " << m
         << ") on [" << lo << ", " << hi << "]; check CFL and cap settings";
      throw BracketFailure(ss.str());
    }
    if (flo == 0) return lo;
    if (fhi == 0) return hi;
    return detail::increasing_root(phi, lo, hi, flo, fhi, tol);
  }

  void impose_far_end(GridFunction<Scalar>& u) const {
    for (int i = 0; i < grid_.edges(); ++i) u(i, grid_.nodes_per_edge()) = far_[i];
  }

  void sweep_until_converged(
      GridFunction<Scalar>& u, Seed seed, SolveStats& stats,
      const std::function<void(const GridFunction<Scalar>&)>& on_sweep) const {
    using std::abs;
    const int n = grid_.nodes_per_edge();
    const Scalar slack = Scalar(1e-12) * (Scalar(1) + M_);
    Scalar previous = std::numeric_limits<Scalar>::infinity();
    for (long sweep = 1; sweep <= max_sweeps_; ++sweep) {
      Scalar change = 0;
      auto record = [&](Scalar old_value, Scalar new_value) {
        const Scalar d = new_value - old_value;
        if ((seed == Seed::lower && d < -slack) || (seed == Seed::upper && d > slack)) {
          stats.monotone = false;
        }
        change = std::max(change, abs(d));
      };
      for (int i = 0; i < grid_.edges(); ++i) {
        for (int m = n - 1; m >= 1; --m) {
          const Scalar v = node_update(u, i, m);
          record(u(i, m), v);
          u(i, m) = v;
        }
      }
      const Scalar j = junction_value(u);
      record(u.junction(), j);
      u.junction() = j;
      impose_far_end(u);
      if (on_sweep) on_sweep(u);

      stats.sweeps = sweep;
      stats.final_update = static_cast<double>(change);
      // Stop once the sweep update is below tolerance and the geometric
      // tail estimate rho/(1 - rho) * change is a tenth of it.
      const Scalar noise = Scalar(64) * std::numeric_limits<Scalar>::epsilon() *
                           (Scalar(1) + u.values().cwiseAbs().maxCoeff());
      if (change <= noise) return;
      if (change < tol_ && sweep >= 2) {
        const Scalar rho = std::min(change / previous, Scalar(1) - Scalar(1e-12));
        if (change * rho / (Scalar(1) - rho) <= tol_ / Scalar(10)) return;
      }
      previous = change;
    }
    std::ostringstream ss;
    ss << "Gauss-Seidel did not converge in " << max_sweeps_
       << " sweeps (last update " << stats.final_update << ", tolerance " << tol_ << ")";
    throw NoConvergence(ss.str());
  }

  Scalar residual_norm(const GridFunction<Scalar>& u) const {
    return residual(u).values().cwiseAbs().maxCoeff();
  }

  // Damped Newton on the full system with a generalized Jacobian; the
  // Gauss-Seidel pass that follows certifies the result either way.
  int newton(GridFunction<Scalar>& u) const {
    using SpMat = Eigen::SparseMatrix<Scalar>;
    const int n = grid_.nodes_per_edge();
    const Scalar dx = grid_.dx();
    const Scalar target = Scalar(1e-3) * tol_;
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    bool analyzed = false;
    Scalar rnorm = residual_norm(u);
    int it = 0;
    for (; it < 100 && rnorm > target; ++it) {
      std::vector<Eigen::Triplet<Scalar>> triplets;
      triplets.reserve(static_cast<std::size_t>(3 * grid_.size() + grid_.edges()));
      triplets.emplace_back(0, 0, Scalar(1));
      for (int i = 0; i < grid_.edges(); ++i) {
        triplets.emplace_back(0, grid_.index(i, 1), -Scalar(1) / Scalar(grid_.edges()));
        for (int m = 1; m < n; ++m) {
          const Scalar p1 = (u(i, m - 1) - u(i, m)) / dx;
          const Scalar p2 = (u(i, m) - u(i, m + 1)) / dx;
          const auto [g1, g2] = g_.gradient(i, p1, p2);
          const Scalar a = -eps_ / dx + g1;
          const Scalar b = eps_ / dx + g2;
          const auto row = grid_.index(i, m);
          triplets.emplace_back(row, row, Scalar(1) + (b - a) / dx);
          triplets.emplace_back(row, grid_.index(i, m - 1), a / dx);
          triplets.emplace_back(row, grid_.index(i, m + 1), -b / dx);
        }
        const auto far = grid_.index(i, n);
        triplets.emplace_back(far, far, Scalar(1));
      }
      SpMat jac(grid_.size(), grid_.size());
      jac.setFromTriplets(triplets.begin(), triplets.end());
      jac.makeCompressed();
      if (!analyzed) {
        lu.analyzePattern(jac);
        analyzed = true;
      }
      lu.factorize(jac);
      if (lu.info() != Eigen::Success) break;
      const Vector step = lu.solve(-residual(u).values());
      if (lu.info() != Eigen::Success || !step.allFinite()) break;

      bool accepted = false;
      for (Scalar lambda = 1; lambda >= Scalar(1.0 / 1024); lambda /= 2) {
        GridFunction<Scalar> trial(grid_, Vector(u.values() + lambda * step));
        const Scalar tnorm = residual_norm(trial);
        if (tnorm <= (Scalar(1) - Scalar(1e-4) * lambda) * rnorm) {
          u = std::move(trial);
          rnorm = tnorm;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    return it;
  }

  StationaryProblem<Scalar> prob_;
  SchemeParams<Scalar> params_;
  NetworkGrid<Scalar> grid_;
  NumericalHamiltonian<Scalar> g_;
  Scalar eps_;
  Scalar B_;
  Scalar M_;
  Scalar L1_;
  Scalar tol_;
  long max_sweeps_;
  Vector source_;
  std::vector<Scalar> far_;
};

template <typename Scalar>
GridFunction<Scalar> stationary_residual(const GridFunction<Scalar>& u,
                                         const StationaryProblem<Scalar>& prob,
                                         const SchemeParams<Scalar>& params) {
  StationaryScheme<Scalar> scheme(prob, params);
  if (!(u.grid() == scheme.grid())) {
    throw ShapeMismatch("grid function does not live on the scheme grid");
  }
  return scheme.residual(u);
}

template <typename Scalar>
Scalar node_update(const GridFunction<Scalar>& u, int edge, int m,
                   const StationaryProblem<Scalar>& prob,
                   const SchemeParams<Scalar>& params) {
  return StationaryScheme<Scalar>(prob, params).node_update(u, edge, m);
}

// Monotone Gauss-Seidel from the constant sub-solution -M (seed lower) or
// super-solution +M (seed upper). With method newton, a damped Newton solve
// replaces most of the sweeping and Gauss-Seidel only certifies the result.
template <typename Scalar>
std::pair<GridFunction<Scalar>, SolveStats> solve_stationary(
    const StationaryProblem<Scalar>& prob, const SchemeParams<Scalar>& params,
    Seed seed = Seed::lower,
    StationaryMethod method = StationaryMethod::gauss_seidel) {
  check_cfl_stationary(params, prob.consts);
  return StationaryScheme<Scalar>(prob, params).solve(seed, method);
}

// max |U(m+1) - U(m)| over every edge, junction-to-1_i pairs included.
template <typename Scalar>
Scalar discrete_lipschitz(const GridFunction<Scalar>& u) {
  using std::abs;
  const auto& g = u.grid();
  Scalar lip = 0;
  for (int i = 0; i < g.edges(); ++i) {
    for (int m = 0; m < g.nodes_per_edge(); ++m) {
      lip = std::max(lip, abs(u(i, m + 1) - u(i, m)));
    }
  }
  return lip;
}

// Replaces the far-end data of `prob` by the solution of the same problem on
// a doubled domain pinned to zero, read at this grid's far node.
template <typename Scalar>
StationaryProblem<Scalar> with_presolved_far_end(StationaryProblem<Scalar> prob,
                                                 const SchemeParams<Scalar>& params) {
  StationaryProblem<Scalar> longer = prob;
  longer.edge_length = Scalar(2) * prob.edge_length;
  longer.far_end = [](int, Scalar) { return Scalar(0); };
  auto [u, stats] = solve_stationary(longer, params, Seed::lower, StationaryMethod::newton);
  const NetworkGrid<Scalar> grid(prob.spec.size(), prob.edge_length, params.dx);
  std::vector<Scalar> values(prob.spec.size());
  for (int i = 0; i < prob.spec.size(); ++i) {
    values[i] = interpolate(u, i, grid.far_coordinate());
  }
  prob.far_end = [values](int edge, Scalar) { return values[edge]; };
  return prob;
}

}  // namespace hjnet

#endif  // HJNET_STATIONARY_HPP_
