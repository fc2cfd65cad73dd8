#ifndef HJNET_CAUCHY_HPP_
#define HJNET_CAUCHY_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "hjnet/errors.hpp"
#include "hjnet/hamiltonian.hpp"
#include "hjnet/netgrid.hpp"
#include "hjnet/stationary.hpp"

namespace hjnet {

// f(t, x) = sum_k a_k(t) b_k(edge, x). When a problem supplies its source in
// this form the scheme tabulates b_k once and rebuilds each level with a few
// vector operations instead of one call per node.
template <typename Scalar = double>
struct SeparableSource {
  std::vector<std::function<Scalar(Scalar)>> time_factors;
  std::vector<std::function<Scalar(int, Scalar)>> space_factors;
};

// u_t + H_i(u_x) = f_i(t, x) on each edge with u(., 0) = u0, Kirchhoff flux B
// at the junction and Dirichlet data at the truncated far end.
template <typename Scalar = double>
struct CauchyProblem {
  HamiltonianSpec<Scalar> spec;
  SchemeConstants<Scalar> consts;
  Scalar edge_length = 1;
  Scalar T = 1;
  Scalar B = 0;
  std::function<Scalar(int, Scalar)> u0 = [](int, Scalar) { return Scalar(0); };
  // g(edge, x, t) at the far node. Left empty, u0 at the far node is held
  // constant in time.
  std::function<Scalar(int, Scalar, Scalar)> far_end;
  std::optional<Scalar> u0_lipschitz;
  // Optional fast path for the source; must agree with spec[i].f.
  std::optional<SeparableSource<Scalar>> separable_source;
  // Replaces the capped central G built from spec and consts.
  std::optional<NumericalHamiltonian<Scalar>> numerical_hamiltonian;
};

template <typename Scalar = double>
struct CauchyParams {
  Scalar dx = Scalar(0.1);
  Scalar dt = Scalar(0.025);
  Scalar eps = Scalar(0.2);
};

template <typename Scalar>
const CauchyParams<Scalar>& check_cfl_cauchy(const CauchyParams<Scalar>& params,
                                             const SchemeConstants<Scalar>& consts) {
  if (!(params.dx > 0) || !(params.dt > 0) || !(params.eps > 0)) {
    throw InvalidInput("dx, dt and eps must all be positive");
  }
  const Scalar L1 = consts.L1;
  const Scalar viscous = Scalar(2) * params.eps / params.dx;
  const Scalar ratio = params.dx / params.dt;
  auto fail = [&](const char* inequality, Scalar lhs, Scalar rhs) {
    std::ostringstream ss;
    ss << "CFL violated: " << inequality << " fails (" << lhs << " vs " << rhs << ")";
    throw CflViolation(ss.str());
  };
  if (!detail::leq(Scalar(4) * L1, viscous)) fail("4L₁ ≤ 2ε/Δx", Scalar(4) * L1, viscous);
  if (!detail::leq(viscous, ratio)) fail("2ε/Δx ≤ Δx/Δt", viscous, ratio);
  if (!detail::leq(ratio, consts.L2)) fail("Δx/Δt ≤ L₂", ratio, consts.L2);
  if (!detail::leq(Scalar(2) * L1 * params.dx, params.eps)) {
    fail("2L₁Δx ≤ ε", Scalar(2) * L1 * params.dx, params.eps);
  }
  const Scalar margin = ratio - params.eps / params.dx - Scalar(2) * L1;
  if (!detail::leq(params.eps / params.dx + Scalar(2) * L1, ratio)) {
    fail("Δx/Δt − ε/Δx − 2L₁ ≥ 0", margin, Scalar(0));
  }
  return params;
}

// Largest-ish time step satisfying every Cauchy CFL inequality for the given
// dx and eps, with a relative margin of 1e-6 on the binding one.
template <typename Scalar>
Scalar cauchy_time_step(Scalar dx, Scalar eps, Scalar L1,
                        Scalar margin = Scalar(1e-6)) {
  const Scalar binding = std::max(Scalar(2) * eps, eps + Scalar(2) * L1 * dx);
  return dx * dx / (binding + dx * margin);
}

template <typename Scalar>
int cauchy_step_count(Scalar T, Scalar dt) {
  // Slack so that T/dt = 40 does not become 41 through rounding.
  return static_cast<int>(std::ceil(T / dt * (Scalar(1) - Scalar(1e-12))));
}

template <typename Scalar = double>
class CauchyScheme {
 public:
  using Vector = typename GridFunction<Scalar>::Vector;

  CauchyScheme(const CauchyProblem<Scalar>& prob, const CauchyParams<Scalar>& params)
      : prob_(prob),
        grid_(prob.spec.size(), prob.edge_length, params.dx),
        g_(prob.numerical_hamiltonian ? *prob.numerical_hamiltonian
                                      : make_numerical_hamiltonian(prob.spec, prob.consts)),
        dt_(params.dt),
        eps_(params.eps) {
    if (prob.separable_source) {
      const auto& src = *prob.separable_source;
      if (src.time_factors.size() != src.space_factors.size()) {
        throw InvalidInput("separable source needs matching time and space factors");
      }
      for (const auto& b : src.space_factors) {
        Vector v = Vector::Zero(grid_.size());
        for (int i = 0; i < grid_.edges(); ++i) {
          for (int m = 1; m <= grid_.nodes_per_edge(); ++m) {
            v[grid_.index(i, m)] = b(i, grid_.coordinate(m));
          }
        }
        space_.push_back(std::move(v));
      }
    }
    far_initial_.resize(grid_.edges());
    for (int i = 0; i < grid_.edges(); ++i) {
      far_initial_[i] = prob.u0(i, grid_.far_coordinate());
    }
  }

  const NetworkGrid<Scalar>& grid() const { return grid_; }
  Scalar dt() const { return dt_; }
  int steps() const { return cauchy_step_count(prob_.T, dt_); }
  const NumericalHamiltonian<Scalar>& numerical_hamiltonian() const { return g_; }

  GridFunction<Scalar> initial() const {
    return sample_function(grid_, [&](int i, Scalar x) { return prob_.u0(i, x); });
  }

  Scalar far_value(int edge, Scalar t) const {
    if (!prob_.far_end) return far_initial_[edge];
    return prob_.far_end(edge, grid_.far_coordinate(), t);
  }

  // f(t, .) at every node; the junction entry is unused.
  void source_level(Scalar t, Vector& out) const {
    out.resize(grid_.size());
    if (prob_.separable_source) {
      out.setZero();
      const auto& src = *prob_.separable_source;
      for (std::size_t k = 0; k < space_.size(); ++k) out += src.time_factors[k](t) * space_[k];
      return;
    }
    out[0] = 0;
    for (int i = 0; i < grid_.edges(); ++i) {
      for (int m = 1; m <= grid_.nodes_per_edge(); ++m) {
        out[grid_.index(i, m)] = prob_.spec[i].f(t, grid_.coordinate(m));
      }
    }
  }

  // Level s -> level s+1: interior nodes, then far-end pins, then the
  // junction average over the freshly updated neighbours.
  void step(const GridFunction<Scalar>& u, int s, GridFunction<Scalar>& next,
            Vector& source) const {
    const Scalar t = Scalar(s) * dt_;
    source_level(t, source);
    step_with_source(u, s, next, source);
  }

  void step_with_source(const GridFunction<Scalar>& u, int s, GridFunction<Scalar>& next,
                        const Vector& source) const {
    const Scalar dx = grid_.dx();
    const Scalar visc = eps_ / dx;
    const int n = grid_.nodes_per_edge();
    const auto& in = u.values();
    auto& out = next.values();
    for (int i = 0; i < grid_.edges(); ++i) {
      for (int m = 1; m < n; ++m) {
        const auto k = grid_.index(i, m);
        const Scalar here = in[k];
        const Scalar left = in[grid_.index(i, m - 1)];
        const Scalar right = in[k + 1];
        const Scalar p1 = (left - here) / dx;
        const Scalar p2 = (here - right) / dx;
        const Scalar F = -visc * (p1 - p2) + g_(i, p1, p2);
        out[k] = here - dt_ * (F - source[k]);
      }
      out[grid_.index(i, n)] = far_value(i, Scalar(s + 1) * dt_);
    }
    Scalar sum = 0;
    for (int i = 0; i < grid_.edges(); ++i) sum += out[grid_.index(i, 1)];
    out[0] = (sum + prob_.B * dx) / Scalar(grid_.edges());
  }

  // Streams levels 0..N through `observer(s, level)` keeping two in memory.
  template <typename Observer>
  void march(Observer&& observer) const {
    GridFunction<Scalar> cur = initial();
    GridFunction<Scalar> next(grid_);
    Vector source;
    const int n = steps();
    observer(0, static_cast<const GridFunction<Scalar>&>(cur));
    for (int s = 0; s < n; ++s) {
      step(cur, s, next, source);
      std::swap(cur, next);
      observer(s + 1, static_cast<const GridFunction<Scalar>&>(cur));
    }
  }

 private:
  CauchyProblem<Scalar> prob_;
  NetworkGrid<Scalar> grid_;
  NumericalHamiltonian<Scalar> g_;
  Scalar dt_;
  Scalar eps_;
  std::vector<Vector> space_;
  std::vector<Scalar> far_initial_;
};

template <typename Scalar>
GridFunction<Scalar> step_cauchy(const GridFunction<Scalar>& u, int s,
                                 const CauchyProblem<Scalar>& prob,
                                 const CauchyParams<Scalar>& params) {
  CauchyScheme<Scalar> scheme(prob, params);
  if (!(u.grid() == scheme.grid())) {
    throw ShapeMismatch("grid function does not live on the scheme grid");
  }
  GridFunction<Scalar> next(scheme.grid());
  typename CauchyScheme<Scalar>::Vector source;
  scheme.step(u, s, next, source);
  return next;
}

inline constexpr double kDefaultStorageBudgetBytes = 2e9;

// Every level kept in memory; use march_cauchy for long runs.
template <typename Scalar>
SpaceTimeGridFunction<Scalar> solve_cauchy(const CauchyProblem<Scalar>& prob,
                                           const CauchyParams<Scalar>& params,
                                           double budget_bytes = kDefaultStorageBudgetBytes) {
  check_cfl_cauchy(params, prob.consts);
  CauchyScheme<Scalar> scheme(prob, params);
  const double bytes = double(scheme.steps() + 1) * double(scheme.grid().size()) * sizeof(Scalar);
  if (bytes > budget_bytes) {
    std::ostringstream ss;
    ss << "storing " << scheme.steps() + 1 << " levels of " << scheme.grid().size()
       << " nodes needs " << bytes << " bytes, budget is " << budget_bytes;
    throw ResourceGuard(ss.str());
  }
  SpaceTimeGridFunction<Scalar> out(scheme.grid(), params.dt);
  scheme.march([&](int, const GridFunction<Scalar>& level) { out.push_back(level); });
  return out;
}

template <typename Scalar, typename Observer>
void march_cauchy(const CauchyProblem<Scalar>& prob, const CauchyParams<Scalar>& params,
                  Observer&& observer) {
  check_cfl_cauchy(params, prob.consts);
  CauchyScheme<Scalar>(prob, params).march(std::forward<Observer>(observer));
}

// Running max of |U(m,s) - U(k,r)| over space and time neighbours, fed one
// level at a time.
template <typename Scalar = double>
class SpacetimeLipschitz {
 public:
  void add(const GridFunction<Scalar>& level) {
    value_ = std::max(value_, discrete_lipschitz(level));
    if (previous_) {
      value_ = std::max(value_, (level.values() - previous_->values()).cwiseAbs().maxCoeff());
    }
    previous_ = level;
  }
  Scalar value() const { return value_; }

 private:
  Scalar value_ = 0;
  std::optional<GridFunction<Scalar>> previous_;
};

template <typename Scalar>
Scalar spacetime_lipschitz(const SpaceTimeGridFunction<Scalar>& u) {
  SpacetimeLipschitz<Scalar> acc;
  for (const auto& level : u.levels()) acc.add(level);
  return acc.value();
}

}  // namespace hjnet

#endif  // HJNET_CAUCHY_HPP_
