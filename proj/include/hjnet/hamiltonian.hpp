#ifndef HJNET_HAMILTONIAN_HPP_
#define HJNET_HAMILTONIAN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <utility>
#include <vector>

#include "hjnet/errors.hpp"
#include "hjnet/netgrid.hpp"

namespace hjnet {

// One edge of a separated Hamiltonian H_i(x, p) = H_i(p) - f_i(t, x).
template <typename Scalar = double>
struct EdgeHamiltonian {
  std::function<Scalar(Scalar)> H;
  // Derivative of H. Optional: left empty, a central difference stands in.
  std::function<Scalar(Scalar)> dH;
  // Source f_i(t, x); stationary problems call it with t = 0.
  std::function<Scalar(Scalar, Scalar)> f;
  // Supplied bound for sup |f_i|. Sampled when absent.
  std::optional<Scalar> sup_f;
  // Lipschitz bound of f_i in (t, x), when known.
  std::optional<Scalar> f_lipschitz;

  Scalar slope(Scalar p) const {
    if (dH) return dH(p);
    using std::abs;
    const Scalar h = Scalar(1e-7) * (Scalar(1) + abs(p));
    return (H(p + h) - H(p - h)) / (Scalar(2) * h);
  }
};

template <typename Scalar = double>
struct HamiltonianSpec {
  std::vector<EdgeHamiltonian<Scalar>> edges;

  int size() const { return static_cast<int>(edges.size()); }
  const EdgeHamiltonian<Scalar>& operator[](int i) const { return edges[i]; }
};

// M, the per-edge caps, the slope radius R and the two CFL constants.
template <typename Scalar = double>
struct SchemeConstants {
  Scalar M = 0;
  std::vector<Scalar> caps;  // cap_i = M + sup|f_i| + 1
  Scalar slope_radius = 0;
  Scalar L1 = 0;
  Scalar L2 = std::numeric_limits<Scalar>::infinity();

  Scalar max_cap() const {
    return caps.empty() ? Scalar(0) : *std::max_element(caps.begin(), caps.end());
  }
};

namespace detail {

// Nodes plus midpoints of the grid, i.e. coordinates -k*dx/2.
template <typename Scalar>
std::vector<Scalar> sample_coordinates(const NetworkGrid<Scalar>& grid) {
  std::vector<Scalar> xs;
  const int n = grid.nodes_per_edge();
  xs.reserve(2 * n + 1);
  for (int k = 0; k <= 2 * n; ++k) xs.push_back(-Scalar(k) * grid.dx() / Scalar(2));
  return xs;
}

}  // namespace detail

// M = max_i sup_x |H_i(0) - f_i(t, x)|, sampled at grid nodes and midpoints
// and at every requested time (stationary problems: t = 0 only).
template <typename Scalar>
Scalar sup_zero_level(const HamiltonianSpec<Scalar>& spec,
                      const NetworkGrid<Scalar>& grid,
                      const std::vector<Scalar>& times = {Scalar(0)}) {
  using std::abs;
  Scalar m = 0;
  const auto xs = detail::sample_coordinates(grid);
  for (const auto& e : spec.edges) {
    const Scalar h0 = e.H(Scalar(0));
    for (Scalar t : times) {
      for (Scalar x : xs) m = std::max(m, abs(h0 - e.f(t, x)));
    }
  }
  return m;
}

template <typename Scalar>
Scalar sup_source(const EdgeHamiltonian<Scalar>& e,
                  const NetworkGrid<Scalar>& grid,
                  const std::vector<Scalar>& times = {Scalar(0)}) {
  if (e.sup_f) return *e.sup_f;
  using std::abs;
  Scalar s = 0;
  for (Scalar t : times) {
    for (Scalar x : detail::sample_coordinates(grid)) s = std::max(s, abs(e.f(t, x)));
  }
  return s;
}

inline constexpr double kCoercivityLattice = 1e-3;
inline constexpr double kCoercivityLimit = 1e6;

// Smallest R* on a 1e-3 lattice with H_i(p) >= level for |p| >= R*, all i.
// An outer doubling scan finds a radius whose band [R, 4R] clears the level;
// the lattice is then walked down from there.
template <typename Scalar>
Scalar coercivity_radius(const HamiltonianSpec<Scalar>& spec, Scalar level) {
  auto clears = [&](Scalar p) {
    for (const auto& e : spec.edges) {
      if (!(e.H(p) >= level) || !(e.H(-p) >= level)) return false;
    }
    return true;
  };
  auto band_clears = [&](Scalar r) {
    const Scalar step = std::max(Scalar(kCoercivityLattice), r / Scalar(1e4));
    for (Scalar p = r; p <= Scalar(4) * r; p += step) {
      if (!clears(p)) return false;
    }
    return clears(Scalar(4) * r);
  };

  Scalar outer = Scalar(1);
  while (!band_clears(outer)) {
    outer *= Scalar(2);
    if (outer > Scalar(kCoercivityLimit)) {
      std::ostringstream ss;
      ss << "Hamiltonian does not reach level " << level << " for |p| <= "
         << kCoercivityLimit;
      throw NotCoercive(ss.str());
    }
  }

  // Lattice spacing grows with the radius so pathological inputs stay cheap.
  const Scalar step =
      std::max(Scalar(kCoercivityLattice), outer / Scalar(1e7));
  auto k = static_cast<std::int64_t>(std::ceil(outer / step));
  while (k > 0 && clears(Scalar(k - 1) * step)) --k;
  return Scalar(k) * step;
}

// Lipschitz constant of H on [-R, R], from the derivative when one is
// supplied and from difference quotients otherwise.
template <typename Scalar>
Scalar hamiltonian_lipschitz(const EdgeHamiltonian<Scalar>& e, Scalar radius,
                             int samples = 20000) {
  using std::abs;
  Scalar lip = 0;
  const Scalar h = Scalar(2) * radius / Scalar(samples);
  Scalar prev = e.H(-radius);
  for (int k = 1; k <= samples; ++k) {
    const Scalar p = -radius + Scalar(k) * h;
    const Scalar cur = e.H(p);
    lip = std::max(lip, abs(cur - prev) / h);
    prev = cur;
  }
  if (e.dH) {
    for (int k = 0; k <= samples; ++k) {
      lip = std::max(lip, abs(e.dH(-radius + Scalar(k) * h)));
    }
    lip = std::max({lip, abs(e.dH(radius)), abs(e.dH(-radius))});
  } else {
    lip *= Scalar(1.01);
  }
  return lip;
}

template <typename Scalar = double>
struct ConstantsOptions {
  std::optional<Scalar> M;  // analytic override of the sampled bound
  Scalar radius_margin = 1;
  std::vector<Scalar> times = {Scalar(0)};
  // Extra lower bound on R, e.g. the Lipschitz constant of initial data.
  Scalar min_radius = 0;
};

// Derives the scheme constants, sampling on `grid` (nodes + midpoints).
template <typename Scalar>
SchemeConstants<Scalar> derive_constants(
    const HamiltonianSpec<Scalar>& spec, const NetworkGrid<Scalar>& grid,
    const ConstantsOptions<Scalar>& opts = {}) {
  SchemeConstants<Scalar> c;
  c.M = opts.M ? *opts.M : sup_zero_level(spec, grid, opts.times);
  c.caps.reserve(spec.edges.size());
  for (const auto& e : spec.edges) {
    c.caps.push_back(c.M + sup_source(e, grid, opts.times) + Scalar(1));
  }
  c.slope_radius = std::max(coercivity_radius(spec, c.max_cap()) + opts.radius_margin,
                            opts.min_radius);
  Scalar lip = 0;
  for (const auto& e : spec.edges) {
    lip = std::max(lip, hamiltonian_lipschitz(e, c.slope_radius));
  }
  c.L1 = std::max(Scalar(0.5) * lip, std::numeric_limits<Scalar>::min());
  return c;
}

// G_i(p1, p2) per edge. The default construction is the capped central
// average min(H_i(clamp((p1 + p2)/2, -R, R)), cap_i); arbitrary two-slope
// functions can be wrapped for testing and certification.
template <typename Scalar = double>
class NumericalHamiltonian {
 public:
  using Flux = std::function<Scalar(Scalar, Scalar)>;

  static NumericalHamiltonian capped_central(const HamiltonianSpec<Scalar>& spec,
                                             std::vector<Scalar> caps,
                                             Scalar radius) {
    NumericalHamiltonian g;
    g.spec_ = spec;
    g.caps_ = std::move(caps);
    g.radius_ = radius;
    return g;
  }

  // Same flux on every edge.
  static NumericalHamiltonian custom(int edges, Flux flux) {
    NumericalHamiltonian g;
    g.custom_.assign(edges, std::move(flux));
    return g;
  }

  int edges() const {
    return custom_.empty() ? spec_.size() : static_cast<int>(custom_.size());
  }
  bool is_custom() const { return !custom_.empty(); }
  Scalar radius() const { return radius_; }
  const std::vector<Scalar>& caps() const { return caps_; }

  Scalar operator()(int edge, Scalar p1, Scalar p2) const {
    if (!custom_.empty()) return custom_[edge](p1, p2);
    const Scalar p = std::clamp((p1 + p2) / Scalar(2), -radius_, radius_);
    return std::min(spec_.edges[edge].H(p), caps_[edge]);
  }

  // A generalized gradient (dG/dp1, dG/dp2), exact on smooth pieces.
  std::pair<Scalar, Scalar> gradient(int edge, Scalar p1, Scalar p2) const {
    if (!custom_.empty()) {
      using std::abs;
      const Scalar h1 = Scalar(1e-7) * (Scalar(1) + abs(p1));
      const Scalar h2 = Scalar(1e-7) * (Scalar(1) + abs(p2));
      const auto& g = custom_[edge];
      return {(g(p1 + h1, p2) - g(p1 - h1, p2)) / (Scalar(2) * h1),
              (g(p1, p2 + h2) - g(p1, p2 - h2)) / (Scalar(2) * h2)};
    }
    const Scalar avg = (p1 + p2) / Scalar(2);
    if (avg <= -radius_ || avg >= radius_) return {Scalar(0), Scalar(0)};
    const auto& e = spec_.edges[edge];
    if (e.H(avg) >= caps_[edge]) return {Scalar(0), Scalar(0)};
    const Scalar d = Scalar(0.5) * e.slope(avg);
    return {d, d};
  }

 private:
  HamiltonianSpec<Scalar> spec_;
  std::vector<Scalar> caps_;
  Scalar radius_ = 0;
  std::vector<Flux> custom_;
};

template <typename Scalar>
void validate_constants(const HamiltonianSpec<Scalar>& spec,
                        const SchemeConstants<Scalar>& consts) {
  std::ostringstream ss;
  if (static_cast<int>(consts.caps.size()) != spec.size()) {
    ss << "expected " << spec.size() << " caps, got " << consts.caps.size();
    throw InvalidConstants(ss.str());
  }
  if (!(consts.M >= Scalar(0))) {
    ss << "M must be nonnegative, got " << consts.M;
    throw InvalidConstants(ss.str());
  }
  for (Scalar cap : consts.caps) {
    if (!(cap > consts.M)) {
      ss << "cap " << cap << " must exceed M = " << consts.M;
      throw InvalidConstants(ss.str());
    }
  }
  if (!(consts.L1 > Scalar(0))) {
    ss << "L1 must be positive, got " << consts.L1;
    throw InvalidConstants(ss.str());
  }
  const Scalar needed = coercivity_radius(spec, consts.max_cap());
  if (!(consts.slope_radius >= needed)) {
    ss << "slope radius " << consts.slope_radius
       << " is below the coercivity radius " << needed << " at level "
       << consts.max_cap();
    throw InvalidConstants(ss.str());
  }
}

template <typename Scalar>
NumericalHamiltonian<Scalar> make_numerical_hamiltonian(
    const HamiltonianSpec<Scalar>& spec, const SchemeConstants<Scalar>& consts) {
  validate_constants(spec, consts);
  return NumericalHamiltonian<Scalar>::capped_central(spec, consts.caps,
                                                      consts.slope_radius);
}

// Sampled per-argument Lipschitz constant of G on [-r, r]^2, inflated by 10%.
// Uses both wide random pairs and close pairs so that local kinks and global
// slopes are both seen.
template <typename Scalar>
Scalar estimate_lipschitz(const NumericalHamiltonian<Scalar>& g,
                          Scalar box_radius, int samples,
                          std::uint64_t seed = 12345) {
  if (samples < 1000) throw InvalidInput("estimate_lipschitz needs >= 1000 samples");
  using std::abs;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Scalar local = box_radius * Scalar(1e-4);
  Scalar best = 0;
  for (int e = 0; e < g.edges(); ++e) {
    for (int k = 0; k < samples; ++k) {
      const Scalar a = box_radius * Scalar(unit(rng));
      const Scalar b = box_radius * Scalar(unit(rng));
      const Scalar other = box_radius * Scalar(unit(rng));
      const Scalar c = std::clamp(a + local * Scalar(unit(rng)), -box_radius, box_radius);
      // Differences are credited only beyond their rounding error, which
      // would otherwise dominate the quotient of close pairs.
      auto quotient = [&](Scalar ga, Scalar gq, Scalar d) {
        const Scalar noise = Scalar(4) * std::numeric_limits<Scalar>::epsilon() *
                             (abs(ga) + abs(gq));
        return std::max(Scalar(0), abs(ga - gq) - noise) / d;
      };
      for (Scalar q : {b, c}) {
        if (q == a) continue;
        const Scalar d = abs(a - q);
        best = std::max(best, quotient(g(e, a, other), g(e, q, other), d));
        best = std::max(best, quotient(g(e, other, a), g(e, other, q), d));
      }
    }
  }
  return Scalar(1.1) * best;
}

// F_i(p1, p2) = -(eps/dx)(p1 - p2) + G_i(p1, p2).
template <typename Scalar>
Scalar flux_operator(const NumericalHamiltonian<Scalar>& g, Scalar eps,
                     Scalar dx, Scalar p1, Scalar p2, int edge) {
  return -(eps / dx) * (p1 - p2) + g(edge, p1, p2);
}

}  // namespace hjnet

#endif  // HJNET_HAMILTONIAN_HPP_
