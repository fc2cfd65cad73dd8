#ifndef HJNET_NETGRID_HPP_
#define HJNET_NETGRID_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include "hjnet/errors.hpp"

namespace hjnet {

// A star network truncated to K edges of common length, discretized at
// spacing dx. Edges are 0-based in the API. Node (edge, m) sits at
// coordinate -m*dx on its edge; m == 0 is the junction, shared by all edges.
//
// Storage layout used by every grid function: index 0 is the junction, then
// edge 0 nodes m = 1..N, edge 1 nodes m = 1..N, and so on.
template <typename Scalar = double>
class NetworkGrid {
 public:
  NetworkGrid(int edges, Scalar edge_length, Scalar dx)
      : edges_(edges), edge_length_(edge_length), dx_(dx) {
    if (edges < 2) {
      std::ostringstream ss;
      ss << "network needs at least 2 edges, got K = " << edges;
      throw InvalidGeometry(ss.str());
    }
    if (!(edge_length > Scalar(0)) || !(dx > Scalar(0))) {
      std::ostringstream ss;
      ss << "edge length and dx must be positive, got l = " << edge_length
         << ", dx = " << dx;
      throw InvalidGeometry(ss.str());
    }
    // The relative slack keeps l/dx = 3 from landing on 2.9999999999999996.
    const Scalar ratio = edge_length / dx;
    const Scalar n = std::floor(ratio * (Scalar(1) + Scalar(1e-12)));
    if (!(n >= Scalar(3))) {
      std::ostringstream ss;
      ss << "floor(l/dx) must be at least 3, got l = " << edge_length
         << ", dx = " << dx;
      throw InvalidGeometry(ss.str());
    }
    if (n * Scalar(edges) > Scalar(std::numeric_limits<int>::max() / 2)) {
      throw InvalidGeometry("grid too large");
    }
    nodes_per_edge_ = static_cast<int>(n);
  }

  int edges() const { return edges_; }
  Scalar edge_length() const { return edge_length_; }
  Scalar dx() const { return dx_; }
  int nodes_per_edge() const { return nodes_per_edge_; }

  // Number of distinct nodes, counting the junction once.
  Eigen::Index size() const {
    return 1 + static_cast<Eigen::Index>(edges_) * nodes_per_edge_;
  }

  Eigen::Index index(int edge, int m) const {
    if (m == 0) return 0;
    return 1 + static_cast<Eigen::Index>(edge) * nodes_per_edge_ + (m - 1);
  }

  Eigen::Index checked_index(int edge, int m) const {
    if (edge < 0 || edge >= edges_ || m < 0 || m > nodes_per_edge_) {
      std::ostringstream ss;
      ss << "node (" << edge << ", " << m << ") outside grid with K = "
         << edges_ << ", N = " << nodes_per_edge_;
      throw IndexError(ss.str());
    }
    return index(edge, m);
  }

  Scalar coordinate(int m) const { return -Scalar(m) * dx_; }
  Scalar far_coordinate() const { return coordinate(nodes_per_edge_); }

  bool operator==(const NetworkGrid& other) const {
    return edges_ == other.edges_ && edge_length_ == other.edge_length_ &&
           dx_ == other.dx_ && nodes_per_edge_ == other.nodes_per_edge_;
  }

 private:
  int edges_;
  Scalar edge_length_;
  Scalar dx_;
  int nodes_per_edge_ = 0;
};

template <typename Scalar>
NetworkGrid<Scalar> build_network_grid(int edges, Scalar edge_length,
                                       Scalar dx) {
  return NetworkGrid<Scalar>(edges, edge_length, dx);
}

// A point on the (continuous) network. Any point with coordinate 0 is the
// junction, whatever its edge label.
template <typename Scalar = double>
struct NetworkPoint {
  int edge = 0;
  Scalar coordinate = 0;
};

// Geodesic distance on the star: |x - y| on a shared edge, otherwise the
// path runs through the junction. Junction points agree under either rule.
template <typename Scalar>
Scalar network_distance(const NetworkPoint<Scalar>& p,
                        const NetworkPoint<Scalar>& q) {
  using std::abs;
  if (p.edge == q.edge) return abs(p.coordinate - q.coordinate);
  return abs(p.coordinate) + abs(q.coordinate);
}

template <typename Scalar = double>
class GridFunction {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit GridFunction(const NetworkGrid<Scalar>& grid, Scalar fill = 0)
      : grid_(grid), values_(Vector::Constant(grid.size(), fill)) {}

  GridFunction(const NetworkGrid<Scalar>& grid, Vector values)
      : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      std::ostringstream ss;
      ss << "grid has " << grid_.size() << " nodes but " << values_.size()
         << " values were supplied";
      throw ShapeMismatch(ss.str());
    }
  }

  const NetworkGrid<Scalar>& grid() const { return grid_; }

  // (edge, 0) resolves to the single junction datum for every edge.
  Scalar operator()(int edge, int m) const {
    return values_[grid_.index(edge, m)];
  }
  Scalar& operator()(int edge, int m) { return values_[grid_.index(edge, m)]; }

  Scalar at(int edge, int m) const { return values_[grid_.checked_index(edge, m)]; }

  Scalar junction() const { return values_[0]; }
  Scalar& junction() { return values_[0]; }

  const Vector& values() const { return values_; }
  Vector& values() { return values_; }

 private:
  NetworkGrid<Scalar> grid_;
  Vector values_;
};

// D+U(m) = (U(m-1) - U(m)) / dx. Node m-1 is the junction side.
template <typename Scalar>
Scalar diff_plus(const GridFunction<Scalar>& u, int edge, int m) {
  const auto& g = u.grid();
  if (m < 1 || m > g.nodes_per_edge()) {
    std::ostringstream ss;
    ss << "D+ needs 1 <= m <= " << g.nodes_per_edge() << ", got m = " << m;
    throw IndexError(ss.str());
  }
  g.checked_index(edge, m);
  return (u(edge, m - 1) - u(edge, m)) / g.dx();
}

// D-U(m) = (U(m) - U(m+1)) / dx. Undefined at the junction (K forward
// neighbours) and at the far end (no node m+1).
template <typename Scalar>
Scalar diff_minus(const GridFunction<Scalar>& u, int edge, int m) {
  const auto& g = u.grid();
  if (m < 1 || m > g.nodes_per_edge() - 1) {
    std::ostringstream ss;
    ss << "D- needs 1 <= m <= " << g.nodes_per_edge() - 1
       << ", got m = " << m;
    throw IndexError(ss.str());
  }
  g.checked_index(edge, m);
  return (u(edge, m) - u(edge, m + 1)) / g.dx();
}

inline constexpr double kJunctionGlueTolerance = 1e-12;

// Restriction of a per-edge function g(edge, x) to the grid.
template <typename Scalar, typename Fn>
GridFunction<Scalar> sample_function(const NetworkGrid<Scalar>& grid,
                                     Fn&& g) {
  GridFunction<Scalar> u(grid);
  const Scalar at_junction = g(0, Scalar(0));
  for (int i = 1; i < grid.edges(); ++i) {
    using std::abs;
    const Scalar other = g(i, Scalar(0));
    if (!(abs(other - at_junction) <= Scalar(kJunctionGlueTolerance))) {
      std::ostringstream ss;
      ss << "edge values disagree at the junction: g(0, 0) = " << at_junction
         << ", g(" << i << ", 0) = " << other;
      throw JunctionMismatch(ss.str());
    }
  }
  u.junction() = at_junction;
  for (int i = 0; i < grid.edges(); ++i) {
    for (int m = 1; m <= grid.nodes_per_edge(); ++m) {
      u(i, m) = g(i, grid.coordinate(m));
    }
  }
  return u;
}

// Piecewise-linear reading of U at coordinate x on an edge. Points beyond the
// last node take the far-end value.
template <typename Scalar>
Scalar interpolate(const GridFunction<Scalar>& u, int edge, Scalar x) {
  const auto& g = u.grid();
  const Scalar s = -x / g.dx();
  if (!(s > Scalar(0))) return u.junction();
  const int n = g.nodes_per_edge();
  if (s >= Scalar(n)) return u(edge, n);
  const int m = static_cast<int>(std::floor(s));
  const Scalar w = s - Scalar(m);
  if (w == Scalar(0)) return u(edge, m);
  return (Scalar(1) - w) * u(edge, m) + w * u(edge, m + 1);
}

// One grid function per time level s = 0..N, all on the same grid.
template <typename Scalar = double>
class SpaceTimeGridFunction {
 public:
  SpaceTimeGridFunction(const NetworkGrid<Scalar>& grid, Scalar dt)
      : grid_(grid), dt_(dt) {
    if (!(dt > Scalar(0))) throw InvalidInput("time step must be positive");
  }

  const NetworkGrid<Scalar>& grid() const { return grid_; }
  Scalar dt() const { return dt_; }
  // Index of the last level N; levels() holds N + 1 entries.
  int steps() const { return static_cast<int>(levels_.size()) - 1; }
  Scalar time(int s) const { return Scalar(s) * dt_; }

  const std::vector<GridFunction<Scalar>>& levels() const { return levels_; }
  const GridFunction<Scalar>& level(int s) const { return levels_.at(s); }

  void push_back(GridFunction<Scalar> level) {
    if (!(level.grid() == grid_)) {
      throw ShapeMismatch("time level lives on a different grid");
    }
    levels_.push_back(std::move(level));
  }

  Scalar operator()(int edge, int m, int s) const {
    return levels_[s](edge, m);
  }

 private:
  NetworkGrid<Scalar> grid_;
  Scalar dt_;
  std::vector<GridFunction<Scalar>> levels_;
};

}  // namespace hjnet

#endif  // HJNET_NETGRID_HPP_
