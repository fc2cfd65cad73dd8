#include <cmath>
#include <vector>

#include "doctest.h"
#include "hjnet/netgrid.hpp"

using namespace hjnet;

TEST_CASE("grid node counts") {
  const auto a = build_network_grid(3, 5.0, 0.5);
  CHECK(a.nodes_per_edge() == 10);
  CHECK(a.size() == 31);
  const auto b = build_network_grid(2, 1.0, 0.25);
  CHECK(b.nodes_per_edge() == 4);
  CHECK(b.size() == 9);
}

TEST_CASE("grid preconditions") {
  CHECK_THROWS_AS(build_network_grid(1, 1.0, 0.1), InvalidGeometry);
  CHECK_THROWS_AS(build_network_grid(3, 1.0, 0.0), InvalidGeometry);
  CHECK_THROWS_AS(build_network_grid(3, -1.0, 0.1), InvalidGeometry);
  CHECK_THROWS_AS(build_network_grid(3, 1.0, 0.5), InvalidGeometry);  // only 2 nodes per edge
  CHECK_NOTHROW(build_network_grid(3, 0.3, 0.1));  // 0.3/0.1 rounds to 2.999...
}

TEST_CASE("network distance") {
  using P = NetworkPoint<double>;
  CHECK(network_distance(P{0, -1.0}, P{0, -3.0}) == doctest::Approx(2.0));
  CHECK(network_distance(P{0, -1.0}, P{1, -2.0}) == doctest::Approx(3.0));
  CHECK(network_distance(P{0, 0.0}, P{2, 0.0}) == 0.0);
}

TEST_CASE("network distance is a metric on grid nodes") {
  const auto g = build_network_grid(4, 1.2, 0.1);  // 49 nodes
  std::vector<NetworkPoint<double>> pts{{0, 0.0}};
  for (int i = 0; i < g.edges(); ++i) {
    for (int m = 1; m <= g.nodes_per_edge(); ++m) pts.push_back({i, g.coordinate(m)});
  }
  REQUIRE(pts.size() <= 50);
  for (const auto& p : pts) {
    for (const auto& q : pts) {
      const double d = network_distance(p, q);
      CHECK(d == network_distance(q, p));
      CHECK((d == 0.0) == (&p == &q));
      for (const auto& r : pts) {
        CHECK(network_distance(p, r) <= d + network_distance(q, r) + 1e-14);
      }
    }
  }
}

TEST_CASE("difference quotients") {
  const auto g = build_network_grid(2, 2.0, 0.5);
  GridFunction<double> u(g);
  for (int i = 0; i < 2; ++i) {
    for (int m = 1; m <= g.nodes_per_edge(); ++m) u(i, m) = m;
  }
  CHECK(diff_plus(u, 0, 1) == doctest::Approx(-2.0));
  CHECK(diff_minus(u, 0, 1) == doctest::Approx(-2.0));
  CHECK_THROWS_AS(diff_plus(u, 0, 0), IndexError);
  CHECK_THROWS_AS(diff_minus(u, 0, 0), IndexError);
  CHECK_THROWS_AS(diff_minus(u, 0, g.nodes_per_edge()), IndexError);
  CHECK_NOTHROW(diff_plus(u, 0, g.nodes_per_edge()));

  const GridFunction<double> c(g, 4.0);
  const auto lin = sample_function(g, [](int, double x) { return x; });
  for (int i = 0; i < 2; ++i) {
    for (int m = 1; m <= g.nodes_per_edge(); ++m) {
      CHECK(diff_plus(c, i, m) == 0.0);
      CHECK(diff_plus(lin, i, m) == doctest::Approx(1.0));
      if (m < g.nodes_per_edge()) {
        CHECK(diff_minus(c, i, m) == 0.0);
        CHECK(diff_minus(lin, i, m) == doctest::Approx(1.0));
      }
    }
  }
}

TEST_CASE("one-sided quotients converge at first order") {
  // max |D+u - u'| and |D-u - u'| for u = sin(2x) + x^2
  auto error = [](double dx) {
    const auto g = build_network_grid(3, 2.0, dx);
    const auto u = sample_function(g, [](int, double x) { return std::sin(2 * x) + x * x; });
    double e = 0;
    for (int i = 0; i < 3; ++i) {
      for (int m = 1; m < g.nodes_per_edge(); ++m) {
        const double x = g.coordinate(m);
        const double d = 2 * std::cos(2 * x) + 2 * x;
        e = std::max({e, std::abs(diff_plus(u, i, m) - d), std::abs(diff_minus(u, i, m) - d)});
      }
    }
    return e;
  };
  double prev = error(0.1);
  for (double dx : {0.05, 0.025, 0.0125}) {
    const double e = error(dx);
    CHECK(e / prev == doctest::Approx(0.5).epsilon(0.1));
    prev = e;
  }
}

TEST_CASE("sampling and gluing") {
  const auto g = build_network_grid(3, 1.0, 0.1);
  const auto seven = sample_function(g, [](int, double) { return 7.0; });
  CHECK(seven.values().minCoeff() == 7.0);
  CHECK(seven.values().maxCoeff() == 7.0);

  const std::vector<double> c{1.0, -0.5, 2.0};
  const auto s = sample_function(g, [&](int i, double x) { return c[i] * std::sin(x); });
  CHECK(s.junction() == 0.0);
  for (int i = 0; i < 3; ++i) {
    CHECK(s(i, 0) == s.junction());
    CHECK(s(i, 4) == c[i] * std::sin(-4 * g.dx()));
  }
  CHECK_THROWS_AS(sample_function(g, [](int i, double) { return double(i); }), JunctionMismatch);

  GridFunction<double> u(g);
  u(1, 0) = 3.0;  // writing through any edge moves the single junction datum
  for (int i = 0; i < 3; ++i) CHECK(u(i, 0) == 3.0);
}

TEST_CASE("space-time grid functions share one grid") {
  const auto g = build_network_grid(3, 1.0, 0.1);
  SpaceTimeGridFunction<double> u(g, 0.05);
  u.push_back(GridFunction<double>(g, 0.0));
  u.push_back(GridFunction<double>(g, 1.0));
  CHECK(u.steps() == 1);
  CHECK(u.time(1) == doctest::Approx(0.05));
  CHECK(u(2, 3, 1) == 1.0);
  CHECK_THROWS_AS(u.push_back(GridFunction<double>(build_network_grid(3, 1.0, 0.05))),
                  ShapeMismatch);
  CHECK_THROWS_AS(GridFunction<double>(g, Eigen::VectorXd::Zero(5)), ShapeMismatch);
}
