#include <cmath>
#include <random>
#include <string>

#include "doctest.h"
#include "fixtures.hpp"

using namespace hjnet;

namespace {

std::string cfl_failure(const CauchyParams<double>& p, double L1, double L2) {
  SchemeConstants<double> k;
  k.L1 = L1;
  k.L2 = L2;
  try {
    check_cfl_cauchy(p, k);
  } catch (const CflViolation& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("Cauchy CFL check") {
  CauchyParams<double> p{0.1, 0.025, 0.2};
  CHECK(cfl_failure(p, 1, 4).empty());  // every inequality at equality
  p.dt = 0.05;
  CHECK(contains(cfl_failure(p, 1, 4), "2ε/Δx ≤ Δx/Δt"));
  p = {0.1, 0.025, 0.1};
  CHECK(contains(cfl_failure(p, 1, 4), "4L₁ ≤ 2ε/Δx"));
  p = {0.1, 0.025, 0.2};
  CHECK(contains(cfl_failure(p, 1, 3), "Δx/Δt ≤ L₂"));
  // 4L1 <= 2eps/dx <= dx/dt already implies dx/dt - eps/dx - 2L1 >= 0, so the
  // last inequality is never the first to fail.
  p = {0.1, 0.02, 0.2};
  CHECK(cfl_failure(p, 1, 10).empty());
  CHECK(contains(cfl_failure(p, 1.3, 10), "4L₁ ≤ 2ε/Δx"));
}

TEST_CASE("time step helper satisfies the CFL conditions") {
  for (double L1 : {0.3, 1.0, 4.083}) {
    for (double dx : {0.1, 0.0123, 0.001}) {
      for (double factor : {1.0, 1.5, 3.0}) {
        const double eps = 2 * L1 * dx * factor;
        const CauchyParams<double> p{dx, cauchy_time_step(dx, eps, L1), eps};
        CHECK(cfl_failure(p, L1, std::numeric_limits<double>::infinity()).empty());
      }
    }
  }
  CHECK(cauchy_step_count(1.0, 0.025) == 40);
  CHECK(cauchy_step_count(1.0, 0.03) == 34);
}

TEST_CASE("zero data stays zero") {
  const double dx = 0.1;
  const auto prob = fixtures::constant_cauchy(3, 1.0, "quadratic", 0.0, 1.0, dx,
                                              [](int, double) { return 0.0; }, 0.0);
  const auto params = fixtures::cauchy_params(prob.consts.L1, dx);
  const auto u = solve_cauchy(prob, params);
  for (const auto& level : u.levels()) CHECK(level.values().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("u = t is reproduced") {
  const double dx = 0.05;
  auto prob = fixtures::constant_cauchy(3, 1.0, "abs", 1.0, 1.0, dx, [](int, double) { return 0.0; }, 0.0);
  prob.far_end = [](int, double, double t) { return t; };
  const auto params = fixtures::cauchy_params(prob.consts.L1, dx);
  const auto u = solve_cauchy(prob, params);
  CHECK(u.steps() == cauchy_step_count(1.0, params.dt));
  double err = 0;
  for (int s = 0; s <= u.steps(); ++s) {
    err = std::max(err, (u.level(s).values().array() - s * params.dt).abs().maxCoeff());
  }
  CHECK(err <= 1e-10);
}

TEST_CASE("constant data compatible with the source stays constant") {
  const double dx = 0.05;
  auto prob = fixtures::constant_cauchy(4, 1.0, "shifted_quadratic", 0.0, 0.5, dx,
                                        [](int, double) { return 0.7; }, 0.0);
  // shifted_quadratic with offset 0 is p^2, so f = H(0) = 0
  const auto params = fixtures::cauchy_params(prob.consts.L1, dx);
  const auto u = solve_cauchy(prob, params);
  for (const auto& level : u.levels()) {
    CHECK((level.values().array() - 0.7).abs().maxCoeff() == 0.0);
  }
}

TEST_CASE("initial level is kept and the junction rule holds at every later level") {
  std::mt19937_64 rng(4);
  const auto data = fixtures::random_data(rng, 3);
  const double dx = 0.05;
  auto prob = fixtures::constant_cauchy(3, 1.0, "quadratic", 0.3, 0.5, dx, data, data.lipschitz);
  prob.B = 0.4;
  const auto params = fixtures::cauchy_params(prob.consts.L1, dx);
  const auto u = solve_cauchy(prob, params);
  const auto u0 = sample_function(u.grid(), [&](int i, double x) { return data(i, x); });
  CHECK(u.level(0).values() == u0.values());
  for (int s = 1; s <= u.steps(); ++s) {
    const auto& l = u.level(s);
    const double avg = (l(0, 1) + l(1, 1) + l(2, 1) + prob.B * dx) / 3;
    CHECK(std::abs(l.junction() - avg) <= 4 * std::numeric_limits<double>::epsilon() * (1 + std::abs(avg)));
  }
}

TEST_CASE("step_cauchy agrees with the march") {
  std::mt19937_64 rng(6);
  const auto data = fixtures::random_data(rng, 3);
  const double dx = 0.1;
  const auto prob = fixtures::constant_cauchy(3, 1.0, "quadratic", 0.0, 0.2, dx, data, data.lipschitz);
  const auto params = fixtures::cauchy_params(prob.consts.L1, dx);
  const auto u = solve_cauchy(prob, params);
  for (int s = 0; s < u.steps(); ++s) {
    CHECK(step_cauchy(u.level(s), s, prob, params).values() == u.level(s + 1).values());
  }
  CHECK_THROWS_AS(step_cauchy(GridFunction<double>(build_network_grid(3, 1.0, 0.05)), 0, prob, params),
                  ShapeMismatch);
}

TEST_CASE("solver guards") {
  const double dx = 0.01;
  const auto prob = fixtures::constant_cauchy(3, 1.0, "abs", 1.0, 10.0, dx, [](int, double) { return 0.0; }, 0.0);
  auto params = fixtures::cauchy_params(prob.consts.L1, dx);
  CHECK_THROWS_AS(solve_cauchy(prob, params, 1e5), ResourceGuard);
  params.dt *= 3;
  CHECK_THROWS_AS(solve_cauchy(prob, params), CflViolation);
  CHECK_THROWS_AS(march_cauchy(prob, params, [](int, const GridFunction<double>&) {}), CflViolation);
}

TEST_CASE("comparison: ordered initial data stay ordered") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const auto data = fixtures::random_data(rng, 3);
    std::uniform_real_distribution<double> gap(0, 0.2);
    const double g = gap(rng);
    auto upper = data;
    upper.c += g;
    const double dx = 0.05;
    auto lo = fixtures::constant_cauchy(3, 1.0, trial % 2 ? "abs" : "quadratic", 0.5, 0.5, dx, data,
                                        data.lipschitz);
    auto hi = lo;
    hi.u0 = upper;
    const auto params = fixtures::cauchy_params(lo.consts.L1, dx);
    const auto a = solve_cauchy(lo, params);
    const auto b = solve_cauchy(hi, params);
    double worst = -1;
    for (int s = 0; s <= a.steps(); ++s) {
      worst = std::max(worst, (a.level(s).values() - b.level(s).values()).maxCoeff());
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("space-time Lipschitz seminorm") {
  const auto g = build_network_grid(3, 1.0, 0.1);
  SpaceTimeGridFunction<double> c(g, 0.025), t(g, 0.025);
  for (int s = 0; s <= 10; ++s) {
    c.push_back(GridFunction<double>(g, 2.0));
    t.push_back(GridFunction<double>(g, s * 0.025));
  }
  CHECK(spacetime_lipschitz(c) == 0.0);
  CHECK(spacetime_lipschitz(t) == doctest::Approx(0.025));
}

TEST_CASE("space-time Lipschitz constant is stable under refinement") {
  const auto mp = manufactured_cauchy<double>({1, 1, -2}, {"quadratic", {}, 0}, 5.0, 1.0);
  std::vector<double> ratios;
  for (double dx : {0.1, 0.05, 0.025, 0.0125}) {
    const auto params = fixtures::cauchy_params(mp.problem.consts.L1, dx);
    SpacetimeLipschitz<double> lip;
    march_cauchy(mp.problem, params, [&](int, const GridFunction<double>& l) { lip.add(l); });
    ratios.push_back(lip.value() / std::max(dx, params.dt));
  }
  MESSAGE("Lip / max(dx, dt): " << ratios[0] << " " << ratios[1] << " " << ratios[2] << " " << ratios[3]);
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  CHECK(*hi / *lo < 2.0);
}

TEST_CASE("manufactured Cauchy self-convergence improves when dx halves") {
  const auto mp = manufactured_cauchy<double>({1, 1, -2}, {"quadratic", {}, 0}, 5.0, 1.0);
  const double T = 1.0, L1 = mp.problem.consts.L1;
  // final level with dt snapped so that every run ends exactly at T
  auto final_level = [&](double dx) {
    auto params = fixtures::cauchy_params(L1, dx);
    params.dt = T / std::ceil(T / params.dt);
    std::optional<GridFunction<double>> last;
    march_cauchy(mp.problem, params, [&](int, const GridFunction<double>& l) { last = l; });
    return *last;
  };
  const auto ref = final_level(0.003125);
  auto error = [&](double dx) {
    const auto u = final_level(dx);
    const int r = static_cast<int>(std::lround(dx / 0.003125));
    double e = 0;
    for (int i = 0; i < 3; ++i) {
      for (int m = 0; m <= u.grid().nodes_per_edge(); ++m) e = std::max(e, std::abs(u(i, m) - ref(i, r * m)));
    }
    return e;
  };
  const double e1 = error(0.025), e2 = error(0.0125);
  MESSAGE("errors at T against dx = 0.003125: " << e1 << " " << e2);
  CHECK(e2 < e1);
}
