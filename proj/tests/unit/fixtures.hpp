#ifndef HJNET_TESTS_FIXTURES_HPP_
#define HJNET_TESTS_FIXTURES_HPP_

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hjnet/hjnet.hpp"

namespace fixtures {

using hjnet::CauchyProblem;
using hjnet::StationaryProblem;

// u + H(u_x) = f with H from the catalog, constant f and constant far-end data.
inline StationaryProblem<double> constant_stationary(int K, double ell, const std::string& ham,
                                                     double f, double far, double dx) {
  StationaryProblem<double> p;
  p.spec = hjnet::make_catalog_spec<double>(K, {ham, {}, 0}, {"constant", f, {}, ""});
  p.consts = hjnet::derive_constants(p.spec, hjnet::build_network_grid(K, ell, dx));
  p.edge_length = ell;
  p.far_end = [far](int, double) { return far; };
  return p;
}

// A catalog problem with random sin_profile source and random B. The far end
// comes from the doubled-domain pre-solve: an arbitrary pin would put a
// one-cell boundary layer at the far node. The pre-solve sees the source on
// [-2 ell, 0], so the constants are sampled there.
inline StationaryProblem<double> random_stationary(std::mt19937_64& rng, int K, double ell,
                                                   double dx, const std::string& ham,
                                                   bool zero_flux = false) {
  std::uniform_real_distribution<double> coef(-1.5, 1.5);
  std::vector<double> c(static_cast<std::size_t>(K));
  for (auto& x : c) x = coef(rng);
  StationaryProblem<double> p;
  p.spec = hjnet::make_catalog_spec<double>(K, {ham, {}, 0}, {"sin_profile", 0, c, ""});
  p.consts = hjnet::derive_constants(p.spec, hjnet::build_network_grid(K, 2 * ell, dx));
  p.edge_length = ell;
  p.B = 0.5 * coef(rng);
  if (zero_flux) p.B = 0;
  hjnet::SchemeParams<double> params;
  params.dx = dx;
  params.eps = 2 * p.consts.L1 * dx;
  return hjnet::with_presolved_far_end(p, params);
}

// u_t + H(u_x) = f with constant f and initial data given per edge; the far
// end holds u0 unless far is supplied.
inline CauchyProblem<double> constant_cauchy(int K, double ell, const std::string& ham, double f,
                                             double T, double dx,
                                             std::function<double(int, double)> u0,
                                             double u0_lipschitz) {
  CauchyProblem<double> p;
  p.spec = hjnet::make_catalog_spec<double>(K, {ham, {}, 0}, {"constant", f, {}, ""});
  hjnet::ConstantsOptions<double> opts;
  opts.min_radius = u0_lipschitz + 1;
  p.consts = hjnet::derive_constants(p.spec, hjnet::build_network_grid(K, ell, dx), opts);
  p.edge_length = ell;
  p.T = T;
  p.u0 = std::move(u0);
  p.u0_lipschitz = u0_lipschitz;
  return p;
}

// Random Lipschitz initial data glued at the junction: a_i x + b_i sin(k_i x) + c.
struct RandomData {
  std::vector<double> a, b, k;
  double c = 0;
  double lipschitz = 0;

  double operator()(int i, double x) const {
    const auto j = static_cast<std::size_t>(i);
    return c + a[j] * x + b[j] * std::sin(k[j] * x);
  }
};

inline RandomData random_data(std::mt19937_64& rng, int K) {
  std::uniform_real_distribution<double> u(-1, 1);
  RandomData d;
  d.c = u(rng);
  for (int i = 0; i < K; ++i) {
    d.a.push_back(u(rng));
    d.b.push_back(0.5 * u(rng));
    d.k.push_back(1 + 3 * std::abs(u(rng)));
    d.lipschitz = std::max(d.lipschitz, std::abs(d.a.back()) + std::abs(d.b.back() * d.k.back()));
  }
  return d;
}

inline hjnet::SchemeParams<double> lowest_viscosity(const StationaryProblem<double>& p, double dx) {
  hjnet::SchemeParams<double> s;
  s.dx = dx;
  s.eps = 2 * p.consts.L1 * dx;
  return s;
}

inline hjnet::CauchyParams<double> cauchy_params(double L1, double dx) {
  hjnet::CauchyParams<double> c;
  c.dx = dx;
  c.eps = 2 * L1 * dx;
  c.dt = hjnet::cauchy_time_step(dx, c.eps, L1);
  return c;
}

}  // namespace fixtures

#endif  // HJNET_TESTS_FIXTURES_HPP_
