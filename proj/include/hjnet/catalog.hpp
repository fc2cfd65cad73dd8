#ifndef HJNET_CATALOG_HPP_
#define HJNET_CATALOG_HPP_

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hjnet/errors.hpp"
#include "hjnet/hamiltonian.hpp"

namespace hjnet {

// Named Hamiltonians addressable from config files:
//   abs                 H(p) = |p|
//   quadratic           H(p) = p^2
//   poly                H(p) = sum_k a_k p^k   (coefficients a_0, a_1, ...)
//   shifted_quadratic   H(p) = (p - a)^2       (offset a)
struct HamiltonianEntry {
  std::string name = "quadratic";
  std::vector<double> coefficients;
  double offset = 0.0;

  bool operator==(const HamiltonianEntry&) const = default;
};

// Named sources f_i(t, x) (time-independent):
//   zero           f = 0
//   constant       f = value
//   sin_profile    f_i = c_i sin(x), one coefficient per edge
//   custom_table   piecewise linear in x, read from a CSV file with
//                  columns edge,x,value (edge is 1-based)
struct SourceEntry {
  std::string name = "zero";
  double value = 0.0;
  std::vector<double> coefficients;
  std::string table;

  bool operator==(const SourceEntry&) const = default;
};

template <typename Scalar = double>
struct CatalogHamiltonian {
  std::function<Scalar(Scalar)> H;
  std::function<Scalar(Scalar)> dH;
};

template <typename Scalar = double>
CatalogHamiltonian<Scalar> make_catalog_hamiltonian(const HamiltonianEntry& entry) {
  using std::abs;
  if (entry.name == "abs") {
    return {[](Scalar p) { return abs(p); },
            [](Scalar p) { return p > 0 ? Scalar(1) : (p < 0 ? Scalar(-1) : Scalar(0)); }};
  }
  if (entry.name == "quadratic") {
    return {[](Scalar p) { return p * p; }, [](Scalar p) { return Scalar(2) * p; }};
  }
  if (entry.name == "shifted_quadratic") {
    const Scalar a = Scalar(entry.offset);
    return {[a](Scalar p) { return (p - a) * (p - a); },
            [a](Scalar p) { return Scalar(2) * (p - a); }};
  }
  if (entry.name == "poly") {
    if (entry.coefficients.empty()) {
      throw InvalidInput("hamiltonian 'poly' needs a coefficient list");
    }
    std::vector<Scalar> a(entry.coefficients.begin(), entry.coefficients.end());
    auto value = [a](Scalar p) {
      Scalar acc = 0;
      for (auto it = a.rbegin(); it != a.rend(); ++it) acc = acc * p + *it;
      return acc;
    };
    auto slope = [a](Scalar p) {
      Scalar acc = 0;
      for (std::size_t k = a.size() - 1; k >= 1; --k) acc = acc * p + Scalar(k) * a[k];
      return acc;
    };
    return {value, slope};
  }
  throw InvalidInput("unknown hamiltonian '" + entry.name + "'");
}

namespace detail {

template <typename Scalar>
struct PiecewiseLinear {
  std::vector<Scalar> xs;
  std::vector<Scalar> ys;

  Scalar operator()(Scalar x) const {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - xs.begin());
    const Scalar w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return (Scalar(1) - w) * ys[k - 1] + w * ys[k];
  }

  Scalar lipschitz() const {
    using std::abs;
    Scalar lip = 0;
    for (std::size_t k = 1; k < xs.size(); ++k) {
      lip = std::max(lip, abs(ys[k] - ys[k - 1]) / (xs[k] - xs[k - 1]));
    }
    return lip;
  }
};

template <typename Scalar>
std::vector<PiecewiseLinear<Scalar>> load_source_table(const std::string& path,
                                                       int edges) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open source table '" + path + "'");
  std::vector<std::vector<std::pair<Scalar, Scalar>>> points(edges);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    int edge = 0;
    double x = 0, v = 0;
    if (!(row >> edge >> x >> v)) {
      if (line_no == 1) continue;  // header
      throw InvalidInput("malformed row " + std::to_string(line_no) + " in '" + path + "'");
    }
    if (edge < 1 || edge > edges) {
      throw InvalidInput("edge " + std::to_string(edge) + " out of range in '" + path + "'");
    }
    points[edge - 1].emplace_back(Scalar(x), Scalar(v));
  }
  std::vector<PiecewiseLinear<Scalar>> tables(edges);
  for (int i = 0; i < edges; ++i) {
    auto& pts = points[i];
    if (pts.empty()) {
      throw InvalidInput("source table '" + path + "' has no rows for edge " +
                         std::to_string(i + 1));
    }
    std::sort(pts.begin(), pts.end());
    for (const auto& [x, v] : pts) {
      if (!tables[i].xs.empty() && tables[i].xs.back() == x) {
        throw InvalidInput("duplicate x in source table '" + path + "'");
      }
      tables[i].xs.push_back(x);
      tables[i].ys.push_back(v);
    }
  }
  return tables;
}

}  // namespace detail

// Per-edge f_i(t, x) with its sup and Lipschitz bounds where they are known
// in closed form.
template <typename Scalar = double>
struct CatalogSource {
  std::function<Scalar(Scalar, Scalar)> f;
  std::optional<Scalar> lipschitz;
};

template <typename Scalar = double>
std::vector<CatalogSource<Scalar>> make_catalog_source(const SourceEntry& entry,
                                                       int edges) {
  std::vector<CatalogSource<Scalar>> out;
  if (entry.name == "zero" || entry.name == "constant") {
    const Scalar v = entry.name == "zero" ? Scalar(0) : Scalar(entry.value);
    for (int i = 0; i < edges; ++i) {
      out.push_back({[v](Scalar, Scalar) { return v; }, Scalar(0)});
    }
    return out;
  }
  if (entry.name == "sin_profile") {
    if (static_cast<int>(entry.coefficients.size()) != edges) {
      throw InvalidInput("source 'sin_profile' needs one coefficient per edge");
    }
    for (int i = 0; i < edges; ++i) {
      const Scalar c = Scalar(entry.coefficients[i]);
      using std::abs;
      out.push_back({[c](Scalar, Scalar x) {
                       using std::sin;
                       return c * sin(x);
                     },
                     abs(c)});
    }
    return out;
  }
  if (entry.name == "custom_table") {
    auto tables = detail::load_source_table<Scalar>(entry.table, edges);
    for (int i = 0; i < edges; ++i) {
      auto table = std::make_shared<detail::PiecewiseLinear<Scalar>>(std::move(tables[i]));
      const Scalar lip = table->lipschitz();
      out.push_back({[table](Scalar, Scalar x) { return (*table)(x); }, lip});
    }
    return out;
  }
  throw InvalidInput("unknown source '" + entry.name + "'");
}

// The same catalog Hamiltonian on every edge, paired with a catalog source.
template <typename Scalar = double>
HamiltonianSpec<Scalar> make_catalog_spec(int edges, const HamiltonianEntry& h,
                                          const SourceEntry& source) {
  const auto ham = make_catalog_hamiltonian<Scalar>(h);
  const auto sources = make_catalog_source<Scalar>(source, edges);
  HamiltonianSpec<Scalar> spec;
  for (int i = 0; i < edges; ++i) {
    EdgeHamiltonian<Scalar> e;
    e.H = ham.H;
    e.dH = ham.dH;
    e.f = sources[i].f;
    e.f_lipschitz = sources[i].lipschitz;
    spec.edges.push_back(std::move(e));
  }
  return spec;
}

}  // namespace hjnet

#endif  // HJNET_CATALOG_HPP_
