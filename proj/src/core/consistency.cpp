#include <cmath>
#include <stdexcept>

#include "minpo/core/problem.hpp"
#include "minpo/fractional/l1.hpp"
#include "minpo/quadrature/gauss_legendre.hpp"

namespace minpo::core {

using diffkit::BatchMap;

ConsistencySet volterra_consistency_set(std::span<const double> outer_times, int n_nodes) {
  const auto rule = quadrature::gauss_legendre(n_nodes);
  ConsistencySet set;
  set.dims = 1;
  std::vector<BatchMap::Entry> entries;
  int inner = 0;
  for (std::size_t j = 0; j < outer_times.size(); ++j) {
    const double t = outer_times[j];
    if (t < 0.0) throw std::invalid_argument("consistency times must be non-negative");
    set.outer.push_back(t);
    const auto mapped = quadrature::map_to_interval(rule, 0.0, t);
    for (int i = 0; i < mapped.size(); ++i) {
      const double tau = mapped.nodes[static_cast<std::size_t>(i)];
      set.inner.push_back(tau);
      entries.push_back({static_cast<int>(j), inner++, mapped.weights[static_cast<std::size_t>(i)] * std::exp(tau - t)});
    }
  }
  set.map = BatchMap::from_entries(static_cast<int>(outer_times.size()), inner, std::move(entries));
  set.anchor = {0.0};
  return set;
}

ConsistencySet nested_consistency_set(std::span<const double> outer_points, int n_nodes) {
  if (outer_points.size() % 3 != 0) throw std::invalid_argument("outer points must be (x1, x2, t) triples");
  const auto rule = quadrature::gauss_legendre(n_nodes);
  ConsistencySet set;
  set.dims = 3;
  set.outer.assign(outer_points.begin(), outer_points.end());
  const int outer = static_cast<int>(outer_points.size() / 3);
  std::vector<BatchMap::Entry> entries;
  int inner = 0;
  for (int j = 0; j < outer; ++j) {
    const double x1 = outer_points[static_cast<std::size_t>(3 * j)];
    const double x2 = outer_points[static_cast<std::size_t>(3 * j + 1)];
    const double t = outer_points[static_cast<std::size_t>(3 * j + 2)];
    const auto r1 = quadrature::map_to_interval(rule, 0.0, x1);
    const auto r2 = quadrature::map_to_interval(rule, 0.0, x2);
    const auto rt = quadrature::map_to_interval(rule, 0.0, t);
    for (int k = 0; k < n_nodes; ++k) {
      const double tau = rt.nodes[static_cast<std::size_t>(k)];
      const double wt = rt.weights[static_cast<std::size_t>(k)] * std::exp(tau - t);
      for (int a = 0; a < n_nodes; ++a) {
        for (int b = 0; b < n_nodes; ++b) {
          set.inner.insert(set.inner.end(), {r1.nodes[static_cast<std::size_t>(a)], r2.nodes[static_cast<std::size_t>(b)], tau});
          entries.push_back({j, inner++, wt * r1.weights[static_cast<std::size_t>(a)] * r2.weights[static_cast<std::size_t>(b)]});
        }
      }
    }
  }
  set.map = BatchMap::from_entries(outer, inner, std::move(entries));
  return set;
}

ConsistencySet caputo_consistency_set(std::span<const double> x_samples, double alpha, int n_t) {
  const double dt = 1.0 / n_t;
  ConsistencySet set;
  set.dims = 2;
  std::vector<BatchMap::Entry> entries;
  const int columns = n_t + 1;
  for (std::size_t j = 0; j < x_samples.size(); ++j) {
    const double x = x_samples[j];
    for (int k = 0; k <= n_t; ++k) set.inner.insert(set.inner.end(), {x, k * dt});
  }
  int row = 0;
  for (std::size_t j = 0; j < x_samples.size(); ++j) {
    for (int n = 1; n <= n_t; ++n) {
      set.outer.insert(set.outer.end(), {x_samples[j], n * dt});
      const auto w = fractional::caputo_l1_weights(alpha, dt, n);
      for (int k = 0; k <= n; ++k) {
        entries.push_back({row, static_cast<int>(j) * columns + k, w[static_cast<std::size_t>(k)]});
      }
      ++row;
    }
  }
  set.map = BatchMap::from_entries(row, static_cast<int>(x_samples.size()) * columns, std::move(entries));
  return set;
}

ConsistencySet caputo_point_set(std::span<const double> outer_points, double alpha, int n_t) {
  if (outer_points.size() % 2 != 0) throw std::invalid_argument("outer points must be (x, t) pairs");
  ConsistencySet set;
  set.dims = 2;
  set.outer.assign(outer_points.begin(), outer_points.end());
  std::vector<BatchMap::Entry> entries;
  const int rows = static_cast<int>(outer_points.size() / 2);
  for (int r = 0; r < rows; ++r) {
    const double x = outer_points[2 * static_cast<std::size_t>(r)];
    const double t = outer_points[2 * static_cast<std::size_t>(r) + 1];
    if (!(t > 0.0)) throw std::invalid_argument("caputo_point_set needs t > 0");
    const double dt = t / n_t;
    const auto w = fractional::caputo_l1_weights(alpha, dt, n_t);
    for (int k = 0; k <= n_t; ++k) {
      set.inner.insert(set.inner.end(), {x, k * dt});
      entries.push_back({r, r * (n_t + 1) + k, w[static_cast<std::size_t>(k)]});
    }
  }
  set.map = BatchMap::from_entries(rows, rows * (n_t + 1), std::move(entries));
  return set;
}

Var memory_consistency_loss(const ProblemSpec& spec, const FieldSet& fields, Tape& tape, const ConsistencySet& set) {
  if (set.outer_count() == 0) throw std::invalid_argument("consistency set is empty");
  Var memory = memory_values(spec, fields, tape, set.outer);
  Var u = reconstructed_solution(spec, fields, tape, set.inner);
  Var loss = mean_square(memory - diffkit::batch_linear(u, set.map));
  if (!set.anchor.empty()) loss = loss + mean_square(memory_values(spec, fields, tape, set.anchor));
  return loss;
}

}  // namespace minpo::core
