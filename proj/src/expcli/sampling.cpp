#include <random>

#include "minpo/baselines/baselines.hpp"
#include "minpo/expcli/oracle.hpp"
#include "minpo/expcli/run.hpp"

namespace minpo::expcli {

using core::Experiment;

namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

 private:
  std::mt19937_64 rng_;
};

void add_datum(core::DataSet& set, const ExactOracle& oracle, std::initializer_list<double> point) {
  const std::vector<double> p(point);
  set.points.insert(set.points.end(), p.begin(), p.end());
  set.values.push_back(oracle.solution(p));
}

std::vector<double> linspace(int n, double lo, double hi) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return v;
}

}  // namespace

SampledData sample_points(const RunConfig& raw) {
  const RunConfig c = resolve(raw);
  const auto spec = make_problem(c);
  const ExactOracle oracle(spec);
  Sampler s(c.seed);
  SampledData d;
  d.data.dims = spec.dims();
  const bool aux = c.method == Method::apinn || c.method == Method::apikan;
  const bool fpde = c.method == Method::fpinn || c.method == Method::fpikan;

  switch (c.experiment) {
    case Experiment::exp1_forward:
    case Experiment::exp1_inverse: {
      const double a = c.horizon;
      for (int i = 0; i < c.n_res; ++i) d.residual.push_back(s.uniform(0.0, a));
      add_datum(d.data, oracle, {0.0});
      for (int i = 0; i < c.n_meas; ++i) add_datum(d.data, oracle, {s.uniform(0.0, a)});
      std::vector<double> outer;
      for (int i = 0; i < c.n_m; ++i) outer.push_back(s.uniform(0.0, a));
      if (!aux) d.memory = core::volterra_consistency_set(outer, c.n_i);
      break;
    }
    case Experiment::exp2: {
      for (int i = 0; i < 3 * c.n_res; ++i) d.residual.push_back(s.uniform(0.0, 1.0));
      // Initial face t = 0 and inflow faces x1 = 0, x2 = 0.
      for (int face : {2, 0, 1}) {
        for (int i = 0; i < c.n_bc; ++i) {
          double p[3] = {s.uniform(0.0, 1.0), s.uniform(0.0, 1.0), s.uniform(0.0, 1.0)};
          p[face] = 0.0;
          add_datum(d.data, oracle, {p[0], p[1], p[2]});
        }
      }
      std::vector<double> outer;
      for (int i = 0; i < 3 * c.n_m; ++i) outer.push_back(s.uniform(0.0, 1.0));
      if (!aux && !is_fd(c.method)) d.memory = core::nested_consistency_set(outer, c.n_i);
      break;
    }
    case Experiment::exp3: {
      const double dt = 1.0 / c.n_t;
      for (int i = 0; i < c.n_res; ++i) {
        d.residual.push_back(s.uniform(0.0, 1.0));
        d.residual.push_back(s.uniform(dt, 1.0));
      }
      for (int i = 0; i < c.n_bc; ++i) add_datum(d.data, oracle, {s.uniform(0.0, 1.0), 0.0});
      for (double x : {0.0, 1.0}) {
        for (int i = 0; i < c.n_bc; ++i) add_datum(d.data, oracle, {x, s.uniform(0.0, 1.0)});
      }
      std::vector<double> xs;
      for (int i = 0; i < c.n_m; ++i) xs.push_back(s.uniform(0.0, 1.0));
      if (fpde) {
        // The discretized residual lives on the shared temporal grid.
        d.grid = core::caputo_consistency_set(xs, spec.alpha, c.n_t);
      } else {
        // n_t random times per spatial sample, each with its own stencil on [0, t].
        std::vector<double> outer;
        for (double x : xs) {
          for (int n = 0; n < c.n_t; ++n) outer.insert(outer.end(), {x, s.uniform(dt, 1.0)});
        }
        d.memory = core::caputo_point_set(outer, spec.alpha, c.n_t);
      }
      break;
    }
  }
  if (aux) d.zero_sets = baselines::aux_zero_sets(spec, d.data);
  return d;
}

std::vector<double> evaluation_points(const RunConfig& raw) {
  const RunConfig c = resolve(raw);
  std::vector<double> p;
  switch (c.experiment) {
    case Experiment::exp1_forward:
    case Experiment::exp1_inverse:
      return linspace(1000, 0.0, c.horizon);
    case Experiment::exp2: {
      const auto g = linspace(41, 0.0, 1.0);
      for (double a : g)
        for (double b : g)
          for (double t : g) p.insert(p.end(), {a, b, t});
      return p;
    }
    case Experiment::exp3: {
      const auto g = linspace(101, 0.0, 1.0);
      for (double x : g)
        for (double t : g) p.insert(p.end(), {x, t});
      return p;
    }
  }
  return p;
}

}  // namespace minpo::expcli
