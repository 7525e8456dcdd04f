#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "minpo/baselines/baselines.hpp"
#include "minpo/core/ide_residual.hpp"

using namespace minpo::baselines;
using minpo::core::ConsistencySet;
using minpo::core::FieldSet;
using minpo::diffkit::Shape;
namespace core = minpo::core;
namespace dk = minpo::diffkit;
namespace enc = minpo::encoders;

namespace {

const double kPi = std::numbers::pi;

Var zeros_like(Tape& t, Var x) {
  const int b = x.shape().batch;
  return t.constant(Shape{1, b}, std::vector<double>(static_cast<std::size_t>(b), 0.0));
}

Var join(std::initializer_list<Var> parts) {
  std::vector<Var> v(parts);
  return dk::concat_features(v);
}

// u = e^-t cosh(sqrt(kappa) t) and its memory e^-t sinh(sqrt(kappa) t) / sqrt(kappa).
Field volterra_exact(double kappa, bool zero_memory) {
  const double s = std::sqrt(kappa);
  return [s, zero_memory](Tape&, std::span<const Var> x) {
    Var u = dk::exp(-x[0]) * dk::cosh(x[0] * s);
    Var v = zero_memory ? x[0] * 0.0 : dk::exp(-x[0]) * dk::sinh(x[0] * s) * (1.0 / s);
    return join({u, v});
  };
}

// u = t sin x1 cos x2 with its cumulative integrals.
Field nested_exact() {
  return [](Tape&, std::span<const Var> x) {
    Var time = x[2] - 1.0 + dk::exp(-x[2]);
    Var u = x[2] * dk::sin(x[0]) * dk::cos(x[1]);
    Var v1 = time * dk::sin(x[0]) * dk::cos(x[1]);
    Var v2 = time * (1.0 - dk::cos(x[0])) * dk::cos(x[1]);
    Var v3 = time * (1.0 - dk::cos(x[0])) * dk::sin(x[1]);
    return join({u, v1, v2, v3});
  };
}

Field zero_outputs(int count) {
  return [count](Tape& t, std::span<const Var> x) {
    const int b = x[0].shape().batch;
    return t.constant(Shape{count, b}, std::vector<double>(static_cast<std::size_t>(count * b), 0.0));
  };
}

std::vector<double> random_points(int n, std::span<const double> lo, std::span<const double> hi, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> p;
  for (int i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < lo.size(); ++d) p.push_back(std::uniform_real_distribution<double>(lo[d], hi[d])(rng));
  }
  return p;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("auxiliary residuals of the closed-form Volterra fields vanish") {
  for (double kappa : {0.3, 0.8, 1.0}) {
    auto spec = core::make_volterra_spec(kappa, 1.0, false);
    auto pts = random_points(200, spec.lower, spec.upper, 3);
    Tape t;
    auto r = aux_residual(spec, volterra_exact(kappa, false), Var(), t, pts);
    CHECK(max_abs(r.equation.value()) <= 1e-9);
    REQUIRE(r.relations.size() == 1);
    CHECK(max_abs(r.relations[0].value()) <= 1e-9);
  }
  SUBCASE("a trainable strength enters the equation") {
    auto spec = core::make_volterra_spec(0.8, 1.0, true);
    auto pts = random_points(50, spec.lower, spec.upper, 4);
    Tape t;
    auto r = aux_residual(spec, volterra_exact(0.8, false), t.constant(0.8), t, pts);
    CHECK(max_abs(r.equation.value()) <= 1e-9);
  }
}

TEST_CASE("a vanishing auxiliary field is detected") {
  auto spec = core::make_volterra_spec(1.0, 1.0, false);
  auto pts = random_points(100, spec.lower, spec.upper, 5);
  Tape t;
  auto r = aux_residual(spec, volterra_exact(1.0, true), Var(), t, pts);
  const auto& rel = r.relations[0].value();
  for (int i = 0; i < 100; ++i) {
    const double ti = pts[static_cast<std::size_t>(i)];
    CHECK(rel[static_cast<std::size_t>(i)] == doctest::Approx(-std::exp(-ti) * std::cosh(ti)).epsilon(1e-13));
  }
  CHECK(max_abs(rel) > 0.1);
}

TEST_CASE("auxiliary cascade of the nested problem") {
  auto spec = core::make_nested_spec();
  auto pts = random_points(300, spec.lower, spec.upper, 6);
  SUBCASE("closed-form fields satisfy every relation") {
    Tape t;
    auto r = aux_residual(spec, nested_exact(), Var(), t, pts);
    CHECK(max_abs(r.equation.value()) <= 1e-9);
    REQUIRE(r.relations.size() == 3);
    for (const auto& rel : r.relations) CHECK(max_abs(rel.value()) <= 1e-9);
  }
  SUBCASE("zero networks leave the negated source") {
    Tape t;
    auto r = aux_residual(spec, zero_outputs(4), Var(), t, pts);
    for (int i = 0; i < 300; ++i) {
      const auto p = std::span<const double>(pts).subspan(static_cast<std::size_t>(3 * i), 3);
      CHECK(r.equation.value()[static_cast<std::size_t>(i)] == doctest::Approx(-spec.source(p)).epsilon(1e-14));
    }
    for (const auto& rel : r.relations) CHECK(max_abs(rel.value()) == 0.0);
  }
}

TEST_CASE("zero networks on the Volterra problem leave a zero residual") {
  auto spec = core::make_volterra_spec(0.5, 1.0, false);
  auto pts = random_points(20, spec.lower, spec.upper, 7);
  Tape t;
  auto r = aux_residual(spec, zero_outputs(2), Var(), t, pts);
  CHECK(max_abs(r.equation.value()) == 0.0);
}

TEST_CASE("auxiliary zero sets follow the faces of the data") {
  auto spec = core::make_nested_spec();
  DataSet data{3, {0.0, 0.5, 0.5, 0.5, 0.0, 0.5, 0.5, 0.5, 0.0, 0.2, 0.3, 0.4}, {0, 0, 0, 1}};
  auto sets = aux_zero_sets(spec, data);
  REQUIRE(sets.size() == 3);
  CHECK(sets[0].points == std::vector<double>{0.5, 0.5, 0.0});
  CHECK(sets[1].points == std::vector<double>{0.0, 0.5, 0.5});
  CHECK(sets[2].points == std::vector<double>{0.5, 0.0, 0.5});
  auto v = aux_zero_sets(core::make_volterra_spec(1.0, 1.0, false), data);
  REQUIRE(v.size() == 1);
  CHECK(v[0].points == std::vector<double>{0.0});
  CHECK_THROWS(aux_zero_sets(core::make_fractional_spec(0.5, 10), data));
}

TEST_CASE("auxiliary models share the residual path across encoder families") {
  auto spec = core::make_volterra_spec(1.0, 1.0, false);
  enc::InputScaler scaler(spec.lower, spec.upper);
  // A one-hidden-unit MLP and a degree-one cKAN emit the same affine map of tanh(scaled t).
  auto mlp = enc::Encoder::mlp({1, 1, 2}, scaler);
  auto kan = enc::Encoder::ckan({1, 2}, 1, scaler);
  const std::vector<double> kan_params{0.3, -0.7, 0.1, 1.2};
  const std::vector<double> mlp_params{1.0, 0.0, -0.7, 1.2, 0.3, 0.1};
  AuxModel a(spec, mlp);
  AuxModel b(spec, kan);
  AuxDatasets sets;
  sets.residual = random_points(64, spec.lower, spec.upper, 8);
  sets.data = DataSet{1, {0.0}, {1.0}};
  sets.zero_sets = aux_zero_sets(spec, sets.data);
  Tape ta;
  Tape tb;
  auto la = a.loss(ta, ta.parameter(mlp_params, 0), sets);
  auto lb = b.loss(tb, tb.parameter(kan_params, 0), sets);
  CHECK(la.ide.scalar() == doctest::Approx(lb.ide.scalar()).epsilon(1e-12));
  CHECK(la.memory.scalar() == doctest::Approx(lb.memory.scalar()).epsilon(1e-12));
  CHECK(la.data.scalar() == doctest::Approx(lb.data.scalar()).epsilon(1e-12));
  CHECK(la.total.scalar() > 0.0);
}

TEST_CASE("auxiliary model parameters and loss gradients") {
  auto spec = core::make_volterra_spec(0.8, 1.0, true);
  auto net = enc::Encoder::mlp({1, 8, 2}, enc::InputScaler(spec.lower, spec.upper));
  AuxModel model(spec, net);
  CHECK(model.parameter_count() == net.parameter_count() + 1);
  CHECK(model.kappa_index() == net.parameter_count());
  std::mt19937_64 rng(1);
  auto p = model.initial_parameters(rng);
  CHECK(p.back() == 0.5);
  AuxDatasets sets;
  sets.residual = random_points(40, spec.lower, spec.upper, 9);
  sets.data = DataSet{1, {0.0, 0.3, 0.6}, {1.0, 0.8, 0.7}};
  sets.zero_sets = aux_zero_sets(spec, sets.data);
  auto value = [&](const std::vector<double>& q) {
    Tape t;
    return model.loss(t, t.parameter(q, 0), sets).total.scalar();
  };
  Tape t;
  Var params = t.parameter(p, 0);
  auto l = model.loss(t, params, sets);
  t.backward(l.total);
  std::vector<double> g(p.size(), 0.0);
  t.accumulate_parameter_gradients(g);
  for (int i : {0, 3, model.kappa_index()}) {
    auto up = p;
    auto down = p;
    const double h = 1e-6;
    up[static_cast<std::size_t>(i)] += h;
    down[static_cast<std::size_t>(i)] -= h;
    CHECK(g[static_cast<std::size_t>(i)] == doctest::Approx((value(up) - value(down)) / (2 * h)).epsilon(1e-5));
  }
  CHECK_THROWS_AS(AuxModel(spec, enc::Encoder::mlp({1, 4, 1}, enc::InputScaler(spec.lower, spec.upper))),
                  std::invalid_argument);
}

TEST_CASE("discretized fractional residual examples") {
  const double alpha = 0.5;
  const std::vector<double> xs{0.1, 0.35, 0.5, 0.8};
  SUBCASE("exact solution leaves only the L1 truncation error") {
    auto spec = core::make_fractional_spec(alpha, 320);
    auto grid = core::caputo_consistency_set(xs, alpha, 320);
    Field u = [](Tape&, std::span<const Var> x) { return x[1] * x[1] * x[1] * dk::sin(x[0] * kPi); };
    Tape t;
    auto r = fpde_residual(spec, u, t, grid);
    CHECK(r.shape().batch == 4 * 320);
    CHECK(max_abs(r.value()) <= 5e-3);
  }
  auto spec = core::make_fractional_spec(alpha, 10);
  auto grid = core::caputo_consistency_set(xs, alpha, 10);
  SUBCASE("zero solution") {
    Tape t;
    auto r = fpde_residual(spec, [](Tape& tp, std::span<const Var> x) { return zeros_like(tp, x[0]); }, t, grid);
    for (int i = 0; i < grid.outer_count(); ++i) {
      const auto p = std::span<const double>(grid.outer).subspan(static_cast<std::size_t>(2 * i), 2);
      CHECK(r.value()[static_cast<std::size_t>(i)] == doctest::Approx(-spec.source(p)).epsilon(1e-14));
    }
  }
  SUBCASE("time-independent solution has no Caputo term") {
    Tape t;
    Field u = [](Tape&, std::span<const Var> x) { return dk::sin(x[0] * kPi); };
    auto r = fpde_residual(spec, u, t, grid);
    for (int i = 0; i < grid.outer_count(); ++i) {
      const auto p = std::span<const double>(grid.outer).subspan(static_cast<std::size_t>(2 * i), 2);
      const double expected = kPi * kPi * std::sin(kPi * p[0]) - spec.source(p);
      CHECK(r.value()[static_cast<std::size_t>(i)] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  Tape scratch;
  CHECK_THROWS_AS(fpde_residual(core::make_volterra_spec(1.0, 1.0, false), zero_outputs(1), scratch, grid),
                  std::invalid_argument);
}

TEST_CASE("discretized residual matches the operator residual when the memory is the L1 sum") {
  const double alpha = 0.3;
  const int n_t = 12;
  auto spec = core::make_fractional_spec(alpha, n_t);
  auto net = enc::Encoder::mlp({2, 10, 10, 1}, enc::InputScaler(spec.lower, spec.upper));
  std::mt19937_64 rng(21);
  const auto params = net.initial_parameters(rng);
  const std::vector<double> xs{0.2, 0.45, 0.9};
  auto grid = core::caputo_consistency_set(xs, alpha, n_t);

  // L1 sums of the plain network values, assembled point by point.
  std::vector<double> inner_values;
  for (std::size_t i = 0; i < grid.inner.size(); i += 2) {
    inner_values.push_back(net.evaluate(params, std::span<const double>(grid.inner).subspan(i, 2))[0]);
  }
  std::vector<double> l1(static_cast<std::size_t>(grid.outer_count()), 0.0);
  for (int r = 0; r < grid.map.out_batch; ++r) {
    for (int k = grid.map.row_start[static_cast<std::size_t>(r)]; k < grid.map.row_start[static_cast<std::size_t>(r + 1)]; ++k) {
      l1[static_cast<std::size_t>(r)] +=
          grid.map.weight[static_cast<std::size_t>(k)] * inner_values[static_cast<std::size_t>(grid.map.column[static_cast<std::size_t>(k)])];
    }
  }

  Tape t;
  Var theta = t.constant(Shape{net.parameter_count(), 1}, params);
  Field u = [&](Tape& tp, std::span<const Var> x) { return net.forward(tp, theta, x); };
  FieldSet fields;
  fields.inverse = [&](Tape& tp, std::span<const Var> x) {
    Var raw = u(tp, x);
    return spec.initial_state ? raw - spec.initial_state(x) : raw;
  };
  fields.memory = [&](Tape& tp, std::span<const Var>) { return tp.constant(Shape{1, static_cast<int>(l1.size())}, l1); };
  auto operator_form = core::ide_residual(spec, fields, t, grid.outer);
  auto discrete_form = fpde_residual(spec, u, t, grid);
  REQUIRE(operator_form.shape().batch == discrete_form.shape().batch);
  for (int i = 0; i < grid.outer_count(); ++i) {
    CHECK(discrete_form.value()[static_cast<std::size_t>(i)] ==
          doctest::Approx(operator_form.value()[static_cast<std::size_t>(i)]).epsilon(1e-11));
  }
}

TEST_CASE("fractional model loss has no memory term and differentiates through the L1 sum") {
  auto spec = core::make_fractional_spec(0.5, 8);
  auto net = enc::Encoder::ckan({2, 4, 1}, 3, enc::InputScaler(spec.lower, spec.upper));
  FpdeModel model(spec, net);
  std::mt19937_64 rng(2);
  auto p = model.initial_parameters(rng);
  const std::vector<double> xs{0.25, 0.5, 0.75};
  FpdeDatasets sets{core::caputo_consistency_set(xs, 0.5, 8), DataSet{2, {0.0, 0.0, 0.5, 0.0, 1.0, 0.3}, {0.0, 0.0, 0.0}}};
  auto value = [&](const std::vector<double>& q) {
    Tape t;
    return model.loss(t, t.parameter(q, 0), sets).total.scalar();
  };
  Tape t;
  Var params = t.parameter(p, 0);
  auto l = model.loss(t, params, sets);
  CHECK(l.memory.scalar() == 0.0);
  CHECK(l.total.scalar() == doctest::Approx(l.ide.scalar() + l.data.scalar()).epsilon(1e-14));
  t.backward(l.total);
  std::vector<double> g(p.size(), 0.0);
  t.accumulate_parameter_gradients(g);
  for (int i : {0, 7, model.parameter_count() - 1}) {
    auto up = p;
    auto down = p;
    const double h = 1e-6;
    up[static_cast<std::size_t>(i)] += h;
    down[static_cast<std::size_t>(i)] -= h;
    CHECK(g[static_cast<std::size_t>(i)] == doctest::Approx((value(up) - value(down)) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("relative error examples") {
  const std::vector<double> ref{3.0, 4.0};
  CHECK(relative_error(ref, ref) == 0.0);
  const std::vector<double> est{3.0, 4.4};
  CHECK(relative_error(est, ref) == doctest::Approx(0.08).epsilon(1e-14));
  CHECK(relative_error(0.808, 0.8) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK_THROWS_AS(relative_error(ref, std::vector<double>{0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(relative_error(ref, std::vector<double>{1.0}), std::invalid_argument);
  CHECK_THROWS_AS(relative_error(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("relative error is scale-equivariant") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(30);
    std::vector<double> b(30);
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = n(rng);
    const double base = relative_error(a, b);
    for (double c : {-3.7, 1e-3, 2.0, 1e4}) {
      std::vector<double> ca(a);
      std::vector<double> cb(b);
      for (auto& v : ca) v *= c;
      for (auto& v : cb) v *= c;
      CHECK(std::abs(relative_error(ca, cb) - base) <= 1e-14);
    }
    const double x = n(rng);
    const double y = n(rng) + 3.0;
    CHECK(std::abs(relative_error(-2.5 * x, -2.5 * y) - relative_error(x, y)) <= 1e-14);
  }
}
