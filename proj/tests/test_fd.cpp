#include <cmath>
#include <random>

#include "doctest.h"
#include "minpo/core/problem.hpp"
#include "minpo/fd/fd.hpp"
#include "minpo/quadrature/gauss_legendre.hpp"

using namespace minpo::fd;

namespace {

double exact(double x1, double x2, double t) { return t * std::sin(x1) * std::cos(x2); }

PointFunction nested_source() {
  auto spec = minpo::core::make_nested_spec();
  return [src = spec.source](double x1, double x2, double t) {
    const double p[3] = {x1, x2, t};
    return src(p);
  };
}

Grid3 sampled(int cells, const PointFunction& f) {
  Grid3 g(cells);
  for (int i = 0; i < g.nodes(); ++i)
    for (int j = 0; j < g.nodes(); ++j)
      for (int k = 0; k < g.nodes(); ++k) g.at(i, j, k) = f(g.coordinate(i), g.coordinate(j), g.coordinate(k));
  return g;
}

double error_on_eval_grid(const Grid3& g) {
  double d = 0.0, n = 0.0;
  for (int i = 0; i <= 40; ++i)
    for (int j = 0; j <= 40; ++j)
      for (int k = 0; k <= 40; ++k) {
        const double p[3] = {i / 40.0, j / 40.0, k / 40.0};
        const double e = exact(p[0], p[1], p[2]);
        const double v = g.interpolate({p[0], p[1], p[2]});
        d += (v - e) * (v - e);
        n += e * e;
      }
  return std::sqrt(d / n);
}

}  // namespace

TEST_CASE("trilinear interpolation reproduces trilinear functions") {
  auto f = [](double a, double b, double c) { return 1.0 + 2.0 * a - b + 0.5 * c + a * b * c - 3.0 * a * c; };
  auto g = sampled(7, f);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int s = 0; s < 200; ++s) {
    const double a = u(rng), b = u(rng), c = u(rng);
    CHECK(g.interpolate({a, b, c}) == doctest::Approx(f(a, b, c)).epsilon(1e-13));
  }
  CHECK(g.interpolate({1.0, 1.0, 1.0}) == doctest::Approx(f(1.0, 1.0, 1.0)).epsilon(1e-14));
}

TEST_CASE("memory quadrature on the grid") {
  SUBCASE("zero field") {
    Grid3 g(10);
    CHECK(fd_memory_eval(g, {10, 10, 10}, 8) == 0.0);
  }
  auto g = sampled(25, exact);
  SUBCASE("coordinate planes carry no memory") {
    CHECK(fd_memory_eval(g, {0, 12, 25}, 10) == 0.0);
    CHECK(fd_memory_eval(g, {7, 0, 25}, 10) == 0.0);
    CHECK(fd_memory_eval(g, {25, 25, 0}, 10) == 0.0);
  }
  SUBCASE("corner value within interpolation error of the closed form") {
    const double closed = std::exp(-1.0) * (1.0 - std::cos(1.0)) * std::sin(1.0);
    CHECK(std::abs(fd_memory_eval(g, {25, 25, 25}, 20) - closed) <= 5e-3);
  }
  SUBCASE("axis-by-axis evaluation agrees with the pointwise rule") {
    auto coarse = sampled(6, [](double a, double b, double c) { return std::cos(3 * a) + b * b * c - c; });
    const auto all = fd_memory_field(coarse, 7);
    for (int i = 0; i <= 6; ++i)
      for (int j = 0; j <= 6; j += 2)
        for (int k = 0; k <= 6; k += 3)
          CHECK(all[coarse.index(i, j, k)] == doctest::Approx(fd_memory_eval(coarse, {i, j, k}, 7)).epsilon(1e-12));
    const std::vector<double> x1{0.13, 0.77}, x2{0.5}, t{0.01, 0.4, 0.99};
    const auto off = fd_memory_on_tensor(coarse, x1, x2, t, 7);
    const auto rule = minpo::quadrature::gauss_legendre(7);
    for (std::size_t a = 0; a < x1.size(); ++a)
      for (std::size_t c = 0; c < t.size(); ++c) {
        const double direct = minpo::quadrature::integrate_3d_nested(
            rule, [&](double y1, double y2, double tau) { return std::exp(tau - t[c]) * coarse.interpolate({y1, y2, tau}); },
            {x1[a], x2[0], t[c]});
        CHECK(off[a * t.size() + c] == doctest::Approx(direct).epsilon(1e-12));
      }
  }
}

TEST_CASE("zero data gives the zero solution") {
  auto zero = [](double, double, double) { return 0.0; };
  for (auto scheme : {Scheme::upwind, Scheme::forward}) {
    auto r = picard_jacobi_solve(10, zero, zero, {scheme, 20, 1e-10, 5000});
    for (double v : r.grid.u) CHECK(std::abs(v) <= 1e-10);
  }
}

TEST_CASE("fixed-point solves of the nested problem") {
  const auto src = nested_source();
  for (auto scheme : {Scheme::upwind, Scheme::forward}) {
    CAPTURE(to_string(scheme));
    double previous = 1e300;
    for (int cells : {10, 15, 20, 25}) {
      CAPTURE(cells);
      auto r = picard_jacobi_solve(cells, src, exact, {scheme, 20, 1e-10, 5000});
      CHECK(r.updates.back() <= 1e-10);
      CHECK(r.iterations == static_cast<int>(r.updates.size()));
      for (std::size_t s = 4; s < r.updates.size(); ++s) CHECK(r.updates[s] <= r.updates[s - 1]);
      // Inflow planes keep their data.
      const auto& g = r.grid;
      for (int a = 0; a <= cells; ++a)
        for (int b = 0; b <= cells; ++b) {
          CHECK(g.at(0, a, b) == exact(0.0, g.coordinate(a), g.coordinate(b)));
          CHECK(g.at(a, 0, b) == exact(g.coordinate(a), 0.0, g.coordinate(b)));
          CHECK(g.at(a, b, 0) == exact(g.coordinate(a), g.coordinate(b), 0.0));
        }
      const double err = error_on_eval_grid(g);
      CHECK(err < previous);
      previous = err;
    }
  }
}

TEST_CASE("upwind differences are at least as accurate as forward ones") {
  const auto src = nested_source();
  for (int cells : {10, 15, 20, 25}) {
    auto up = picard_jacobi_solve(cells, src, exact, {Scheme::upwind, 20, 1e-10, 5000});
    auto fw = picard_jacobi_solve(cells, src, exact, {Scheme::forward, 20, 1e-10, 5000});
    CHECK(error_on_eval_grid(up.grid) <= error_on_eval_grid(fw.grid));
  }
}

TEST_CASE("solver argument and budget errors") {
  const auto src = nested_source();
  CHECK_THROWS_AS(picard_jacobi_solve(10, src, exact, {Scheme::upwind, 20, 0.0, 10}), std::invalid_argument);
  CHECK_THROWS_AS(picard_jacobi_solve(0, src, exact, {Scheme::upwind, 20, 1e-10, 10}), std::invalid_argument);
  try {
    picard_jacobi_solve(10, src, exact, {Scheme::upwind, 20, 1e-10, 3});
    FAIL("expected a convergence error");
  } catch (const ConvergenceError& e) {
    CHECK(e.last_update() > 1e-10);
  }
  CHECK(scheme_from_string("forward") == Scheme::forward);
  CHECK(scheme_from_string("upwind") == Scheme::upwind);
  CHECK_THROWS_AS(scheme_from_string("central"), std::invalid_argument);
}
