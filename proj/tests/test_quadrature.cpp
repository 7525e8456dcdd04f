#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "minpo/quadrature/gauss_legendre.hpp"

using namespace minpo::quadrature;

TEST_CASE("small rules have their analytic nodes") {
  auto r1 = gauss_legendre(1);
  CHECK(r1.nodes[0] == 0.0);
  CHECK(r1.weights[0] == 2.0);
  auto r2 = gauss_legendre(2);
  CHECK(r2.nodes[0] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(r2.nodes[1] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(r2.weights[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r2.weights[1] == doctest::Approx(1.0).epsilon(1e-15));
  auto r5 = gauss_legendre(5);
  CHECK(std::abs(integrate_1d(r5, [](double x) { return std::pow(x, 8); }, -1, 1) - 2.0 / 9.0) <= 1e-13);
  CHECK_THROWS_AS(gauss_legendre(0), std::invalid_argument);
  CHECK_THROWS_AS(gauss_legendre(65), std::invalid_argument);
}

TEST_CASE("rules are symmetric, increasing, positive and sum to two") {
  for (int n = 1; n <= kMaxRuleSize; ++n) {
    auto r = gauss_legendre(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const auto mirror = static_cast<std::size_t>(n - 1 - i);
      CHECK(r.weights[k] > 0.0);
      CHECK(r.nodes[k] == -r.nodes[mirror]);
      CHECK(r.weights[k] == r.weights[mirror]);
      if (i > 0) CHECK(r.nodes[k] > r.nodes[k - 1]);
      CHECK(std::abs(r.nodes[k]) < 1.0);
      total += r.weights[k];
    }
    CHECK(std::abs(total - 2.0) <= 1e-12);
  }
}

TEST_CASE("n-point rules integrate monomials of degree up to 2n-1") {
  for (int n = 1; n <= 32; ++n) {
    auto r = gauss_legendre(n);
    for (int m = 0; m <= 2 * n - 1; ++m) {
      const double exact = m % 2 == 1 ? 0.0 : 2.0 / (m + 1);
      const double got = integrate_1d(r, [m](double x) { return std::pow(x, m); }, -1.0, 1.0);
      CHECK(std::abs(got - exact) <= 1e-12);
    }
  }
}

TEST_CASE("integrate_1d examples") {
  auto r = gauss_legendre(20);
  CHECK(integrate_1d(r, [](double) { return 1.0; }, 0.0, 0.37) == doctest::Approx(0.37).epsilon(1e-15));
  CHECK(integrate_1d(r, [](double) { return 1.0; }, 0.7, 0.7) == 0.0);
  // Volterra memory of e^{-t} cosh t with kernel e^{tau - t}, at t = 1: e^{-1} sinh 1.
  const double t = 1.0;
  const double m = integrate_1d(
      r, [t](double tau) { return std::exp(tau - t) * std::exp(-tau) * std::cosh(tau); }, 0.0, t);
  CHECK(std::abs(m - 0.43233235838169365) <= 1e-14);
  CHECK_THROWS_AS(integrate_1d(r, [](double) { return 1.0; }, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("integrate_1d is linear and additive") {
  auto r = gauss_legendre(12);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = u(rng);
    const double c = a + u(rng);
    const double b = a + (c - a) * u(rng);
    const double s = u(rng) * 4 - 2;
    auto f = [](double x) { return std::sin(3 * x) + x * x; };
    auto g = [](double x) { return std::exp(-x); };
    const double lin = integrate_1d(r, [&](double x) { return f(x) + s * g(x); }, a, c);
    CHECK(std::abs(lin - (integrate_1d(r, f, a, c) + s * integrate_1d(r, g, a, c))) <= 1e-12);
    CHECK(std::abs(integrate_1d(r, f, a, c) - integrate_1d(r, f, a, b) - integrate_1d(r, f, b, c)) <= 1e-12);
  }
}

TEST_CASE("integrate_3d_nested examples") {
  auto r = gauss_legendre(10);
  auto one = [](double, double, double) { return 1.0; };
  CHECK(integrate_3d_nested(r, one, {1.0, 1.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(integrate_3d_nested(r, one, {0.5, 0.5, 0.5}) == doctest::Approx(0.125).epsilon(1e-14));
  const double t = 1.0;
  auto kernel = [t](double y1, double y2, double tau) { return std::exp(tau - t) * tau * std::sin(y1) * std::cos(y2); };
  const double closed = std::exp(-1.0) * (1.0 - std::cos(1.0)) * std::sin(1.0);
  CHECK(std::abs(integrate_3d_nested(r, kernel, {1.0, 1.0, 1.0}) - closed) <= 1e-13);
  CHECK(closed == doctest::Approx(0.142304).epsilon(1e-6));
}

TEST_CASE("Monte-Carlo cross-check of the nested corner integral") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int samples = 1000000;
  double s = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double y1 = u(rng);
    const double y2 = u(rng);
    const double tau = u(rng);
    s += std::exp(tau - 1.0) * tau * std::sin(y1) * std::cos(y2);
  }
  const double closed = std::exp(-1.0) * (1.0 - std::cos(1.0)) * std::sin(1.0);
  CHECK(std::abs(s / samples - closed) <= 1e-3);
}

TEST_CASE("separable integrands factor into 1D integrals") {
  auto r = gauss_legendre(8);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::array<double, 3> up{u(rng), u(rng), u(rng)};
    auto f1 = [](double y) { return std::cos(2 * y) + 0.5; };
    auto f2 = [](double y) { return std::exp(y); };
    auto f3 = [](double y) { return y * y * y - y; };
    const double nested = integrate_3d_nested(r, [&](double a, double b, double c) { return f1(a) * f2(b) * f3(c); }, up);
    const double product = integrate_1d(r, f1, 0, up[0]) * integrate_1d(r, f2, 0, up[1]) * integrate_1d(r, f3, 0, up[2]);
    CHECK(std::abs(nested - product) <= 1e-12);
  }
}
