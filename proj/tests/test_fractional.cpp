#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "minpo/fractional/l1.hpp"

using namespace minpo::fractional;

namespace {

std::vector<double> samples(const std::function<double(double)>& f, int n_t, double t_end = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(n_t) + 1);
  for (int k = 0; k <= n_t; ++k) v[static_cast<std::size_t>(k)] = f(t_end * k / n_t);
  return v;
}

double caputo_cubic_error(double alpha, int n_t) {
  auto u = samples([](double t) { return t * t * t; }, n_t);
  const double exact = 6.0 / std::tgamma(4.0 - alpha);
  return std::abs(caputo_l1(u, alpha, 1.0 / n_t, n_t) - exact);
}

}  // namespace

TEST_CASE("l1 coefficients") {
  for (double alpha : {0.1, 0.5, 0.9}) {
    auto c = l1_coefficients(alpha, 50);
    CHECK(c[0] == 1.0);
    for (std::size_t l = 1; l < c.size(); ++l) {
      CHECK(c[l] > 0.0);
      CHECK(c[l] < c[l - 1]);
    }
    // Telescoping: sum_{l<n} (c_l - c_{l+1}) = 1 - c_n.
    auto d = l1_coefficients(alpha, 51);
    double s = 0.0;
    for (int l = 0; l < 50; ++l) s += d[static_cast<std::size_t>(l)] - d[static_cast<std::size_t>(l + 1)];
    CHECK(std::abs(s - (1.0 - d[50])) <= 1e-14);
  }
  CHECK(l1_coefficients(0.5, 2)[1] == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-15));
  CHECK(l1_coefficients(0.999, 2)[1] <= 7e-4);
  CHECK_THROWS_AS(l1_coefficients(1.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(l1_coefficients(0.0, 3), std::invalid_argument);
}

TEST_CASE("caputo_l1 examples") {
  std::vector<double> flat(11, 2.5);
  CHECK(caputo_l1(flat, 0.5, 0.1, 10) == 0.0);

  auto lin = samples([](double t) { return t; }, 320);
  CHECK(std::abs(caputo_l1(lin, 0.5, 1.0 / 320, 320) - 2.0 / std::sqrt(std::numbers::pi)) <= 5e-3);

  // First step reduces to a scaled forward difference.
  std::vector<double> two{0.3, 0.7};
  CHECK(caputo_l1(two, 0.4, 0.2, 1) == doctest::Approx(0.4 * std::pow(0.2, -0.4) / std::tgamma(1.6)));
  CHECK_THROWS_AS(caputo_l1(two, 0.4, 0.2, 0), std::invalid_argument);

  CHECK(6.0 / std::tgamma(3.5) == doctest::Approx(1.8054067).epsilon(1e-7));
  CHECK(caputo_cubic_error(0.5, 320) < caputo_cubic_error(0.5, 160));
}

TEST_CASE("caputo_l1 is linear and matches its weight form") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(21), b(21);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    const double s = g(rng);
    std::vector<double> c(21);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = a[i] + s * b[i];
    const int n = 1 + trial % 20;
    const double lhs = caputo_l1(c, 0.6, 0.05, n);
    const double rhs = caputo_l1(a, 0.6, 0.05, n) + s * caputo_l1(b, 0.6, 0.05, n);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
    auto w = caputo_l1_weights(0.6, 0.05, n);
    double via_weights = 0.0;
    for (int k = 0; k <= n; ++k) via_weights += w[static_cast<std::size_t>(k)] * a[static_cast<std::size_t>(k)];
    CHECK(via_weights == doctest::Approx(caputo_l1(a, 0.6, 0.05, n)).epsilon(1e-12));
  }
}

TEST_CASE("caputo_l1 converges at order 2 - alpha on t^3") {
  for (double alpha : {0.3, 0.5, 0.8}) {
    const std::vector<int> grids{40, 80, 160, 320};
    // Least-squares slope of log error against log step.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int n : grids) {
      const double x = std::log(1.0 / n);
      const double y = std::log(caputo_cubic_error(alpha, n));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double m = static_cast<double>(grids.size());
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    CAPTURE(alpha);
    CAPTURE(slope);
    CHECK(std::abs(slope - (2.0 - alpha)) <= 0.2);
  }
}

TEST_CASE("rl_integral_discrete examples") {
  std::vector<double> zero(161, 0.0);
  CHECK(rl_integral_discrete(zero, 0.5, 1.0 / 160, 160) == 0.0);
  auto one = samples([](double) { return 1.0; }, 160);
  CHECK(std::abs(rl_integral_discrete(one, 0.5, 1.0 / 160, 160) - 1.0 / std::tgamma(1.5)) <= 1e-3);
  auto lin = samples([](double t) { return t; }, 160);
  CHECK(std::abs(rl_integral_discrete(lin, 0.5, 1.0 / 160, 160) - 1.0 / std::tgamma(2.5)) <= 1e-3);
  // Product integration is exact for piecewise-linear data.
  CHECK(std::abs(rl_integral_discrete(one, 0.3, 1.0 / 160, 160) - 1.0 / std::tgamma(1.3)) <= 1e-13);
  CHECK(std::abs(rl_integral_discrete(lin, 0.3, 1.0 / 160, 160) - 1.0 / std::tgamma(2.3)) <= 1e-13);
  CHECK_THROWS_AS(rl_integral_discrete(one, 1.5, 0.1, 3), std::invalid_argument);
}

TEST_CASE("lemma1_check examples") {
  CHECK(lemma1_check([](double) { return 4.0; }, 0.5, 40) == 0.0);
  CHECK(lemma1_check([](double t) { return t * t * t; }, 0.5, 160) <= 5e-3);
  double previous = INFINITY;
  for (int n : {40, 80, 160, 320}) {
    const double r = lemma1_check([](double t) { return t; }, 0.3, n);
    CHECK(r < previous);
    previous = r;
  }
}

TEST_CASE("lemma1 residual vanishes under refinement for smooth functions") {
  const std::vector<std::function<double(double)>> fns{
      [](double t) { return t; }, [](double t) { return t * t; }, [](double t) { return t * t * t; },
      [](double t) { return std::sin(t); }};
  for (const auto& h : fns) {
    double previous = INFINITY;
    for (int n : {40, 80, 160, 320}) {
      const double r = lemma1_check(h, 0.5, n);
      CHECK(r < previous);
      if (n == 160) CHECK(r <= 5e-3);
      previous = r;
    }
  }
}
