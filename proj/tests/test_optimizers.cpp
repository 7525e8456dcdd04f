#include <cmath>
#include <random>

#include "doctest.h"
#include "minpo/optimizers/optimizers.hpp"

using namespace minpo::optimizers;

namespace {

double rosenbrock(std::span<const double> x, std::span<double> g) {
  const double a = 1.0 - x[0];
  const double b = x[1] - x[0] * x[0];
  g[0] = -2.0 * a - 400.0 * x[0] * b;
  g[1] = 200.0 * b;
  return a * a + 100.0 * b * b;
}

double diagonal_quadratic(std::span<const double> x, std::span<double> g) {
  g[0] = x[0];
  g[1] = 10.0 * x[1];
  return 0.5 * (x[0] * x[0] + 10.0 * x[1] * x[1]);
}

}  // namespace

TEST_CASE("adam examples") {
  AdamState s(2, AdamConfig{});
  std::vector<double> p{1.5, -2.0};
  std::vector<double> zero{0.0, 0.0};
  adam_step(s, p, zero);
  CHECK(p == std::vector<double>{1.5, -2.0});

  AdamState q(1, AdamConfig{1e-2});
  std::vector<double> theta{0.0};
  for (int i = 0; i < 5000; ++i) {
    std::vector<double> g{2.0 * (theta[0] - 3.0)};
    adam_step(q, theta, g);
  }
  CHECK(std::abs(theta[0] - 3.0) <= 1e-3);

  AdamState a(3), b(3);
  std::vector<double> pa{0.1, 0.2, 0.3}, pb = pa;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> g{n(rng), n(rng), n(rng)};
    adam_step(a, pa, g);
    adam_step(b, pb, g);
  }
  CHECK(pa == pb);

  std::vector<double> bad{NAN, 0.0};
  CHECK_THROWS_AS(adam_step(s, p, bad), NonFiniteGradient);
}

TEST_CASE("adam steps are bounded by the learning rate") {
  // Gradient noise with a fixed scale per coordinate; the scales span six decades.
  AdamState s(50, AdamConfig{3e-3});
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> scale(50);
  for (std::size_t i = 0; i < scale.size(); ++i) scale[i] = std::pow(10.0, -3.0 + 6.0 * static_cast<double>(i) / 49.0);
  std::vector<double> p(50, 0.0);
  for (int step = 0; step < 2000; ++step) {
    std::vector<double> g(50);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale[i] * (0.3 + n(rng));
    auto before = p;
    adam_step(s, p, g);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - before[i]) <= 3e-3 * (1 + 1e-6));
  }
}

TEST_CASE("adam steps stay bounded under heavy-tailed gradients") {
  AdamState s(20, AdamConfig{1e-3});
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> p(20, 0.0);
  for (int step = 0; step < 500; ++step) {
    std::vector<double> g(20);
    for (auto& v : g) v = n(rng) * std::pow(10.0, 3.0 * n(rng));
    auto before = p;
    adam_step(s, p, g);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - before[i]) <= 1e-3 * (1 + 1e-6));
  }
}

TEST_CASE("lbfgs examples") {
  LbfgsState s;
  std::vector<double> x{1.0, 1.0};
  int iters = 0;
  while (iters < 20 && std::hypot(x[0], x[1]) > 1e-8) {
    auto r = lbfgs_step(s, x, diagonal_quadratic);
    if (r.status != LbfgsStatus::step_taken) break;
    ++iters;
  }
  CHECK(std::hypot(x[0], x[1]) <= 1e-8);

  LbfgsState z;
  std::vector<double> origin{0.0, 0.0};
  auto r = lbfgs_step(z, origin, diagonal_quadratic);
  CHECK(r.status == LbfgsStatus::converged);
  CHECK(r.step == 0.0);
  CHECK(origin == std::vector<double>{0.0, 0.0});

  LbfgsState rs;
  std::vector<double> y{-1.2, 1.0};
  std::vector<double> g(2);
  for (int i = 0; i < 200; ++i) {
    auto step = lbfgs_step(rs, y, rosenbrock);
    if (step.status != LbfgsStatus::step_taken) break;
  }
  CHECK(rosenbrock(y, g) <= 1e-8);
}

TEST_CASE("lbfgs loss never increases across accepted steps") {
  LbfgsState s;
  std::vector<double> y{-1.2, 1.0};
  double last = INFINITY;
  for (int i = 0; i < 100; ++i) {
    auto step = lbfgs_step(s, y, rosenbrock);
    if (step.status != LbfgsStatus::step_taken) break;
    CHECK(step.loss <= last);
    last = step.loss;
  }
}

TEST_CASE("lbfgs without history is gradient descent with line search") {
  LbfgsConfig cfg;
  cfg.history = 0;
  LbfgsState s(cfg);
  std::vector<double> x{-1.2, 1.0};
  std::vector<double> ref = x;
  std::vector<double> g(2);
  for (int i = 0; i < 30; ++i) {
    auto step = lbfgs_step(s, x, rosenbrock);
    REQUIRE(step.status == LbfgsStatus::step_taken);
    const double f = rosenbrock(ref, g);
    std::vector<double> d{-g[0], -g[1]};
    auto ls = strong_wolfe_search(rosenbrock, ref, f, g, d, first_trial_step(g), cfg.line_search);
    REQUIRE(ls.success);
    ref = ls.params;
    CHECK(x == ref);
  }
}

TEST_CASE("line search reports failure with unchanged parameters") {
  // A non-descent direction cannot satisfy the sufficient-decrease condition.
  auto flat_up = [](std::span<const double> x, std::span<double> g) {
    g[0] = 1.0;
    return x[0];
  };
  std::vector<double> x{0.0};
  std::vector<double> g{1.0};
  std::vector<double> d{1.0};
  auto ls = strong_wolfe_search(flat_up, x, 0.0, g, d, 1.0, LineSearchConfig{});
  CHECK_FALSE(ls.success);

  // Unbounded-below linear loss: every trial keeps decreasing, never flattening.
  LbfgsState s;
  std::vector<double> p{0.0};
  auto r = lbfgs_step(s, p, [](std::span<const double> q, std::span<double> gr) {
    gr[0] = 1.0;
    return q[0];
  });
  CHECK(r.status == LbfgsStatus::line_search_failed);
  CHECK(p == std::vector<double>{0.0});
}
