#include "minpo/quadrature/gauss_legendre.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace minpo::quadrature {

namespace {

// P_n(x) and P_n'(x) by the Bonnet recurrence.
std::pair<double, double> legendre(int n, double x) {
  double p0 = 1.0;
  double p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  const double dp = n * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

}  // namespace

QuadratureRule gauss_legendre(int n) {
  if (n < 1 || n > kMaxRuleSize) throw std::invalid_argument("gauss_legendre: n must lie in [1, 64]");
  QuadratureRule rule;
  rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
  rule.weights.assign(static_cast<std::size_t>(n), 0.0);
  if (n == 1) {
    rule.weights[0] = 2.0;
    return rule;
  }
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Chebyshev-type starting guess for the i-th largest root.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    bool converged = false;
    for (int iter = 0; iter < 100; ++iter) {
      auto [p, d] = legendre(n, x);
      dp = d;
      const double dx = p / d;
      x -= dx;
      if (std::abs(dx) <= 1e-15) {
        converged = true;
        break;
      }
    }
    if (!converged) throw std::runtime_error("gauss_legendre: Newton iteration did not converge");
    dp = legendre(n, x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    const auto lo = static_cast<std::size_t>(i);
    rule.nodes[hi] = x;
    rule.nodes[lo] = -x;
    rule.weights[hi] = w;
    rule.weights[lo] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

QuadratureRule map_to_interval(const QuadratureRule& rule, double a, double b) {
  QuadratureRule out;
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  for (int i = 0; i < rule.size(); ++i) {
    out.nodes.push_back(mid + half * rule.nodes[static_cast<std::size_t>(i)]);
    out.weights.push_back(half * rule.weights[static_cast<std::size_t>(i)]);
  }
  return out;
}

double integrate_1d(const QuadratureRule& rule, const std::function<double(double)>& f, double a, double b) {
  if (a > b) throw std::invalid_argument("integrate_1d: lower limit exceeds upper limit");
  if (a == b) return 0.0;
  const auto m = map_to_interval(rule, a, b);
  double s = 0.0;
  for (int i = 0; i < m.size(); ++i) s += m.weights[static_cast<std::size_t>(i)] * f(m.nodes[static_cast<std::size_t>(i)]);
  return s;
}

double integrate_3d_nested(const QuadratureRule& rule,
                           const std::function<double(double, double, double)>& f,
                           const std::array<double, 3>& upper) {
  const auto r1 = map_to_interval(rule, 0.0, upper[0]);
  const auto r2 = map_to_interval(rule, 0.0, upper[1]);
  const auto rt = map_to_interval(rule, 0.0, upper[2]);
  double s = 0.0;
  for (int k = 0; k < rt.size(); ++k) {
    for (int i = 0; i < r1.size(); ++i) {
      for (int j = 0; j < r2.size(); ++j) {
        s += rt.weights[static_cast<std::size_t>(k)] * r1.weights[static_cast<std::size_t>(i)] *
             r2.weights[static_cast<std::size_t>(j)] *
             f(r1.nodes[static_cast<std::size_t>(i)], r2.nodes[static_cast<std::size_t>(j)],
               rt.nodes[static_cast<std::size_t>(k)]);
      }
    }
  }
  return s;
}

}  // namespace minpo::quadrature
