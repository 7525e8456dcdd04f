#include "minpo/fractional/l1.hpp"

#include <cmath>
#include <stdexcept>

namespace minpo::fractional {

namespace {

void check_order(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("fractional order must lie in (0, 1)");
}

}  // namespace

std::vector<double> l1_coefficients(double alpha, int n) {
  check_order(alpha);
  if (n < 1) throw std::invalid_argument("l1_coefficients: n must be positive");
  std::vector<double> c(static_cast<std::size_t>(n));
  const double p = 1.0 - alpha;
  for (int l = 0; l < n; ++l) c[static_cast<std::size_t>(l)] = std::pow(l + 1.0, p) - std::pow(static_cast<double>(l), p);
  return c;
}

std::vector<double> caputo_l1_weights(double alpha, double dt, int n) {
  if (n < 1) throw std::invalid_argument("caputo_l1: undefined at the initial instant");
  const auto c = l1_coefficients(alpha, n);
  const double scale = std::pow(dt, -alpha) / std::tgamma(2.0 - alpha);
  std::vector<double> w(static_cast<std::size_t>(n) + 1, 0.0);
  // sum_l c_l (u[n-l] - u[n-l-1])
  for (int l = 0; l < n; ++l) {
    w[static_cast<std::size_t>(n - l)] += scale * c[static_cast<std::size_t>(l)];
    w[static_cast<std::size_t>(n - l - 1)] -= scale * c[static_cast<std::size_t>(l)];
  }
  return w;
}

double caputo_l1(std::span<const double> u, double alpha, double dt, int n) {
  check_order(alpha);
  if (n < 1) throw std::invalid_argument("caputo_l1: undefined at the initial instant");
  if (u.size() < static_cast<std::size_t>(n) + 1) throw std::invalid_argument("caputo_l1: too few samples");
  const auto c = l1_coefficients(alpha, n);
  double s = 0.0;
  for (int l = 0; l < n; ++l) {
    s += c[static_cast<std::size_t>(l)] * (u[static_cast<std::size_t>(n - l)] - u[static_cast<std::size_t>(n - l - 1)]);
  }
  return s * std::pow(dt, -alpha) / std::tgamma(2.0 - alpha);
}

double rl_integral_discrete(std::span<const double> f, double alpha, double dt, int n) {
  check_order(alpha);
  if (n < 0 || f.size() < static_cast<std::size_t>(n) + 1) {
    throw std::invalid_argument("rl_integral_discrete: too few samples");
  }
  if (n == 0) return 0.0;
  const double a1 = alpha + 1.0;
  auto pw = [a1](double x) { return std::pow(x, a1); };
  const double nn = n;
  double s = (pw(nn - 1.0) - (nn - 1.0 - alpha) * std::pow(nn, alpha)) * f[0];
  for (int j = 1; j < n; ++j) {
    const double m = n - j;
    s += (pw(m + 1.0) - 2.0 * pw(m) + pw(m - 1.0)) * f[static_cast<std::size_t>(j)];
  }
  s += f[static_cast<std::size_t>(n)];
  return s * std::pow(dt, alpha) / std::tgamma(alpha + 2.0);
}

double lemma1_check(const std::function<double(double)>& h, double alpha, int n_t) {
  check_order(alpha);
  if (n_t < 1) throw std::invalid_argument("lemma1_check: n_t must be positive");
  const double dt = 1.0 / n_t;
  std::vector<double> hs(static_cast<std::size_t>(n_t) + 1);
  for (int k = 0; k <= n_t; ++k) hs[static_cast<std::size_t>(k)] = h(k * dt);
  std::vector<double> d(static_cast<std::size_t>(n_t) + 1, 0.0);
  for (int k = 1; k <= n_t; ++k) d[static_cast<std::size_t>(k)] = caputo_l1(hs, alpha, dt, k);
  double worst = 0.0;
  for (int k = 1; k <= n_t; ++k) {
    const double r = rl_integral_discrete(d, alpha, dt, k) - (hs[static_cast<std::size_t>(k)] - hs[0]);
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

}  // namespace minpo::fractional
