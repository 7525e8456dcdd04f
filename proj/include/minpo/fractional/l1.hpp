#pragma once

#include <functional>
#include <span>
#include <vector>

namespace minpo::fractional {

/// c_l = (l+1)^(1-alpha) - l^(1-alpha) for l = 0..n-1.
std::vector<double> l1_coefficients(double alpha, int n);

/// L1 approximation of the Caputo derivative of order alpha at t_n from
/// samples u[0..n] on a uniform grid with step dt. Requires n >= 1.
double caputo_l1(std::span<const double> u, double alpha, double dt, int n);

/// Weights w[0..n] such that caputo_l1(u, alpha, dt, n) = sum_k w[k] u[k].
std::vector<double> caputo_l1_weights(double alpha, double dt, int n);

/// Riemann-Liouville integral of order alpha at t_n by product integration:
/// f is interpolated piecewise linearly and the kernel (t_n - s)^(alpha-1) is
/// integrated exactly on every step.
double rl_integral_discrete(std::span<const double> f, double alpha, double dt, int n);

/// Max over t_k = k/n_t, k = 1..n_t, of |I^alpha(D^alpha h)(t_k) - (h(t_k) - h(0))|
/// using the two discrete operators above. The Caputo derivative at t_0 is
/// taken as 0, its value for any continuously differentiable h.
double lemma1_check(const std::function<double(double)>& h, double alpha, int n_t);

}  // namespace minpo::fractional
