#pragma once

#include <array>
#include <functional>
#include <vector>

namespace minpo::quadrature {

/// Gauss-Legendre nodes (ascending) and weights on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  int size() const { return static_cast<int>(nodes.size()); }
};

/// Largest supported rule size.
inline constexpr int kMaxRuleSize = 64;

/// n-point rule from Newton iteration on P_n, 1 <= n <= 64.
QuadratureRule gauss_legendre(int n);

/// The rule's nodes and weights mapped affinely onto [a, b].
QuadratureRule map_to_interval(const QuadratureRule& rule, double a, double b);

double integrate_1d(const QuadratureRule& rule, const std::function<double(double)>& f, double a, double b);

/// Tensor-product rule over [0, x1] x [0, x2] x [0, t] for upper = (x1, x2, t).
/// f receives (y1, y2, tau).
double integrate_3d_nested(const QuadratureRule& rule,
                           const std::function<double(double, double, double)>& f,
                           const std::array<double, 3>& upper);

}  // namespace minpo::quadrature
