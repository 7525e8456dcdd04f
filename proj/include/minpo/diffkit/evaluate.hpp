#pragma once

#include <functional>
#include <span>
#include <vector>

#include "minpo/diffkit/tape.hpp"

namespace minpo::diffkit {

/// A scalar expression of `arity` coordinates, written against the tape ops.
/// The body receives one {1, batch} node per coordinate.
struct Expression {
  int arity = 1;
  std::function<Var(Tape&, std::span<const Var>)> body;
};

/// Highest total input-derivative order served by input_derivative.
inline constexpr int kMaxInputDerivativeOrder = 3;

/// Plain value of f at a single point.
double eval(const Expression& f, std::span<const double> point);

/// d^gamma f at a single point via forward-mode jets. |gamma| <= 3.
double input_derivative(const Expression& f, std::span<const double> point, const MultiIndex& gamma);

/// Gradient of a scalar loss with respect to a flat parameter vector. The
/// callback receives the parameters as one {n, 1} node; slice_features picks entries.
std::vector<double> param_gradient(const std::function<Var(Tape&, Var)>& loss,
                                   std::span<const double> params);

/// Picks entry i of an {n, 1} node as a scalar node.
inline Var entry(Var v, int i) { return slice_features(v, i, 1); }

}  // namespace minpo::diffkit
