#pragma once

#include "minpo/core/problem.hpp"

namespace minpo::core {

/// Raised when the residual is not finite; carries the first bad point.
class NonFiniteResidual : public diffkit::NonFiniteError {
 public:
  NonFiniteResidual(int node, int point, const std::string& what) : NonFiniteError(node, what), point_(point) {}
  int point() const { return point_; }

 private:
  int point_;
};

/// Pointwise residual of the governing equation with every derivative taken
/// from the jets of the learned fields. No quadrature or time grid is involved.
/// Volterra: u' + u - kappa M. Nested: u_t + u_x1 + u_x2 - u - M - f.
/// Fractional: M - u_xx - S.
Var ide_residual(const ProblemSpec& spec, const FieldSet& fields, Tape& tape, std::span<const double> points);

/// Index of the first non-finite residual entry, or -1.
int first_non_finite(Var residual);

}  // namespace minpo::core
