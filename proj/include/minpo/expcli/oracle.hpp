#pragma once

#include <cstdint>
#include <span>

#include "minpo/core/problem.hpp"

namespace minpo::expcli {

/// Closed-form solution and memory term of an experiment. The memory term is
/// the integral operator applied to the solution, or the Caputo derivative
/// for the fractional problem.
class ExactOracle {
 public:
  explicit ExactOracle(const core::ProblemSpec& spec);

  double solution(std::span<const double> p) const;
  double memory(std::span<const double> p) const;
  /// Left side of the governing equation minus the source, with the memory
  /// term computed by numerical quadrature of the closed-form solution.
  double equation_residual(std::span<const double> p) const;
  /// Memory closed form minus its quadrature value.
  double memory_mismatch(std::span<const double> p) const;

  /// Largest |equation_residual| and |memory_mismatch| over uniform random points.
  double self_check(int points, std::uint64_t seed) const;

  const core::ProblemSpec& spec() const { return spec_; }

 private:
  double memory_by_quadrature(std::span<const double> p) const;

  core::ProblemSpec spec_;
};

}  // namespace minpo::expcli
