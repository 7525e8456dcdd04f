#pragma once

#include <optional>
#include <random>

#include "minpo/core/problem.hpp"
#include "minpo/encoders/encoder.hpp"

namespace minpo::core {

/// Initial value of a trainable memory strength.
inline constexpr double kInitialKappa = 0.5;

/// Encoders of a MINPO model and their slots in one flat parameter vector:
/// memory parameters, then inverse parameters, then kappa when trainable.
class MinpoModel {
 public:
  MinpoModel(ProblemSpec spec, encoders::Encoder memory, std::optional<encoders::Encoder> inverse,
             encoders::HardConstraint constraint);

  const ProblemSpec& spec() const { return spec_; }
  const encoders::Encoder& memory_encoder() const { return memory_; }
  const std::optional<encoders::Encoder>& inverse_encoder() const { return inverse_; }

  int parameter_count() const;
  int memory_offset() const { return 0; }
  int inverse_offset() const { return memory_.parameter_count(); }
  /// Index of kappa in the flat vector, or -1.
  int kappa_index() const;

  std::vector<double> initial_parameters(std::mt19937_64& rng) const;

  /// Fields bound to the parameter node `params` ({parameter_count, 1}).
  FieldSet fields(Tape& tape, Var params) const;

  LossBreakdown loss(Tape& tape, Var params, const Datasets& sets) const;

 private:
  ProblemSpec spec_;
  encoders::Encoder memory_;
  std::optional<encoders::Encoder> inverse_;
  encoders::HardConstraint constraint_;
};

}  // namespace minpo::core
