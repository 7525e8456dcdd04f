#pragma once

#include <random>
#include <span>
#include <vector>

#include "minpo/core/model.hpp"
#include "minpo/encoders/encoder.hpp"

namespace minpo::baselines {

using core::DataSet;
using core::Field;
using core::LossBreakdown;
using core::ProblemSpec;
using diffkit::Tape;
using diffkit::Var;

/// Relative l2 error ||estimate - reference|| / ||reference||.
double relative_error(std::span<const double> estimate, std::span<const double> reference);
/// |estimate - reference| / |reference|.
double relative_error(double estimate, double reference);

// ---------------------------------------------------------------------------
// Auxiliary-field formulation: the memory integral becomes extra network
// outputs tied to the solution by local differential relations.
//
// Volterra problem, outputs (u, v):
//   u' + u - kappa v = 0,   v' - (u - v) = 0,   v(0) = 0.
// Nested problem, outputs (u, v1, v2, v3), integrating time first, then x1, then x2:
//   dv1/dt = u - v1,  dv2/dx1 = v1,  dv3/dx2 = v2,  with v1, v2, v3 zero on
//   t = 0, x1 = 0, x2 = 0 respectively, and
//   u_t + u_x1 + u_x2 - u - v3 - f = 0.
// ---------------------------------------------------------------------------

/// Number of jointly emitted outputs for the problem (solution first, memory last).
int aux_output_count(const ProblemSpec& spec);

struct AuxResidual {
  Var equation;
  /// One residual per auxiliary relation.
  std::vector<Var> relations;
};

/// Residuals at a batch of interior points. `outputs` maps coordinate jets to
/// an {aux_output_count, B} node. kappa may be empty when it is not trained.
AuxResidual aux_residual(const ProblemSpec& spec, const Field& outputs, Var kappa, Tape& tape,
                         std::span<const double> points);

struct AuxDatasets {
  std::vector<double> residual;
  /// Observations of u.
  DataSet data;
  /// Points where auxiliary output i + 1 must vanish.
  std::vector<DataSet> zero_sets;
};

/// Zero sets for the auxiliary outputs built from the solution data: the
/// initial point for the Volterra problem, the t = 0, x1 = 0, x2 = 0 face
/// points for the nested problem.
std::vector<DataSet> aux_zero_sets(const ProblemSpec& spec, const DataSet& data);

class AuxModel {
 public:
  AuxModel(ProblemSpec spec, encoders::Encoder net);

  const ProblemSpec& spec() const { return spec_; }
  const encoders::Encoder& encoder() const { return net_; }
  int parameter_count() const;
  int kappa_index() const;
  std::vector<double> initial_parameters(std::mt19937_64& rng) const;

  Field outputs(Var params) const;
  Var kappa(Var params) const;

  /// L_IDE is the equation residual, L_M the auxiliary relations, L_data the
  /// solution data plus the auxiliary zero conditions.
  LossBreakdown loss(Tape& tape, Var params, const AuxDatasets& sets) const;

 private:
  ProblemSpec spec_;
  encoders::Encoder net_;
};

// ---------------------------------------------------------------------------
// Discretized fractional residual: the Caputo derivative of the network
// solution is taken with L1 weights on the temporal grid.
// ---------------------------------------------------------------------------

/// L1[u](x_j, t_n) - u_xx(x_j, t_n) - S(x_j, t_n) at every outer point of
/// `grid` (built by core::caputo_consistency_set); u comes from `solution`.
Var fpde_residual(const ProblemSpec& spec, const Field& solution, Tape& tape, const core::ConsistencySet& grid);

struct FpdeDatasets {
  core::ConsistencySet grid;
  DataSet data;
};

class FpdeModel {
 public:
  FpdeModel(ProblemSpec spec, encoders::Encoder net);

  const ProblemSpec& spec() const { return spec_; }
  const encoders::Encoder& encoder() const { return net_; }
  int parameter_count() const { return net_.parameter_count(); }
  std::vector<double> initial_parameters(std::mt19937_64& rng) const { return net_.initial_parameters(rng); }

  Field solution(Var params) const;

  /// L_M is identically zero: the memory lives inside the residual.
  LossBreakdown loss(Tape& tape, Var params, const FpdeDatasets& sets) const;

 private:
  ProblemSpec spec_;
  encoders::Encoder net_;
};

}  // namespace minpo::baselines
