#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "minpo/diffkit/tape.hpp"

namespace minpo::core {

using diffkit::MultiIndex;
using diffkit::Tape;
using diffkit::Var;

enum class Experiment { exp1_forward, exp1_inverse, exp2, exp3 };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& name);

/// Which closed-form map turns the learned fields back into the solution.
enum class ReconstructionKind { volterra1d, nested3d, fractional };

struct LossWeights {
  double ide = 1.0;
  double data = 1.0;
  double memory = 1.0;
};

/// One integro-differential problem instance. Coordinates are ordered
/// (t) for the Volterra problem, (x1, x2, t) for the nested problem and
/// (x, t) for the fractional problem.
struct ProblemSpec {
  Experiment experiment = Experiment::exp1_forward;
  ReconstructionKind reconstruction = ReconstructionKind::volterra1d;
  std::vector<double> lower;
  std::vector<double> upper;
  /// Memory strength of the Volterra problem (the true value for the inverse problem).
  double kappa = 1.0;
  bool kappa_trainable = false;
  /// Fractional order and temporal step count of the fractional problem.
  double alpha = 0.5;
  int n_t = 10;
  /// Right-hand side source term at a point; empty means zero.
  std::function<double(std::span<const double>)> source;
  /// Initial state u(x, 0) for the fractional reconstruction; empty means zero.
  std::function<Var(std::span<const Var>)> initial_state;
  LossWeights weights;

  int dims() const { return static_cast<int>(lower.size()); }
};

ProblemSpec make_volterra_spec(double kappa, double horizon, bool kappa_trainable);
ProblemSpec make_nested_spec();
ProblemSpec make_fractional_spec(double alpha, int n_t);

/// A scalar field on jets: one {1, B} node per coordinate in, {1, B} out.
using Field = std::function<Var(Tape&, std::span<const Var>)>;

/// The learned fields of a MINPO model: the memory field, the inverse field
/// (fractional problems only) and the trainable memory strength when inferred.
struct FieldSet {
  Field memory;
  Field inverse;
  Var kappa;
};

/// d^extra u from the Volterra map u = dM/dt + M. The memory jet must carry
/// t-derivatives up to extra + 1.
Var reconstruct_volterra(Var memory_jet, int extra = 0);

/// d^extra u from the nested map u = d3M/dx1dx2dt + d2M/dx1dx2.
Var reconstruct_3d(Var memory_jet, const MultiIndex& extra = {0, 0, 0});

/// d^extra u from the fractional map u = u0 + J.
Var reconstruct_fractional(Var inverse_jet, Var initial_jet, const MultiIndex& extra = {0, 0});

/// Reconstructed solution values at a batch of points (plain {1, B}).
Var reconstructed_solution(const ProblemSpec& spec, const FieldSet& fields, Tape& tape,
                           std::span<const double> points);

/// Memory-field values at a batch of points (plain {1, B}).
Var memory_values(const ProblemSpec& spec, const FieldSet& fields, Tape& tape, std::span<const double> points);

/// Operator values at outer points as a fixed linear map of solution samples
/// at inner points: quadrature for integral memories, L1 weights for the
/// Caputo derivative.
struct ConsistencySet {
  int dims = 0;
  std::vector<double> outer;
  std::vector<double> inner;
  diffkit::BatchMap map;
  /// Points where the memory field must vanish.
  std::vector<double> anchor;

  int outer_count() const { return dims == 0 ? 0 : static_cast<int>(outer.size()) / dims; }
};

/// Outer times t_j with n_nodes Gauss-Legendre nodes on each [0, t_j], kernel e^(tau - t).
/// Adds the anchor t = 0.
ConsistencySet volterra_consistency_set(std::span<const double> outer_times, int n_nodes);

/// Outer points (x1, x2, t) with the tensor Gauss-Legendre rule on [0, x1] x [0, x2] x [0, t].
ConsistencySet nested_consistency_set(std::span<const double> outer_points, int n_nodes);

/// Outer points (x_j, t_n), n = 1..n_t, on the grid t_n = n / n_t with the L1 weights.
ConsistencySet caputo_consistency_set(std::span<const double> x_samples, double alpha, int n_t);

/// Outer points (x, t), each with its own L1 stencil of n_t steps of size t / n_t.
ConsistencySet caputo_point_set(std::span<const double> outer_points, double alpha, int n_t);

/// Observations of the solution: points and target values.
struct DataSet {
  int dims = 0;
  std::vector<double> points;
  std::vector<double> values;

  int size() const { return dims == 0 ? 0 : static_cast<int>(points.size()) / dims; }
};

struct Datasets {
  std::vector<double> residual;
  DataSet data;
  ConsistencySet memory;
};

struct LossBreakdown {
  Var total;
  Var ide;
  Var data;
  Var memory;
};

/// Squared-error mean of a {1, B} node.
Var mean_square(Var v);

/// Data misfit of the reconstructed solution.
Var data_loss(const ProblemSpec& spec, const FieldSet& fields, Tape& tape, const DataSet& data);

/// Mean squared mismatch between the memory field and the discrete operator
/// applied to the reconstructed solution, plus the anchor term when present.
Var memory_consistency_loss(const ProblemSpec& spec, const FieldSet& fields, Tape& tape, const ConsistencySet& set);

/// Weighted sum of the three losses.
LossBreakdown total_loss(const ProblemSpec& spec, const FieldSet& fields, Tape& tape, const Datasets& sets);

}  // namespace minpo::core
