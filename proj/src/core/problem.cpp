#include "minpo/core/problem.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "minpo/core/ide_residual.hpp"

namespace minpo::core {

using diffkit::JetLayout;
using diffkit::Shape;

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::exp1_forward:
      return "exp1-forward";
    case Experiment::exp1_inverse:
      return "exp1-inverse";
    case Experiment::exp2:
      return "exp2";
    case Experiment::exp3:
      return "exp3";
  }
  return "unknown";
}

Experiment experiment_from_string(const std::string& name) {
  if (name == "exp1-forward") return Experiment::exp1_forward;
  if (name == "exp1-inverse") return Experiment::exp1_inverse;
  if (name == "exp2") return Experiment::exp2;
  if (name == "exp3") return Experiment::exp3;
  throw std::invalid_argument("unknown experiment: " + name);
}

ProblemSpec make_volterra_spec(double kappa, double horizon, bool kappa_trainable) {
  if (!(horizon > 0.0)) throw std::invalid_argument("time horizon must be positive");
  ProblemSpec s;
  s.experiment = kappa_trainable ? Experiment::exp1_inverse : Experiment::exp1_forward;
  s.reconstruction = ReconstructionKind::volterra1d;
  s.lower = {0.0};
  s.upper = {horizon};
  s.kappa = kappa;
  s.kappa_trainable = kappa_trainable;
  return s;
}

ProblemSpec make_nested_spec() {
  ProblemSpec s;
  s.experiment = Experiment::exp2;
  s.reconstruction = ReconstructionKind::nested3d;
  s.lower = {0.0, 0.0, 0.0};
  s.upper = {1.0, 1.0, 1.0};
  s.source = [](std::span<const double> p) {
    const double x1 = p[0], x2 = p[1], t = p[2];
    const double memory = (t - 1.0 + std::exp(-t)) * (1.0 - std::cos(x1)) * std::sin(x2);
    return std::sin(x1) * std::cos(x2) + t * std::cos(x1) * std::cos(x2) - t * std::sin(x1) * std::sin(x2) -
           t * std::sin(x1) * std::cos(x2) - memory;
  };
  return s;
}

ProblemSpec make_fractional_spec(double alpha, int n_t) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("fractional order must lie in (0, 1)");
  if (n_t < 1) throw std::invalid_argument("temporal step count must be positive");
  ProblemSpec s;
  s.experiment = Experiment::exp3;
  s.reconstruction = ReconstructionKind::fractional;
  s.lower = {0.0, 0.0};
  s.upper = {1.0, 1.0};
  s.alpha = alpha;
  s.n_t = n_t;
  s.source = [alpha](std::span<const double> p) {
    const double x = p[0], t = p[1];
    const double pi = std::numbers::pi;
    return (6.0 * std::pow(t, 3.0 - alpha) / std::tgamma(4.0 - alpha) + pi * pi * t * t * t) * std::sin(pi * x);
  };
  return s;
}

Var reconstruct_volterra(Var memory_jet, int extra) {
  return diffkit::derivative(memory_jet, {extra + 1}) + diffkit::derivative(memory_jet, {extra});
}

Var reconstruct_3d(Var memory_jet, const MultiIndex& extra) {
  if (extra.size() != 3) throw std::invalid_argument("reconstruct_3d: multi-index must have three entries");
  MultiIndex with_t{extra[0] + 1, extra[1] + 1, extra[2] + 1};
  MultiIndex without_t{extra[0] + 1, extra[1] + 1, extra[2]};
  return diffkit::derivative(memory_jet, with_t) + diffkit::derivative(memory_jet, without_t);
}

Var reconstruct_fractional(Var inverse_jet, Var initial_jet, const MultiIndex& extra) {
  Var j = diffkit::derivative(inverse_jet, extra);
  if (!initial_jet.valid()) return j;
  return diffkit::derivative(initial_jet, extra) + j;
}

namespace {

Var initial_state(const ProblemSpec& spec, std::span<const Var> coords) {
  if (!spec.initial_state) return Var();
  return spec.initial_state(coords);
}

void check_points(const ProblemSpec& spec, std::span<const double> points) {
  if (spec.dims() == 0 || points.size() % static_cast<std::size_t>(spec.dims()) != 0) {
    throw std::invalid_argument("point array does not match the problem dimension");
  }
}

}  // namespace

Var reconstructed_solution(const ProblemSpec& spec, const FieldSet& fields, Tape& tape,
                           std::span<const double> points) {
  check_points(spec, points);
  switch (spec.reconstruction) {
    case ReconstructionKind::volterra1d: {
      const int maxes[] = {1};
      auto x = tape.inputs(points, 1, JetLayout::box(maxes, 1));
      return reconstruct_volterra(fields.memory(tape, x));
    }
    case ReconstructionKind::nested3d: {
      const int maxes[] = {1, 1, 1};
      auto x = tape.inputs(points, 3, JetLayout::box(maxes, 3));
      return reconstruct_3d(fields.memory(tape, x));
    }
    case ReconstructionKind::fractional: {
      auto x = tape.inputs(points, 2, JetLayout::plain());
      return reconstruct_fractional(fields.inverse(tape, x), initial_state(spec, x));
    }
  }
  throw std::logic_error("unhandled reconstruction kind");
}

Var memory_values(const ProblemSpec& spec, const FieldSet& fields, Tape& tape, std::span<const double> points) {
  check_points(spec, points);
  auto x = tape.inputs(points, spec.dims(), JetLayout::plain());
  return fields.memory(tape, x);
}

Var mean_square(Var v) {
  const int n = v.shape().elements();
  if (n == 0) throw std::invalid_argument("mean_square of an empty node");
  return diffkit::sum_squares(v) * (1.0 / n);
}

Var data_loss(const ProblemSpec& spec, const FieldSet& fields, Tape& tape, const DataSet& data) {
  if (data.size() == 0) throw std::invalid_argument("data set is empty");
  Var u = reconstructed_solution(spec, fields, tape, data.points);
  Var target = tape.constant(Shape{1, data.size()}, data.values);
  return mean_square(u - target);
}

LossBreakdown total_loss(const ProblemSpec& spec, const FieldSet& fields, Tape& tape, const Datasets& sets) {
  if (sets.residual.empty()) throw std::invalid_argument("residual set is empty");
  LossBreakdown out;
  out.ide = mean_square(ide_residual(spec, fields, tape, sets.residual));
  out.data = data_loss(spec, fields, tape, sets.data);
  out.memory = memory_consistency_loss(spec, fields, tape, sets.memory);
  const auto& w = spec.weights;
  out.total = out.ide * w.ide + out.data * w.data + out.memory * w.memory;
  for (Var part : {out.ide, out.data, out.memory}) {
    if (!std::isfinite(part.scalar())) throw diffkit::NonFiniteError(part.id(), "non-finite loss component");
  }
  return out;
}

}  // namespace minpo::core
