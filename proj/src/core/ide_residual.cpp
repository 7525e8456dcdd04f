#include "minpo/core/ide_residual.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace minpo::core {

using diffkit::JetLayout;
using diffkit::Shape;

namespace {

Var source_values(const ProblemSpec& spec, Tape& tape, std::span<const double> points) {
  const int d = spec.dims();
  const int n = static_cast<int>(points.size()) / d;
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  if (spec.source) {
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = spec.source(points.subspan(static_cast<std::size_t>(i * d), static_cast<std::size_t>(d)));
  }
  return tape.constant(Shape{1, n}, std::move(v));
}

}  // namespace

int first_non_finite(Var residual) {
  auto v = residual.value();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) return static_cast<int>(i);
  }
  return -1;
}

Var ide_residual(const ProblemSpec& spec, const FieldSet& fields, Tape& tape, std::span<const double> points) {
  const int d = spec.dims();
  if (d == 0 || points.size() % static_cast<std::size_t>(d) != 0 || points.empty()) {
    throw std::invalid_argument("ide_residual: point array does not match the problem dimension");
  }
  Var r;
  switch (spec.reconstruction) {
    case ReconstructionKind::volterra1d: {
      const int maxes[] = {2};
      auto x = tape.inputs(points, 1, JetLayout::box(maxes, 2));
      Var m = fields.memory(tape, x);
      Var u = reconstruct_volterra(m, 0);
      Var du = reconstruct_volterra(m, 1);
      Var memory = diffkit::derivative(m, {0});
      Var scaled = fields.kappa.valid() ? fields.kappa * memory : memory * spec.kappa;
      r = du + u - scaled - source_values(spec, tape, points);
      break;
    }
    case ReconstructionKind::nested3d: {
      const int maxes[] = {2, 2, 2};
      auto x = tape.inputs(points, 3, JetLayout::box(maxes, 4));
      Var m = fields.memory(tape, x);
      Var u = reconstruct_3d(m, {0, 0, 0});
      Var transport = reconstruct_3d(m, {0, 0, 1}) + reconstruct_3d(m, {1, 0, 0}) + reconstruct_3d(m, {0, 1, 0});
      r = transport - u - diffkit::derivative(m, {0, 0, 0}) - source_values(spec, tape, points);
      break;
    }
    case ReconstructionKind::fractional: {
      const int maxes[] = {2, 0};
      auto x = tape.inputs(points, 2, JetLayout::box(maxes, 2));
      Var initial = spec.initial_state ? spec.initial_state(x) : Var();
      Var uxx = reconstruct_fractional(fields.inverse(tape, x), initial, {2, 0});
      auto plain = tape.inputs(points, 2, JetLayout::plain());
      Var caputo = fields.memory(tape, plain);
      r = caputo - uxx - source_values(spec, tape, points);
      break;
    }
  }
  const int bad = first_non_finite(r);
  if (bad >= 0) {
    std::ostringstream msg;
    msg << "non-finite residual at point " << bad;
    throw NonFiniteResidual(r.id(), bad, msg.str());
  }
  return r;
}

}  // namespace minpo::core
