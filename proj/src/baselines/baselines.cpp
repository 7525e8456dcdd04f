#include "minpo/baselines/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace minpo::baselines {

using core::ReconstructionKind;
using diffkit::BatchMap;
using diffkit::JetLayout;
using diffkit::MultiIndex;
using diffkit::Shape;

namespace {

Var source_values(const ProblemSpec& spec, Tape& tape, std::span<const double> points) {
  const int d = spec.dims();
  const int n = static_cast<int>(points.size()) / d;
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  if (spec.source) {
    for (int i = 0; i < n; ++i) {
      v[static_cast<std::size_t>(i)] =
          spec.source(points.subspan(static_cast<std::size_t>(i * d), static_cast<std::size_t>(d)));
    }
  }
  return tape.constant(Shape{1, n}, std::move(v));
}

void check_points(const ProblemSpec& spec, std::span<const double> points) {
  const int d = spec.dims();
  if (d == 0 || points.empty() || points.size() % static_cast<std::size_t>(d) != 0) {
    throw std::invalid_argument("point array does not match the problem dimension");
  }
}

Var output(Var all, int i) { return diffkit::slice_features(all, i, 1); }

Var plain_outputs(const Field& field, Tape& tape, std::span<const double> points, int dims) {
  auto x = tape.inputs(points, dims, JetLayout::plain());
  return field(tape, x);
}

}  // namespace

double relative_error(std::span<const double> estimate, std::span<const double> reference) {
  if (estimate.size() != reference.size()) throw std::invalid_argument("relative_error: sample grids differ");
  double diff = 0.0;
  double norm = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    diff += (estimate[i] - reference[i]) * (estimate[i] - reference[i]);
    norm += reference[i] * reference[i];
  }
  if (norm == 0.0) throw std::invalid_argument("relative_error: reference has zero norm");
  return std::sqrt(diff / norm);
}

double relative_error(double estimate, double reference) {
  if (reference == 0.0) throw std::invalid_argument("relative_error: reference is zero");
  return std::abs(estimate - reference) / std::abs(reference);
}

int aux_output_count(const ProblemSpec& spec) {
  switch (spec.reconstruction) {
    case ReconstructionKind::volterra1d:
      return 2;
    case ReconstructionKind::nested3d:
      return 4;
    case ReconstructionKind::fractional:
      break;
  }
  throw std::invalid_argument("the auxiliary formulation covers integer-order memories only");
}

AuxResidual aux_residual(const ProblemSpec& spec, const Field& outputs, Var kappa, Tape& tape,
                         std::span<const double> points) {
  check_points(spec, points);
  AuxResidual r;
  if (spec.reconstruction == ReconstructionKind::volterra1d) {
    const int maxes[] = {1};
    auto x = tape.inputs(points, 1, JetLayout::box(maxes, 1));
    Var all = outputs(tape, x);
    Var u = diffkit::derivative(output(all, 0), {0});
    Var du = diffkit::derivative(output(all, 0), {1});
    Var v = diffkit::derivative(output(all, 1), {0});
    Var dv = diffkit::derivative(output(all, 1), {1});
    Var scaled = kappa.valid() ? kappa * v : v * spec.kappa;
    r.equation = du + u - scaled - source_values(spec, tape, points);
    r.relations.push_back(dv - (u - v));
    return r;
  }
  if (spec.reconstruction == ReconstructionKind::nested3d) {
    const int maxes[] = {1, 1, 1};
    auto x = tape.inputs(points, 3, JetLayout::box(maxes, 1));
    Var all = outputs(tape, x);
    auto value = [&](int i) { return diffkit::derivative(output(all, i), {0, 0, 0}); };
    auto partial = [&](int i, int dim) {
      MultiIndex g{0, 0, 0};
      g[static_cast<std::size_t>(dim)] = 1;
      return diffkit::derivative(output(all, i), g);
    };
    Var u = value(0);
    r.equation = partial(0, 2) + partial(0, 0) + partial(0, 1) - u - value(3) - source_values(spec, tape, points);
    r.relations.push_back(partial(1, 2) - (u - value(1)));
    r.relations.push_back(partial(2, 0) - value(1));
    r.relations.push_back(partial(3, 1) - value(2));
    return r;
  }
  throw std::invalid_argument("the auxiliary formulation covers integer-order memories only");
}

std::vector<DataSet> aux_zero_sets(const ProblemSpec& spec, const DataSet& data) {
  if (spec.reconstruction == ReconstructionKind::volterra1d) {
    return {DataSet{1, {spec.lower[0]}, {0.0}}};
  }
  if (spec.reconstruction == ReconstructionKind::nested3d) {
    // v1 vanishes at t = 0, v2 at x1 = 0, v3 at x2 = 0.
    const int face_dim[] = {2, 0, 1};
    std::vector<DataSet> sets;
    for (int dim : face_dim) {
      DataSet s;
      s.dims = 3;
      for (int i = 0; i < data.size(); ++i) {
        const auto p = std::span<const double>(data.points).subspan(static_cast<std::size_t>(3 * i), 3);
        if (p[static_cast<std::size_t>(dim)] == spec.lower[static_cast<std::size_t>(dim)]) {
          s.points.insert(s.points.end(), p.begin(), p.end());
          s.values.push_back(0.0);
        }
      }
      if (s.size() == 0) throw std::invalid_argument("solution data has no points on a required face");
      sets.push_back(std::move(s));
    }
    return sets;
  }
  throw std::invalid_argument("the auxiliary formulation covers integer-order memories only");
}

AuxModel::AuxModel(ProblemSpec spec, encoders::Encoder net) : spec_(std::move(spec)), net_(std::move(net)) {
  if (net_.input_dims() != spec_.dims() || net_.output_dims() != aux_output_count(spec_)) {
    throw std::invalid_argument("auxiliary encoder shape does not match the problem");
  }
}

int AuxModel::parameter_count() const { return net_.parameter_count() + (spec_.kappa_trainable ? 1 : 0); }

int AuxModel::kappa_index() const { return spec_.kappa_trainable ? net_.parameter_count() : -1; }

std::vector<double> AuxModel::initial_parameters(std::mt19937_64& rng) const {
  auto p = net_.initial_parameters(rng);
  if (spec_.kappa_trainable) p.push_back(core::kInitialKappa);
  return p;
}

Field AuxModel::outputs(Var params) const {
  Var theta = diffkit::slice_features(params, 0, net_.parameter_count());
  const encoders::Encoder* net = &net_;
  return [net, theta](Tape& t, std::span<const Var> x) { return net->forward(t, theta, x); };
}

Var AuxModel::kappa(Var params) const {
  return spec_.kappa_trainable ? diffkit::slice_features(params, kappa_index(), 1) : Var();
}

LossBreakdown AuxModel::loss(Tape& tape, Var params, const AuxDatasets& sets) const {
  if (sets.residual.empty()) throw std::invalid_argument("residual set is empty");
  if (sets.data.size() == 0) throw std::invalid_argument("data set is empty");
  const Field field = outputs(params);
  const auto r = aux_residual(spec_, field, kappa(params), tape, sets.residual);
  LossBreakdown out;
  out.ide = core::mean_square(r.equation);
  out.memory = core::mean_square(r.relations[0]);
  for (std::size_t i = 1; i < r.relations.size(); ++i) out.memory = out.memory + core::mean_square(r.relations[i]);

  Var u = output(plain_outputs(field, tape, sets.data.points, spec_.dims()), 0);
  out.data = core::mean_square(u - tape.constant(Shape{1, sets.data.size()}, sets.data.values));
  for (std::size_t i = 0; i < sets.zero_sets.size(); ++i) {
    const DataSet& z = sets.zero_sets[i];
    Var v = output(plain_outputs(field, tape, z.points, spec_.dims()), static_cast<int>(i) + 1);
    out.data = out.data + core::mean_square(v - tape.constant(Shape{1, z.size()}, z.values));
  }
  const auto& w = spec_.weights;
  out.total = out.ide * w.ide + out.data * w.data + out.memory * w.memory;
  for (Var part : {out.ide, out.data, out.memory}) {
    if (!std::isfinite(part.scalar())) throw diffkit::NonFiniteError(part.id(), "non-finite loss component");
  }
  return out;
}

Var fpde_residual(const ProblemSpec& spec, const Field& solution, Tape& tape, const core::ConsistencySet& grid) {
  if (spec.reconstruction != ReconstructionKind::fractional) {
    throw std::invalid_argument("fpde_residual needs a fractional problem");
  }
  if (grid.outer_count() == 0) throw std::invalid_argument("temporal grid is empty");
  // Every outer point is also an inner grid point; locate it once.
  const int inner_count = static_cast<int>(grid.inner.size()) / 2;
  std::vector<BatchMap::Entry> pick;
  {
    int next = 0;
    for (int r = 0; r < grid.outer_count(); ++r) {
      const double x = grid.outer[static_cast<std::size_t>(2 * r)];
      const double t = grid.outer[static_cast<std::size_t>(2 * r + 1)];
      int found = -1;
      for (int probe = 0; probe < inner_count; ++probe) {
        const int i = (next + probe) % inner_count;
        if (grid.inner[static_cast<std::size_t>(2 * i)] == x && grid.inner[static_cast<std::size_t>(2 * i + 1)] == t) {
          found = i;
          break;
        }
      }
      if (found < 0) throw std::invalid_argument("outer point is not on the temporal grid");
      pick.push_back({r, found, 1.0});
      next = found;
    }
  }
  const BatchMap select = BatchMap::from_entries(grid.outer_count(), inner_count, std::move(pick));
  const int maxes[] = {2, 0};
  auto x = tape.inputs(grid.inner, 2, JetLayout::box(maxes, 2));
  Var u = solution(tape, x);
  Var caputo = diffkit::batch_linear(diffkit::derivative(u, {0, 0}), grid.map);
  Var uxx = diffkit::batch_linear(diffkit::derivative(u, {2, 0}), select);
  return caputo - uxx - source_values(spec, tape, grid.outer);
}

FpdeModel::FpdeModel(ProblemSpec spec, encoders::Encoder net) : spec_(std::move(spec)), net_(std::move(net)) {
  if (spec_.reconstruction != ReconstructionKind::fractional) {
    throw std::invalid_argument("the discretized residual needs a fractional problem");
  }
  if (net_.input_dims() != 2 || net_.output_dims() != 1) {
    throw std::invalid_argument("solution encoder shape does not match the problem");
  }
}

Field FpdeModel::solution(Var params) const {
  const encoders::Encoder* net = &net_;
  return [net, params](Tape& t, std::span<const Var> x) { return net->forward(t, params, x); };
}

LossBreakdown FpdeModel::loss(Tape& tape, Var params, const FpdeDatasets& sets) const {
  if (sets.data.size() == 0) throw std::invalid_argument("data set is empty");
  const Field u = solution(params);
  LossBreakdown out;
  out.ide = core::mean_square(fpde_residual(spec_, u, tape, sets.grid));
  Var fit = plain_outputs(u, tape, sets.data.points, 2);
  out.data = core::mean_square(fit - tape.constant(Shape{1, sets.data.size()}, sets.data.values));
  out.memory = tape.constant(0.0);
  const auto& w = spec_.weights;
  out.total = out.ide * w.ide + out.data * w.data;
  for (Var part : {out.ide, out.data}) {
    if (!std::isfinite(part.scalar())) throw diffkit::NonFiniteError(part.id(), "non-finite loss component");
  }
  return out;
}

}  // namespace minpo::baselines
