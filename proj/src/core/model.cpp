#include "minpo/core/model.hpp"

#include <stdexcept>

namespace minpo::core {

MinpoModel::MinpoModel(ProblemSpec spec, encoders::Encoder memory, std::optional<encoders::Encoder> inverse,
                       encoders::HardConstraint constraint)
    : spec_(std::move(spec)), memory_(std::move(memory)), inverse_(std::move(inverse)), constraint_(std::move(constraint)) {
  const bool fractional = spec_.reconstruction == ReconstructionKind::fractional;
  if (fractional != inverse_.has_value()) {
    throw std::invalid_argument("an inverse field is required exactly for fractional problems");
  }
  if (memory_.input_dims() != spec_.dims() || memory_.output_dims() != 1) {
    throw std::invalid_argument("memory encoder shape does not match the problem");
  }
  if (inverse_ && (inverse_->input_dims() != spec_.dims() || inverse_->output_dims() != 1)) {
    throw std::invalid_argument("inverse encoder shape does not match the problem");
  }
}

int MinpoModel::parameter_count() const {
  return memory_.parameter_count() + (inverse_ ? inverse_->parameter_count() : 0) + (spec_.kappa_trainable ? 1 : 0);
}

int MinpoModel::kappa_index() const { return spec_.kappa_trainable ? parameter_count() - 1 : -1; }

std::vector<double> MinpoModel::initial_parameters(std::mt19937_64& rng) const {
  auto p = memory_.initial_parameters(rng);
  if (inverse_) {
    auto q = inverse_->initial_parameters(rng);
    p.insert(p.end(), q.begin(), q.end());
  }
  if (spec_.kappa_trainable) p.push_back(kInitialKappa);
  return p;
}

FieldSet MinpoModel::fields(Tape& tape, Var params) const {
  (void)tape;
  FieldSet f;
  Var theta = diffkit::slice_features(params, 0, memory_.parameter_count());
  const encoders::Encoder* mem = &memory_;
  const encoders::HardConstraint* hc = &constraint_;
  f.memory = [mem, hc, theta](Tape& t, std::span<const Var> x) { return hc->apply(x, mem->forward(t, theta, x)); };
  if (inverse_) {
    Var phi = diffkit::slice_features(params, inverse_offset(), inverse_->parameter_count());
    const encoders::Encoder* inv = &*inverse_;
    f.inverse = [inv, phi](Tape& t, std::span<const Var> x) { return inv->forward(t, phi, x); };
  }
  if (spec_.kappa_trainable) f.kappa = diffkit::slice_features(params, kappa_index(), 1);
  return f;
}

LossBreakdown MinpoModel::loss(Tape& tape, Var params, const Datasets& sets) const {
  return total_loss(spec_, fields(tape, params), tape, sets);
}

}  // namespace minpo::core
