#pragma once

#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "minpo/diffkit/tape.hpp"

namespace minpo::encoders {

using diffkit::Tape;
using diffkit::Var;

/// T_0(x)..T_k(x) by the three-term recurrence. Arguments within 1e-12 of the
/// interval are clamped to [-1, 1].
std::vector<double> chebyshev_basis(double x, int degree);

/// Per-dimension affine map from a box domain onto [-1, 1]^d.
class InputScaler {
 public:
  InputScaler() = default;
  InputScaler(std::vector<double> lower, std::vector<double> upper);

  int dims() const { return static_cast<int>(lower_.size()); }
  std::vector<double> scale(std::span<const double> x) const;
  std::vector<double> unscale(std::span<const double> y) const;
  std::vector<Var> scale(std::span<const Var> x) const;

  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
};

enum class EncoderKind { mlp, ckan };

std::string to_string(EncoderKind kind);
EncoderKind encoder_kind_from_string(const std::string& name);

/// A feed-forward field: either a tanh MLP or a Chebyshev KAN. Parameters live
/// outside the encoder in a flat vector.
///
/// cKAN layout: layer l holds w_out * (k+1) * w_in coefficients, row-major as
/// W[o, n * w_in + i] for output o, degree n, input i. tanh is applied to the
/// scaled input and between layers, not after the last layer.
///
/// MLP layout per layer: weights (w_out * w_in, row-major) then biases (w_out).
class Encoder {
 public:
  static Encoder mlp(std::vector<int> widths, InputScaler scaler);
  static Encoder ckan(std::vector<int> widths, int degree, InputScaler scaler);

  EncoderKind kind() const { return kind_; }
  const std::vector<int>& widths() const { return widths_; }
  int degree() const { return degree_; }
  int input_dims() const { return widths_.front(); }
  int output_dims() const { return widths_.back(); }
  const InputScaler& scaler() const { return scaler_; }
  int parameter_count() const;

  std::vector<double> initial_parameters(std::mt19937_64& rng) const;

  /// Evaluates the field on a batch. `coords` holds one {1, B} node per input
  /// dimension in problem coordinates; `params` is a {parameter_count, 1} node.
  /// Returns an {output_dims, B} node.
  Var forward(Tape& tape, Var params, std::span<const Var> coords) const;

  /// Plain evaluation at one point, for tests and plotting.
  std::vector<double> evaluate(std::span<const double> params, std::span<const double> point) const;

 private:
  Encoder(EncoderKind kind, std::vector<int> widths, int degree, InputScaler scaler);

  EncoderKind kind_;
  std::vector<int> widths_;
  int degree_;
  InputScaler scaler_;
};

/// Parameter count of a cKAN with the given widths and degree.
int ckan_parameter_count(std::span<const int> widths, int degree);
/// Parameter count of an MLP with the given widths.
int mlp_parameter_count(std::span<const int> widths);

/// Wraps a raw field as multiplier(xi) * raw(xi). The multiplier works in
/// problem coordinates.
struct HardConstraint {
  std::function<Var(std::span<const Var>)> multiplier;

  Var apply(std::span<const Var> coords, Var raw) const;
};

/// The product of all coordinates, vanishing on every coordinate plane.
HardConstraint coordinate_product_constraint();

/// One saved encoder with its flat parameters.
struct CheckpointEntry {
  std::string module;
  EncoderKind kind = EncoderKind::ckan;
  std::vector<int> widths;
  int degree = 0;
  std::vector<double> params;
};

void write_checkpoint(std::ostream& out, std::span<const CheckpointEntry> entries);
std::vector<CheckpointEntry> read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, std::span<const CheckpointEntry> entries);
std::vector<CheckpointEntry> load_checkpoint(const std::string& path);

}  // namespace minpo::encoders
