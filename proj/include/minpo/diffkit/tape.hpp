#pragma once

// Define-by-run reverse-mode differentiation over batches of truncated Taylor
// jets. Input derivatives are carried forward inside each jet; parameter
// gradients flow backward through the recorded operations.

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "minpo/diffkit/jet_layout.hpp"

namespace minpo::diffkit {

/// A node holds `features x batch` jets. Storage is feature-major and then
/// coefficient-major: coefficient c of element (f, b) sits at
/// (f * layout->size() + c) * batch + b, so each coefficient plane is a
/// contiguous run over the batch.
struct Shape {
  int features = 1;
  int batch = 1;

  int elements() const { return features * batch; }
  bool is_scalar() const { return features == 1 && batch == 1; }
  bool operator==(const Shape&) const = default;
};

/// Raised when a gradient is requested through a non-finite value.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(int node, const std::string& what) : std::runtime_error(what), node_(node) {}
  int node() const { return node_; }

 private:
  int node_;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

  Shape shape() const;
  const JetLayout* layout() const;
  std::span<const double> value() const;
  /// Constant coefficient of the single element. Throws unless the node is 1x1.
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Fixed sparse linear map along the batch axis: out[r] = sum_j w_j * in[col_j].
/// Applied independently to every feature and jet coefficient.
struct BatchMap {
  int out_batch = 0;
  int in_batch = 0;
  std::vector<int> row_start;  // size out_batch + 1
  std::vector<int> column;
  std::vector<double> weight;

  struct Entry {
    int row;
    int col;
    double weight;
  };
  static BatchMap from_entries(int out_batch, int in_batch, std::vector<Entry> entries);
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  struct Node {
    Shape shape;
    const JetLayout* layout = nullptr;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<int> parents;
    Backward backward;
    bool requires_grad = false;

    /// Start of coefficient plane c of feature f.
    std::size_t plane(int f, int c) const {
      return (static_cast<std::size_t>(f) * layout->size() + static_cast<std::size_t>(c)) * shape.batch;
    }
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(double v);
  Var constant(Shape shape, const JetLayout* layout, std::vector<double> values);
  /// Plain values, one per element.
  Var constant(Shape shape, std::vector<double> values);

  /// Trainable leaf of `values.size()` plain entries (shape {n, 1}). Its gradient
  /// lands at `flat_offset` in accumulate_parameter_gradients.
  Var parameter(std::span<const double> values, std::size_t flat_offset);

  /// Seed coordinate jets for a batch of points stored row-major (batch x dims).
  /// Returns one {1, batch} node per coordinate with d/dx_i = 1 in slot e_i.
  std::vector<Var> inputs(std::span<const double> points, int dims, const JetLayout* layout);

  /// Reverse sweep from a 1x1 plain root.
  void backward(Var root);
  std::span<const double> gradient(Var v) const;
  /// Adds every parameter leaf's gradient into `flat` at its registered offset.
  void accumulate_parameter_gradients(std::span<double> flat) const;

  std::size_t size() const { return nodes_.size(); }
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  /// Record an operation. Zeroed storage for `shape x layout` is allocated;
  /// the caller fills node(result).value.
  Var emplace(Shape shape, const JetLayout* layout, std::vector<int> parents, Backward backward);

 private:
  void ensure_grad(Node& n);

  std::vector<Node> nodes_;
  std::vector<std::pair<int, std::size_t>> parameters_;
};

// Elementwise arithmetic. Operands must share a shape or one must be 1x1
// (broadcast); layouts must match or one must be plain (lifted to a constant jet).
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double b);
Var operator+(double a, Var b);
Var operator-(Var a, double b);
Var operator-(double a, Var b);
Var operator*(Var a, double b);
Var operator*(double a, Var b);
Var operator/(Var a, double b);
Var operator/(double a, Var b);

Var exp(Var a);
Var sin(Var a);
Var cos(Var a);
Var sinh(Var a);
Var cosh(Var a);
Var tanh(Var a);
/// a^p for constant p.
Var pow(Var a, double p);
/// |a| with subgradient 0 at 0.
Var abs(Var a);
Var square(Var a);

/// d^gamma a as a plain node: gamma! times the gamma coefficient.
Var derivative(Var a, const MultiIndex& gamma);

/// out[o] = sum_i W[o, i] * in[i] (+ bias[o] on the constant coefficient).
/// W is a row-major {out_features * in_features} plain node.
Var affine_features(Var in, Var weights, int out_features);
Var affine_features(Var in, Var weights, Var bias, int out_features);

/// T_0..T_degree of each feature, stacked as [T_0 block, T_1 block, ...].
Var chebyshev_expand(Var t, int degree);

/// One Chebyshev-basis layer: out[o] = sum_(n, i) W[o, n * F + i] T_n(tanh(z[i]))
/// for F input features. Same weight layout as affine_features over the
/// stacked chebyshev_expand(tanh(z)) blocks, without storing the basis.
Var chebyshev_tanh_layer(Var z, Var weights, int degree, int out_features);

Var concat_features(std::span<const Var> parts);
Var slice_features(Var a, int start, int count);
Var batch_linear(Var a, const BatchMap& map);

/// Sum over all elements of a plain node (1x1 result).
Var sum(Var a);
/// Sum of squares over all elements of a plain node (1x1 result).
Var sum_squares(Var a);

}  // namespace minpo::diffkit
