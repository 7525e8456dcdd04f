#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace minpo::diffkit {

/// Per-coordinate derivative orders, e.g. {1, 1, 1} for d^3 f / dx1 dx2 dt.
using MultiIndex = std::vector<int>;

/// Downward-closed set of multi-indices describing which Taylor coefficients a
/// jet carries. Coefficient k of a jet is d^gamma f / gamma! for gamma = index(k),
/// so multiplication is a truncated convolution over the set.
class JetLayout {
 public:
  /// One entry of the truncated product table: out[c] += a[a_index] * b[b_index].
  struct Term {
    int a;
    int b;
    int c;
  };

  /// Layout with a single coefficient (plain reals).
  static const JetLayout* plain();

  /// All gamma with gamma[i] <= max_per_dim[i] and |gamma| <= max_total.
  /// Layouts are interned: equal requests return the same pointer.
  static const JetLayout* box(std::span<const int> max_per_dim, int max_total);

  /// Smallest box layout containing every listed multi-index (and everything below).
  static const JetLayout* covering(std::span<const MultiIndex> needed);

  int size() const { return static_cast<int>(indices_.size()); }
  int dims() const { return dims_; }
  int max_order() const { return max_order_; }
  bool is_plain() const { return indices_.size() == 1; }

  const MultiIndex& index(int k) const { return indices_[static_cast<std::size_t>(k)]; }
  /// Position of gamma in this layout, or -1.
  int find(const MultiIndex& gamma) const;
  /// Position of the unit index e_dim, or -1 if first derivatives in dim are absent.
  int unit(int dim) const;
  /// gamma! for coefficient k, converting Taylor coefficients to partial derivatives.
  double factorial(int k) const { return factorials_[static_cast<std::size_t>(k)]; }

  const std::vector<Term>& products() const { return products_; }

  /// out = a * b (truncated). out must not alias a or b.
  void multiply(const double* a, const double* b, double* out) const;
  /// out += a * b (truncated).
  void multiply_add(const double* a, const double* b, double* out) const;
  /// Adjoint of q -> q * b: grad_q += g (*)^T b.
  void multiply_adjoint(const double* g, const double* b, double* grad_q) const;

 private:
  JetLayout(int dims, std::vector<int> maxes, int max_total);

  int dims_ = 0;
  int max_order_ = 0;
  std::vector<MultiIndex> indices_;
  std::vector<double> factorials_;
  std::vector<Term> products_;
};

}  // namespace minpo::diffkit
