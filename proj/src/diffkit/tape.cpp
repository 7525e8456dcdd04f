#include "minpo/diffkit/tape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace minpo::diffkit {

Shape Var::shape() const { return tape_->node(id_).shape; }

const JetLayout* Var::layout() const { return tape_->node(id_).layout; }

std::span<const double> Var::value() const { return tape_->node(id_).value; }

double Var::scalar() const {
  const auto& n = tape_->node(id_);
  if (!n.shape.is_scalar()) throw std::logic_error("Var::scalar on a non-scalar node");
  return n.value[0];
}

BatchMap BatchMap::from_entries(int out_batch, int in_batch, std::vector<Entry> entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.row < b.row; });
  BatchMap m;
  m.out_batch = out_batch;
  m.in_batch = in_batch;
  m.row_start.assign(static_cast<std::size_t>(out_batch) + 1, 0);
  m.column.reserve(entries.size());
  m.weight.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= out_batch || e.col < 0 || e.col >= in_batch) {
      throw std::out_of_range("BatchMap entry outside map bounds");
    }
    ++m.row_start[static_cast<std::size_t>(e.row) + 1];
    m.column.push_back(e.col);
    m.weight.push_back(e.weight);
  }
  for (std::size_t r = 0; r < static_cast<std::size_t>(out_batch); ++r) {
    m.row_start[r + 1] += m.row_start[r];
  }
  return m;
}

Var Tape::emplace(Shape shape, const JetLayout* layout, std::vector<int> parents,
                  Backward backward) {
  Node n;
  n.shape = shape;
  n.layout = layout;
  n.value.assign(static_cast<std::size_t>(shape.elements()) * layout->size(), 0.0);
  for (int p : parents) n.requires_grad = n.requires_grad || node(p).requires_grad;
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(double v) { return constant(Shape{1, 1}, JetLayout::plain(), {v}); }

Var Tape::constant(Shape shape, std::vector<double> values) {
  return constant(shape, JetLayout::plain(), std::move(values));
}

Var Tape::constant(Shape shape, const JetLayout* layout, std::vector<double> values) {
  if (values.size() != static_cast<std::size_t>(shape.elements()) * layout->size()) {
    throw std::invalid_argument("Tape::constant: value count does not match shape");
  }
  Node n;
  n.shape = shape;
  n.layout = layout;
  n.value = std::move(values);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(std::span<const double> values, std::size_t flat_offset) {
  Node n;
  n.shape = Shape{static_cast<int>(values.size()), 1};
  n.layout = JetLayout::plain();
  n.value.assign(values.begin(), values.end());
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  int id = static_cast<int>(nodes_.size()) - 1;
  parameters_.emplace_back(id, flat_offset);
  return Var(this, id);
}

std::vector<Var> Tape::inputs(std::span<const double> points, int dims, const JetLayout* layout) {
  if (dims <= 0 || points.size() % static_cast<std::size_t>(dims) != 0) {
    throw std::invalid_argument("Tape::inputs: point dimension mismatch");
  }
  const int batch = static_cast<int>(points.size() / static_cast<std::size_t>(dims));
  const int k = layout->size();
  std::vector<Var> out;
  for (int d = 0; d < dims; ++d) {
    std::vector<double> v(static_cast<std::size_t>(batch) * k, 0.0);
    const int slot = layout->unit(d);
    for (int b = 0; b < batch; ++b) {
      v[static_cast<std::size_t>(b)] = points[static_cast<std::size_t>(b * dims + d)];
      if (slot >= 0) v[static_cast<std::size_t>(slot) * batch + b] = 1.0;
    }
    out.push_back(constant(Shape{1, batch}, layout, std::move(v)));
  }
  return out;
}

void Tape::ensure_grad(Node& n) {
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw std::invalid_argument("Tape::backward: foreign node");
  Node& r = node(root.id());
  if (!r.shape.is_scalar() || !r.layout->is_plain()) {
    throw std::invalid_argument("Tape::backward: root must be a plain scalar");
  }
  if (!std::isfinite(r.value[0])) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      for (double v : nodes_[i].value) {
        if (!std::isfinite(v)) {
          std::ostringstream msg;
          msg << "non-finite value at node " << i;
          throw NonFiniteError(static_cast<int>(i), msg.str());
        }
      }
    }
    throw NonFiniteError(root.id(), "non-finite root");
  }
  // Gradients are allocated only for nodes the sweep actually reaches.
  for (auto& n : nodes_) n.grad.clear();
  ensure_grad(r);
  r.grad[0] = 1.0;
  for (int i = root.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    for (int p : n.parents) {
      if (node(p).requires_grad) ensure_grad(node(p));
    }
    n.backward(*this, i);
  }
}

std::span<const double> Tape::gradient(Var v) const {
  return node(v.id()).grad;
}

void Tape::accumulate_parameter_gradients(std::span<double> flat) const {
  for (const auto& [id, offset] : parameters_) {
    const auto& g = node(id).grad;
    if (g.empty()) continue;
    if (offset + g.size() > flat.size()) {
      throw std::out_of_range("parameter gradient outside flat buffer");
    }
    for (std::size_t i = 0; i < g.size(); ++i) flat[offset + i] += g[i];
  }
}

}  // namespace minpo::diffkit
