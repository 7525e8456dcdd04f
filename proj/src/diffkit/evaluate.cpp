#include "minpo/diffkit/evaluate.hpp"

#include <numeric>
#include <stdexcept>

namespace minpo::diffkit {

namespace {

void check_arity(const Expression& f, std::span<const double> point) {
  if (static_cast<int>(point.size()) != f.arity) {
    throw std::invalid_argument("point dimension does not match expression arity");
  }
}

}  // namespace

double eval(const Expression& f, std::span<const double> point) {
  check_arity(f, point);
  Tape tape;
  auto x = tape.inputs(point, f.arity, JetLayout::plain());
  return f.body(tape, x).scalar();
}

double input_derivative(const Expression& f, std::span<const double> point, const MultiIndex& gamma) {
  check_arity(f, point);
  if (static_cast<int>(gamma.size()) > f.arity) {
    throw std::invalid_argument("multi-index has more entries than the expression arity");
  }
  const int order = std::accumulate(gamma.begin(), gamma.end(), 0);
  if (order > kMaxInputDerivativeOrder) {
    throw std::invalid_argument("input derivatives above third order are not supported");
  }
  for (int g : gamma) {
    if (g < 0) throw std::invalid_argument("negative derivative order");
  }
  const JetLayout* layout = JetLayout::box(gamma, order);
  Tape tape;
  auto x = tape.inputs(point, f.arity, layout);
  Var y = f.body(tape, x);
  // Expressions that ignore their inputs yield plain nodes.
  if (y.layout()->is_plain() && order > 0) return 0.0;
  return derivative(y, gamma).scalar();
}

std::vector<double> param_gradient(const std::function<Var(Tape&, Var)>& loss,
                                   std::span<const double> params) {
  Tape tape;
  Var p = tape.parameter(params, 0);
  Var root = loss(tape, p);
  tape.backward(root);
  std::vector<double> g(params.size(), 0.0);
  tape.accumulate_parameter_gradients(g);
  return g;
}

}  // namespace minpo::diffkit
