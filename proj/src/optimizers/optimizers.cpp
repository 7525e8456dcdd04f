#include "minpo/optimizers/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace minpo::optimizers {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), kept
// inside the bracket away from its ends.
double cubic_minimizer(double a, double fa, double da, double b, double fb, double db) {
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  double x = 0.5 * (a + b);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = db - da + 2.0 * d2;
    if (denom != 0.0) x = b - (b - a) * (db + d2 - d1) / denom;
  }
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(x) || x < lo + margin || x > hi - margin) x = 0.5 * (a + b);
  return x;
}

}  // namespace

AdamState::AdamState(std::size_t n, AdamConfig cfg) : config(cfg), first_moment(n, 0.0), second_moment(n, 0.0) {}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad) {
  if (params.size() != state.first_moment.size() || grad.size() != params.size()) {
    throw std::invalid_argument("adam_step: size mismatch");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) throw NonFiniteGradient("adam_step: non-finite gradient");
  }
  const auto& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grad[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grad[i] * grad[i];
    // The normalized step can exceed one when recent gradients dominate the
    // second-moment history; it is capped so no coordinate moves more than lr.
    const double r = (m / bc1) / (std::sqrt(v / bc2) + c.epsilon);
    params[i] -= c.learning_rate * std::clamp(r, -1.0, 1.0);
  }
}

LineSearchResult strong_wolfe_search(const LossAndGradient& fg, std::span<const double> params, double loss0,
                                     std::span<const double> grad0, std::span<const double> direction,
                                     double initial_step, const LineSearchConfig& cfg) {
  const std::size_t n = params.size();
  const double slope0 = dot(grad0, direction);
  LineSearchResult out;
  if (!(slope0 < 0.0)) return out;

  struct Trial {
    double step, loss, slope;
    std::vector<double> x, g;
  };
  int trials = 0;
  auto evaluate = [&](double step) {
    Trial t{step, 0.0, 0.0, std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) t.x[i] = params[i] + step * direction[i];
    t.loss = fg(t.x, t.g);
    t.slope = dot(t.g, direction);
    ++trials;
    return t;
  };
  auto accept = [&](Trial& t) {
    out.success = true;
    out.step = t.step;
    out.loss = t.loss;
    out.params = std::move(t.x);
    out.grad = std::move(t.g);
  };
  auto armijo = [&](const Trial& t) { return t.loss <= loss0 + cfg.c1 * t.step * slope0; };
  auto curvature = [&](const Trial& t) { return std::abs(t.slope) <= -cfg.c2 * slope0; };

  Trial prev{0.0, loss0, slope0, {}, {}};
  double step = initial_step;
  std::optional<Trial> lo_opt;
  std::optional<Trial> hi_opt;
  while (trials < cfg.max_trials) {
    Trial cur = evaluate(step);
    if (!std::isfinite(cur.loss) || !armijo(cur) || (trials > 1 && cur.loss >= prev.loss)) {
      lo_opt = std::move(prev);
      hi_opt = std::move(cur);
      break;
    }
    if (curvature(cur)) {
      accept(cur);
      return out;
    }
    if (cur.slope >= 0.0) {
      lo_opt = std::move(cur);
      hi_opt = std::move(prev);
      break;
    }
    prev = std::move(cur);
    step *= 2.0;
  }
  if (!lo_opt) return out;

  Trial lo = std::move(*lo_opt);
  Trial hi = std::move(*hi_opt);
  while (trials < cfg.max_trials) {
    double s;
    if (std::isfinite(hi.loss)) {
      s = cubic_minimizer(lo.step, lo.loss, lo.slope, hi.step, hi.loss, hi.slope);
    } else {
      s = 0.5 * (lo.step + hi.step);
    }
    if (std::abs(hi.step - lo.step) <= 1e-16 * std::max(1.0, std::abs(lo.step))) break;
    Trial cur = evaluate(s);
    if (!std::isfinite(cur.loss) || !armijo(cur) || cur.loss >= lo.loss) {
      hi = std::move(cur);
      continue;
    }
    if (curvature(cur)) {
      accept(cur);
      return out;
    }
    if (cur.slope * (hi.step - lo.step) >= 0.0) hi = std::move(lo);
    lo = std::move(cur);
  }
  return out;
}

double first_trial_step(std::span<const double> grad) {
  const double g = norm(grad);
  return g > 0.0 ? std::min(1.0, 1.0 / g) : 1.0;
}

LbfgsStep lbfgs_step(LbfgsState& state, std::vector<double>& params, const LossAndGradient& fg) {
  const std::size_t n = params.size();
  LbfgsStep result;
  if (!state.primed) {
    state.grad.assign(n, 0.0);
    state.loss = fg(params, state.grad);
    state.primed = true;
  }
  result.loss = state.loss;
  if (!std::isfinite(state.loss)) throw NonFiniteGradient("lbfgs_step: non-finite loss");
  if (norm(state.grad) <= state.config.gradient_tolerance) {
    result.status = LbfgsStatus::converged;
    return result;
  }

  // Two-loop recursion.
  std::vector<double> q = state.grad;
  const std::size_t m = state.s.size();
  std::vector<double> alpha(m), rho(m);
  for (std::size_t k = m; k-- > 0;) {
    rho[k] = 1.0 / dot(state.y[k], state.s[k]);
    alpha[k] = rho[k] * dot(state.s[k], q);
    for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[k] * state.y[k][i];
  }
  if (m > 0) {
    const double gamma = dot(state.s.back(), state.y.back()) / dot(state.y.back(), state.y.back());
    for (double& v : q) v *= gamma;
  }
  for (std::size_t k = 0; k < m; ++k) {
    const double beta = rho[k] * dot(state.y[k], q);
    for (std::size_t i = 0; i < n; ++i) q[i] += state.s[k][i] * (alpha[k] - beta);
  }
  std::vector<double> direction(n);
  for (std::size_t i = 0; i < n; ++i) direction[i] = -q[i];

  double initial = m > 0 ? 1.0 : first_trial_step(state.grad);
  if (!(dot(direction, state.grad) < 0.0)) {
    for (std::size_t i = 0; i < n; ++i) direction[i] = -state.grad[i];
    initial = first_trial_step(state.grad);
    result.steepest_descent = true;
  }

  auto ls = strong_wolfe_search(fg, params, state.loss, state.grad, direction, initial, state.config.line_search);
  if (!ls.success && !result.steepest_descent && m > 0) {
    // Retry once along the negative gradient with fresh history.
    state.s.clear();
    state.y.clear();
    for (std::size_t i = 0; i < n; ++i) direction[i] = -state.grad[i];
    result.steepest_descent = true;
    ls = strong_wolfe_search(fg, params, state.loss, state.grad, direction, first_trial_step(state.grad),
                             state.config.line_search);
  }
  if (!ls.success) {
    result.status = LbfgsStatus::line_search_failed;
    return result;
  }

  std::vector<double> s(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = ls.params[i] - params[i];
    y[i] = ls.grad[i] - state.grad[i];
  }
  if (state.config.history > 0 && dot(s, y) > 1e-12 * norm(s) * norm(y)) {
    state.s.push_back(std::move(s));
    state.y.push_back(std::move(y));
    while (static_cast<int>(state.s.size()) > state.config.history) {
      state.s.pop_front();
      state.y.pop_front();
    }
  }
  params = std::move(ls.params);
  state.grad = std::move(ls.grad);
  state.loss = ls.loss;
  ++state.iterations;
  result.status = LbfgsStatus::step_taken;
  result.step = ls.step;
  result.loss = ls.loss;
  return result;
}

}  // namespace minpo::optimizers
