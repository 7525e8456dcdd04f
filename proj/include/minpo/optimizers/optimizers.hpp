#pragma once

#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace minpo::optimizers {

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  long step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;

  AdamState(std::size_t n, AdamConfig cfg = {});
};

/// Bias-corrected Adam update in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad);

/// Evaluates the loss at params and writes its gradient into grad.
using LossAndGradient = std::function<double(std::span<const double> params, std::span<double> grad)>;

struct LineSearchConfig {
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_trials = 25;
};

struct LineSearchResult {
  bool success = false;
  double step = 0.0;
  double loss = 0.0;
  std::vector<double> params;
  std::vector<double> grad;
};

/// Strong-Wolfe line search along `direction` (bracketing then zoom with
/// cubic interpolation). loss0/grad0 are the values at `params`.
LineSearchResult strong_wolfe_search(const LossAndGradient& fg, std::span<const double> params, double loss0,
                                     std::span<const double> grad0, std::span<const double> direction,
                                     double initial_step, const LineSearchConfig& cfg);

struct LbfgsConfig {
  int history = 20;
  int max_iterations = 2000;
  double gradient_tolerance = 1e-9;
  LineSearchConfig line_search;
};

enum class LbfgsStatus { step_taken, converged, line_search_failed };

struct LbfgsState {
  LbfgsConfig config;
  std::deque<std::vector<double>> s;
  std::deque<std::vector<double>> y;
  bool primed = false;
  double loss = 0.0;
  std::vector<double> grad;
  int iterations = 0;

  explicit LbfgsState(LbfgsConfig cfg = {}) : config(cfg) {}
};

struct LbfgsStep {
  LbfgsStatus status = LbfgsStatus::step_taken;
  double step = 0.0;
  double loss = 0.0;
  bool steepest_descent = false;
};

/// One L-BFGS iteration: two-loop direction, strong-Wolfe step. On line-search
/// failure params are left unchanged.
LbfgsStep lbfgs_step(LbfgsState& state, std::vector<double>& params, const LossAndGradient& fg);

/// Initial trial step used when no curvature history is available.
double first_trial_step(std::span<const double> grad);

}  // namespace minpo::optimizers
