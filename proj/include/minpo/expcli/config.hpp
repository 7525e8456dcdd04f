#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "minpo/core/problem.hpp"

namespace minpo::expcli {

enum class Method { minpo_kan, minpo_mlp, apinn, apikan, fpinn, fpikan, fd_forward, fd_upwind };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

bool uses_kan(Method m);
bool is_fd(Method m);

/// Invalid or inconsistent run settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Settings of one run. Zero counts, empty widths and unset optionals mean
/// "use the experiment default"; resolve() fills them in.
struct RunConfig {
  core::Experiment experiment = core::Experiment::exp1_forward;
  Method method = Method::minpo_kan;
  /// Hidden-layer widths.
  std::vector<int> widths;
  int degree = 0;
  std::optional<double> kappa;
  std::optional<double> alpha;
  /// Time horizon of the Volterra problem.
  double horizon = 1.0;
  int n_res = 0;
  /// Gauss-Legendre nodes per integral dimension.
  int n_i = 0;
  int n_t = 0;
  int n_meas = 0;
  /// Outer points of the memory consistency set (spatial samples for the fractional problem).
  int n_m = 0;
  /// Data points per boundary or initial face.
  int n_bc = 0;
  /// Cells per axis of the finite-difference grid.
  int n_x = 0;
  std::uint64_t seed = 0;
  int adam_iters = -1;
  int lbfgs_iters = -1;
  double learning_rate = 1e-3;
  core::LossWeights weights;
  int log_every = 0;
  /// Pick the hidden width so the parameter count tracks n_res.
  bool width_ladder = false;
  std::string out = "run";
};

/// Sets one field from its textual key (the CLI flag name without dashes,
/// e.g. "n-res"; underscores are accepted too).
void set_option(RunConfig& config, const std::string& key, const std::string& value);

/// Every key understood by set_option.
const std::vector<std::string>& option_keys();

/// Reads key=value lines; '#' starts a comment.
void apply_config_text(RunConfig& config, std::istream& in);
void apply_config_file(RunConfig& config, const std::string& path);

/// Checks method/experiment compatibility and fills in defaults.
RunConfig resolve(RunConfig config);

/// key=value dump of a resolved config.
std::string describe(const RunConfig& config);

/// Problem definition for the configured experiment.
core::ProblemSpec make_problem(const RunConfig& config);

/// Hidden width w (three hidden layers) whose parameter count is closest to target.
int ladder_width(const RunConfig& config, int target);

}  // namespace minpo::expcli
