#pragma once

#include <string>
#include <vector>

#include "minpo/core/problem.hpp"
#include "minpo/encoders/encoder.hpp"
#include "minpo/expcli/config.hpp"

namespace minpo::expcli {

/// Training sets of one run. Which members are filled depends on the method:
/// `memory` for MINPO, `zero_sets` for the auxiliary baselines, `grid` for the
/// discretized fractional baseline.
struct SampledData {
  std::vector<double> residual;
  core::DataSet data;
  core::ConsistencySet memory;
  std::vector<core::DataSet> zero_sets;
  core::ConsistencySet grid;
};

/// Deterministic in the config (seed included).
SampledData sample_points(const RunConfig& config);

/// Fixed evaluation grid of the experiment (flat points).
std::vector<double> evaluation_points(const RunConfig& config);

struct LogRow {
  int iteration = 0;
  double ide = 0.0;
  double data = 0.0;
  double memory = 0.0;
  double total = 0.0;
  double e_u = 0.0;
  double e_m = 0.0;
  /// NaN when kappa is not inferred.
  double e_kappa = 0.0;
};

/// Predicted and exact values on the evaluation grid.
struct EvaluationFields {
  int dims = 0;
  std::vector<double> points;
  std::vector<double> u_pred;
  std::vector<double> u_exact;
  std::vector<double> m_pred;
  std::vector<double> m_exact;
};

struct RunRecord {
  RunConfig config;
  std::vector<LogRow> log;
  double e_u = 0.0;
  double e_m = 0.0;
  double e_kappa = 0.0;
  double kappa_estimate = 0.0;
  double wall_seconds = 0.0;
  bool diverged = false;
  std::string message;
  /// Fixed-point sweeps of the finite-difference solver.
  int fd_iterations = 0;
  EvaluationFields fields;
  std::vector<encoders::CheckpointEntry> checkpoint;
};

/// Runs the oracle self-check, samples, trains (Adam, then L-BFGS) or solves
/// (finite differences) and evaluates on the fixed grid. A non-finite loss
/// stops training; the record then holds the last finite parameters and
/// diverged = true. Throws ConfigError for invalid settings.
RunRecord run_experiment(const RunConfig& config);

/// Writes run.csv, summary.csv, fields.csv, checkpoint.txt and config.txt into dir.
void emit_metrics(const RunRecord& record, const std::string& dir);

/// Largest self-check deviation allowed before training starts.
inline constexpr double kOracleTolerance = 1e-9;

}  // namespace minpo::expcli
