#include <chrono>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>

#include "minpo/baselines/baselines.hpp"
#include "minpo/core/model.hpp"
#include "minpo/expcli/oracle.hpp"
#include "minpo/expcli/run.hpp"
#include "minpo/fd/fd.hpp"
#include "minpo/fractional/l1.hpp"
#include "minpo/optimizers/optimizers.hpp"

namespace minpo::expcli {

using core::Experiment;
using diffkit::Shape;
using diffkit::Tape;
using diffkit::Var;

namespace {

constexpr int kChunk = 2048;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Prediction {
  std::vector<double> u;
  std::vector<double> m;
  double kappa = kNaN;
};

// A trainable method: flat parameters, a loss and a predictor on the evaluation grid.
struct Trainable {
  std::vector<double> init;
  std::function<core::LossBreakdown(Tape&, Var)> loss;
  std::function<Prediction(std::span<const double>)> predict;
  std::function<std::vector<encoders::CheckpointEntry>(std::span<const double>)> checkpoint;
};

// Values of fn over the points, one tape per chunk.
std::vector<double> chunked(std::span<const double> points, int dims,
                            const std::function<Var(Tape&, std::span<const double>)>& fn) {
  std::vector<double> out;
  const std::size_t step = static_cast<std::size_t>(kChunk * dims);
  for (std::size_t start = 0; start < points.size(); start += step) {
    const auto part = points.subspan(start, std::min(step, points.size() - start));
    Tape t;
    Var v = fn(t, part);
    const auto vals = v.value();
    out.insert(out.end(), vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(part.size() / static_cast<std::size_t>(dims)));
  }
  return out;
}

Var constant_params(Tape& t, std::span<const double> p) {
  return t.constant(Shape{static_cast<int>(p.size()), 1}, std::vector<double>(p.begin(), p.end()));
}

std::vector<int> full_widths(const RunConfig& c, int in, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), c.widths.begin(), c.widths.end());
  w.push_back(out);
  return w;
}

encoders::Encoder make_encoder(const RunConfig& c, const core::ProblemSpec& spec, int outputs) {
  encoders::InputScaler scaler(spec.lower, spec.upper);
  const auto w = full_widths(c, spec.dims(), outputs);
  return uses_kan(c.method) ? encoders::Encoder::ckan(w, c.degree, scaler) : encoders::Encoder::mlp(w, scaler);
}

encoders::CheckpointEntry entry(const std::string& module, const encoders::Encoder& net, std::span<const double> p) {
  return {module, net.kind(), net.widths(), net.degree(), std::vector<double>(p.begin(), p.end())};
}

encoders::CheckpointEntry kappa_entry(double kappa) {
  return {"kappa", encoders::EncoderKind::mlp, {}, 0, {kappa}};
}

std::mt19937_64 init_rng(const RunConfig& c) { return std::mt19937_64(c.seed ^ 0x9e3779b97f4a7c15ULL); }

Trainable minpo_trainable(const RunConfig& c, const core::ProblemSpec& spec, const SampledData& data,
                          const std::vector<double>& eval) {
  const auto net = make_encoder(c, spec, 1);
  std::optional<encoders::Encoder> inverse;
  if (c.experiment == Experiment::exp3) inverse = make_encoder(c, spec, 1);
  encoders::HardConstraint constraint;
  if (c.experiment == Experiment::exp2) constraint = encoders::coordinate_product_constraint();
  auto model = std::make_shared<core::MinpoModel>(spec, net, inverse, constraint);
  auto sets = std::make_shared<core::Datasets>(core::Datasets{data.residual, data.data, data.memory});
  auto rng = init_rng(c);
  Trainable tr;
  tr.init = model->initial_parameters(rng);
  tr.loss = [model, sets](Tape& t, Var p) { return model->loss(t, p, *sets); };
  tr.predict = [model, eval](std::span<const double> p) {
    const auto& s = model->spec();
    Prediction out;
    out.u = chunked(eval, s.dims(), [&](Tape& t, std::span<const double> pts) {
      return core::reconstructed_solution(s, model->fields(t, constant_params(t, p)), t, pts);
    });
    out.m = chunked(eval, s.dims(), [&](Tape& t, std::span<const double> pts) {
      return core::memory_values(s, model->fields(t, constant_params(t, p)), t, pts);
    });
    if (model->kappa_index() >= 0) out.kappa = p[static_cast<std::size_t>(model->kappa_index())];
    return out;
  };
  tr.checkpoint = [model](std::span<const double> p) {
    std::vector<encoders::CheckpointEntry> e;
    const int nm = model->memory_encoder().parameter_count();
    e.push_back(entry("memory", model->memory_encoder(), p.subspan(0, static_cast<std::size_t>(nm))));
    if (model->inverse_encoder()) {
      e.push_back(entry("inverse", *model->inverse_encoder(),
                        p.subspan(static_cast<std::size_t>(model->inverse_offset()),
                                  static_cast<std::size_t>(model->inverse_encoder()->parameter_count()))));
    }
    if (model->kappa_index() >= 0) e.push_back(kappa_entry(p[static_cast<std::size_t>(model->kappa_index())]));
    return e;
  };
  return tr;
}

Trainable aux_trainable(const RunConfig& c, const core::ProblemSpec& spec, const SampledData& data,
                        const std::vector<double>& eval) {
  const auto net = make_encoder(c, spec, baselines::aux_output_count(spec));
  auto model = std::make_shared<baselines::AuxModel>(spec, net);
  auto sets = std::make_shared<baselines::AuxDatasets>(baselines::AuxDatasets{data.residual, data.data, data.zero_sets});
  auto rng = init_rng(c);
  Trainable tr;
  tr.init = model->initial_parameters(rng);
  tr.loss = [model, sets](Tape& t, Var p) { return model->loss(t, p, *sets); };
  tr.predict = [model, eval](std::span<const double> p) {
    const auto& s = model->spec();
    const int last = baselines::aux_output_count(s) - 1;
    auto output = [&](int index) {
      return chunked(eval, s.dims(), [&](Tape& t, std::span<const double> pts) {
        auto x = t.inputs(pts, s.dims(), diffkit::JetLayout::plain());
        return diffkit::slice_features(model->outputs(constant_params(t, p))(t, x), index, 1);
      });
    };
    Prediction out;
    out.u = output(0);
    out.m = output(last);
    if (model->kappa_index() >= 0) out.kappa = p[static_cast<std::size_t>(model->kappa_index())];
    return out;
  };
  tr.checkpoint = [model](std::span<const double> p) {
    std::vector<encoders::CheckpointEntry> e;
    e.push_back(entry("auxiliary", model->encoder(), p.subspan(0, static_cast<std::size_t>(model->encoder().parameter_count()))));
    if (model->kappa_index() >= 0) e.push_back(kappa_entry(p[static_cast<std::size_t>(model->kappa_index())]));
    return e;
  };
  return tr;
}

Trainable fpde_trainable(const RunConfig& c, const core::ProblemSpec& spec, const SampledData& data,
                         const std::vector<double>& eval) {
  const auto net = make_encoder(c, spec, 1);
  auto model = std::make_shared<baselines::FpdeModel>(spec, net);
  auto sets = std::make_shared<baselines::FpdeDatasets>(baselines::FpdeDatasets{data.grid, data.data});
  auto rng = init_rng(c);
  Trainable tr;
  tr.init = model->initial_parameters(rng);
  tr.loss = [model, sets](Tape& t, Var p) { return model->loss(t, p, *sets); };
  tr.predict = [model, eval](std::span<const double> p) {
    const auto& s = model->spec();
    auto values = [&](std::span<const double> pts) {
      return chunked(pts, 2, [&](Tape& t, std::span<const double> part) {
        auto x = t.inputs(part, 2, diffkit::JetLayout::plain());
        return model->solution(constant_params(t, p))(t, x);
      });
    };
    Prediction out;
    out.u = values(eval);
    // The method only knows its Caputo derivative on the training mesh t_m = m * T / n_t
    // (L1 over the first m steps, zero at t = 0); between mesh times it is
    // interpolated linearly.
    const int n = s.n_t;
    const double horizon = s.upper[1];
    const double h = horizon / n;
    std::vector<double> history;
    history.reserve(eval.size() / 2 * static_cast<std::size_t>(n + 1));
    for (std::size_t i = 0; i < eval.size(); i += 2) {
      for (int k = 0; k <= n; ++k) history.insert(history.end(), {eval[i], k * h});
    }
    const auto u_hist = values(history);
    std::vector<double> mesh(static_cast<std::size_t>(n + 1));
    for (std::size_t i = 0; i < eval.size() / 2; ++i) {
      const auto samples = std::span<const double>(u_hist).subspan(i * static_cast<std::size_t>(n + 1), static_cast<std::size_t>(n + 1));
      mesh[0] = 0.0;
      for (int m = 1; m <= n; ++m) mesh[static_cast<std::size_t>(m)] = fractional::caputo_l1(samples, s.alpha, h, m);
      const double pos = std::clamp(eval[2 * i + 1] / h, 0.0, static_cast<double>(n));
      const int left = std::min(static_cast<int>(pos), n - 1);
      const double w = pos - left;
      out.m.push_back((1.0 - w) * mesh[static_cast<std::size_t>(left)] + w * mesh[static_cast<std::size_t>(left + 1)]);
    }
    return out;
  };
  tr.checkpoint = [model](std::span<const double> p) {
    return std::vector<encoders::CheckpointEntry>{entry("solution", model->encoder(), p)};
  };
  return tr;
}

double relative(std::span<const double> a, std::span<const double> b) { return baselines::relative_error(a, b); }

struct Evaluator {
  const Trainable& tr;
  const core::ProblemSpec& spec;
  const std::vector<double>& u_exact;
  const std::vector<double>& m_exact;

  void errors(std::span<const double> p, double& e_u, double& e_m, double& e_kappa, double& kappa, Prediction* keep) const {
    Prediction pr = tr.predict(p);
    e_u = relative(pr.u, u_exact);
    e_m = relative(pr.m, m_exact);
    kappa = pr.kappa;
    e_kappa = std::isnan(pr.kappa) ? kNaN : baselines::relative_error(pr.kappa, spec.kappa);
    if (keep) *keep = std::move(pr);
  }
};

void train(const RunConfig& c, const Trainable& tr, const Evaluator& ev, RunRecord& rec, std::vector<double>& p) {
  const std::size_t n = p.size();
  auto evaluate = [&](std::span<const double> q, std::span<double> grad) {
    Tape t;
    Var v = t.parameter(q, 0);
    auto l = tr.loss(t, v);
    t.backward(l.total);
    std::fill(grad.begin(), grad.end(), 0.0);
    t.accumulate_parameter_gradients(grad);
    return l.total.scalar();
  };
  auto log_row = [&](int iteration, std::span<const double> q) {
    Tape t;
    Var v = t.constant(Shape{static_cast<int>(n), 1}, std::vector<double>(q.begin(), q.end()));
    auto l = tr.loss(t, v);
    LogRow row;
    row.iteration = iteration;
    row.ide = l.ide.scalar();
    row.data = l.data.scalar();
    row.memory = l.memory.scalar();
    row.total = l.total.scalar();
    double kappa = 0.0;
    ev.errors(q, row.e_u, row.e_m, row.e_kappa, kappa, nullptr);
    rec.log.push_back(row);
  };

  std::vector<double> good = p;
  std::vector<double> grad(n);
  int iteration = 0;
  try {
    optimizers::AdamState adam(n, optimizers::AdamConfig{c.learning_rate});
    for (; iteration < c.adam_iters; ++iteration) {
      if (iteration % c.log_every == 0) log_row(iteration, p);
      const double loss = evaluate(p, grad);
      if (!std::isfinite(loss)) throw diffkit::NonFiniteError(-1, "non-finite loss");
      good = p;
      optimizers::adam_step(adam, p, grad);
    }
    optimizers::LbfgsConfig cfg;
    cfg.max_iterations = c.lbfgs_iters;
    optimizers::LbfgsState lbfgs(cfg);
    optimizers::LossAndGradient fg = [&](std::span<const double> q, std::span<double> g) {
      try {
        return evaluate(q, g);
      } catch (const diffkit::NonFiniteError&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    for (int k = 0; k < c.lbfgs_iters; ++k, ++iteration) {
      if (iteration % c.log_every == 0) log_row(iteration, p);
      good = p;
      const auto step = optimizers::lbfgs_step(lbfgs, p, fg);
      if (step.status != optimizers::LbfgsStatus::step_taken) {
        if (step.status == optimizers::LbfgsStatus::line_search_failed) rec.message = "L-BFGS stopped: line search failed";
        break;
      }
    }
    log_row(iteration, p);
  } catch (const diffkit::NonFiniteError& e) {
    rec.diverged = true;
    rec.message = std::string("training diverged at iteration ") + std::to_string(iteration) + ": " + e.what();
    p = good;
  } catch (const optimizers::NonFiniteGradient& e) {
    rec.diverged = true;
    rec.message = std::string("training diverged at iteration ") + std::to_string(iteration) + ": " + e.what();
    p = good;
  }
}

void run_fd(const RunConfig& c, const core::ProblemSpec& spec, const ExactOracle& oracle, RunRecord& rec) {
  const auto source = [&](double a, double b, double t) {
    const double p[3] = {a, b, t};
    return spec.source(p);
  };
  const auto exact = [&](double a, double b, double t) {
    const double p[3] = {a, b, t};
    return oracle.solution(p);
  };
  fd::SolveOptions opt;
  opt.scheme = c.method == Method::fd_forward ? fd::Scheme::forward : fd::Scheme::upwind;
  opt.quad_nodes = c.n_i;
  auto& f = rec.fields;
  try {
    const auto result = fd::picard_jacobi_solve(c.n_x, source, exact, opt);
    rec.fd_iterations = result.iterations;
    for (std::size_t s = 0; s < result.updates.size(); ++s) {
      LogRow row{static_cast<int>(s + 1), kNaN, kNaN, kNaN, result.updates[s], kNaN, kNaN, kNaN};
      rec.log.push_back(row);
    }
    const std::size_t count = f.points.size() / 3;
    for (std::size_t i = 0; i < count; ++i) {
      f.u_pred.push_back(result.grid.interpolate({f.points[3 * i], f.points[3 * i + 1], f.points[3 * i + 2]}));
    }
    std::vector<double> axis(41);
    for (int i = 0; i <= 40; ++i) axis[static_cast<std::size_t>(i)] = i / 40.0;
    f.m_pred = fd::fd_memory_on_tensor(result.grid, axis, axis, axis, c.n_i);
  } catch (const fd::ConvergenceError& e) {
    rec.diverged = true;
    rec.message = e.what();
    f.u_pred.assign(f.u_exact.size(), kNaN);
    f.m_pred.assign(f.m_exact.size(), kNaN);
  }
}

}  // namespace

RunRecord run_experiment(const RunConfig& raw) {
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config = resolve(raw);
  const RunConfig& c = rec.config;
  const auto spec = make_problem(c);
  const ExactOracle oracle(spec);
  const double check = oracle.self_check(1000, c.seed + 1);
  if (!(check <= kOracleTolerance)) {
    std::ostringstream msg;
    msg << "exact-solution self-check failed: deviation " << check;
    throw std::runtime_error(msg.str());
  }

  const auto eval = evaluation_points(c);
  auto& f = rec.fields;
  f.dims = spec.dims();
  f.points = eval;
  for (std::size_t i = 0; i < eval.size(); i += static_cast<std::size_t>(f.dims)) {
    const auto p = std::span<const double>(eval).subspan(i, static_cast<std::size_t>(f.dims));
    f.u_exact.push_back(oracle.solution(p));
    f.m_exact.push_back(oracle.memory(p));
  }
  rec.e_kappa = kNaN;
  rec.kappa_estimate = kNaN;

  if (is_fd(c.method)) {
    run_fd(c, spec, oracle, rec);
  } else {
    const auto data = sample_points(c);
    Trainable tr;
    switch (c.method) {
      case Method::minpo_kan:
      case Method::minpo_mlp:
        tr = minpo_trainable(c, spec, data, eval);
        break;
      case Method::apinn:
      case Method::apikan:
        tr = aux_trainable(c, spec, data, eval);
        break;
      default:
        tr = fpde_trainable(c, spec, data, eval);
        break;
    }
    Evaluator ev{tr, spec, f.u_exact, f.m_exact};
    std::vector<double> p = tr.init;
    train(c, tr, ev, rec, p);
    Prediction pr;
    double e_u = 0.0, e_m = 0.0;
    ev.errors(p, e_u, e_m, rec.e_kappa, rec.kappa_estimate, &pr);
    f.u_pred = std::move(pr.u);
    f.m_pred = std::move(pr.m);
    rec.checkpoint = tr.checkpoint(p);
  }
  if (!rec.diverged || !is_fd(c.method)) {
    rec.e_u = relative(f.u_pred, f.u_exact);
    rec.e_m = relative(f.m_pred, f.m_exact);
  } else {
    rec.e_u = rec.e_m = kNaN;
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace minpo::expcli
