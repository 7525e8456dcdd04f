#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

#include "minpo/diffkit/tape.hpp"

namespace minpo::diffkit {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;
using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

constexpr int kMaxOrder = 12;

Tape& common_tape(Var a, Var b) {
  if (!a.valid() || !b.valid()) throw std::invalid_argument("operation on an empty Var");
  if (a.tape() != b.tape()) throw std::invalid_argument("operands live on different tapes");
  return *a.tape();
}

// Plane kernels. A stride flag of true means the operand is a single value
// broadcast over the run.

template <bool SX, bool SY>
void mul_acc_impl(double* out, const double* x, const double* y, int n, double s) {
  for (int i = 0; i < n; ++i) out[i] += s * x[SX ? 0 : i] * y[SY ? 0 : i];
}

// out[i] += s * x[i] * y[i] with broadcasting of x or y.
void mul_acc(double* out, const double* x, bool sx, const double* y, bool sy, int n, double s = 1.0) {
  if (sx && sy) {
    const double v = s * x[0] * y[0];
    for (int i = 0; i < n; ++i) out[i] += v;
  } else if (sx) {
    mul_acc_impl<true, false>(out, x, y, n, s);
  } else if (sy) {
    mul_acc_impl<false, true>(out, x, y, n, s);
  } else {
    mul_acc_impl<false, false>(out, x, y, n, s);
  }
}

// Accumulates s * g[i] * y[i] into target, summing when the target is broadcast.
void adjoint_acc(double* target, bool st, const double* g, const double* y, bool sy, int n, double s = 1.0) {
  if (!st) {
    mul_acc(target, g, false, y, sy, n, s);
    return;
  }
  double acc = 0.0;
  if (sy) {
    for (int i = 0; i < n; ++i) acc += g[i];
    acc *= y[0];
  } else {
    for (int i = 0; i < n; ++i) acc += g[i] * y[i];
  }
  target[0] += s * acc;
}

void axpy(double* out, bool so, const double* x, bool sx, int n, double s) {
  if (so) {
    double acc = 0.0;
    if (sx) {
      acc = n * x[0];
    } else {
      for (int i = 0; i < n; ++i) acc += x[i];
    }
    out[0] += s * acc;
  } else if (sx) {
    const double v = s * x[0];
    for (int i = 0; i < n; ++i) out[i] += v;
  } else {
    for (int i = 0; i < n; ++i) out[i] += s * x[i];
  }
}

constexpr int kTile = 256;

// Runs body(start, len) over batch tiles so the planes of one tile stay in cache.
template <typename Body>
void for_tiles(int n, Body body) {
  for (int start = 0; start < n; start += kTile) body(start, std::min(kTile, n - start));
}

struct Broadcast {
  Shape shape;
  const JetLayout* layout;
  bool a_scalar;
  bool b_scalar;
  bool a_lift;  // a is plain while the result is not
  bool b_lift;
};

Broadcast plan_binary(Tape& t, Var a, Var b) {
  const auto& na = t.node(a.id());
  const auto& nb = t.node(b.id());
  Broadcast p{};
  if (na.shape == nb.shape) {
    p.shape = na.shape;
  } else if (nb.shape.is_scalar()) {
    p.shape = na.shape;
    p.b_scalar = true;
  } else if (na.shape.is_scalar()) {
    p.shape = nb.shape;
    p.a_scalar = true;
  } else {
    throw std::invalid_argument("shape mismatch in elementwise operation");
  }
  if (na.layout == nb.layout) {
    p.layout = na.layout;
  } else if (na.layout->is_plain()) {
    p.layout = nb.layout;
    p.a_lift = true;
  } else if (nb.layout->is_plain()) {
    p.layout = na.layout;
    p.b_lift = true;
  } else {
    throw std::invalid_argument("jet layout mismatch in elementwise operation");
  }
  return p;
}

// Offset of plane c of feature f in an operand that may be broadcast.
std::size_t operand_plane(const Tape::Node& n, bool scalar, int f, int c) {
  return scalar ? static_cast<std::size_t>(c) : n.plane(f, c);
}

// out = alpha * A + beta * B with broadcasting and lifting.
Var linear_combination(Var a, Var b, double alpha, double beta) {
  Tape& t = common_tape(a, b);
  const Broadcast p = plan_binary(t, a, b);
  const int ia = a.id();
  const int ib = b.id();
  Var out = t.emplace(p.shape, p.layout, {ia, ib}, [p, ia, ib, alpha, beta](Tape& tp, int self) {
    auto& o = tp.node(self);
    auto& na = tp.node(ia);
    auto& nb = tp.node(ib);
    const int k = p.layout->size();
    const int n = p.shape.batch;
    for (int f = 0; f < p.shape.features; ++f) {
      for (int c = 0; c < k; ++c) {
        const double* g = o.grad.data() + o.plane(f, c);
        if (na.requires_grad && !(p.a_lift && c > 0)) {
          axpy(na.grad.data() + operand_plane(na, p.a_scalar, f, c), p.a_scalar, g, false, n, alpha);
        }
        if (nb.requires_grad && !(p.b_lift && c > 0)) {
          axpy(nb.grad.data() + operand_plane(nb, p.b_scalar, f, c), p.b_scalar, g, false, n, beta);
        }
      }
    }
  });
  auto& o = t.node(out.id());
  const auto& na = t.node(ia);
  const auto& nb = t.node(ib);
  const int k = p.layout->size();
  const int n = p.shape.batch;
  for (int f = 0; f < p.shape.features; ++f) {
    for (int c = 0; c < k; ++c) {
      double* y = o.value.data() + o.plane(f, c);
      if (!(p.a_lift && c > 0)) axpy(y, false, na.value.data() + operand_plane(na, p.a_scalar, f, c), p.a_scalar, n, alpha);
      if (!(p.b_lift && c > 0)) axpy(y, false, nb.value.data() + operand_plane(nb, p.b_scalar, f, c), p.b_scalar, n, beta);
    }
  }
  return out;
}

// Each *_derivatives function fills out[0..n] with f^(0..n)(x).

void exp_derivatives(double x, int n, double* out) {
  const double v = std::exp(x);
  for (int i = 0; i <= n; ++i) out[i] = v;
}

void sin_derivatives(double x, int n, double* out) {
  const std::array<double, 4> cycle{std::sin(x), std::cos(x), -std::sin(x), -std::cos(x)};
  for (int i = 0; i <= n; ++i) out[i] = cycle[static_cast<std::size_t>(i % 4)];
}

void cos_derivatives(double x, int n, double* out) {
  const std::array<double, 4> cycle{std::cos(x), -std::sin(x), -std::cos(x), std::sin(x)};
  for (int i = 0; i <= n; ++i) out[i] = cycle[static_cast<std::size_t>(i % 4)];
}

void sinh_derivatives(double x, int n, double* out) {
  const double s = std::sinh(x);
  const double c = std::cosh(x);
  for (int i = 0; i <= n; ++i) out[i] = (i % 2 == 0) ? s : c;
}

void cosh_derivatives(double x, int n, double* out) {
  const double s = std::sinh(x);
  const double c = std::cosh(x);
  for (int i = 0; i <= n; ++i) out[i] = (i % 2 == 0) ? c : s;
}

void reciprocal_derivatives(double x, int n, double* out) {
  double v = 1.0 / x;
  for (int i = 0; i <= n; ++i) {
    out[i] = v;
    v *= -(i + 1) / x;
  }
}

void abs_derivatives(double x, int n, double* out) {
  out[0] = std::abs(x);
  if (n >= 1) out[1] = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
  for (int i = 2; i <= n; ++i) out[i] = 0.0;
}

// Sparse multiplication plan for the powers P_m = (A - a0)^m of a centred
// jet. Coefficients are sorted by total order, so P_m vanishes on every plane
// before first[m], and P_(m-1) * P_1 only needs terms whose left factor has
// order >= m - 1 and whose right factor has no constant part.
struct PowerPlan {
  std::vector<int> first;
  std::vector<std::vector<JetLayout::Term>> terms;
};

const PowerPlan& power_plan(const JetLayout& layout) {
  // Plans are referenced by recorded operations, so entries must never move.
  thread_local std::map<const JetLayout*, PowerPlan> cache;
  if (auto it = cache.find(&layout); it != cache.end()) return it->second;
  const int k = layout.size();
  const int top = layout.max_order();
  std::vector<int> order(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    for (int g : layout.index(c)) order[static_cast<std::size_t>(c)] += g;
  }
  PowerPlan plan;
  plan.first.assign(static_cast<std::size_t>(top) + 2, k);
  for (int c = k - 1; c >= 0; --c) {
    for (int m = 0; m <= order[static_cast<std::size_t>(c)]; ++m) plan.first[static_cast<std::size_t>(m)] = c;
  }
  plan.terms.resize(static_cast<std::size_t>(top) + 1);
  for (int m = 2; m <= top; ++m) {
    for (const auto& t : layout.products()) {
      if (order[static_cast<std::size_t>(t.a)] >= m - 1 && order[static_cast<std::size_t>(t.b)] >= 1) {
        plan.terms[static_cast<std::size_t>(m)].push_back(t);
      }
    }
  }
  return cache.emplace(&layout, std::move(plan)).first->second;
}

// Fills, for a tile of len constant parts x0, the Taylor coefficients
// s_(j,m) = f_j^(m)(x0)/m! for m = 0..top of every output j. Entry (j, m, b)
// lives at coef[(j * (top + 1) + m) * kTile + b].
using SeriesCoefficients = std::function<void(const double* x0, int len, int top, double* coef)>;

// Powers P_1..P_order of one tile of centred jets, planes kTile apart, P_m
// starting at plane (m - 1) * k. x has planes xs apart.
void series_powers(const PowerPlan& plan, int k, int order, const double* x, std::size_t xs, int len, double* p) {
  std::fill(p, p + static_cast<std::size_t>(order) * k * kTile, 0.0);
  for (int c = 1; c < k; ++c) std::copy(x + c * xs, x + c * xs + len, p + c * kTile);
  for (int m = 2; m <= order; ++m) {
    const double* prev = p + static_cast<std::size_t>(m - 2) * k * kTile;
    double* cur = p + static_cast<std::size_t>(m - 1) * k * kTile;
    for (const auto& tm : plan.terms[static_cast<std::size_t>(m)]) {
      mul_acc_impl<false, false>(cur + tm.c * kTile, prev + tm.a * kTile, p + tm.b * kTile, len, 1.0);
    }
  }
}

// Y_j = sum_m s_(j,m) P_m for one tile; plane c of output j at y + j * js + c * cs.
// coef rows hold m = 0..top.
void series_forward(const PowerPlan& plan, int k, int order, const double* coef, int top, const double* p, int len,
                    int outputs, double* y, std::size_t js, std::size_t cs) {
  for (int j = 0; j < outputs; ++j) {
    double* yj = y + j * js;
    const double* sj = coef + static_cast<std::size_t>(j) * (top + 1) * kTile;
    std::copy(sj, sj + len, yj);
    for (int c = 1; c < k; ++c) std::fill(yj + c * cs, yj + c * cs + len, 0.0);
    for (int m = 1; m <= order; ++m) {
      const double* sm = sj + static_cast<std::size_t>(m) * kTile;
      const double* pm = p + static_cast<std::size_t>(m - 1) * k * kTile;
      for (int c = plan.first[static_cast<std::size_t>(m)]; c < k; ++c) {
        mul_acc_impl<false, false>(yj + c * cs, sm, pm + c * kTile, len, 1.0);
      }
    }
  }
}

// Reverse of series_forward: accumulates into gx (planes xs apart) given output
// gradients g laid out like y. coef must hold m = 0..order + 1.
void series_backward(const PowerPlan& plan, int k, int order, const double* coef, const double* p, int len,
                     int outputs, const double* g, std::size_t js, std::size_t cs, double* gx, std::size_t xs,
                     double* gp, double* g0) {
  const int top = order + 1;
  std::fill(gp, gp + static_cast<std::size_t>(std::max(order, 1)) * k * kTile, 0.0);
  std::fill(g0, g0 + kTile, 0.0);
  for (int j = 0; j < outputs; ++j) {
    const double* gj = g + j * js;
    const double* sj = coef + static_cast<std::size_t>(j) * (top + 1) * kTile;
    mul_acc_impl<false, false>(g0, gj, sj + kTile, len, 1.0);
    for (int m = 1; m <= order; ++m) {
      const double* sm = sj + static_cast<std::size_t>(m) * kTile;
      const double* sm1 = sj + static_cast<std::size_t>(m + 1) * kTile;
      double* gpm = gp + static_cast<std::size_t>(m - 1) * k * kTile;
      const double* pm = p + static_cast<std::size_t>(m - 1) * k * kTile;
      for (int c = plan.first[static_cast<std::size_t>(m)]; c < k; ++c) {
        const double* gc = gj + c * cs;
        double* gpc = gpm + c * kTile;
        const double* pc = pm + c * kTile;
        for (int i = 0; i < len; ++i) {
          gpc[i] += sm[i] * gc[i];
          g0[i] += (m + 1) * sm1[i] * gc[i] * pc[i];
        }
      }
    }
  }
  for (int m = order; m >= 2; --m) {
    const double* gpm = gp + static_cast<std::size_t>(m - 1) * k * kTile;
    double* gprev = gp + static_cast<std::size_t>(m - 2) * k * kTile;
    const double* prev = p + static_cast<std::size_t>(m - 2) * k * kTile;
    for (const auto& tm : plan.terms[static_cast<std::size_t>(m)]) {
      mul_acc_impl<false, false>(gprev + tm.a * kTile, gpm + tm.c * kTile, p + tm.b * kTile, len, 1.0);
      mul_acc_impl<false, false>(gp + tm.b * kTile, gpm + tm.c * kTile, prev + tm.a * kTile, len, 1.0);
    }
  }
  for (int i = 0; i < len; ++i) gx[i] += g0[i];
  for (int c = 1; c < k; ++c) {
    for (int i = 0; i < len; ++i) gx[c * xs + i] += gp[c * kTile + i];
  }
}

// Elementwise map of a node through `outputs` analytic functions, each given
// by its Taylor series about the constant coefficient:
//   Y_j = sum_m s_(j,m)(a0) P_m,  P_m = (A - a0)^m.
// Output j occupies features [j * F, (j + 1) * F).
Var series_map(Var a, int outputs, SeriesCoefficients coefficients) {
  if (!a.valid()) throw std::invalid_argument("operation on an empty Var");
  Tape& t = *a.tape();
  const int ia = a.id();
  const auto& na = t.node(ia);
  const JetLayout* layout = na.layout;
  const Shape shape = na.shape;
  const int order = layout->max_order();
  if (order + 1 > kMaxOrder) throw std::invalid_argument("jet order too high");
  const int k = layout->size();
  const std::size_t stride = static_cast<std::size_t>(shape.batch);
  const std::size_t per_feature = static_cast<std::size_t>(k) * stride;
  const std::size_t out_block = per_feature * shape.features;
  const PowerPlan& plan = power_plan(*layout);
  const std::size_t power_size = static_cast<std::size_t>(std::max(order, 1)) * k * kTile;

  Var out = t.emplace(Shape{shape.features * outputs, shape.batch}, layout, {ia}, [=, &plan](Tape& tp, int self) {
    auto& o = tp.node(self);
    auto& in = tp.node(ia);
    std::vector<double> p(power_size), gp(power_size), g0(kTile);
    std::vector<double> coef(static_cast<std::size_t>(outputs) * (order + 2) * kTile);
    for (int f = 0; f < shape.features; ++f) {
      for_tiles(shape.batch, [&](int start, int len) {
        const std::size_t off = f * per_feature + start;
        const double* x = in.value.data() + off;
        coefficients(x, len, order + 1, coef.data());
        series_powers(plan, k, order, x, stride, len, p.data());
        series_backward(plan, k, order, coef.data(), p.data(), len, outputs, o.grad.data() + off, out_block, stride,
                        in.grad.data() + off, stride, gp.data(), g0.data());
      });
    }
  });

  auto& o = t.node(out.id());
  const auto& in = t.node(ia);
  std::vector<double> p(power_size);
  std::vector<double> coef(static_cast<std::size_t>(outputs) * (order + 1) * kTile);
  for (int f = 0; f < shape.features; ++f) {
    for_tiles(shape.batch, [&](int start, int len) {
      const std::size_t off = f * per_feature + start;
      const double* x = in.value.data() + off;
      coefficients(x, len, order, coef.data());
      series_powers(plan, k, order, x, stride, len, p.data());
      series_forward(plan, k, order, coef.data(), order, p.data(), len, outputs, o.value.data() + off, out_block,
                     stride);
    });
  }
  return out;
}

// Taylor coefficients of T_0..T_degree about x0 from T_n = 2 (x0 + e) T_(n-1) - T_(n-2),
// truncated in e; layout as in SeriesCoefficients. x0 is clamped to the basis interval.
void chebyshev_coefficients(const double* x, int len, int top, int degree, double* coef) {
  const std::size_t row = static_cast<std::size_t>(top + 1) * kTile;
  std::fill(coef, coef + row * (degree + 1), 0.0);
  for (int b = 0; b < len; ++b) {
    const double x0 = std::clamp(x[b], -1.0, 1.0);
    coef[b] = 1.0;
    coef[row + b] = x0;
    if (top >= 1) coef[row + kTile + b] = 1.0;
    for (int n = 2; n <= degree; ++n) {
      double* tn = coef + n * row + b;
      const double* tn1 = coef + (n - 1) * row + b;
      const double* tn2 = coef + (n - 2) * row + b;
      for (int m = 0; m <= top; ++m) {
        const std::size_t i = static_cast<std::size_t>(m) * kTile;
        double v = 2.0 * x0 * tn1[i] - tn2[i];
        if (m > 0) v += 2.0 * tn1[i - kTile];
        tn[i] = v;
      }
    }
  }
}

// Taylor coefficients y_m of tanh about each z0, planes kTile apart, from
// y' = 1 - y^2: (m + 1) y_(m+1) = [m = 0] - sum_q y_q y_(m-q).
void tanh_series(const double* z, int len, int top, double* y) {
  for (int b = 0; b < len; ++b) y[b] = std::tanh(z[b]);
  for (int m = 0; m < top; ++m) {
    double* next = y + static_cast<std::size_t>(m + 1) * kTile;
    const double inv = 1.0 / (m + 1);
    for (int b = 0; b < len; ++b) next[b] = m == 0 ? 1.0 : 0.0;
    for (int q = 0; q <= m; ++q) {
      const double* yq = y + static_cast<std::size_t>(q) * kTile;
      const double* yr = y + static_cast<std::size_t>(m - q) * kTile;
      for (int b = 0; b < len; ++b) next[b] -= yq[b] * yr[b];
    }
    for (int b = 0; b < len; ++b) next[b] *= inv;
  }
}

// Taylor coefficients of T_n(tanh z) about z0 for n = 0..degree, laid out as
// in SeriesCoefficients.
void chebyshev_tanh_coefficients(const double* z, int len, int top, int degree, double* coef) {
  const std::size_t row = static_cast<std::size_t>(top + 1) * kTile;
  std::fill(coef, coef + row, 0.0);
  for (int b = 0; b < len; ++b) coef[b] = 1.0;
  double* y = coef + row;
  tanh_series(z, len, top, y);
  for (int n = 2; n <= degree; ++n) {
    double* tn = coef + n * row;
    const double* tn1 = coef + (n - 1) * row;
    const double* tn2 = coef + (n - 2) * row;
    for (int m = 0; m <= top; ++m) {
      double* out = tn + static_cast<std::size_t>(m) * kTile;
      const double* prev2 = tn2 + static_cast<std::size_t>(m) * kTile;
      for (int b = 0; b < len; ++b) out[b] = -prev2[b];
      for (int q = 0; q <= m; ++q) {
        const double* yq = y + static_cast<std::size_t>(q) * kTile;
        const double* pr = tn1 + static_cast<std::size_t>(m - q) * kTile;
        for (int b = 0; b < len; ++b) out[b] += 2.0 * yq[b] * pr[b];
      }
    }
  }
}

template <typename Sequence>
Var univariate(Var a, Sequence f) {
  return series_map(a, 1, [f](const double* x, int len, int top, double* coef) {
    std::array<double, kMaxOrder + 2> d{};
    for (int b = 0; b < len; ++b) {
      f(x[b], top, d.data());
      double inv_fact = 1.0;
      for (int m = 0; m <= top; ++m) {
        if (m > 1) inv_fact /= m;
        coef[static_cast<std::size_t>(m) * kTile + b] = d[static_cast<std::size_t>(m)] * inv_fact;
      }
    }
  });
}

}  // namespace

Var operator+(Var a, Var b) { return linear_combination(a, b, 1.0, 1.0); }
Var operator-(Var a, Var b) { return linear_combination(a, b, 1.0, -1.0); }

Var operator*(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Broadcast p = plan_binary(t, a, b);
  const int ia = a.id();
  const int ib = b.id();
  Var out = t.emplace(p.shape, p.layout, {ia, ib}, [p, ia, ib](Tape& tp, int self) {
    auto& o = tp.node(self);
    auto& na = tp.node(ia);
    auto& nb = tp.node(ib);
    const int k = p.layout->size();
    const int n = p.shape.batch;
    for (int f = 0; f < p.shape.features; ++f) {
      auto g = [&](int c) { return o.grad.data() + o.plane(f, c); };
      auto xa = [&](int c) { return na.value.data() + operand_plane(na, p.a_scalar, f, c); };
      auto xb = [&](int c) { return nb.value.data() + operand_plane(nb, p.b_scalar, f, c); };
      auto ga = [&](int c) { return na.grad.data() + operand_plane(na, p.a_scalar, f, c); };
      auto gb = [&](int c) { return nb.grad.data() + operand_plane(nb, p.b_scalar, f, c); };
      if (p.a_lift) {
        for (int c = 0; c < k; ++c) {
          if (na.requires_grad) adjoint_acc(ga(0), p.a_scalar, g(c), xb(c), p.b_scalar, n);
          if (nb.requires_grad) adjoint_acc(gb(c), p.b_scalar, g(c), xa(0), p.a_scalar, n);
        }
      } else if (p.b_lift) {
        for (int c = 0; c < k; ++c) {
          if (na.requires_grad) adjoint_acc(ga(c), p.a_scalar, g(c), xb(0), p.b_scalar, n);
          if (nb.requires_grad) adjoint_acc(gb(0), p.b_scalar, g(c), xa(c), p.a_scalar, n);
        }
      } else {
        for (const auto& term : p.layout->products()) {
          if (na.requires_grad) adjoint_acc(ga(term.a), p.a_scalar, g(term.c), xb(term.b), p.b_scalar, n);
          if (nb.requires_grad) adjoint_acc(gb(term.b), p.b_scalar, g(term.c), xa(term.a), p.a_scalar, n);
        }
      }
    }
  });
  auto& o = t.node(out.id());
  const auto& na = t.node(ia);
  const auto& nb = t.node(ib);
  const int k = p.layout->size();
  const int n = p.shape.batch;
  for (int f = 0; f < p.shape.features; ++f) {
    auto y = [&](int c) { return o.value.data() + o.plane(f, c); };
    auto xa = [&](int c) { return na.value.data() + operand_plane(na, p.a_scalar, f, c); };
    auto xb = [&](int c) { return nb.value.data() + operand_plane(nb, p.b_scalar, f, c); };
    if (p.a_lift) {
      for (int c = 0; c < k; ++c) mul_acc(y(c), xa(0), p.a_scalar, xb(c), p.b_scalar, n);
    } else if (p.b_lift) {
      for (int c = 0; c < k; ++c) mul_acc(y(c), xa(c), p.a_scalar, xb(0), p.b_scalar, n);
    } else {
      for (const auto& term : p.layout->products()) {
        mul_acc(y(term.c), xa(term.a), p.a_scalar, xb(term.b), p.b_scalar, n);
      }
    }
  }
  return out;
}

Var operator/(Var a, Var b) { return a * univariate(b, reciprocal_derivatives); }

Var operator-(Var a) { return a * -1.0; }

Var operator+(Var a, double b) { return a + a.tape()->constant(b); }
Var operator+(double a, Var b) { return b + a; }
Var operator-(Var a, double b) { return a + (-b); }
Var operator-(double a, Var b) { return b.tape()->constant(a) - b; }
Var operator*(Var a, double b) {
  Tape& t = *a.tape();
  const int ia = a.id();
  const auto& na = t.node(ia);
  Var out = t.emplace(na.shape, na.layout, {ia}, [ia, b](Tape& tp, int self) {
    auto& o = tp.node(self);
    auto& n = tp.node(ia);
    for (std::size_t i = 0; i < n.grad.size(); ++i) n.grad[i] += b * o.grad[i];
  });
  auto& o = t.node(out.id());
  const auto& v = t.node(ia).value;
  for (std::size_t i = 0; i < v.size(); ++i) o.value[i] = b * v[i];
  return out;
}
Var operator*(double a, Var b) { return b * a; }
Var operator/(Var a, double b) { return a * (1.0 / b); }
Var operator/(double a, Var b) { return a * univariate(b, reciprocal_derivatives); }

Var exp(Var a) { return univariate(a, exp_derivatives); }
Var sin(Var a) { return univariate(a, sin_derivatives); }
Var cos(Var a) { return univariate(a, cos_derivatives); }
Var sinh(Var a) { return univariate(a, sinh_derivatives); }
Var cosh(Var a) { return univariate(a, cosh_derivatives); }
Var tanh(Var a) {
  return series_map(a, 1, [](const double* x, int len, int top, double* coef) { tanh_series(x, len, top, coef); });
}
Var abs(Var a) { return univariate(a, abs_derivatives); }
Var square(Var a) { return a * a; }

Var pow(Var a, double p) {
  return univariate(a, [p](double x, int n, double* out) {
    double coef = 1.0;
    for (int i = 0; i <= n; ++i) {
      out[i] = coef == 0.0 ? 0.0 : coef * std::pow(x, p - i);
      coef *= (p - i);
    }
  });
}

Var derivative(Var a, const MultiIndex& gamma) {
  if (!a.valid()) throw std::invalid_argument("operation on an empty Var");
  Tape& t = *a.tape();
  const int ia = a.id();
  const auto& na = t.node(ia);
  const bool nonzero_order = std::any_of(gamma.begin(), gamma.end(), [](int g) { return g != 0; });
  if (na.layout->is_plain() && nonzero_order) {
    // A plain node does not depend on the inputs.
    return t.constant(na.shape, std::vector<double>(static_cast<std::size_t>(na.shape.elements()), 0.0));
  }
  const int slot = na.layout->find(gamma);
  if (slot < 0) throw std::invalid_argument("derivative not carried by this jet layout");
  const double scale = na.layout->factorial(slot);
  const Shape shape = na.shape;
  const std::size_t n = static_cast<std::size_t>(shape.batch);
  Var out = t.emplace(shape, JetLayout::plain(), {ia}, [ia, slot, scale, shape, n](Tape& tp, int self) {
    auto& o = tp.node(self);
    auto& in = tp.node(ia);
    for (int f = 0; f < shape.features; ++f) {
      double* gi = in.grad.data() + in.plane(f, slot);
      const double* go = o.grad.data() + f * n;
      for (std::size_t b = 0; b < n; ++b) gi[b] += scale * go[b];
    }
  });
  auto& o = t.node(out.id());
  const auto& in = t.node(ia);
  for (int f = 0; f < shape.features; ++f) {
    const double* x = in.value.data() + in.plane(f, slot);
    double* y = o.value.data() + f * n;
    for (std::size_t b = 0; b < n; ++b) y[b] = scale * x[b];
  }
  return out;
}

namespace {

Var affine_impl(Var in, Var weights, const Var* bias, int out_features) {
  Tape& t = common_tape(in, weights);
  const int ii = in.id();
  const int iw = weights.id();
  const int ib = bias ? bias->id() : -1;
  const auto& nin = t.node(ii);
  const int in_features = nin.shape.features;
  const int batch = nin.shape.batch;
  const JetLayout* layout = nin.layout;
  const int k = layout->size();
  if (!t.node(iw).layout->is_plain() ||
      t.node(iw).value.size() != static_cast<std::size_t>(out_features) * in_features) {
    throw std::invalid_argument("affine_features: weight size mismatch");
  }
  if (bias && t.node(ib).value.size() != static_cast<std::size_t>(out_features)) {
    throw std::invalid_argument("affine_features: bias size mismatch");
  }
  std::vector<int> parents{ii, iw};
  if (bias) parents.push_back(ib);
  const int cols = batch * k;
  Var out = t.emplace(Shape{out_features, batch}, layout, parents,
                      [=](Tape& tp, int self) {
                        auto& o = tp.node(self);
                        auto& x = tp.node(ii);
                        auto& w = tp.node(iw);
                        ConstRowMap gout(o.grad.data(), out_features, cols);
                        ConstRowMap wm(w.value.data(), out_features, in_features);
                        if (x.requires_grad) {
                          RowMap gx(x.grad.data(), in_features, cols);
                          gx.noalias() += wm.transpose() * gout;
                        }
                        if (w.requires_grad) {
                          ConstRowMap xm(x.value.data(), in_features, cols);
                          RowMap gw(w.grad.data(), out_features, in_features);
                          gw.noalias() += gout * xm.transpose();
                        }
                        if (ib >= 0 && tp.node(ib).requires_grad) {
                          auto& bn = tp.node(ib);
                          for (int f = 0; f < out_features; ++f) {
                            double s = 0.0;
                            const double* g = o.grad.data() + static_cast<std::size_t>(f) * cols;
                            for (int b = 0; b < batch; ++b) s += g[b];
                            bn.grad[static_cast<std::size_t>(f)] += s;
                          }
                        }
                      });
  auto& o = t.node(out.id());
  ConstRowMap xm(t.node(ii).value.data(), in_features, cols);
  ConstRowMap wm(t.node(iw).value.data(), out_features, in_features);
  RowMap ym(o.value.data(), out_features, cols);
  ym.noalias() = wm * xm;
  if (bias) {
    const auto& bv = t.node(ib).value;
    for (int f = 0; f < out_features; ++f) {
      double* y = o.value.data() + static_cast<std::size_t>(f) * cols;
      for (int b = 0; b < batch; ++b) y[b] += bv[static_cast<std::size_t>(f)];
    }
  }
  return out;
}

}  // namespace

Var affine_features(Var in, Var weights, int out_features) {
  return affine_impl(in, weights, nullptr, out_features);
}

Var affine_features(Var in, Var weights, Var bias, int out_features) {
  return affine_impl(in, weights, &bias, out_features);
}

Var chebyshev_expand(Var tv, int degree) {
  if (degree < 1) throw std::invalid_argument("chebyshev_expand: degree must be >= 1");
  return series_map(tv, degree + 1, [degree](const double* x, int len, int top, double* coef) {
    chebyshev_coefficients(x, len, top, degree, coef);
  });
}

Var chebyshev_tanh_layer(Var z, Var weights, int degree, int out_features) {
  Tape& t = common_tape(z, weights);
  if (degree < 1) throw std::invalid_argument("chebyshev_tanh_layer: degree must be >= 1");
  const int iz = z.id();
  const int iw = weights.id();
  const auto& nz = t.node(iz);
  const JetLayout* layout = nz.layout;
  const int k = layout->size();
  const int order = layout->max_order();
  if (order + 1 > kMaxOrder) throw std::invalid_argument("jet order too high");
  const int feats = nz.shape.features;
  const int batch = nz.shape.batch;
  const int rows = (degree + 1) * feats;
  if (!t.node(iw).layout->is_plain() || t.node(iw).value.size() != static_cast<std::size_t>(out_features) * rows) {
    throw std::invalid_argument("chebyshev_tanh_layer: weight size mismatch");
  }
  const std::size_t stride = static_cast<std::size_t>(batch);
  const std::size_t per_feature = static_cast<std::size_t>(k) * stride;
  const PowerPlan& plan = power_plan(*layout);
  const std::size_t power_size = static_cast<std::size_t>(std::max(order, 1)) * k * kTile;
  // One tile of the basis: row r = n * feats + i, planes kTile apart.
  const std::size_t row_size = static_cast<std::size_t>(k) * kTile;
  const std::size_t js = static_cast<std::size_t>(feats) * row_size;

  Var out = t.emplace(Shape{out_features, batch}, layout, {iz, iw}, [=, &plan](Tape& tp, int self) {
    auto& o = tp.node(self);
    auto& zn = tp.node(iz);
    auto& wn = tp.node(iw);
    std::vector<double> p(power_size), gp(power_size), g0(kTile);
    std::vector<double> coef(static_cast<std::size_t>(degree + 1) * (order + 2) * kTile);
    std::vector<double> basis(static_cast<std::size_t>(rows) * row_size);
    std::vector<double> gbasis(basis.size());
    std::vector<double> gout(static_cast<std::size_t>(out_features) * row_size, 0.0);
    ConstRowMap wm(wn.value.data(), out_features, rows);
    for_tiles(batch, [&](int start, int len) {
      if (len < kTile) std::fill(gout.begin(), gout.end(), 0.0);
      for (int o_f = 0; o_f < out_features; ++o_f) {
        for (int c = 0; c < k; ++c) {
          const double* src = o.grad.data() + o.plane(o_f, c) + start;
          std::copy(src, src + len, gout.data() + o_f * row_size + c * kTile);
        }
      }
      ConstRowMap gm(gout.data(), out_features, static_cast<Eigen::Index>(row_size));
      RowMap gb(gbasis.data(), rows, static_cast<Eigen::Index>(row_size));
      gb.noalias() = wm.transpose() * gm;
      for (int i = 0; i < feats; ++i) {
        const double* x = zn.value.data() + i * per_feature + start;
        chebyshev_tanh_coefficients(x, len, order + 1, degree, coef.data());
        series_powers(plan, k, order, x, stride, len, p.data());
        if (wn.requires_grad) {
          series_forward(plan, k, order, coef.data(), order + 1, p.data(), len, degree + 1, basis.data() + i * row_size,
                         js, kTile);
        }
        if (zn.requires_grad) {
          series_backward(plan, k, order, coef.data(), p.data(), len, degree + 1, gbasis.data() + i * row_size, js,
                          kTile, zn.grad.data() + i * per_feature + start, stride, gp.data(), g0.data());
        }
      }
      if (wn.requires_grad) {
        // Columns past len hold stale values; their output gradient is zero.
        ConstRowMap bm(basis.data(), rows, static_cast<Eigen::Index>(row_size));
        RowMap gw(wn.grad.data(), out_features, rows);
        gw.noalias() += gm * bm.transpose();
      }
    });
  });

  auto& o = t.node(out.id());
  const auto& zn = t.node(iz);
  ConstRowMap wm(t.node(iw).value.data(), out_features, rows);
  std::vector<double> p(power_size);
  std::vector<double> coef(static_cast<std::size_t>(degree + 1) * (order + 1) * kTile);
  std::vector<double> basis(static_cast<std::size_t>(rows) * row_size, 0.0);
  std::vector<double> y(static_cast<std::size_t>(out_features) * row_size);
  for_tiles(batch, [&](int start, int len) {
    for (int i = 0; i < feats; ++i) {
      const double* x = zn.value.data() + i * per_feature + start;
      chebyshev_tanh_coefficients(x, len, order, degree, coef.data());
      series_powers(plan, k, order, x, stride, len, p.data());
      series_forward(plan, k, order, coef.data(), order, p.data(), len, degree + 1, basis.data() + i * row_size, js,
                     kTile);
    }
    ConstRowMap bm(basis.data(), rows, static_cast<Eigen::Index>(row_size));
    RowMap ym(y.data(), out_features, static_cast<Eigen::Index>(row_size));
    ym.noalias() = wm * bm;
    for (int o_f = 0; o_f < out_features; ++o_f) {
      for (int c = 0; c < k; ++c) {
        const double* src = y.data() + o_f * row_size + c * kTile;
        std::copy(src, src + len, o.value.data() + o.plane(o_f, c) + start);
      }
    }
  });
  return out;
}

Var concat_features(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_features: no parts");
  Tape& t = *parts[0].tape();
  const auto& first = t.node(parts[0].id());
  const int batch = first.shape.batch;
  const JetLayout* layout = first.layout;
  int feats = 0;
  std::vector<int> ids;
  for (const Var& v : parts) {
    if (v.tape() != &t) throw std::invalid_argument("concat_features: mixed tapes");
    const auto& n = t.node(v.id());
    if (n.shape.batch != batch || n.layout != layout) {
      throw std::invalid_argument("concat_features: batch or layout mismatch");
    }
    feats += n.shape.features;
    ids.push_back(v.id());
  }
  Var out = t.emplace(Shape{feats, batch}, layout, ids, [ids](Tape& tp, int self) {
    auto& o = tp.node(self);
    std::size_t offset = 0;
    for (int id : ids) {
      auto& n = tp.node(id);
      if (n.requires_grad) {
        for (std::size_t i = 0; i < n.value.size(); ++i) n.grad[i] += o.grad[offset + i];
      }
      offset += n.value.size();
    }
  });
  auto& o = t.node(out.id());
  std::size_t offset = 0;
  for (int id : ids) {
    const auto& v = t.node(id).value;
    std::copy(v.begin(), v.end(), o.value.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += v.size();
  }
  return out;
}

Var slice_features(Var a, int start, int count) {
  Tape& t = *a.tape();
  const int ia = a.id();
  const auto& na = t.node(ia);
  if (start < 0 || count <= 0 || start + count > na.shape.features) {
    throw std::out_of_range("slice_features: range outside node");
  }
  const std::size_t per_feature = static_cast<std::size_t>(na.shape.batch) * na.layout->size();
  const std::size_t begin = static_cast<std::size_t>(start) * per_feature;
  const std::size_t len = static_cast<std::size_t>(count) * per_feature;
  Var out = t.emplace(Shape{count, na.shape.batch}, na.layout, {ia}, [ia, begin, len](Tape& tp, int self) {
    auto& o = tp.node(self);
    auto& n = tp.node(ia);
    for (std::size_t i = 0; i < len; ++i) n.grad[begin + i] += o.grad[i];
  });
  auto& o = t.node(out.id());
  const auto& v = t.node(ia).value;
  std::copy(v.begin() + static_cast<std::ptrdiff_t>(begin),
            v.begin() + static_cast<std::ptrdiff_t>(begin + len), o.value.begin());
  return out;
}

Var batch_linear(Var a, const BatchMap& map) {
  Tape& t = *a.tape();
  const int ia = a.id();
  const auto& na = t.node(ia);
  if (na.shape.batch != map.in_batch) throw std::invalid_argument("batch_linear: batch mismatch");
  // Every coefficient plane is a column of a (batch x planes) column-major matrix.
  const int planes = na.shape.features * na.layout->size();
  auto sparse = std::make_shared<SparseRows>(map.out_batch, map.in_batch);
  {
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(map.column.size());
    for (int r = 0; r < map.out_batch; ++r) {
      for (int j = map.row_start[static_cast<std::size_t>(r)]; j < map.row_start[static_cast<std::size_t>(r) + 1]; ++j) {
        entries.emplace_back(r, map.column[static_cast<std::size_t>(j)], map.weight[static_cast<std::size_t>(j)]);
      }
    }
    sparse->setFromTriplets(entries.begin(), entries.end());
  }
  const int in_batch = map.in_batch;
  const int out_batch = map.out_batch;
  Var out = t.emplace(Shape{na.shape.features, out_batch}, na.layout, {ia},
                      [ia, sparse, planes, in_batch, out_batch](Tape& tp, int self) {
                        auto& o = tp.node(self);
                        auto& n = tp.node(ia);
                        Eigen::Map<const Eigen::MatrixXd> g(o.grad.data(), out_batch, planes);
                        Eigen::Map<Eigen::MatrixXd> gi(n.grad.data(), in_batch, planes);
                        gi.noalias() += sparse->transpose() * g;
                      });
  auto& o = t.node(out.id());
  Eigen::Map<const Eigen::MatrixXd> x(t.node(ia).value.data(), in_batch, planes);
  Eigen::Map<Eigen::MatrixXd> y(o.value.data(), out_batch, planes);
  y.noalias() = *sparse * x;
  return out;
}

Var sum(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  if (!t.node(ia).layout->is_plain()) throw std::invalid_argument("sum: plain node required");
  Var out = t.emplace(Shape{1, 1}, JetLayout::plain(), {ia}, [ia](Tape& tp, int self) {
    const double g = tp.node(self).grad[0];
    for (double& gi : tp.node(ia).grad) gi += g;
  });
  double s = 0.0;
  for (double v : t.node(ia).value) s += v;
  t.node(out.id()).value[0] = s;
  return out;
}

Var sum_squares(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  if (!t.node(ia).layout->is_plain()) throw std::invalid_argument("sum_squares: plain node required");
  Var out = t.emplace(Shape{1, 1}, JetLayout::plain(), {ia}, [ia](Tape& tp, int self) {
    const double g = tp.node(self).grad[0];
    auto& n = tp.node(ia);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.grad[i] += 2.0 * g * n.value[i];
  });
  double s = 0.0;
  for (double v : t.node(ia).value) s += v * v;
  t.node(out.id()).value[0] = s;
  return out;
}

}  // namespace minpo::diffkit
