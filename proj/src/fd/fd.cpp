#include "minpo/fd/fd.hpp"

#include <algorithm>
#include <cmath>

#include "minpo/quadrature/gauss_legendre.hpp"

namespace minpo::fd {

namespace {

// Linear hat weights of a coordinate in [0, 1] on a grid with `cells` cells.
struct Hat {
  int left;
  double frac;
};

Hat locate(double y, int cells) {
  const double s = std::clamp(y, 0.0, 1.0) * cells;
  const int left = std::min(static_cast<int>(std::floor(s)), cells - 1);
  return {left, s - left};
}

// Row e maps grid values along one axis to the quadrature over [0, z_e] of the
// interpolant, weighted by the kernel (e^(y - z) on the time axis, 1 otherwise).
std::vector<double> axis_operator(std::span<const double> z, int cells, const quadrature::QuadratureRule& rule,
                                  bool decaying) {
  const int n = cells + 1;
  std::vector<double> a(z.size() * static_cast<std::size_t>(n), 0.0);
  for (std::size_t e = 0; e < z.size(); ++e) {
    if (z[e] <= 0.0) continue;
    const auto mapped = quadrature::map_to_interval(rule, 0.0, z[e]);
    for (int q = 0; q < mapped.size(); ++q) {
      const double y = mapped.nodes[static_cast<std::size_t>(q)];
      double w = mapped.weights[static_cast<std::size_t>(q)];
      if (decaying) w *= std::exp(y - z[e]);
      const Hat h = locate(y, cells);
      a[e * n + static_cast<std::size_t>(h.left)] += w * (1.0 - h.frac);
      a[e * n + static_cast<std::size_t>(h.left + 1)] += w * h.frac;
    }
  }
  return a;
}

void check_grid(const Grid3& grid) {
  if (grid.cells < 1 || grid.u.size() != static_cast<std::size_t>(grid.nodes()) * grid.nodes() * grid.nodes()) {
    throw std::invalid_argument("grid values do not match the node count");
  }
}

std::vector<double> node_coordinates(const Grid3& grid) {
  std::vector<double> c(static_cast<std::size_t>(grid.nodes()));
  for (int i = 0; i < grid.nodes(); ++i) c[static_cast<std::size_t>(i)] = grid.coordinate(i);
  return c;
}

}  // namespace

Grid3::Grid3(int cells_) : cells(cells_) {
  if (cells < 1) throw std::invalid_argument("grid needs at least one cell per axis");
  u.assign(static_cast<std::size_t>(nodes()) * nodes() * nodes(), 0.0);
}

double Grid3::interpolate(const std::array<double, 3>& p) const {
  const Hat a = locate(p[0], cells);
  const Hat b = locate(p[1], cells);
  const Hat c = locate(p[2], cells);
  double v = 0.0;
  for (int di = 0; di < 2; ++di) {
    const double wa = di ? a.frac : 1.0 - a.frac;
    for (int dj = 0; dj < 2; ++dj) {
      const double wb = dj ? b.frac : 1.0 - b.frac;
      for (int dk = 0; dk < 2; ++dk) {
        const double wc = dk ? c.frac : 1.0 - c.frac;
        v += wa * wb * wc * at(a.left + di, b.left + dj, c.left + dk);
      }
    }
  }
  return v;
}

std::string to_string(Scheme s) { return s == Scheme::forward ? "forward" : "upwind"; }

Scheme scheme_from_string(const std::string& name) {
  if (name == "forward") return Scheme::forward;
  if (name == "upwind") return Scheme::upwind;
  throw std::invalid_argument("unknown difference scheme: " + name);
}

double fd_memory_eval(const Grid3& grid, const std::array<int, 3>& node, int quad_nodes) {
  check_grid(grid);
  const std::array<double, 3> upper{grid.coordinate(node[0]), grid.coordinate(node[1]), grid.coordinate(node[2])};
  const auto rule = quadrature::gauss_legendre(quad_nodes);
  return quadrature::integrate_3d_nested(
      rule, [&](double y1, double y2, double tau) { return std::exp(tau - upper[2]) * grid.interpolate({y1, y2, tau}); },
      upper);
}

std::vector<double> fd_memory_on_tensor(const Grid3& grid, std::span<const double> x1, std::span<const double> x2,
                                        std::span<const double> t, int quad_nodes) {
  check_grid(grid);
  const auto rule = quadrature::gauss_legendre(quad_nodes);
  const int n = grid.nodes();
  const auto a1 = axis_operator(x1, grid.cells, rule, false);
  const auto a2 = axis_operator(x2, grid.cells, rule, false);
  const auto a3 = axis_operator(t, grid.cells, rule, true);
  const std::size_t n1 = x1.size(), n2 = x2.size(), n3 = t.size();
  const std::size_t nn = static_cast<std::size_t>(n);

  // Contract t, then x2, then x1.
  std::vector<double> s3(nn * nn * n3, 0.0);
  for (std::size_t pq = 0; pq < nn * nn; ++pq) {
    for (std::size_t e = 0; e < n3; ++e) {
      double acc = 0.0;
      for (std::size_t r = 0; r < nn; ++r) acc += a3[e * nn + r] * grid.u[pq * nn + r];
      s3[pq * n3 + e] = acc;
    }
  }
  std::vector<double> s2(nn * n2 * n3, 0.0);
  for (std::size_t p = 0; p < nn; ++p) {
    for (std::size_t e = 0; e < n2; ++e) {
      for (std::size_t q = 0; q < nn; ++q) {
        const double w = a2[e * nn + q];
        if (w == 0.0) continue;
        for (std::size_t k = 0; k < n3; ++k) s2[(p * n2 + e) * n3 + k] += w * s3[(p * nn + q) * n3 + k];
      }
    }
  }
  std::vector<double> out(n1 * n2 * n3, 0.0);
  for (std::size_t e = 0; e < n1; ++e) {
    for (std::size_t p = 0; p < nn; ++p) {
      const double w = a1[e * nn + p];
      if (w == 0.0) continue;
      for (std::size_t jk = 0; jk < n2 * n3; ++jk) out[e * n2 * n3 + jk] += w * s2[p * n2 * n3 + jk];
    }
  }
  return out;
}

std::vector<double> fd_memory_field(const Grid3& grid, int quad_nodes) {
  const auto c = node_coordinates(grid);
  return fd_memory_on_tensor(grid, c, c, c, quad_nodes);
}

SolveResult picard_jacobi_solve(int cells, const PointFunction& source, const PointFunction& dirichlet,
                                const SolveOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (options.max_iter < 1) throw std::invalid_argument("iteration budget must be positive");
  SolveResult result;
  Grid3 grid(cells);
  const int n = grid.nodes();
  const double h = grid.spacing();
  std::vector<double> f(grid.u.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const double x1 = grid.coordinate(i), x2 = grid.coordinate(j), t = grid.coordinate(k);
        f[grid.index(i, j, k)] = source(x1, x2, t);
        if (i == 0 || j == 0 || k == 0) grid.at(i, j, k) = dirichlet(x1, x2, t);
      }
    }
  }

  const std::size_t stride[3] = {static_cast<std::size_t>(n) * n, static_cast<std::size_t>(n), 1};
  const bool lagged = options.scheme == Scheme::forward;

  Grid3 next = grid;
  for (int it = 1; it <= options.max_iter; ++it) {
    const auto memory = fd_memory_field(grid, options.quad_nodes);
    double update = 0.0;
    for (int i = 1; i < n; ++i) {
      for (int j = 1; j < n; ++j) {
        for (int k = 1; k < n; ++k) {
          const std::size_t id = grid.index(i, j, k);
          // Reaction, memory and source at this node (upwind) or one step back in time (forward).
          const std::size_t at = lagged ? id - 1 : id;
          double diag = 3.0 / h;
          double rhs = f[at] + memory[at];
          if (lagged) {
            rhs += grid.u[at];
          } else {
            diag -= 1.0;
          }
          for (int axis = 0; axis < 3; ++axis) rhs += grid.u[id - stride[axis]] / h;
          const double v = rhs / diag;
          update = std::max(update, std::abs(v - grid.u[id]));
          next.u[id] = v;
        }
      }
    }
    std::swap(grid.u, next.u);
    result.updates.push_back(update);
    if (!std::isfinite(update)) throw ConvergenceError("fixed-point iteration diverged", update);
    if (update <= options.tol) {
      result.iterations = it;
      result.grid = std::move(grid);
      return result;
    }
  }
  throw ConvergenceError("fixed-point iteration did not converge within the iteration budget", result.updates.back());
}

}  // namespace minpo::fd
