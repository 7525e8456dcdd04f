#pragma once

#include <array>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace minpo::fd {

/// Uniform node grid on [0, 1]^3 with n cells per axis (n + 1 nodes), coordinates
/// ordered (x1, x2, t). Values are stored with t fastest.
struct Grid3 {
  int cells = 0;
  std::vector<double> u;

  Grid3() = default;
  explicit Grid3(int cells);

  int nodes() const { return cells + 1; }
  double spacing() const { return 1.0 / cells; }
  double coordinate(int i) const { return static_cast<double>(i) / cells; }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * nodes() + static_cast<std::size_t>(j)) * nodes() + static_cast<std::size_t>(k);
  }
  double& at(int i, int j, int k) { return u[index(i, j, k)]; }
  double at(int i, int j, int k) const { return u[index(i, j, k)]; }

  /// Trilinear interpolation at a point of the unit cube.
  double interpolate(const std::array<double, 3>& p) const;
};

/// forward: one-sided forward differences (backward on the far faces).
/// upwind: backward differences, upwind for the unit transport velocity.
enum class Scheme { forward, upwind };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& name);

using PointFunction = std::function<double(double x1, double x2, double t)>;

struct SolveOptions {
  Scheme scheme = Scheme::upwind;
  int quad_nodes = 20;
  double tol = 1e-10;
  int max_iter = 5000;
};

struct SolveResult {
  Grid3 grid;
  int iterations = 0;
  /// Max-norm change of each sweep.
  std::vector<double> updates;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_update)
      : std::runtime_error(what), last_update_(last_update) {}
  double last_update() const { return last_update_; }

 private:
  double last_update_;
};

/// Fixed point of  D_t u + D_x1 u + D_x2 u - u - M[u] = f  on the grid, where D
/// are the scheme's one-sided differences and M the quadrature of the nested
/// memory integral over the trilinear interpolant of the previous iterate.
/// Nodes on x1 = 0, x2 = 0 and t = 0 hold `dirichlet`. Plain Jacobi sweeps
/// (no damping) until the max-norm update is at most tol.
SolveResult picard_jacobi_solve(int cells, const PointFunction& source, const PointFunction& dirichlet,
                                const SolveOptions& options);

/// Memory integral at node (i, j, k): tensor Gauss-Legendre on
/// [0, x1] x [0, x2] x [0, t] with kernel e^(tau - t), sampling the trilinear
/// interpolant of the grid values. Reference implementation, one node at a time.
double fd_memory_eval(const Grid3& grid, const std::array<int, 3>& node, int quad_nodes);

/// The same quadrature at every node, applied axis by axis. Equal to
/// fd_memory_eval up to rounding.
std::vector<double> fd_memory_field(const Grid3& grid, int quad_nodes);

/// The same quadrature at arbitrary points (x1, x2, t triples) given as the
/// tensor product of per-axis samples; output is ordered with t fastest.
std::vector<double> fd_memory_on_tensor(const Grid3& grid, std::span<const double> x1, std::span<const double> x2,
                                        std::span<const double> t, int quad_nodes);

}  // namespace minpo::fd
