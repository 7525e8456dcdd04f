#include "minpo/expcli/oracle.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "minpo/quadrature/gauss_legendre.hpp"

namespace minpo::expcli {

using core::ReconstructionKind;

namespace {

constexpr double kPi = std::numbers::pi;

// Volterra solution e^-t cosh(s t) and its derivative.
double volterra_u(double s, double t) { return std::exp(-t) * std::cosh(s * t); }
double volterra_du(double s, double t) { return std::exp(-t) * (s * std::sinh(s * t) - std::cosh(s * t)); }

}  // namespace

ExactOracle::ExactOracle(const core::ProblemSpec& spec) : spec_(spec) {}

double ExactOracle::solution(std::span<const double> p) const {
  switch (spec_.reconstruction) {
    case ReconstructionKind::volterra1d:
      return volterra_u(std::sqrt(spec_.kappa), p[0]);
    case ReconstructionKind::nested3d:
      return p[2] * std::sin(p[0]) * std::cos(p[1]);
    case ReconstructionKind::fractional:
      return p[1] * p[1] * p[1] * std::sin(kPi * p[0]);
  }
  throw std::logic_error("unhandled problem");
}

double ExactOracle::memory(std::span<const double> p) const {
  switch (spec_.reconstruction) {
    case ReconstructionKind::volterra1d: {
      const double s = std::sqrt(spec_.kappa);
      return std::exp(-p[0]) * std::sinh(s * p[0]) / s;
    }
    case ReconstructionKind::nested3d:
      return (p[2] - 1.0 + std::exp(-p[2])) * (1.0 - std::cos(p[0])) * std::sin(p[1]);
    case ReconstructionKind::fractional:
      return 6.0 / std::tgamma(4.0 - spec_.alpha) * std::pow(p[1], 3.0 - spec_.alpha) * std::sin(kPi * p[0]);
  }
  throw std::logic_error("unhandled problem");
}

double ExactOracle::memory_by_quadrature(std::span<const double> p) const {
  switch (spec_.reconstruction) {
    case ReconstructionKind::volterra1d: {
      const double s = std::sqrt(spec_.kappa);
      const double t = p[0];
      return quadrature::integrate_1d(
          quadrature::gauss_legendre(40), [&](double tau) { return std::exp(tau - t) * volterra_u(s, tau); }, 0.0, t);
    }
    case ReconstructionKind::nested3d: {
      const double t = p[2];
      return quadrature::integrate_3d_nested(
          quadrature::gauss_legendre(20),
          [&](double y1, double y2, double tau) { return std::exp(tau - t) * tau * std::sin(y1) * std::cos(y2); },
          {p[0], p[1], p[2]});
    }
    case ReconstructionKind::fractional: {
      // Substituting s = (t - tau)^(1 - alpha) removes the weak singularity; the
      // remaining fractional power at s = 0 is handled by panels halving towards it.
      const double a = spec_.alpha;
      const double x = p[0];
      const double t = p[1];
      const auto rule = quadrature::gauss_legendre(20);
      const auto integrand = [&](double s) {
        const double tau = t - std::pow(s, 1.0 / (1.0 - a));
        return 3.0 * tau * tau * std::sin(kPi * x);
      };
      double hi = std::pow(t, 1.0 - a);
      double q = 0.0;
      for (int k = 0; k < 60 && hi > 0.0; ++k, hi *= 0.5) q += quadrature::integrate_1d(rule, integrand, 0.5 * hi, hi);
      return q / std::tgamma(2.0 - a);
    }
  }
  throw std::logic_error("unhandled problem");
}

double ExactOracle::equation_residual(std::span<const double> p) const {
  const double source = spec_.source ? spec_.source(p) : 0.0;
  const double m = memory_by_quadrature(p);
  switch (spec_.reconstruction) {
    case ReconstructionKind::volterra1d: {
      const double s = std::sqrt(spec_.kappa);
      return volterra_du(s, p[0]) + volterra_u(s, p[0]) - spec_.kappa * m - source;
    }
    case ReconstructionKind::nested3d: {
      const double x1 = p[0], x2 = p[1], t = p[2];
      const double transport = std::sin(x1) * std::cos(x2) + t * std::cos(x1) * std::cos(x2) - t * std::sin(x1) * std::sin(x2);
      return transport - solution(p) - m - source;
    }
    case ReconstructionKind::fractional: {
      const double uxx = -kPi * kPi * solution(p);
      return m - uxx - source;
    }
  }
  throw std::logic_error("unhandled problem");
}

double ExactOracle::memory_mismatch(std::span<const double> p) const { return memory(p) - memory_by_quadrature(p); }

double ExactOracle::self_check(int points, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  const int d = spec_.dims();
  std::vector<double> p(static_cast<std::size_t>(d));
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    for (int k = 0; k < d; ++k) {
      p[static_cast<std::size_t>(k)] = std::uniform_real_distribution<double>(
          spec_.lower[static_cast<std::size_t>(k)], spec_.upper[static_cast<std::size_t>(k)])(rng);
    }
    worst = std::max({worst, std::abs(equation_residual(p)), std::abs(memory_mismatch(p))});
  }
  return worst;
}

}  // namespace minpo::expcli
