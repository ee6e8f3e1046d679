#include "kinematic/enrichment.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>

#include <fmt/format.h>

#include "kinematic/banded.hpp"
#include "kinematic/error.hpp"

namespace kinematic {
namespace {

// Derivative orders matched across interior knots.
constexpr std::size_t kContinuity = 3;

double factorial(std::size_t n) {
  double f = 1.0;
  for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
  return f;
}

// Gram matrix of the curvature basis on one piece: entry (a, b) is
// int_0^h d2/ds2[s^a/a!] * d2/ds2[s^b/b!] ds.
template <std::size_t N>
std::array<std::array<double, N>, N> curvature_gram(double h) {
  std::array<std::array<double, N>, N> g{};
  for (std::size_t a = 2; a < N; ++a) {
    for (std::size_t b = 2; b < N; ++b) {
      const std::size_t p = a + b - 3;
      g[a][b] = std::pow(h, static_cast<double>(p)) /
                (static_cast<double>(p) * factorial(a - 2) * factorial(b - 2));
    }
  }
  return g;
}

// Row vector giving the d-th derivative of a Taylor-form piece at s = h.
template <std::size_t N>
std::array<double, N> derivative_row(double h, std::size_t d) {
  std::array<double, N> row{};
  for (std::size_t j = d; j < N; ++j) row[j] = std::pow(h, static_cast<double>(j - d)) / factorial(j - d);
  return row;
}

template <std::size_t N>
std::array<double, N> integral_row(double h) {
  std::array<double, N> row{};
  for (std::size_t j = 0; j < N; ++j) row[j] = std::pow(h, static_cast<double>(j + 1)) / factorial(j + 1);
  return row;
}

template <std::size_t N>
double quadratic(const std::array<std::array<double, N>, N>& g, const std::array<double, N>& c) {
  double sum = 0.0;
  for (std::size_t a = 0; a < N; ++a)
    for (std::size_t b = 0; b < N; ++b) sum += c[a] * g[a][b] * c[b];
  return sum;
}

/// One linear measurement m . c_interval ~ value.
template <std::size_t N>
struct Measurement {
  std::size_t interval;
  std::array<double, N> row;
  double value;
};

/// Interleaved unknowns [c_0, mu_0, c_1, mu_1, ..., c_{n-1}] where mu_k are the
/// multipliers of the continuity constraints between pieces k and k+1. This
/// keeps the symmetric KKT matrix banded.
template <std::size_t N>
struct KktLayout {
  std::size_t intervals;
  static constexpr std::size_t kBlock = N + kContinuity;

  std::size_t coeff(std::size_t k, std::size_t j) const { return kBlock * k + j; }
  std::size_t multiplier(std::size_t k, std::size_t d) const { return kBlock * k + N + d; }
  std::size_t size() const { return kBlock * intervals - kContinuity; }
  // Widest coupling: multiplier of derivative order 2 against coefficient 0 of its left piece.
  std::size_t bandwidth() const { return intervals > 1 ? N + kContinuity - 1 : N - 1; }
};

template <std::size_t N>
struct KktSolution {
  std::vector<std::array<double, N>> coeffs;
  double kkt_residual;
};

template <std::size_t N>
KktSolution<N> solve_kkt(const TimeGrid& grid, std::span<const Measurement<N>> measurements, double alpha,
                         const FitOptions& options) {
  const KktLayout<N> layout{grid.intervals()};
  const std::size_t n = layout.size();
  const std::size_t band = layout.bandwidth();
  BandMatrix kkt(n, band, band);
  std::vector<double> rhs(n, 0.0);
  // Dividing the objective by max(1, alpha^2) leaves the minimizer unchanged and
  // keeps the Hessian and the multipliers O(1), so the continuity rows solve to rounding.
  const double scale = 1.0 / std::max(1.0, alpha * alpha);
  const double weight = alpha * alpha * scale;

  for (std::size_t k = 0; k < layout.intervals; ++k) {
    const auto g = curvature_gram<N>(grid.width(k));
    for (std::size_t a = 0; a < N; ++a)
      for (std::size_t b = 0; b < N; ++b) kkt.at(layout.coeff(k, a), layout.coeff(k, b)) += scale * g[a][b];
  }
  for (const auto& m : measurements) {
    for (std::size_t a = 0; a < N; ++a) {
      for (std::size_t b = 0; b < N; ++b) {
        kkt.at(layout.coeff(m.interval, a), layout.coeff(m.interval, b)) += weight * m.row[a] * m.row[b];
      }
      rhs[layout.coeff(m.interval, a)] += weight * m.value * m.row[a];
    }
  }
  for (std::size_t k = 0; k + 1 < layout.intervals; ++k) {
    const double h = grid.width(k);
    for (std::size_t d = 0; d < kContinuity; ++d) {
      const auto row = derivative_row<N>(h, d);
      const std::size_t r = layout.multiplier(k, d);
      for (std::size_t j = 0; j < N; ++j) {
        if (row[j] == 0.0) continue;
        kkt.at(r, layout.coeff(k, j)) = row[j];
        kkt.at(layout.coeff(k, j), r) = row[j];
      }
      kkt.at(r, layout.coeff(k + 1, d)) = -1.0;
      kkt.at(layout.coeff(k + 1, d), r) = -1.0;
    }
  }

  const BandMatrix original = kkt;
  auto z = kkt.solve_in_place(rhs);

  auto scaled_residual = [&](const std::vector<double>& sol, std::vector<double>* residual) {
    auto kz = original.multiply(sol);
    double rmax = 0.0, zmax = 0.0, bmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = rhs[i] - kz[i];
      if (residual) (*residual)[i] = r;
      rmax = std::max(rmax, std::abs(r));
      zmax = std::max(zmax, std::abs(sol[i]));
      bmax = std::max(bmax, std::abs(rhs[i]));
    }
    const double denom = original.norm_inf() * zmax + bmax;
    return denom > 0.0 ? rmax / denom : rmax;
  };

  std::vector<double> residual(n);
  double kkt_residual = scaled_residual(z, &residual);
  if (!std::isfinite(kkt_residual)) fail(ErrorCode::kNumerical, "non-finite spline solution");
  // One step of iterative refinement on a fresh factorization.
  BandMatrix again = original;
  const auto dz = again.solve_in_place(residual);
  for (std::size_t i = 0; i < n; ++i) z[i] += dz[i];
  kkt_residual = scaled_residual(z, nullptr);
  if (!(kkt_residual <= options.kkt_tolerance)) {
    fail(ErrorCode::kNumerical, fmt::format("KKT residual {} above tolerance {}", kkt_residual, options.kkt_tolerance));
  }

  KktSolution<N> out{std::vector<std::array<double, N>>(layout.intervals), kkt_residual};
  for (std::size_t k = 0; k < layout.intervals; ++k)
    for (std::size_t j = 0; j < N; ++j) out.coeffs[k][j] = z[layout.coeff(k, j)];
  return out;
}

template <std::size_t N>
void finish_diagnostics(const TimeGrid& grid, const std::vector<std::array<double, N>>& coeffs,
                        std::span<const Measurement<N>> measurements, double alpha, FitDiagnostics& diag) {
  double curvature = 0.0;
  for (std::size_t k = 0; k < coeffs.size(); ++k) curvature += quadratic(curvature_gram<N>(grid.width(k)), coeffs[k]);
  double misfit = 0.0;
  diag.residuals.clear();
  for (const auto& m : measurements) {
    double fitted = 0.0;
    for (std::size_t j = 0; j < N; ++j) fitted += m.row[j] * coeffs[m.interval][j];
    const double w = m.value - fitted;
    diag.residuals.push_back(w);
    misfit += w * w;
  }
  diag.objective_value = std::max(0.0, 0.5 * curvature + 0.5 * alpha * alpha * misfit);
}

void check_values(std::span<const double> values, std::size_t expected, const char* what) {
  if (values.size() != expected) {
    fail(ErrorCode::kShape, fmt::format("{} has {} values, expected {}", what, values.size(), expected));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) fail(ErrorCode::kData, fmt::format("{} value {} is not finite", what, i));
  }
}

template <std::size_t N>
double curvature_of(const PiecewisePolynomial<N - 1>& spline) {
  double total = 0.0;
  for (std::size_t k = 0; k < spline.grid().intervals(); ++k) {
    total += quadratic(curvature_gram<N>(spline.grid().width(k)), spline.piece(k));
  }
  return total;
}

template <std::size_t N>
double defect_of(const PiecewisePolynomial<N - 1>& spline) {
  double worst = 0.0;
  const auto& grid = spline.grid();
  for (std::size_t k = 0; k + 1 < grid.intervals(); ++k) {
    const double h = grid.width(k);
    for (unsigned d = 0; d < kContinuity; ++d) {
      const double left = eval_piece(spline.piece(k), h, d);
      const double right = eval_piece(spline.piece(k + 1), 0.0, d);
      worst = std::max(worst, std::abs(left - right));
    }
  }
  return worst;
}

}  // namespace

SnapshotFit fit_snapshot_spline(const SnapshotSeries& series, const NoiseRatio& noise, const FitOptions& options) {
  noise.validate();
  const TimeGrid& grid = series.grid;
  if (grid.size() < 2) fail(ErrorCode::kInsufficientData, "snapshot fit needs at least 2 observations");
  check_values(series.values, grid.size(), "snapshot series");

  constexpr std::size_t N = 4;
  std::vector<Measurement<N>> measurements;
  measurements.reserve(grid.size());
  for (std::size_t k = 0; k < grid.intervals(); ++k) {
    measurements.push_back({k, derivative_row<N>(0.0, 0), series.values[k]});
  }
  const std::size_t last = grid.intervals() - 1;
  measurements.push_back({last, derivative_row<N>(grid.width(last), 0), series.values.back()});

  auto solved = solve_kkt<N>(grid, measurements, noise.alpha, options);
  SnapshotFit fit{CubicSpline(grid, solved.coeffs), {}};
  fit.diagnostics.kkt_residual = solved.kkt_residual;
  finish_diagnostics<N>(grid, solved.coeffs, measurements, noise.alpha, fit.diagnostics);
  return fit;
}

AggregateFit fit_aggregate_spline(const AggregateSeries& series, const NoiseRatio& noise, const FitOptions& options) {
  noise.validate();
  const TimeGrid& grid = series.grid;
  if (grid.size() < 3) fail(ErrorCode::kInsufficientData, "aggregate fit needs at least 2 intervals");
  check_values(series.values, grid.intervals(), "aggregate series");

  constexpr std::size_t N = 5;
  std::vector<Measurement<N>> measurements;
  measurements.reserve(grid.intervals());
  for (std::size_t k = 0; k < grid.intervals(); ++k) {
    measurements.push_back({k, integral_row<N>(grid.width(k)), series.values[k]});
  }

  auto solved = solve_kkt<N>(grid, measurements, noise.alpha, options);
  AggregateFit fit{QuarticSpline(grid, solved.coeffs), {}};
  fit.diagnostics.kkt_residual = solved.kkt_residual;
  finish_diagnostics<N>(grid, solved.coeffs, measurements, noise.alpha, fit.diagnostics);
  return fit;
}

double squared_curvature(const CubicSpline& spline) { return curvature_of<4>(spline); }
double squared_curvature(const QuarticSpline& spline) { return curvature_of<5>(spline); }
double continuity_defect(const CubicSpline& spline) { return defect_of<4>(spline); }
double continuity_defect(const QuarticSpline& spline) { return defect_of<5>(spline); }

}  // namespace kinematic
