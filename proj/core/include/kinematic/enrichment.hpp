#pragma once

#include <vector>

#include "kinematic/spline.hpp"

namespace kinematic {

struct FitDiagnostics {
  /// w_k: observation minus fitted measurement.
  std::vector<double> residuals;
  /// 1/2 * integral of squared curvature + alpha^2/2 * sum of w_k^2.
  double objective_value = 0.0;
  /// ||K z - rhs||_inf / (||K||_inf ||z||_inf + ||rhs||_inf).
  double kkt_residual = 0.0;
};

struct FitOptions {
  double kkt_tolerance = 1e-8;
};

struct SnapshotFit {
  CubicSpline spline;
  FitDiagnostics diagnostics;
};

struct AggregateFit {
  QuarticSpline spline;
  FitDiagnostics diagnostics;
};

/// Maximum-likelihood state estimate from point observations: minimizes
///   1/2 int (x'')^2 dt + alpha^2/2 sum_k (y_k - x(t_k))^2
/// over C2 piecewise cubics. Boundary conditions are the natural ones,
/// which fall out of the optimality conditions.
SnapshotFit fit_snapshot_spline(const SnapshotSeries& series, const NoiseRatio& noise,
                                const FitOptions& options = {});

/// Volume-intensity estimate from interval integrals: minimizes
///   1/2 int (x'')^2 dt + alpha^2/2 sum_k (y_k - int_{t_k}^{t_{k+1}} x dt)^2
/// over C2 piecewise quartics. Requires at least two intervals.
AggregateFit fit_aggregate_spline(const AggregateSeries& series, const NoiseRatio& noise,
                                  const FitOptions& options = {});

/// Total squared curvature int (x'')^2 dt, evaluated in closed form per piece.
double squared_curvature(const CubicSpline& spline);
double squared_curvature(const QuarticSpline& spline);

/// Largest jump in value, first and second derivative across interior knots.
double continuity_defect(const CubicSpline& spline);
double continuity_defect(const QuarticSpline& spline);

}  // namespace kinematic
