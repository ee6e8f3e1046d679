#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace kinematic {

/// Strictly increasing, finite sample times (trading-day units).
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> knots);

  /// Unit-spaced grid {start, start + 1, ..., start + count - 1}.
  static TimeGrid uniform(std::size_t count, double start = 0.0);

  std::span<const double> knots() const { return knots_; }
  std::size_t size() const { return knots_.size(); }
  std::size_t intervals() const { return knots_.size() - 1; }
  double front() const { return knots_.front(); }
  double back() const { return knots_.back(); }
  double operator[](std::size_t i) const { return knots_[i]; }
  double width(std::size_t interval) const { return knots_[interval + 1] - knots_[interval]; }

  /// Interval containing t; a tie at an interior knot selects the interval to its right.
  std::size_t locate(double t) const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  std::vector<double> knots_;
};

/// Process-to-measurement noise ratio: alpha^2 = sigma_p^2 / sigma_m^2.
struct NoiseRatio {
  double alpha = 5.0;

  static NoiseRatio from_sigmas(double sigma_process, double sigma_measurement);
  void validate() const;
};

/// Point observations y_k = x(t_k) + w_k of log-price.
struct SnapshotSeries {
  TimeGrid grid;
  std::vector<double> values;
};

/// Interval observations of log-volume; values[k] covers [t_k, t_{k+1}].
struct AggregateSeries {
  TimeGrid grid;
  std::vector<double> values;
};

/// Piecewise polynomial in Taylor form about each interval's left knot:
///   p(t) = sum_j c_j (t - t_k)^j / j!,   t in [t_k, t_{k+1}],
/// so c_j is the j-th derivative at t_k.
template <std::size_t Degree>
class PiecewisePolynomial {
 public:
  static constexpr std::size_t kDegree = Degree;
  static constexpr std::size_t kCoefficients = Degree + 1;
  using Coefficients = std::array<double, kCoefficients>;

  PiecewisePolynomial() = default;
  PiecewisePolynomial(TimeGrid grid, std::vector<Coefficients> coeffs);

  const TimeGrid& grid() const { return grid_; }
  std::span<const Coefficients> coefficients() const { return coeffs_; }
  const Coefficients& piece(std::size_t interval) const { return coeffs_[interval]; }

  /// Derivative of the given order at t. Orders above the degree give exactly 0.
  double eval(double t, unsigned deriv_order = 0) const;

 private:
  TimeGrid grid_;
  std::vector<Coefficients> coeffs_;
};

using CubicSpline = PiecewisePolynomial<3>;
using QuarticSpline = PiecewisePolynomial<4>;

/// Horner evaluation of one Taylor-form piece at local offset s.
template <std::size_t N>
double eval_piece(const std::array<double, N>& c, double s, unsigned deriv_order) {
  constexpr std::size_t degree = N - 1;
  if (deriv_order > degree) return 0.0;
  double p = c[degree];
  for (std::size_t j = degree; j-- > deriv_order;) {
    p = p * s / static_cast<double>(j - deriv_order + 1) + c[j];
  }
  return p;
}

/// Integral of a Taylor-form piece over [0, h].
template <std::size_t N>
double integrate_piece(const std::array<double, N>& c, double h) {
  double sum = 0.0;
  double term = h;  // h^(j+1) / (j+1)!
  for (std::size_t j = 0; j < N; ++j) {
    sum += c[j] * term;
    term *= h / static_cast<double>(j + 2);
  }
  return sum;
}

extern template class PiecewisePolynomial<3>;
extern template class PiecewisePolynomial<4>;

}  // namespace kinematic
