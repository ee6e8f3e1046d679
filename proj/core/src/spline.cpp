#include "kinematic/spline.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "kinematic/error.hpp"

namespace kinematic {

TimeGrid::TimeGrid(std::vector<double> knots) : knots_(std::move(knots)) {
  if (knots_.size() < 2) {
    fail(ErrorCode::kInsufficientData, fmt::format("time grid needs at least 2 knots, got {}", knots_.size()));
  }
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (!std::isfinite(knots_[i])) fail(ErrorCode::kData, fmt::format("non-finite knot at index {}", i));
    if (i > 0 && !(knots_[i] > knots_[i - 1])) {
      fail(ErrorCode::kGridOrder, fmt::format("knots must be strictly increasing (index {})", i));
    }
  }
}

TimeGrid TimeGrid::uniform(std::size_t count, double start) {
  std::vector<double> knots(count);
  for (std::size_t i = 0; i < count; ++i) knots[i] = start + static_cast<double>(i);
  return TimeGrid(std::move(knots));
}

std::size_t TimeGrid::locate(double t) const {
  if (!(t >= knots_.front() && t <= knots_.back())) {
    fail(ErrorCode::kOutOfRange,
         fmt::format("t = {} outside [{}, {}]", t, knots_.front(), knots_.back()));
  }
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  auto idx = static_cast<std::size_t>(it - knots_.begin());
  return std::min(idx == 0 ? 0 : idx - 1, intervals() - 1);
}

NoiseRatio NoiseRatio::from_sigmas(double sigma_process, double sigma_measurement) {
  if (!(sigma_process > 0.0) || !(sigma_measurement > 0.0)) {
    fail(ErrorCode::kConfig, "noise sigmas must be positive");
  }
  NoiseRatio n{sigma_process / sigma_measurement};
  n.validate();
  return n;
}

void NoiseRatio::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    fail(ErrorCode::kConfig, fmt::format("alpha must be positive and finite, got {}", alpha));
  }
}

template <std::size_t Degree>
PiecewisePolynomial<Degree>::PiecewisePolynomial(TimeGrid grid, std::vector<Coefficients> coeffs)
    : grid_(std::move(grid)), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != grid_.intervals()) {
    fail(ErrorCode::kShape, fmt::format("{} coefficient sets for {} intervals", coeffs_.size(), grid_.intervals()));
  }
}

template <std::size_t Degree>
double PiecewisePolynomial<Degree>::eval(double t, unsigned deriv_order) const {
  const std::size_t k = grid_.locate(t);
  if (deriv_order > Degree) return 0.0;
  return eval_piece(coeffs_[k], t - grid_[k], deriv_order);
}

template class PiecewisePolynomial<3>;
template class PiecewisePolynomial<4>;

}  // namespace kinematic
