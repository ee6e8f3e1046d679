#include "kinematic/banded.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "kinematic/error.hpp"

namespace kinematic {

BandMatrix::BandMatrix(std::size_t n, std::size_t lower, std::size_t upper)
    : n_(n), lower_(lower), upper_(upper), width_(2 * lower + upper + 1), data_(n * width_, 0.0) {}

bool BandMatrix::in_band(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) return false;
  return j + lower_ >= i && j <= i + upper_ + lower_;
}

std::vector<double> BandMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t lo = i > lower_ ? i - lower_ : 0;
    const std::size_t hi = std::min(n_ - 1, i + upper_);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += data_[index(i, j)] * x[j];
    y[i] = sum;
  }
  return y;
}

double BandMatrix::norm_inf() const {
  double best = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t lo = i > lower_ ? i - lower_ : 0;
    const std::size_t hi = std::min(n_ - 1, i + upper_);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += std::abs(data_[index(i, j)]);
    best = std::max(best, sum);
  }
  return best;
}

std::vector<double> BandMatrix::solve_in_place(std::vector<double> b) {
  if (b.size() != n_) fail(ErrorCode::kShape, "right-hand side length does not match band matrix");
  const double scale = norm_inf();
  const double tiny = std::numeric_limits<double>::epsilon() * (scale > 0.0 ? scale : 1.0) * 1e-4;
  const std::size_t reach = upper_ + lower_;

  for (std::size_t k = 0; k < n_; ++k) {
    const std::size_t last_row = std::min(n_ - 1, k + lower_);
    const std::size_t last_col = std::min(n_ - 1, k + reach);

    std::size_t pivot = k;
    double best = std::abs(data_[index(k, k)]);
    for (std::size_t i = k + 1; i <= last_row; ++i) {
      const double v = std::abs(data_[index(i, k)]);
      if (v > best) {
        best = v;
        pivot = i;
      }
    }
    if (!(best > tiny)) {
      fail(ErrorCode::kNumerical, fmt::format("singular band system (pivot {} at column {})", best, k));
    }
    if (pivot != k) {
      for (std::size_t j = k; j <= last_col; ++j) std::swap(data_[index(k, j)], data_[index(pivot, j)]);
      std::swap(b[k], b[pivot]);
    }

    const double diag = data_[index(k, k)];
    for (std::size_t i = k + 1; i <= last_row; ++i) {
      double& lik = data_[index(i, k)];
      if (lik == 0.0) continue;
      const double factor = lik / diag;
      lik = 0.0;
      for (std::size_t j = k + 1; j <= last_col; ++j) data_[index(i, j)] -= factor * data_[index(k, j)];
      b[i] -= factor * b[k];
    }
  }

  std::vector<double> x(n_, 0.0);
  for (std::size_t k = n_; k-- > 0;) {
    const std::size_t last_col = std::min(n_ - 1, k + reach);
    double sum = b[k];
    for (std::size_t j = k + 1; j <= last_col; ++j) sum -= data_[index(k, j)] * x[j];
    x[k] = sum / data_[index(k, k)];
  }
  return x;
}

}  // namespace kinematic
