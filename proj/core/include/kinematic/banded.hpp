#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kinematic {

/// Square band matrix with `lower` sub- and `upper` super-diagonals. Storage
/// reserves `lower` extra super-diagonals for the fill produced by partial
/// pivoting, so a factorization can run in place.
class BandMatrix {
 public:
  BandMatrix(std::size_t n, std::size_t lower, std::size_t upper);

  std::size_t size() const { return n_; }
  std::size_t lower() const { return lower_; }
  std::size_t upper() const { return upper_; }

  bool in_band(std::size_t i, std::size_t j) const;
  double& at(std::size_t i, std::size_t j) { return data_[index(i, j)]; }
  double get(std::size_t i, std::size_t j) const { return in_band(i, j) ? data_[index(i, j)] : 0.0; }

  /// y = A x using the declared band (before factorization).
  std::vector<double> multiply(std::span<const double> x) const;
  /// Max absolute row sum of the declared band.
  double norm_inf() const;

  /// Solves A x = b by Gaussian elimination with partial pivoting. Destroys
  /// the matrix contents. Throws a numerical-failure error on a zero pivot.
  std::vector<double> solve_in_place(std::vector<double> b);

 private:
  std::size_t index(std::size_t i, std::size_t j) const { return i * width_ + (j + lower_ - i); }

  std::size_t n_;
  std::size_t lower_;
  std::size_t upper_;
  std::size_t width_;
  std::vector<double> data_;
};

}  // namespace kinematic
