#include <random>

#include <Eigen/Dense>

#include "kinematic/banded.hpp"
#include "test_support.hpp"

using namespace kinematic;

TEST_CASE("banded solve matches a dense solve") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (std::size_t lower : {0u, 1u, 3u}) {
    for (std::size_t upper : {0u, 2u, 4u}) {
      const std::size_t n = 17;
      BandMatrix band(n, lower, upper);
      Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (j + lower < i || j > i + upper) continue;
          // Small diagonal forces pivoting on some rows.
          const double v = (i == j) ? 0.1 * g(rng) : g(rng);
          band.at(i, j) = v;
          dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
      }
      std::vector<double> b(n);
      for (auto& x : b) x = g(rng);
      const auto Ab = band.multiply(b);
      Eigen::VectorXd eb = Eigen::Map<Eigen::VectorXd>(b.data(), n);
      Eigen::VectorXd expected_mul = dense * eb;
      for (std::size_t i = 0; i < n; ++i) CHECK(Ab[i] == doctest::Approx(expected_mul(i)).epsilon(1e-12));
      if (std::abs(dense.determinant()) < 1e-8) continue;
      const Eigen::VectorXd expected = dense.fullPivLu().solve(eb);
      const auto x = band.solve_in_place(b);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(x[i] - expected(i)) < 1e-9 * (1.0 + std::abs(expected(i))));
    }
  }
}

TEST_CASE("singular band system raises a numerical error") {
  BandMatrix band(3, 1, 1);
  band.at(0, 0) = 1.0;
  band.at(0, 1) = 2.0;
  band.at(1, 0) = 2.0;
  band.at(1, 1) = 4.0;
  band.at(2, 2) = 1.0;
  CHECK_ERROR_CODE(band.solve_in_place({1.0, 2.0, 3.0}), ErrorCode::kNumerical);
}
