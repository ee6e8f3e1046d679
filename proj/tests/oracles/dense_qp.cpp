#include "dense_qp.hpp"

#include <cmath>
#include <stdexcept>

namespace oracle {

namespace {

double power(double s, std::size_t j) {
  double p = 1.0;
  for (std::size_t i = 0; i < j; ++i) p *= s;
  return p;
}

/// d^r/ds^r s^j evaluated at s.
double monomial_derivative(std::size_t j, std::size_t r, double s) {
  if (r > j) return 0.0;
  double f = 1.0;
  for (std::size_t i = 0; i < r; ++i) f *= static_cast<double>(j - i);
  return f * power(s, j - r);
}

double factorial(std::size_t n) {
  double f = 1.0;
  for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
  return f;
}

}  // namespace

DenseSplineQp::DenseSplineQp(Measurement kind, std::vector<double> knots, std::vector<double> values, double alpha)
    : kind_(kind), knots_(std::move(knots)), values_(std::move(values)), alpha_(alpha) {
  if (knots_.size() < 2 || knots_.size() > 64) throw std::invalid_argument("oracle handles 2..64 knots");
  degree_ = kind_ == Measurement::kSnapshot ? 3 : 4;
  intervals_ = knots_.size() - 1;
  const std::size_t n_meas = kind_ == Measurement::kSnapshot ? knots_.size() : intervals_;
  if (values_.size() != n_meas) throw std::invalid_argument("value count does not match measurement count");

  v_offset_ = intervals_ * (degree_ + 1);
  w_offset_ = v_offset_ + intervals_ * (degree_ - 1);
  n_vars_ = w_offset_ + n_meas;

  // Gauss-Legendre nodes on [-1, 1].
  const double g = std::sqrt(3.0 / 5.0);
  const double nodes[3] = {-g, 0.0, g};
  const double weights[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

  hessian_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_vars_), static_cast<Eigen::Index>(n_vars_));
  for (std::size_t k = 0; k < intervals_; ++k) {
    const double h = knots_[k + 1] - knots_[k];
    for (int q = 0; q < 3; ++q) {
      const double s = 0.5 * h * (nodes[q] + 1.0);
      const double wq = 0.5 * h * weights[q];
      for (std::size_t i = 0; i + 2 <= degree_; ++i) {
        for (std::size_t l = 0; l + 2 <= degree_; ++l) {
          hessian_(static_cast<Eigen::Index>(v_index(k, i)), static_cast<Eigen::Index>(v_index(k, l))) +=
              wq * power(s, i) * power(s, l);
        }
      }
    }
  }
  for (std::size_t m = 0; m < n_meas; ++m) {
    hessian_(static_cast<Eigen::Index>(w_index(m)), static_cast<Eigen::Index>(w_index(m))) = alpha_ * alpha_;
  }

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  auto new_row = [&]() { return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_vars_)).eval(); };
  auto at = [](Eigen::VectorXd& r, std::size_t i) -> double& { return r(static_cast<Eigen::Index>(i)); };

  // Dynamics: p_k'' expressed by the forcing polynomial.
  for (std::size_t k = 0; k < intervals_; ++k) {
    for (std::size_t i = 0; i + 2 <= degree_; ++i) {
      auto r = new_row();
      at(r, a_index(k, i + 2)) = static_cast<double>((i + 2) * (i + 1));
      at(r, v_index(k, i)) = -1.0;
      rows.push_back(r);
      rhs.push_back(0.0);
    }
  }
  // Continuity of orders 0..2.
  for (std::size_t k = 0; k + 1 < intervals_; ++k) {
    const double h = knots_[k + 1] - knots_[k];
    for (std::size_t order = 0; order <= 2; ++order) {
      auto r = new_row();
      for (std::size_t j = 0; j <= degree_; ++j) at(r, a_index(k, j)) = monomial_derivative(j, order, h);
      at(r, a_index(k + 1, order)) -= factorial(order);
      rows.push_back(r);
      rhs.push_back(0.0);
    }
  }
  // Measurements.
  for (std::size_t m = 0; m < n_meas; ++m) {
    auto r = new_row();
    if (kind_ == Measurement::kSnapshot) {
      const std::size_t k = m < intervals_ ? m : intervals_ - 1;
      const double s = m < intervals_ ? 0.0 : knots_[m] - knots_[k];
      for (std::size_t j = 0; j <= degree_; ++j) at(r, a_index(k, j)) = power(s, j);
    } else {
      const double h = knots_[m + 1] - knots_[m];
      for (std::size_t j = 0; j <= degree_; ++j) at(r, a_index(m, j)) = power(h, j + 1) / static_cast<double>(j + 1);
    }
    at(r, w_index(m)) = 1.0;
    rows.push_back(r);
    rhs.push_back(values_[m]);
  }
  constraints_.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_vars_));
  rhs_.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    constraints_.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    rhs_(static_cast<Eigen::Index>(i)) = rhs[i];
  }
}

Eigen::VectorXd DenseSplineQp::solve() const {
  const auto n = static_cast<Eigen::Index>(n_vars_);
  const auto m = constraints_.rows();
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = hessian_;
  kkt.topRightCorner(n, m) = constraints_.transpose();
  kkt.bottomLeftCorner(m, n) = constraints_;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
  rhs.tail(m) = rhs_;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) throw std::runtime_error("dense KKT system is singular");
  Eigen::VectorXd sol = lu.solve(rhs);
  return sol.head(n);
}

double DenseSplineQp::objective(const Eigen::VectorXd& z) const { return 0.5 * z.dot(hessian_ * z); }

Eigen::VectorXd DenseSplineQp::project(const Eigen::VectorXd& z) const {
  const Eigen::VectorXd violation = constraints_ * z - rhs_;
  const Eigen::MatrixXd gram = constraints_ * constraints_.transpose();
  const Eigen::VectorXd lambda = gram.fullPivLu().solve(violation);
  return z - constraints_.transpose() * lambda;
}

double DenseSplineQp::max_constraint_violation(const Eigen::VectorXd& z) const {
  return (constraints_ * z - rhs_).cwiseAbs().maxCoeff();
}

std::vector<std::vector<double>> DenseSplineQp::taylor_coefficients(const Eigen::VectorXd& z) const {
  std::vector<std::vector<double>> out(intervals_);
  for (std::size_t k = 0; k < intervals_; ++k) {
    for (std::size_t j = 0; j <= degree_; ++j) {
      out[k].push_back(factorial(j) * z(static_cast<Eigen::Index>(a_index(k, j))));
    }
  }
  return out;
}

std::vector<double> DenseSplineQp::noise(const Eigen::VectorXd& z) const {
  std::vector<double> w;
  for (std::size_t m = w_offset_; m < n_vars_; ++m) w.push_back(z(static_cast<Eigen::Index>(m)));
  return w;
}

}  // namespace oracle
