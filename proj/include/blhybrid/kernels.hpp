#pragma once

// Data-parallel kernels. Every `*_omp` variant evaluates exactly the same
// floating-point expression per output element as its `*_serial` reference,
// so the two are bitwise identical for any thread count.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "blhybrid/exec.hpp"

namespace blhybrid::kernels {

/// A * A^T with each entry accumulated left to right over the columns.
Eigen::MatrixXd gram_rows_serial(const Eigen::MatrixXd& a);
Eigen::MatrixXd gram_rows_omp(const Eigen::MatrixXd& a);

inline Eigen::MatrixXd gram_rows(const Eigen::MatrixXd& a, Exec exec) {
  return exec == Exec::Parallel ? gram_rows_omp(a) : gram_rows_serial(a);
}

/// Anti-diagonal average of sum_c scaled_left(:, c) * right(:, c)^T without
/// materializing the L x K matrix. `scaled_left` is L x r, `right` is K x r.
std::vector<double> hankel_average_serial(const Eigen::MatrixXd& scaled_left,
                                          const Eigen::MatrixXd& right);
std::vector<double> hankel_average_omp(const Eigen::MatrixXd& scaled_left,
                                       const Eigen::MatrixXd& right);

inline std::vector<double> hankel_average(const Eigen::MatrixXd& scaled_left,
                                          const Eigen::MatrixXd& right, Exec exec) {
  return exec == Exec::Parallel ? hankel_average_omp(scaled_left, right)
                                : hankel_average_serial(scaled_left, right);
}

}  // namespace blhybrid::kernels
