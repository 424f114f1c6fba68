#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "blhybrid/exec.hpp"

namespace blhybrid::ssa {

/// Hankel embedding of a series: entry (i, j) = x[i + j].
struct TrajectoryMatrix {
  Eigen::MatrixXd values;  // L x K
  std::size_t window = 0;  // L
  std::size_t lags = 0;    // K = N - L + 1
};

struct SvdResult {
  Eigen::VectorXd singular_values;  // descending, length r
  Eigen::MatrixXd left;             // L x r
  Eigen::MatrixXd right;            // K x r

  Eigen::Index rank() const noexcept { return singular_values.size(); }
};

/// Disjoint 0-based component index sets.
using Grouping = std::vector<std::vector<std::size_t>>;

TrajectoryMatrix build_trajectory(std::span<const double> series, std::size_t window);

/// Thin SVD via cyclic Jacobi eigendecomposition of the smaller Gram matrix.
/// Components with sigma <= 1e-12 * sigma_1 are dropped.
SvdResult svd(const Eigen::MatrixXd& x, Exec exec = Exec::Parallel);
inline SvdResult svd(const TrajectoryMatrix& t, Exec exec = Exec::Parallel) {
  return svd(t.values, exec);
}

std::vector<Eigen::MatrixXd> group_components(const SvdResult& svd, const Grouping& grouping);

/// Averages each anti-diagonal; returns a series of length L + K - 1.
std::vector<double> diagonal_average(const Eigen::MatrixXd& m);

/// Reconstructs the series of the listed components directly, equivalent to
/// diagonal_average(group_components(...)) without forming the L x K matrix.
std::vector<double> reconstruct(const SvdResult& svd, std::span<const std::size_t> components,
                                Exec exec = Exec::Parallel);

/// Keeps the smallest leading set of components holding `energy_keep` of the
/// total squared singular-value mass and reconstructs from them.
std::vector<double> denoise(std::span<const double> series, std::size_t window,
                            double energy_keep, Exec exec = Exec::Parallel);

/// floor(N / 4), capped at 250 and clamped into the valid window range.
std::size_t default_window(std::size_t series_length);

namespace detail {
struct SymmetricEigen {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns
  int sweeps = 0;
};
/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
SymmetricEigen jacobi_eigen(Eigen::MatrixXd a, int max_sweeps = 100, double tol = 1e-12);
}  // namespace detail

}  // namespace blhybrid::ssa
