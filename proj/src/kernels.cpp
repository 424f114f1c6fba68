#include "blhybrid/kernels.hpp"

#include <algorithm>

namespace blhybrid::kernels {

namespace {

inline double row_dot(const Eigen::MatrixXd& a, Eigen::Index i, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * a(j, k);
  return s;
}

inline double hankel_entry(const Eigen::MatrixXd& ls, const Eigen::MatrixXd& r, Eigen::Index k) {
  const Eigen::Index rows = ls.rows(), cols = r.rows();
  const Eigen::Index lo = std::max<Eigen::Index>(0, k - cols + 1);
  const Eigen::Index hi = std::min<Eigen::Index>(k, rows - 1);
  double s = 0.0;
  for (Eigen::Index j = lo; j <= hi; ++j)
    for (Eigen::Index c = 0; c < ls.cols(); ++c) s += ls(j, c) * r(k - j, c);
  return s / static_cast<double>(hi - lo + 1);
}

}  // namespace

Eigen::MatrixXd gram_rows_serial(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) g(i, j) = g(j, i) = row_dot(a, i, j);
  return g;
}

Eigen::MatrixXd gram_rows_omp(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd g(n, n);
#pragma omp parallel for schedule(dynamic, 4)
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) g(i, j) = row_dot(a, i, j);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) g(j, i) = g(i, j);
  return g;
}

std::vector<double> hankel_average_serial(const Eigen::MatrixXd& scaled_left,
                                          const Eigen::MatrixXd& right) {
  const Eigen::Index n = scaled_left.rows() + right.rows() - 1;
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k)
    out[static_cast<std::size_t>(k)] = hankel_entry(scaled_left, right, k);
  return out;
}

std::vector<double> hankel_average_omp(const Eigen::MatrixXd& scaled_left,
                                       const Eigen::MatrixXd& right) {
  const Eigen::Index n = scaled_left.rows() + right.rows() - 1;
  std::vector<double> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index k = 0; k < n; ++k)
    out[static_cast<std::size_t>(k)] = hankel_entry(scaled_left, right, k);
  return out;
}

}  // namespace blhybrid::kernels
