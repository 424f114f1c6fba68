#include "blhybrid/ssa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "blhybrid/error.hpp"
#include "blhybrid/kernels.hpp"

namespace blhybrid::ssa {

TrajectoryMatrix build_trajectory(std::span<const double> series, std::size_t window) {
  const std::size_t n = series.size();
  if (window < 2 || window > n / 2)
    throw Error(Errc::WindowOutOfRange,
                "window " + std::to_string(window) + " for length " + std::to_string(n));
  const std::size_t k = n - window + 1;
  TrajectoryMatrix t;
  t.window = window;
  t.lags = k;
  t.values.resize(static_cast<Eigen::Index>(window), static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < window; ++i)
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = series[i + j];
  return t;
}

namespace detail {

SymmetricEigen jacobi_eigen(Eigen::MatrixXd a, int max_sweeps, double tol) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = a.norm();
  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index q = 0; q < n; ++q)
      for (Eigen::Index p = 0; p < q; ++p) s += 2.0 * a(p, q) * a(p, q);
    return std::sqrt(s);
  };

  auto sweep_once = [&] {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::hypot(1.0, theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  };

  int sweep = 0;
  while (scale > 0.0 && off_norm() > tol * scale) {
    if (sweep == max_sweeps)
      throw Error(Errc::NoConvergence, "Jacobi did not converge in " +
                                           std::to_string(max_sweeps) + " sweeps");
    ++sweep;
    sweep_once();
  }
  // Convergence is quadratic; one more sweep sharpens the small eigenpairs
  // that the projected singular vectors depend on.
  if (sweep > 0) sweep_once();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  out.sweeps = sweep;
  return out;
}

}  // namespace detail

SvdResult svd(const Eigen::MatrixXd& x, Exec exec) {
  if (!x.allFinite()) throw Error(Errc::InvalidArgument, "svd input is not finite");
  // Eigenvectors of the smaller Gram matrix give one side; the other side is
  // recovered by projection and normalization.
  const bool wide = x.rows() <= x.cols();
  const Eigen::MatrixXd gram = wide ? kernels::gram_rows(x, exec)
                                    : kernels::gram_rows(x.transpose(), exec);
  const auto eig = detail::jacobi_eigen(gram);

  const Eigen::Index m = eig.vectors.cols();
  Eigen::MatrixXd small_side = eig.vectors;
  Eigen::MatrixXd other_side = wide ? Eigen::MatrixXd(x.transpose() * small_side)
                                    : Eigen::MatrixXd(x * small_side);
  Eigen::VectorXd sigma(m);
  for (Eigen::Index j = 0; j < m; ++j) sigma(j) = other_side.col(j).norm();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return sigma(a) > sigma(b); });

  const double top = m > 0 ? sigma(order.front()) : 0.0;
  std::vector<Eigen::Index> kept;
  for (auto j : order)
    if (top > 0.0 && sigma(j) > 1e-12 * top) kept.push_back(j);

  const auto r = static_cast<Eigen::Index>(kept.size());
  SvdResult out;
  out.singular_values.resize(r);
  out.left.resize(x.rows(), r);
  out.right.resize(x.cols(), r);
  for (Eigen::Index c = 0; c < r; ++c) {
    const auto j = kept[static_cast<std::size_t>(c)];
    Eigen::VectorXd u = wide ? Eigen::VectorXd(small_side.col(j))
                             : Eigen::VectorXd(other_side.col(j) / sigma(j));
    Eigen::VectorXd v = wide ? Eigen::VectorXd(other_side.col(j) / sigma(j))
                             : Eigen::VectorXd(small_side.col(j));
    Eigen::Index arg = 0;
    u.cwiseAbs().maxCoeff(&arg);
    if (u(arg) < 0) {
      u = -u;
      v = -v;
    }
    out.singular_values(c) = sigma(j);
    out.left.col(c) = u;
    out.right.col(c) = v;
  }
  return out;
}

std::vector<Eigen::MatrixXd> group_components(const SvdResult& svd, const Grouping& grouping) {
  const auto r = static_cast<std::size_t>(svd.rank());
  std::vector<bool> used(r, false);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(grouping.size());
  for (const auto& group : grouping) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(svd.left.rows(), svd.right.rows());
    for (auto j : group) {
      if (j >= r) throw Error(Errc::IndexOutOfRank, "component " + std::to_string(j));
      if (used[j]) throw Error(Errc::InvalidArgument, "groups overlap at " + std::to_string(j));
      used[j] = true;
      const auto c = static_cast<Eigen::Index>(j);
      m.noalias() += svd.singular_values(c) * svd.left.col(c) * svd.right.col(c).transpose();
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<double> diagonal_average(const Eigen::MatrixXd& m) {
  const Eigen::Index rows = m.rows(), cols = m.cols();
  if (rows == 0 || cols == 0) return {};
  std::vector<double> sum(static_cast<std::size_t>(rows + cols - 1), 0.0);
  std::vector<double> count(sum.size(), 0.0);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) {
      sum[static_cast<std::size_t>(i + j)] += m(i, j);
      count[static_cast<std::size_t>(i + j)] += 1.0;
    }
  for (std::size_t k = 0; k < sum.size(); ++k) sum[k] /= count[k];
  return sum;
}

std::vector<double> reconstruct(const SvdResult& svd, std::span<const std::size_t> components,
                                Exec exec) {
  const auto r = static_cast<std::size_t>(svd.rank());
  const auto n = static_cast<Eigen::Index>(components.size());
  Eigen::MatrixXd scaled_left(svd.left.rows(), n);
  Eigen::MatrixXd right(svd.right.rows(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto j = components[static_cast<std::size_t>(c)];
    if (j >= r) throw Error(Errc::IndexOutOfRank, "component " + std::to_string(j));
    const auto jj = static_cast<Eigen::Index>(j);
    scaled_left.col(c) = svd.singular_values(jj) * svd.left.col(jj);
    right.col(c) = svd.right.col(jj);
  }
  return kernels::hankel_average(scaled_left, right, exec);
}

std::vector<double> denoise(std::span<const double> series, std::size_t window,
                            double energy_keep, Exec exec) {
  if (!(energy_keep > 0.0 && energy_keep <= 1.0))
    throw Error(Errc::InvalidArgument, "energy_keep must lie in (0, 1]");
  for (double v : series)
    if (!std::isfinite(v)) throw Error(Errc::InvalidArgument, "series is not finite");
  const auto traj = build_trajectory(series, window);
  const auto dec = svd(traj, exec);
  if (dec.rank() == 0) return std::vector<double>(series.size(), 0.0);

  const Eigen::VectorXd energy = dec.singular_values.array().square();
  const double total = energy.sum();
  std::vector<std::size_t> keep;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < energy.size(); ++j) {
    keep.push_back(static_cast<std::size_t>(j));
    acc += energy(j);
    if (energy_keep < 1.0 && acc >= energy_keep * total) break;
  }
  return reconstruct(dec, keep, exec);
}

std::size_t default_window(std::size_t series_length) {
  std::size_t w = std::min<std::size_t>(series_length / 4, 250);
  return std::clamp<std::size_t>(w, 2, std::max<std::size_t>(2, series_length / 2));
}

}  // namespace blhybrid::ssa
