#include <doctest.h>

#include "blhybrid/kernels.hpp"
#include "helpers.hpp"

using namespace blhybrid;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  const auto v = testutil::gaussian(static_cast<std::size_t>(r * c), seed);
  Eigen::MatrixXd m(r, c);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

}  // namespace

TEST_CASE("gram_rows") {
  for (auto [r, c] : {std::pair{1, 1}, {5, 3}, {37, 120}, {64, 64}}) {
    const auto a = random_matrix(r, c, static_cast<std::uint64_t>(r * 1000 + c));
    const auto s = kernels::gram_rows_serial(a);
    const auto p = kernels::gram_rows_omp(a);
    CHECK(s == p);
    CHECK((s - a * a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff()));
    CHECK(s == s.transpose());
  }
}

TEST_CASE("hankel_average") {
  for (auto [l, k, r] : {std::tuple{3, 5, 2}, {10, 10, 4}, {40, 161, 7}, {1, 4, 1}}) {
    const auto left = random_matrix(l, r, 1);
    const auto right = random_matrix(k, r, 2);
    const auto s = kernels::hankel_average_serial(left, right);
    CHECK(s == kernels::hankel_average_omp(left, right));
    REQUIRE(s.size() == static_cast<std::size_t>(l + k - 1));
    // direct anti-diagonal averaging of the formed matrix
    const Eigen::MatrixXd full = left * right.transpose();
    for (Eigen::Index n = 0; n < l + k - 1; ++n) {
      double sum = 0;
      int count = 0;
      for (Eigen::Index i = 0; i < l; ++i) {
        const Eigen::Index j = n - i;
        if (j < 0 || j >= k) continue;
        sum += full(i, j);
        ++count;
      }
      CHECK(std::abs(s[static_cast<std::size_t>(n)] - sum / count) <= 1e-12);
    }
  }
}
