#include <doctest.h>

#include "blhybrid/blacklitterman.hpp"
#include "helpers.hpp"

using namespace blhybrid;
using testutil::error_of;

namespace {

Eigen::MatrixXd random_spd(Eigen::Index n, std::mt19937_64& rng, double scale = 1e-4) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n + 5);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  Eigen::MatrixXd s = a * a.transpose() / static_cast<double>(n + 5);
  s.diagonal().array() += 0.1;
  return scale * s;
}

Eigen::VectorXd random_weights(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = u(rng);
  return w / w.sum();
}

// The blend written out literally, with general LU inverses.
bl::PosteriorEstimate literal_posterior(const Eigen::VectorXd& pi, const Eigen::MatrixXd& s,
                                        const bl::ViewSet& v, double tau) {
  const Eigen::MatrixXd prior_precision = (tau * s).fullPivLu().inverse();
  Eigen::MatrixXd precision = prior_precision;
  Eigen::VectorXd rhs = prior_precision * pi;
  if (v.size() > 0) {
    const Eigen::MatrixXd omega_inv = v.uncertainty.cwiseInverse().asDiagonal();
    precision += v.pick.transpose() * omega_inv * v.pick;
    rhs += v.pick.transpose() * omega_inv * v.returns;
  }
  const Eigen::MatrixXd m = precision.fullPivLu().inverse();
  return {m * rhs, s + m};
}

Eigen::VectorXd literal_weights(const bl::PosteriorEstimate& p, double lambda) {
  Eigen::VectorXd raw = (lambda * p.covariance).partialPivLu().solve(p.mean);
  return raw / raw.sum();
}

double min_eigen(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  return es.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("implied_returns") {
  bl::MarketInputs in;
  in.covariance = Eigen::MatrixXd::Identity(2, 2) * 0.01;
  in.market_weights = Eigen::Vector2d(0.5, 0.5);
  in.risk_aversion = 2.5;
  const auto pi = bl::implied_returns(in);
  CHECK(pi(0) == doctest::Approx(0.0125));
  CHECK(pi(1) == doctest::Approx(0.0125));

  std::mt19937_64 rng(1);
  in.covariance = random_spd(3, rng);
  in.market_weights = Eigen::Vector3d(1, 0, 0);
  CHECK((bl::implied_returns(in) - 2.5 * in.covariance.col(0)).cwiseAbs().maxCoeff() == 0.0);
  in.risk_aversion = 0.0;
  CHECK(bl::implied_returns(in).cwiseAbs().maxCoeff() == 0.0);
  in.market_weights = Eigen::Vector2d(0.5, 0.5);
  CHECK(error_of([&] { bl::implied_returns(in); }) == Errc::DimensionMismatch);
}

TEST_CASE("market input validation") {
  bl::MarketInputs in;
  in.covariance = Eigen::MatrixXd::Identity(2, 2);
  in.market_weights = Eigen::Vector2d(0.5, 0.5);
  CHECK_NOTHROW(in.validate());
  in.market_weights = Eigen::Vector2d(0.7, 0.5);
  CHECK(error_of([&] { in.validate(); }) == Errc::InvalidArgument);
  in.market_weights = Eigen::Vector2d(1.5, -0.5);
  CHECK(error_of([&] { in.validate(); }) == Errc::InvalidArgument);
  in.market_weights = Eigen::Vector2d(0.5, 0.5);
  in.covariance(0, 1) = 0.3;
  CHECK(error_of([&] { in.validate(); }) == Errc::InvalidArgument);
  in.covariance = Eigen::MatrixXd::Identity(3, 3);
  CHECK(error_of([&] { in.validate(); }) == Errc::DimensionMismatch);
}

TEST_CASE("build_views") {
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity() * 0.01;
  s(1, 1) = 0.04;
  const std::vector<std::string> universe{"A", "B", "C"};
  auto v = bl::build_views({{"B", 0.003}}, universe, s, 0.002);
  REQUIRE(v.size() == 1);
  CHECK(v.pick.row(0) == Eigen::RowVector3d(0, 1, 0));
  CHECK(v.uncertainty(0) == doctest::Approx(8e-5));
  CHECK(v.returns(0) == 0.003);

  CHECK(bl::build_views({}, universe, s, 0.002).size() == 0);
  v = bl::build_views({{"A", 0.1}, {"A", 0.2}}, universe, s, 0.002);
  CHECK(v.size() == 2);
  CHECK(v.pick.row(0) == v.pick.row(1));
  CHECK(error_of([&] { bl::build_views({{"Z", 0.1}}, universe, s, 0.002); }) == Errc::UnknownTicker);
}

TEST_CASE("posterior fixed points") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd s = random_spd(4, rng);
  bl::MarketInputs in{{}, s, random_weights(4, rng)};
  const auto pi = bl::implied_returns(in);
  const double tau = 0.002;

  const auto none = bl::posterior(pi, s, bl::build_views({}, {"a", "b", "c", "d"}, s, tau), tau);
  CHECK((none.mean - pi).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((none.covariance - (1 + tau) * s).cwiseAbs().maxCoeff() <= 1e-15);

  bl::ViewSet agree;
  agree.pick = Eigen::MatrixXd::Identity(4, 4).topRows(3);
  agree.returns = agree.pick * pi;
  agree.uncertainty = (tau * s.diagonal()).head(3);
  const auto post = bl::posterior(pi, s, agree, tau);
  CHECK((post.mean - pi).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(min_eigen(post.covariance - s) >= -1e-15);
}

TEST_CASE("posterior matches the literal blend on random instances") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dim(1, 20);
  std::normal_distribution<double> g(0.0, 0.002);
  const double tau = 0.002;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = dim(rng);
    const Eigen::MatrixXd s = random_spd(n, rng);
    bl::MarketInputs in{{}, s, random_weights(n, rng)};
    const auto pi = bl::implied_returns(in);
    std::uniform_int_distribution<Eigen::Index> asset(0, n - 1), count(0, n);
    std::vector<std::string> universe;
    for (Eigen::Index i = 0; i < n; ++i) universe.push_back("T" + std::to_string(i));
    std::vector<bl::View> views;
    const auto k = count(rng);
    for (Eigen::Index j = 0; j < k; ++j) views.push_back({universe[static_cast<std::size_t>(asset(rng))], g(rng)});
    const auto v = bl::build_views(views, universe, s, tau);

    const auto fast = bl::posterior(pi, s, v, tau);
    const auto slow = literal_posterior(pi, s, v, tau);
    CHECK((fast.mean - slow.mean).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((fast.covariance - slow.covariance).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((fast.covariance - fast.covariance.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(min_eigen(fast.covariance - s) >= -1e-14);

    const auto w = bl::optimal_weights(fast, 2.5);
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
    const auto lw = literal_weights(slow, 2.5);
    CHECK((w - lw).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, lw.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("reverse then forward optimization recovers market weights") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 2 + trial % 19;
    const Eigen::MatrixXd s = random_spd(n, rng);
    bl::MarketInputs in{{}, s, random_weights(n, rng)};
    const auto pi = bl::implied_returns(in);
    const auto w = bl::optimal_weights({pi, s}, in.risk_aversion);
    CHECK((w - in.market_weights).cwiseAbs().maxCoeff() <= 1e-8);
    const auto prior_only = bl::posterior(pi, s, bl::ViewSet{Eigen::MatrixXd(0, n), {}, {}}, 0.002);
    CHECK((bl::optimal_weights(prior_only, 2.5) - in.market_weights).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("two-asset optimistic view against a dense solve") {
  Eigen::Matrix2d s;
  s << 0.0004, 0.0001, 0.0001, 0.0009;
  const Eigen::Vector2d w(0.6, 0.4);
  const Eigen::Vector2d pi = 2.5 * s * w;
  const double tau = 0.002;
  const auto v = bl::build_views({{"B", pi(1) + 0.01}}, {"A", "B"}, s, tau);
  const auto post = bl::posterior(pi, s, v, tau);
  const auto oracle = literal_posterior(pi, s, v, tau);
  CHECK((post.mean - oracle.mean).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(post.mean(1) > pi(1));
  CHECK(post.mean(1) < pi(1) + 0.01);
}

TEST_CASE("interpolation and vanishing confidence") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd s = random_spd(3, rng);
  const Eigen::Vector3d w(0.5, 0.3, 0.2);
  const Eigen::VectorXd pi = 2.5 * s * w;
  const double tau = 0.002;
  bl::ViewSet v;
  v.pick = Eigen::RowVector3d(0, 0, 1);
  v.returns = Eigen::VectorXd::Constant(1, pi(2) + 0.02);
  for (double omega : {1e-9, 1e-6, 1e-4, 1e-2}) {
    v.uncertainty = Eigen::VectorXd::Constant(1, omega);
    const auto post = bl::posterior(pi, s, v, tau);
    CHECK(post.mean(2) > pi(2));
    CHECK(post.mean(2) < v.returns(0));
  }
  v.uncertainty = Eigen::VectorXd::Constant(1, 1e12);
  const auto post = bl::posterior(pi, s, v, tau);
  const auto prior_only = bl::posterior(pi, s, bl::ViewSet{Eigen::MatrixXd(0, 3), {}, {}}, tau);
  CHECK((post.mean - prior_only.mean).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((post.covariance - prior_only.covariance).cwiseAbs().maxCoeff() <= 1e-6);

  v.uncertainty = Eigen::VectorXd::Constant(1, 0.0);
  CHECK(error_of([&] { bl::posterior(pi, s, v, tau); }) == Errc::SingularMatrix);
  CHECK(error_of([&] { bl::posterior(pi, Eigen::Matrix3d::Zero(), bl::ViewSet{Eigen::MatrixXd(0, 3), {}, {}}, tau); }) ==
        Errc::SingularMatrix);
}

TEST_CASE("optimal_weights") {
  bl::PosteriorEstimate p{Eigen::VectorXd::Constant(4, 0.001), Eigen::MatrixXd::Identity(4, 4) * 0.02};
  const auto w = bl::optimal_weights(p, 2.5);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(w(i) == doctest::Approx(0.25));

  std::mt19937_64 rng(6);
  const Eigen::MatrixXd s = random_spd(3, rng);
  const Eigen::Vector3d wm(0.4, 0.35, 0.25);
  const Eigen::VectorXd pi = 2.5 * s * wm;
  const auto v = bl::build_views({{"C", pi(2) + 0.01}}, {"A", "B", "C"}, s, 0.002);
  const auto tilted = bl::optimal_weights(bl::posterior(pi, s, v, 0.002), 2.5);
  CHECK(tilted(2) > wm(2));

  bl::PosteriorEstimate zero{Eigen::Vector2d(0.001, -0.001), Eigen::Matrix2d::Identity()};
  CHECK(error_of([&] { bl::optimal_weights(zero, 2.5); }) == Errc::DegenerateWeights);
}

TEST_CASE("sample_covariance") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 0.01);
  Eigen::MatrixXd r(600, 3);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = g(rng);
  const auto c = bl::sample_covariance(r);
  CHECK_FALSE(c.degenerate);
  // second routine: two-pass sums of products, element by element
  for (Eigen::Index a = 0; a < 3; ++a)
    for (Eigen::Index b = 0; b < 3; ++b) {
      double ma = 0, mb = 0;
      for (Eigen::Index t = 0; t < 600; ++t) {
        ma += r(t, a);
        mb += r(t, b);
      }
      ma /= 600;
      mb /= 600;
      double s = 0;
      for (Eigen::Index t = 0; t < 600; ++t) s += (r(t, a) - ma) * (r(t, b) - mb);
      CHECK(std::abs(c.covariance(a, b) - s / 599) <= 1e-12);
    }
  CHECK(min_eigen(c.covariance) >= 0.0);

  Eigen::MatrixXd dup(50, 2);
  for (Eigen::Index t = 0; t < 50; ++t) dup(t, 0) = dup(t, 1) = g(rng);
  const auto d = bl::sample_covariance(dup);
  CHECK(d.covariance(0, 1) == doctest::Approx(d.covariance(0, 0)).epsilon(1e-14));

  const auto flat = bl::sample_covariance(Eigen::MatrixXd::Constant(10, 1, 0.01));
  CHECK(flat.degenerate);
  CHECK(flat.covariance(0, 0) == 0.0);
  CHECK(error_of([] { bl::sample_covariance(Eigen::MatrixXd::Zero(3, 3)); }) ==
        Errc::TooFewObservations);
}
