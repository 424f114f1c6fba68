#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace blhybrid::bl {

inline constexpr double kDefaultRiskAversion = 2.5;
inline constexpr double kDefaultTau = 1.0 / 500.0;
inline constexpr std::size_t kDefaultLookback = 500;

struct MarketInputs {
  std::vector<std::string> tickers;
  Eigen::MatrixXd covariance;     // daily excess-return covariance
  Eigen::VectorXd market_weights;
  double risk_aversion = kDefaultRiskAversion;
  double tau = kDefaultTau;
  double rf_daily = 0.0;

  void validate() const;
};

/// Absolute views: every row of `pick` selects exactly one asset.
struct ViewSet {
  Eigen::MatrixXd pick;         // k x N
  Eigen::VectorXd returns;      // k
  Eigen::VectorXd uncertainty;  // diagonal of Omega, k

  Eigen::Index size() const noexcept { return returns.size(); }
};

struct View {
  std::string ticker;
  double expected_return = 0.0;
};

struct PosteriorEstimate {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct CovarianceEstimate {
  Eigen::MatrixXd covariance;
  bool degenerate = false;  // some asset has zero variance
};

/// Pi = lambda * Sigma * w_mkt.
Eigen::VectorXd implied_returns(const MarketInputs& inputs);

/// One row per view; Omega_jj = tau * Sigma_{i_j, i_j}. Duplicates are kept.
ViewSet build_views(const std::vector<View>& views, const std::vector<std::string>& universe,
                    const Eigen::MatrixXd& covariance, double tau);

/// Posterior mean and covariance of the Bayesian blend of prior and views.
/// Solved through SPD factorizations; no matrix is inverted explicitly.
PosteriorEstimate posterior(const Eigen::VectorXd& prior, const Eigen::MatrixXd& covariance,
                            const ViewSet& views, double tau);

/// (lambda Sigma_post)^{-1} mu_post, normalized to sum to one.
Eigen::VectorXd optimal_weights(const PosteriorEstimate& post, double risk_aversion);

/// Unbiased sample covariance of a T x N return matrix.
CovarianceEstimate sample_covariance(const Eigen::MatrixXd& returns);

}  // namespace blhybrid::bl
