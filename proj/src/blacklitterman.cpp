#include "blhybrid/blacklitterman.hpp"

#include <algorithm>
#include <cmath>

#include "blhybrid/error.hpp"

namespace blhybrid::bl {

namespace {

void require_square(const Eigen::MatrixXd& m, Eigen::Index n, const char* what) {
  if (m.rows() != n || m.cols() != n)
    throw Error(Errc::DimensionMismatch, std::string(what) + " must be " + std::to_string(n) +
                                             "x" + std::to_string(n));
}

Eigen::LLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw Error(Errc::SingularMatrix, what);
  // LLT only checks for a positive pivot; reject numerically singular input.
  const auto diag = llt.matrixLLT().diagonal();
  if (diag.minCoeff() <= 1e-12 * std::max(1e-300, diag.maxCoeff()))
    throw Error(Errc::SingularMatrix, what);
  return llt;
}

}  // namespace

void MarketInputs::validate() const {
  const auto n = static_cast<Eigen::Index>(market_weights.size());
  require_square(covariance, n, "covariance");
  if (!tickers.empty() && static_cast<Eigen::Index>(tickers.size()) != n)
    throw Error(Errc::DimensionMismatch, "tickers vs weights");
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw Error(Errc::InvalidArgument, "covariance is not symmetric");
  if ((market_weights.array() < 0).any() || std::abs(market_weights.sum() - 1.0) > 1e-10)
    throw Error(Errc::InvalidArgument, "market weights must be nonnegative and sum to 1");
  if (!(risk_aversion > 0) || !(tau > 0))
    throw Error(Errc::InvalidArgument, "lambda and tau must be positive");
}

Eigen::VectorXd implied_returns(const MarketInputs& inputs) {
  if (inputs.covariance.rows() != inputs.market_weights.size() ||
      inputs.covariance.cols() != inputs.market_weights.size())
    throw Error(Errc::DimensionMismatch, "covariance vs market weights");
  return inputs.risk_aversion * (inputs.covariance * inputs.market_weights);
}

ViewSet build_views(const std::vector<View>& views, const std::vector<std::string>& universe,
                    const Eigen::MatrixXd& covariance, double tau) {
  const auto n = static_cast<Eigen::Index>(universe.size());
  require_square(covariance, n, "covariance");
  const auto k = static_cast<Eigen::Index>(views.size());
  ViewSet out;
  out.pick = Eigen::MatrixXd::Zero(k, n);
  out.returns.resize(k);
  out.uncertainty.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& v = views[static_cast<std::size_t>(j)];
    auto it = std::find(universe.begin(), universe.end(), v.ticker);
    if (it == universe.end()) throw Error(Errc::UnknownTicker, v.ticker);
    const auto i = static_cast<Eigen::Index>(it - universe.begin());
    out.pick(j, i) = 1.0;
    out.returns(j) = v.expected_return;
    out.uncertainty(j) = tau * covariance(i, i);
  }
  return out;
}

PosteriorEstimate posterior(const Eigen::VectorXd& prior, const Eigen::MatrixXd& covariance,
                            const ViewSet& views, double tau) {
  const Eigen::Index n = prior.size();
  require_square(covariance, n, "covariance");
  const Eigen::Index k = views.size();
  if (views.pick.rows() != k || (k > 0 && views.pick.cols() != n) ||
      views.uncertainty.size() != k)
    throw Error(Errc::DimensionMismatch, "view set shape");
  if (!(tau > 0)) throw Error(Errc::InvalidArgument, "tau must be positive");
  if ((views.uncertainty.array() <= 0).any())
    throw Error(Errc::SingularMatrix, "Omega must have a positive diagonal");

  const Eigen::MatrixXd scaled = tau * covariance;
  factor_spd(scaled, "tau * Sigma is not invertible");

  // ((tau S)^-1 + P' O^-1 P)^-1 = tau S - tau S P' (P tau S P' + O)^-1 P tau S
  // and the mean becomes Pi + tau S P' (P tau S P' + O)^-1 (Q - P Pi).
  PosteriorEstimate out;
  if (k == 0) {
    out.mean = prior;
    out.covariance = covariance + scaled;
    return out;
  }
  const Eigen::MatrixXd sp = scaled * views.pick.transpose();  // N x k
  Eigen::MatrixXd middle = views.pick * sp;
  middle.diagonal() += views.uncertainty;
  const auto llt = factor_spd(middle, "P tau Sigma P' + Omega is singular");
  out.mean = prior + sp * llt.solve(views.returns - views.pick * prior);
  Eigen::MatrixXd shrink = scaled - sp * llt.solve(sp.transpose());
  out.covariance = covariance + 0.5 * (shrink + shrink.transpose());
  return out;
}

Eigen::VectorXd optimal_weights(const PosteriorEstimate& post, double risk_aversion) {
  const Eigen::Index n = post.mean.size();
  require_square(post.covariance, n, "posterior covariance");
  if (!(risk_aversion > 0)) throw Error(Errc::InvalidArgument, "lambda must be positive");
  const auto llt = factor_spd(risk_aversion * post.covariance, "posterior covariance singular");
  Eigen::VectorXd raw = llt.solve(post.mean);
  const double total = raw.sum();
  if (!(std::abs(total) >= 1e-8)) throw Error(Errc::DegenerateWeights, "weights sum to ~0");
  return raw / total;
}

CovarianceEstimate sample_covariance(const Eigen::MatrixXd& returns) {
  const Eigen::Index t = returns.rows(), n = returns.cols();
  if (t < n + 1 || t < 2)
    throw Error(Errc::TooFewObservations,
                std::to_string(t) + " observations for " + std::to_string(n) + " assets");
  const Eigen::RowVectorXd mean = returns.colwise().mean();
  const Eigen::MatrixXd centered = returns.rowwise() - mean;
  CovarianceEstimate out;
  out.covariance = (centered.transpose() * centered) / static_cast<double>(t - 1);
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  out.degenerate = (out.covariance.diagonal().array() <= 0.0).any();
  return out;
}

}  // namespace blhybrid::bl
