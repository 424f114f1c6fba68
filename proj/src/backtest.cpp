#include "blhybrid/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "blhybrid/blacklitterman.hpp"
#include "blhybrid/error.hpp"

namespace blhybrid::backtest {

namespace {

double mean_of(const std::vector<double>& x) {
  return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_std(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

bool negligible_spread(double sd, double mean) {
  return sd <= 1e-14 * std::max(1.0, std::abs(mean));
}

Eigen::VectorXd checked_weights(const WeightSource& source, std::size_t day, std::size_t n) {
  Eigen::VectorXd w = source(day);
  if (static_cast<std::size_t>(w.size()) != n)
    throw Error(Errc::DimensionMismatch, "weight source returned " + std::to_string(w.size()) +
                                             " weights for " + std::to_string(n) + " assets");
  if (!w.allFinite()) throw Error(Errc::DegenerateWeights, "non-finite weights");
  return w;
}

void fill_diversification(BacktestReport& r) {
  std::vector<double> h, counts;
  for (const auto& w : r.weight_history) {
    h.push_back(hhi(w));
    counts.push_back(static_cast<double>((w.array().abs() > kHoldingThreshold).count()));
  }
  r.mean_hhi = mean_of(h);
  r.std_hhi = sample_std(h);
  r.mean_stock_count = mean_of(counts);
  r.std_stock_count = sample_std(counts);
}

void fill_performance(BacktestReport& r, double periods_per_year, double rf_per_period) {
  const double m = mean_of(r.returns);
  const double sd = sample_std(r.returns);
  r.annual_return = std::pow(1.0 + m, periods_per_year) - 1.0;
  r.annual_volatility = sd * std::sqrt(periods_per_year);
  double wealth = 1.0;
  for (double x : r.returns) wealth *= 1.0 + x;
  r.final_wealth = wealth;
  r.cumulative_return = wealth - 1.0;
  r.zero_volatility = r.returns.size() < 2 || negligible_spread(sd, m);
  r.sharpe = r.zero_volatility ? 0.0 : sharpe(r.returns, rf_per_period, periods_per_year);
}

}  // namespace

BacktestReport rolling_scheme(const PricePanel& panel, const WeightSource& source,
                              std::size_t holding, double rf_daily, const std::string& strategy) {
  const std::size_t days = panel.return_days();
  if (holding == 0 || days < holding)
    throw Error(Errc::InsufficientTestWindow, std::to_string(days) + " return days for holding " +
                                                  std::to_string(holding));
  BacktestReport r;
  r.strategy = strategy;
  r.holding_period = holding;
  const auto h = static_cast<Eigen::Index>(holding);
  for (std::size_t s = 0; s + holding <= days; ++s) {
    const auto w = checked_weights(source, s, panel.assets());
    const auto row = static_cast<Eigen::Index>(s);
    const Eigen::VectorXd growth =
        (panel.prices.row(row + h).array() / panel.prices.row(row).array()).transpose() - 1.0;
    r.returns.push_back(w.dot(growth));
    r.run_start.push_back(s);
    r.weight_history.push_back(w);
    r.weight_days.push_back(s);
  }
  const double hd = static_cast<double>(holding);
  fill_performance(r, kTradingDays / hd, std::pow(1.0 + rf_daily, hd) - 1.0);
  fill_diversification(r);
  return r;
}

BacktestReport rebalance_run(const PricePanel& panel, const WeightSource& source,
                             std::size_t period, double cost_rate, double rf_daily,
                             const std::string& strategy) {
  const std::size_t days = panel.return_days();
  if (days == 0) throw Error(Errc::InsufficientTestWindow, "no return days");
  if (period == 0) throw Error(Errc::InvalidArgument, "rebalance period must be positive");
  if (!(cost_rate >= 0.0)) throw Error(Errc::InvalidArgument, "cost_rate must be >= 0");

  BacktestReport r;
  r.strategy = strategy;
  r.holding_period = period;
  Eigen::VectorXd held;
  for (std::size_t d = 0; d < days; ++d) {
    double cost = 0.0;
    if (d == 0 || d % period == 0) {
      const auto target = checked_weights(source, d, panel.assets());
      if (d > 0) {
        cost = cost_rate * (target - held).cwiseAbs().sum();
        r.cost_paid += cost;
      }
      held = target;
      r.weight_history.push_back(target);
      r.weight_days.push_back(d);
    }
    const auto row = static_cast<Eigen::Index>(d);
    const Eigen::VectorXd growth =
        (panel.prices.row(row + 1).array() / panel.prices.row(row).array()).transpose() - 1.0;
    const double gross = held.dot(growth);
    r.returns.push_back((1.0 - cost) * (1.0 + gross) - 1.0);
    r.run_start.push_back(d);
    if (1.0 + gross != 0.0)
      held = (held.array() * (1.0 + growth.array())).matrix() / (1.0 + gross);
  }
  fill_performance(r, kTradingDays, rf_daily);
  fill_diversification(r);
  return r;
}

PortfolioWeights strategy_equal_weight(const std::vector<std::string>& universe) {
  if (universe.empty()) throw Error(Errc::EmptyUniverse, "equal weight");
  const auto n = static_cast<Eigen::Index>(universe.size());
  return {{}, universe, Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n))};
}

PortfolioWeights strategy_market_weight(const std::vector<std::string>& universe,
                                        const std::map<std::string, double>& market_caps) {
  if (universe.empty()) throw Error(Errc::EmptyUniverse, "market weight");
  Eigen::VectorXd w(static_cast<Eigen::Index>(universe.size()));
  for (std::size_t i = 0; i < universe.size(); ++i) {
    auto it = market_caps.find(universe[i]);
    if (it == market_caps.end()) throw Error(Errc::MissingCap, universe[i]);
    if (!(it->second > 0.0)) throw Error(Errc::InvalidArgument, "cap must be positive");
    w(static_cast<Eigen::Index>(i)) = it->second;
  }
  return {{}, universe, w / w.sum()};
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cumsum += u[static_cast<std::size_t>(j)];
    const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - t > 0.0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

double mean_variance_objective(const Eigen::VectorXd& w, const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& covariance, double risk_aversion) {
  return mean.dot(w) - 0.5 * risk_aversion * w.dot(covariance * w);
}

Eigen::VectorXd mean_variance_weights(const Eigen::VectorXd& mean,
                                      const Eigen::MatrixXd& covariance, double risk_aversion,
                                      const MeanVarianceOptions& options) {
  const Eigen::Index n = mean.size();
  if (n == 0) throw Error(Errc::EmptyUniverse, "mean variance");
  if (covariance.rows() != n || covariance.cols() != n)
    throw Error(Errc::DimensionMismatch, "covariance vs mean");
  if (!(risk_aversion > 0)) throw Error(Errc::InvalidArgument, "lambda must be positive");

  Eigen::MatrixXd cov = covariance;
  const double scale = std::max(cov.diagonal().mean(), 1e-300);
  cov.diagonal().array() += options.ridge * scale;
  const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov, Eigen::EigenvaluesOnly)
                         .eigenvalues()
                         .maxCoeff();
  const double lipschitz = risk_aversion * std::max(top, 1e-300);
  const double step = 1.0 / lipschitz;

  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const Eigen::VectorXd grad = mean - risk_aversion * (cov * w);
    Eigen::VectorXd next = project_to_simplex(w + step * grad);
    const double moved = (next - w).cwiseAbs().maxCoeff();
    w = std::move(next);
    if (moved <= options.tolerance) return w;
  }
  throw Error(Errc::NoConvergence, "projected gradient ascent hit the iteration cap");
}

PortfolioWeights strategy_mean_variance(const std::vector<std::string>& universe,
                                        const Eigen::MatrixXd& history_returns,
                                        double risk_aversion, const MeanVarianceOptions& options) {
  if (universe.empty()) throw Error(Errc::EmptyUniverse, "mean variance");
  if (static_cast<std::size_t>(history_returns.cols()) != universe.size())
    throw Error(Errc::DimensionMismatch, "history columns vs universe");
  const auto cov = bl::sample_covariance(history_returns).covariance;
  const Eigen::VectorXd mu = history_returns.colwise().mean().transpose();
  return {{}, universe, mean_variance_weights(mu, cov, risk_aversion, options)};
}

double sharpe(const std::vector<double>& period_returns, double rf_per_period,
              double periods_per_year) {
  if (period_returns.size() < 2) throw Error(Errc::InvalidArgument, "sharpe needs >= 2 returns");
  std::vector<double> excess(period_returns.size());
  for (std::size_t i = 0; i < excess.size(); ++i) excess[i] = period_returns[i] - rf_per_period;
  const double m = mean_of(excess);
  const double sd = sample_std(excess);
  if (negligible_spread(sd, m)) {
    if (std::all_of(excess.begin(), excess.end(), [](double e) { return e == 0.0; })) return 0.0;
    throw Error(Errc::ZeroVolatility, "constant returns");
  }
  return m / sd * std::sqrt(periods_per_year);
}

double hhi(const Eigen::VectorXd& weights) {
  // Extended accumulation keeps e.g. 20 * 0.05^2 at exactly 0.05.
  long double s = 0.0L;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    const long double w = weights(i);
    s += w * w;
  }
  return static_cast<double>(s);
}

ExtremeTally tally_extremes(const std::map<std::string, BacktestReport>& reports) {
  ExtremeTally tally;
  if (reports.empty()) return tally;
  const auto& first = reports.begin()->second;
  for (const auto& [name, rep] : reports) {
    if (rep.returns.size() != first.returns.size() || rep.run_start != first.run_start)
      throw Error(Errc::MisalignedRuns, name);
    tally.highest[name] = 0;
    tally.lowest[name] = 0;
  }
  tally.runs = first.returns.size();
  for (std::size_t i = 0; i < tally.runs; ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& [name, rep] : reports) {
      hi = std::max(hi, rep.returns[i]);
      lo = std::min(lo, rep.returns[i]);
    }
    for (const auto& [name, rep] : reports) {
      if (rep.returns[i] == hi) ++tally.highest[name];
      if (rep.returns[i] == lo) ++tally.lowest[name];
    }
  }
  return tally;
}

}  // namespace blhybrid::backtest
