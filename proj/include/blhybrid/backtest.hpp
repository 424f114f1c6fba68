#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "blhybrid/ingest.hpp"

namespace blhybrid::backtest {

inline constexpr double kTradingDays = 252.0;
inline constexpr double kDefaultCostRate = 0.002;
/// Weights with magnitude above this count as a held position.
inline constexpr double kHoldingThreshold = 1e-6;

/// Aligned closing prices: row d is trading day d, column i is asset i.
/// A panel with D + 1 rows spans a test window of D return days.
struct PricePanel {
  std::vector<std::string> tickers;
  std::vector<Date> dates;
  Eigen::MatrixXd prices;

  std::size_t days() const noexcept { return static_cast<std::size_t>(prices.rows()); }
  std::size_t assets() const noexcept { return static_cast<std::size_t>(prices.cols()); }
  std::size_t return_days() const noexcept { return days() == 0 ? 0 : days() - 1; }
};

struct PortfolioWeights {
  Date date{};
  std::vector<std::string> tickers;
  Eigen::VectorXd weights;
};

/// Target weights using information available at panel row `day`.
using WeightSource = std::function<Eigen::VectorXd(std::size_t day)>;

struct BacktestReport {
  std::string strategy;
  std::size_t holding_period = 1;
  std::vector<double> returns;                 // one per run (rolling) or per day (rebalance)
  std::vector<std::size_t> run_start;          // panel row each return starts from
  std::vector<Eigen::VectorXd> weight_history; // weights set at each run / rebalance
  std::vector<std::size_t> weight_days;        // panel row of each weight entry
  double annual_return = 0.0;
  double annual_volatility = 0.0;
  double sharpe = 0.0;
  bool zero_volatility = false;
  double mean_hhi = 0.0;
  double std_hhi = 0.0;
  double mean_stock_count = 0.0;
  double std_stock_count = 0.0;
  double cumulative_return = 0.0;
  double cost_paid = 0.0;  // fraction of wealth lost to costs, summed over rebalances
  double final_wealth = 1.0;
};

/// Restarts a buy-and-hold portfolio at every test day for `holding` days.
/// Produces return_days - holding + 1 runs.
BacktestReport rolling_scheme(const PricePanel& panel, const WeightSource& source,
                              std::size_t holding, double rf_daily = 0.0,
                              const std::string& strategy = {});

/// Daily-marked portfolio restored to target weights every `period` days,
/// paying cost_rate * turnover at each rebalance. The initial allocation is free.
BacktestReport rebalance_run(const PricePanel& panel, const WeightSource& source,
                             std::size_t period, double cost_rate = kDefaultCostRate,
                             double rf_daily = 0.0, const std::string& strategy = {});

inline constexpr std::size_t kNeverRebalance = std::numeric_limits<std::size_t>::max();

PortfolioWeights strategy_equal_weight(const std::vector<std::string>& universe);
PortfolioWeights strategy_market_weight(const std::vector<std::string>& universe,
                                        const std::map<std::string, double>& market_caps);

struct MeanVarianceOptions {
  double ridge = 1e-10;
  double tolerance = 1e-8;
  std::size_t max_iterations = 200000;
};

/// Long-only maximizer of mu'w - (lambda/2) w'Sigma w over the simplex.
Eigen::VectorXd mean_variance_weights(const Eigen::VectorXd& mean,
                                      const Eigen::MatrixXd& covariance, double risk_aversion,
                                      const MeanVarianceOptions& options = {});

/// Same, with mean and covariance estimated from a T x N history of returns.
PortfolioWeights strategy_mean_variance(const std::vector<std::string>& universe,
                                        const Eigen::MatrixXd& history_returns,
                                        double risk_aversion,
                                        const MeanVarianceOptions& options = {});

double mean_variance_objective(const Eigen::VectorXd& w, const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& covariance, double risk_aversion);

/// Euclidean projection onto {w >= 0, sum w = 1}.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

/// Annualized mean excess return over annualized volatility.
/// Zero when every return equals rf; throws ZeroVolatility for other constant series.
double sharpe(const std::vector<double>& period_returns, double rf_per_period,
              double periods_per_year);

double hhi(const Eigen::VectorXd& weights);

/// Highest/lowest-return counts per strategy. Ties credit every tying strategy.
struct ExtremeTally {
  std::size_t runs = 0;
  std::map<std::string, std::size_t> highest;
  std::map<std::string, std::size_t> lowest;
};

ExtremeTally tally_extremes(const std::map<std::string, BacktestReport>& reports);

}  // namespace blhybrid::backtest
