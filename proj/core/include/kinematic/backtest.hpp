#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kinematic/labeling.hpp"

namespace kinematic {

enum class Regime { kCash = 0, kLong = 1 };
enum class Side { kBuy, kSell };

std::string_view to_string(Regime regime);
std::string_view to_string(Side side);

struct PortfolioState {
  Regime regime = Regime::kCash;
  double cash = 0.0;
  double shares = 0.0;
  /// Cash spent on the open position, including the entry cost.
  double cost_basis = 0.0;
  /// Tax assessed at a year end while Long, settled from the next sale.
  double tax_liability = 0.0;

  double equity(double price) const { return cash + shares * price - tax_liability; }
};

/// Proportional cost charged per side on executed notional.
struct CostModel {
  double bps = 0.0;
  double fraction() const { return bps * 1e-4; }
};

struct TaxSchedule {
  double rate = 0.32;
  std::size_t period = 252;
  void validate() const;
};

struct Trade {
  std::size_t day = 0;
  Side side = Side::kBuy;
  double price = 0.0;
  double shares = 0.0;
  double notional = 0.0;
  double cost = 0.0;
  /// Sale proceeds minus cost basis; 0 for entries.
  double realized_gain = 0.0;
};

struct FsmStep {
  PortfolioState state;
  std::optional<Trade> trade;
};

/// Cash+Buy enters with all cash, Long+Sell liquidates everything; every
/// other (regime, action) pair leaves the state unchanged.
FsmStep fsm_step(const PortfolioState& state, ActionLabel action, double price, const CostModel& cost,
                 std::size_t day = 0);

struct MetricsReport {
  double total_return = 0.0;
  std::optional<double> sharpe;
  std::optional<double> sortino;
  double max_drawdown = 0.0;
  double annualized_turnover = 0.0;
  double action_rate = 0.0;
  double annual_return = 0.0;   // R_p, geometric
  double risk_free = 0.0;       // R_f
  double volatility = 0.0;      // eta, annualized std of daily returns
  double downside_deviation = 0.0;  // sigma_d, annualized
};

struct YearSummary {
  std::size_t year = 0;
  double realized_gain = 0.0;
  double tax = 0.0;
};

struct BacktestResult {
  /// C_0 = initial capital, C_{d+1} = equity after the close of day d.
  std::vector<double> equity_curve;
  std::vector<Trade> trades;
  std::vector<YearSummary> years;
  std::vector<ActionLabel> actions;
  std::vector<Regime> regimes;  // after each day
  double initial_capital = 0.0;
  double total_costs = 0.0;
  double total_taxes = 0.0;
  /// Sum over days of shares held times the close-to-close price change.
  double gross_pnl = 0.0;
  MetricsReport metrics;

  std::size_t days() const { return actions.size(); }
  std::size_t entries() const;
};

inline constexpr double kTradingDaysPerYear = 252.0;
inline constexpr double kDefaultRiskFree = 0.04;

/// Market-on-close simulation: the action for day d executes at closes[d].
BacktestResult run_backtest(std::span<const ActionLabel> actions, std::span<const double> closes, const CostModel& cost,
                            const TaxSchedule& tax, double initial_capital, double risk_free = kDefaultRiskFree);

MetricsReport compute_metrics(const BacktestResult& result, double risk_free = kDefaultRiskFree);

/// min_t (C_t - max_{s<=t} C_s) / max_{s<=t} C_s; 0 for a non-decreasing curve.
double max_drawdown(std::span<const double> equity);
/// (R_p - R_f) / eta, absent when eta is zero.
std::optional<double> sharpe_ratio(double annual_return, double risk_free, double volatility);
/// Traded notional / average equity / years elapsed.
double annualized_turnover(const BacktestResult& result);

/// ISO dates label rows when given (dates[d] is the date of day d).
void write_blotter_csv(std::ostream& out, const BacktestResult& result, std::span<const std::string> dates = {});
void write_equity_csv(std::ostream& out, const BacktestResult& result, std::span<const std::string> dates = {});
void write_metrics_kv(std::ostream& out, const MetricsReport& metrics);
void write_metrics_csv_header(std::ostream& out);
void write_metrics_csv_row(std::ostream& out, const std::string& label, const MetricsReport& metrics);

}  // namespace kinematic
