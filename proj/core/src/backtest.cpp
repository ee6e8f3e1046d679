#include "kinematic/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "kinematic/error.hpp"

namespace kinematic {
namespace {

std::string optional_number(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : "NA"; }

std::string date_or_index(std::span<const std::string> dates, std::size_t day) {
  return day < dates.size() ? dates[day] : std::to_string(day);
}

}  // namespace

std::string_view to_string(Regime regime) { return regime == Regime::kCash ? "cash" : "long"; }
std::string_view to_string(Side side) { return side == Side::kBuy ? "buy" : "sell"; }

void TaxSchedule::validate() const {
  if (!(rate >= 0.0 && rate <= 1.0)) fail(ErrorCode::kConfig, "tax rate must lie in [0, 1]");
  if (period < 1) fail(ErrorCode::kConfig, "tax period must be at least one day");
}

std::size_t BacktestResult::entries() const {
  return static_cast<std::size_t>(
      std::count_if(trades.begin(), trades.end(), [](const Trade& t) { return t.side == Side::kBuy; }));
}

FsmStep fsm_step(const PortfolioState& state, ActionLabel action, double price, const CostModel& cost, std::size_t day) {
  if (!(price > 0.0) || !std::isfinite(price)) fail(ErrorCode::kData, fmt::format("nonpositive price {} on day {}", price, day));
  if (cost.bps < 0.0) fail(ErrorCode::kConfig, "cost must be nonnegative");
  const double f = cost.fraction();
  FsmStep step{state, std::nullopt};

  if (state.regime == Regime::kCash && action == ActionLabel::kBuy && state.cash > 0.0) {
    const double shares = state.cash / (price * (1.0 + f));
    const double notional = shares * price;
    Trade t{day, Side::kBuy, price, shares, notional, notional * f, 0.0};
    step.state.cash = 0.0;
    step.state.shares = shares;
    step.state.cost_basis = state.cash;
    step.state.regime = Regime::kLong;
    step.trade = t;
  } else if (state.regime == Regime::kLong && action == ActionLabel::kSell) {
    const double notional = state.shares * price;
    const double fee = notional * f;
    const double proceeds = notional - fee;
    Trade t{day, Side::kSell, price, state.shares, notional, fee, proceeds - state.cost_basis};
    step.state.cash = state.cash + proceeds - state.tax_liability;
    step.state.tax_liability = 0.0;
    step.state.shares = 0.0;
    step.state.cost_basis = 0.0;
    step.state.regime = Regime::kCash;
    step.trade = t;
  }
  return step;
}

BacktestResult run_backtest(std::span<const ActionLabel> actions, std::span<const double> closes, const CostModel& cost,
                            const TaxSchedule& tax, double initial_capital, double risk_free) {
  if (actions.size() != closes.size()) {
    fail(ErrorCode::kShape, fmt::format("{} actions for {} closes", actions.size(), closes.size()));
  }
  if (!(initial_capital > 0.0)) fail(ErrorCode::kConfig, "initial capital must be positive");
  tax.validate();

  BacktestResult result;
  result.initial_capital = initial_capital;
  result.actions.assign(actions.begin(), actions.end());
  result.equity_curve.reserve(actions.size() + 1);
  result.equity_curve.push_back(initial_capital);

  PortfolioState state;
  state.cash = initial_capital;
  double year_gain = 0.0;

  for (std::size_t d = 0; d < actions.size(); ++d) {
    if (d > 0) result.gross_pnl += state.shares * (closes[d] - closes[d - 1]);
    auto step = fsm_step(state, actions[d], closes[d], cost, d);
    state = step.state;
    if (step.trade) {
      result.total_costs += step.trade->cost;
      year_gain += step.trade->realized_gain;
      result.trades.push_back(*step.trade);
    }
    if ((d + 1) % tax.period == 0) {
      const double due = tax.rate * std::max(0.0, year_gain);
      result.years.push_back({(d + 1) / tax.period, year_gain, due});
      result.total_taxes += due;
      if (state.regime == Regime::kCash) {
        const double paid = std::min(due, state.cash);
        state.cash -= paid;
        state.tax_liability += due - paid;
      } else {
        state.tax_liability += due;
      }
      year_gain = 0.0;
    }
    result.regimes.push_back(state.regime);
    result.equity_curve.push_back(state.equity(closes[d]));
  }
  result.metrics = compute_metrics(result, risk_free);
  return result;
}

double max_drawdown(std::span<const double> equity) {
  double peak = -INFINITY;
  double worst = 0.0;
  for (double c : equity) {
    peak = std::max(peak, c);
    if (peak > 0.0) worst = std::min(worst, (c - peak) / peak);
  }
  return worst;
}

std::optional<double> sharpe_ratio(double annual_return, double risk_free, double volatility) {
  if (!(volatility > 0.0)) return std::nullopt;
  return (annual_return - risk_free) / volatility;
}

double annualized_turnover(const BacktestResult& result) {
  if (result.days() == 0) fail(ErrorCode::kInsufficientData, "turnover is undefined over a zero-length period");
  double notional = 0.0;
  for (const auto& t : result.trades) notional += t.notional;
  if (notional == 0.0) return 0.0;
  double mean_equity = 0.0;
  for (std::size_t i = 1; i < result.equity_curve.size(); ++i) mean_equity += result.equity_curve[i];
  mean_equity /= static_cast<double>(result.equity_curve.size() - 1);
  const double years = static_cast<double>(result.days()) / kTradingDaysPerYear;
  return notional / mean_equity / years;
}

MetricsReport compute_metrics(const BacktestResult& result, double risk_free) {
  const auto& c = result.equity_curve;
  if (c.size() < 2) fail(ErrorCode::kInsufficientData, "metrics need at least two equity points");
  MetricsReport m;
  m.risk_free = risk_free;
  m.total_return = c.back() / c.front() - 1.0;
  m.max_drawdown = max_drawdown(c);

  const std::size_t n = c.size() - 1;
  std::vector<double> daily(n);
  for (std::size_t i = 0; i < n; ++i) daily[i] = c[i + 1] / c[i] - 1.0;
  m.annual_return = std::pow(c.back() / c.front(), kTradingDaysPerYear / static_cast<double>(n)) - 1.0;

  if (n >= 2) {
    double mean = 0.0;
    for (double r : daily) mean += r;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double r : daily) ss += (r - mean) * (r - mean);
    m.volatility = std::sqrt(ss / static_cast<double>(n - 1)) * std::sqrt(kTradingDaysPerYear);
  }
  double downside = 0.0;
  for (double r : daily) downside += std::min(r, 0.0) * std::min(r, 0.0);
  m.downside_deviation = std::sqrt(downside / static_cast<double>(n)) * std::sqrt(kTradingDaysPerYear);

  m.sharpe = sharpe_ratio(m.annual_return, risk_free, m.volatility);
  m.sortino = sharpe_ratio(m.annual_return, risk_free, m.downside_deviation);
  m.annualized_turnover = result.days() > 0 ? annualized_turnover(result) : 0.0;
  if (!result.actions.empty()) {
    const auto active = std::count_if(result.actions.begin(), result.actions.end(),
                                      [](ActionLabel a) { return a != ActionLabel::kHold; });
    m.action_rate = static_cast<double>(active) / static_cast<double>(result.actions.size());
  }
  return m;
}

void write_blotter_csv(std::ostream& out, const BacktestResult& result, std::span<const std::string> dates) {
  out << "date,day,side,price,shares,notional,cost,realized_gain\n";
  for (const auto& t : result.trades) {
    out << fmt::format("{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", date_or_index(dates, t.day), t.day,
                       to_string(t.side), t.price, t.shares, t.notional, t.cost, t.realized_gain);
  }
}

void write_equity_csv(std::ostream& out, const BacktestResult& result, std::span<const std::string> dates) {
  out << "step,date,regime,equity\n";
  out << fmt::format("0,initial,cash,{:.6f}\n", result.equity_curve.front());
  for (std::size_t d = 0; d < result.days(); ++d) {
    out << fmt::format("{},{},{},{:.6f}\n", d + 1, date_or_index(dates, d), to_string(result.regimes[d]),
                       result.equity_curve[d + 1]);
  }
}

void write_metrics_kv(std::ostream& out, const MetricsReport& m) {
  out << fmt::format("total_return={:.6f}\n", m.total_return);
  out << fmt::format("sharpe={}\n", optional_number(m.sharpe));
  out << fmt::format("sortino={}\n", optional_number(m.sortino));
  out << fmt::format("max_drawdown={:.6f}\n", m.max_drawdown);
  out << fmt::format("annualized_turnover={:.6f}\n", m.annualized_turnover);
  out << fmt::format("action_rate={:.6f}\n", m.action_rate);
  out << fmt::format("annual_return={:.6f}\n", m.annual_return);
  out << fmt::format("risk_free={:.6f}\n", m.risk_free);
  out << fmt::format("volatility={:.6f}\n", m.volatility);
  out << fmt::format("downside_deviation={:.6f}\n", m.downside_deviation);
}

void write_metrics_csv_header(std::ostream& out) {
  out << "label,total_return,sharpe,sortino,max_drawdown,annualized_turnover,action_rate,annual_return,risk_free,"
         "volatility,downside_deviation\n";
}

void write_metrics_csv_row(std::ostream& out, const std::string& label, const MetricsReport& m) {
  out << fmt::format("{},{:.6f},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", label, m.total_return,
                     optional_number(m.sharpe), optional_number(m.sortino), m.max_drawdown, m.annualized_turnover,
                     m.action_rate, m.annual_return, m.risk_free, m.volatility, m.downside_deviation);
}

}  // namespace kinematic
