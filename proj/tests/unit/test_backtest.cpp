#include <cmath>
#include <random>
#include <sstream>

#include "kinematic/backtest.hpp"
#include "test_support.hpp"

using namespace kinematic;

namespace {

constexpr ActionLabel B = ActionLabel::kBuy;
constexpr ActionLabel S = ActionLabel::kSell;
constexpr ActionLabel H = ActionLabel::kHold;

TaxSchedule no_tax() { return {0.32, 1000000}; }

PortfolioState cash_state(double cash) {
  PortfolioState s;
  s.cash = cash;
  return s;
}

PortfolioState long_state(double shares, double basis) {
  PortfolioState s;
  s.regime = Regime::kLong;
  s.shares = shares;
  s.cost_basis = basis;
  return s;
}

bool same_state(const PortfolioState& a, const PortfolioState& b) {
  return a.regime == b.regime && a.cash == b.cash && a.shares == b.shares && a.cost_basis == b.cost_basis &&
         a.tax_liability == b.tax_liability;
}

std::vector<double> random_walk(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 0.02);
  std::vector<double> p(n);
  double x = std::log(100.0);
  for (auto& v : p) {
    x += g(rng);
    v = std::exp(x);
  }
  return p;
}

std::vector<ActionLabel> random_actions(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> pick(0, 2);
  std::vector<ActionLabel> a(n);
  for (auto& v : a) v = static_cast<ActionLabel>(pick(rng));
  return a;
}

}  // namespace

TEST_CASE("all six state machine transitions") {
  const CostModel free{0.0};
  const auto cash = cash_state(10000.0);
  const auto held = long_state(100.0, 10000.0);

  const auto cb = fsm_step(cash, B, 100.0, free);
  CHECK(cb.state.regime == Regime::kLong);
  CHECK(cb.state.shares == 100.0);
  CHECK(cb.state.cash == 0.0);
  CHECK(cb.state.cost_basis == 10000.0);
  REQUIRE(cb.trade.has_value());
  CHECK(cb.trade->side == Side::kBuy);

  const auto cs = fsm_step(cash, S, 100.0, free);
  CHECK(same_state(cs.state, cash));
  CHECK_FALSE(cs.trade.has_value());

  const auto ch = fsm_step(cash, H, 100.0, free);
  CHECK(same_state(ch.state, cash));
  CHECK_FALSE(ch.trade.has_value());

  const auto lb = fsm_step(held, B, 120.0, free);
  CHECK(same_state(lb.state, held));
  CHECK_FALSE(lb.trade.has_value());

  const auto ls = fsm_step(held, S, 120.0, free);
  CHECK(ls.state.regime == Regime::kCash);
  CHECK(ls.state.shares == 0.0);
  CHECK(ls.state.cash == 12000.0);
  REQUIRE(ls.trade.has_value());
  CHECK(ls.trade->side == Side::kSell);
  CHECK(ls.trade->realized_gain == 2000.0);

  const auto lh = fsm_step(held, H, 120.0, free);
  CHECK(same_state(lh.state, held));
  CHECK_FALSE(lh.trade.has_value());
}

TEST_CASE("entry and exit costs") {
  const CostModel cost{10.0};
  const auto entry = fsm_step(cash_state(10000.0), B, 100.0, cost);
  CHECK(entry.trade->notional + entry.trade->cost == doctest::Approx(10000.0).epsilon(1e-14));
  CHECK(entry.trade->cost == doctest::Approx(entry.trade->notional * 1e-3));
  const auto exit = fsm_step(entry.state, S, 100.0, cost);
  CHECK(exit.state.cash == doctest::Approx(10000.0 / 1.001 * 0.999));
  CHECK(exit.trade->realized_gain < 0.0);
}

TEST_CASE("state machine rejects bad prices") {
  CHECK_ERROR_CODE(fsm_step(cash_state(1.0), B, 0.0, CostModel{}), ErrorCode::kData);
  CHECK_ERROR_CODE(fsm_step(cash_state(1.0), H, -3.0, CostModel{}), ErrorCode::kData);
  CHECK_ERROR_CODE(fsm_step(cash_state(1.0), H, std::nan(""), CostModel{}), ErrorCode::kData);
  const std::vector<ActionLabel> a{H, H};
  const std::vector<double> p{100.0, 0.0};
  CHECK_ERROR_CODE(run_backtest(a, p, CostModel{}, no_tax(), 100.0), ErrorCode::kData);
}

TEST_CASE("three-step hand computed run") {
  const std::vector<ActionLabel> a{B, H, S};
  const std::vector<double> p{100.0, 110.0, 121.0};
  const auto r = run_backtest(a, p, CostModel{}, no_tax(), 10000.0);
  REQUIRE(r.equity_curve.size() == 4);
  CHECK(r.equity_curve[0] == 10000.0);
  CHECK(std::abs(r.equity_curve[1] - 10000.0) < 1e-8);
  CHECK(std::abs(r.equity_curve[2] - 11000.0) < 1e-8);
  CHECK(std::abs(r.equity_curve[3] - 12100.0) < 1e-8);
  CHECK(std::abs(r.metrics.total_return - 0.21) < 1e-12);
  CHECK(r.trades.size() == 2);

  // A tax year closing right after the sale takes 32% of the 2,100 gain.
  const auto taxed = run_backtest(a, p, CostModel{}, TaxSchedule{0.32, 3}, 10000.0);
  CHECK(std::abs(taxed.total_taxes - 672.0) < 1e-8);
  CHECK(std::abs(taxed.equity_curve.back() - 11428.0) < 1e-8);
  REQUIRE(taxed.years.size() == 1);
  CHECK(std::abs(taxed.years[0].realized_gain - 2100.0) < 1e-8);
}

TEST_CASE("tax while long is accrued and settled at the next sale") {
  const std::vector<ActionLabel> a{B, S, B, H, S};
  const std::vector<double> p{100.0, 110.0, 110.0, 120.0, 120.0};
  const auto r = run_backtest(a, p, CostModel{}, TaxSchedule{0.5, 3}, 1000.0);
  // Year 1 gain is 100, assessed at the close of day 2 while Long.
  REQUIRE(r.years.size() == 1);
  CHECK(std::abs(r.years[0].tax - 50.0) < 1e-12);
  CHECK(r.regimes[2] == Regime::kLong);
  CHECK(std::abs(r.equity_curve[3] - 1050.0) < 1e-9);
  CHECK(std::abs(r.equity_curve.back() - (1100.0 / 110.0 * 120.0 - 50.0)) < 1e-9);

  // Losses are not taxed.
  const std::vector<double> down{100.0, 90.0, 90.0, 90.0, 90.0};
  const auto loss = run_backtest(a, down, CostModel{}, TaxSchedule{0.5, 3}, 1000.0);
  CHECK(loss.total_taxes == 0.0);
}

TEST_CASE("drawdown and ratio fixtures") {
  const std::vector<double> c{100.0, 120.0, 90.0, 110.0};
  CHECK(max_drawdown(c) == -0.25);
  const std::vector<double> rising{1.0, 2.0, 3.0};
  CHECK(max_drawdown(rising) == 0.0);
  CHECK(*sharpe_ratio(0.10, 0.04, 0.12) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_FALSE(sharpe_ratio(0.1, 0.04, 0.0).has_value());
}

TEST_CASE("metrics against an independent recomputation") {
  std::mt19937_64 rng(2);
  const auto p = random_walk(rng, 300);
  const auto a = random_actions(rng, 300);
  const auto r = run_backtest(a, p, CostModel{5.0}, TaxSchedule{}, 10000.0, 0.04);
  const auto& c = r.equity_curve;
  const double n = static_cast<double>(c.size() - 1);
  std::vector<double> d;
  for (std::size_t i = 1; i < c.size(); ++i) d.push_back(std::log(c[i] / c[i - 1]));
  // Geometric annual return from summed log returns.
  double log_sum = 0.0;
  for (double v : d) log_sum += v;
  const double rp = std::expm1(log_sum * 252.0 / n);
  CHECK(rel_diff(r.metrics.annual_return, rp) < 1e-10);
  // Sample std of simple returns, two-pass.
  double mean = 0.0;
  for (std::size_t i = 1; i < c.size(); ++i) mean += c[i] / c[i - 1] - 1.0;
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 1; i < c.size(); ++i) ss += std::pow(c[i] / c[i - 1] - 1.0 - mean, 2);
  const double eta = std::sqrt(ss / (n - 1.0) * 252.0);
  CHECK(rel_diff(r.metrics.volatility, eta) < 1e-10);
  CHECK(rel_diff(*r.metrics.sharpe, (rp - 0.04) / eta) < 1e-9);
  double down = 0.0;
  for (std::size_t i = 1; i < c.size(); ++i) down += std::pow(std::min(0.0, c[i] / c[i - 1] - 1.0), 2);
  REQUIRE(r.metrics.sortino.has_value());
  CHECK(rel_diff(*r.metrics.sortino, (rp - 0.04) / std::sqrt(down / n * 252.0)) < 1e-9);
  double peak = c[0], dd = 0.0;
  for (double v : c) {
    peak = std::max(peak, v);
    dd = std::min(dd, v / peak - 1.0);
  }
  CHECK(rel_diff(r.metrics.max_drawdown, dd) < 1e-12);
  CHECK(r.metrics.max_drawdown <= 0.0);
}

TEST_CASE("all-Sell stream stays in cash") {
  std::mt19937_64 rng(3);
  const auto p = random_walk(rng, 762);
  const std::vector<ActionLabel> a(762, S);
  const auto r = run_backtest(a, p, CostModel{10.0}, TaxSchedule{}, 10000.0);
  CHECK(r.trades.empty());
  CHECK(r.metrics.total_return == 0.0);
  CHECK_FALSE(r.metrics.sharpe.has_value());
  CHECK_FALSE(r.metrics.sortino.has_value());
  CHECK(r.metrics.max_drawdown == 0.0);
  CHECK(r.metrics.annualized_turnover == 0.0);
  CHECK(r.metrics.action_rate == 1.0);
  for (double c : r.equity_curve) CHECK(c == 10000.0);
}

TEST_CASE("cash is absorbing once Buy stops") {
  std::mt19937_64 rng(4);
  const auto p = random_walk(rng, 200);
  auto a = random_actions(rng, 200);
  std::uniform_int_distribution<int> sh(0, 1);
  for (std::size_t i = 100; i < a.size(); ++i) a[i] = sh(rng) ? S : H;
  a[100] = S;
  const auto r = run_backtest(a, p, CostModel{5.0}, TaxSchedule{0.32, 1000}, 10000.0);
  for (std::size_t i = 102; i < r.equity_curve.size(); ++i) CHECK(r.equity_curve[i] == r.equity_curve[101]);
}

TEST_CASE("conservation identity holds at every step") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 120;
    const auto p = random_walk(rng, n);
    const auto a = random_actions(rng, n);
    const TaxSchedule tax{0.32, 20};
    for (std::size_t len = 1; len <= n; len += 7) {
      const auto r = run_backtest(std::span(a).first(len), std::span(p).first(len), CostModel{7.0}, tax, 10000.0);
      const double rhs = r.initial_capital + r.gross_pnl - r.total_costs - r.total_taxes;
      CHECK(std::abs(r.equity_curve.back() - rhs) < 1e-8);
      for (std::size_t d = 0; d < len; ++d) CHECK(r.equity_curve[d + 1] >= 0.0);
    }
  }
}

TEST_CASE("turnover definitions") {
  const std::vector<double> flat(252, 100.0);
  std::vector<ActionLabel> one(252, H);
  one.front() = B;
  one.back() = S;
  const auto r = run_backtest(one, flat, CostModel{}, no_tax(), 10000.0);
  CHECK(r.metrics.annualized_turnover == doctest::Approx(2.0).epsilon(1e-12));

  const std::vector<double> flat240(240, 100.0);
  auto cycle = [](std::size_t period) {
    std::vector<ActionLabel> a(240, H);
    for (std::size_t i = 0; i < a.size(); i += period) {
      a[i] = B;
      a[i + period / 2] = S;
    }
    return a;
  };
  const auto slow = run_backtest(cycle(20), flat240, CostModel{}, no_tax(), 10000.0);
  const auto fast = run_backtest(cycle(10), flat240, CostModel{}, no_tax(), 10000.0);
  CHECK(fast.metrics.annualized_turnover / slow.metrics.annualized_turnover == doctest::Approx(2.0).epsilon(0.05));

  BacktestResult empty;
  CHECK_ERROR_CODE(annualized_turnover(empty), ErrorCode::kInsufficientData);
}

TEST_CASE("final equity strictly decreases with cost") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_walk(rng, 150);
    auto a = random_actions(rng, 150);
    a[0] = B;
    double prev = std::numeric_limits<double>::infinity();
    for (double bps : {0.0, 5.0, 10.0, 20.0}) {
      const auto r = run_backtest(a, p, CostModel{bps}, TaxSchedule{}, 10000.0);
      REQUIRE(r.trades.size() >= 1);
      CHECK(r.equity_curve.back() < prev);
      prev = r.equity_curve.back();
    }
  }
}

TEST_CASE("shape and config errors") {
  const std::vector<ActionLabel> a{B, S};
  const std::vector<double> p{1.0};
  CHECK_ERROR_CODE(run_backtest(a, p, CostModel{}, no_tax(), 1.0), ErrorCode::kShape);
  const std::vector<double> p2{1.0, 2.0};
  CHECK_ERROR_CODE(run_backtest(a, p2, CostModel{}, no_tax(), 0.0), ErrorCode::kConfig);
  CHECK_ERROR_CODE(run_backtest(a, p2, CostModel{}, TaxSchedule{1.5, 252}, 1.0), ErrorCode::kConfig);
  CHECK_ERROR_CODE(run_backtest(a, p2, CostModel{}, TaxSchedule{0.3, 0}, 1.0), ErrorCode::kConfig);
}

TEST_CASE("csv exports") {
  const std::vector<ActionLabel> a{B, H, S};
  const std::vector<double> p{100.0, 110.0, 121.0};
  const auto r = run_backtest(a, p, CostModel{}, no_tax(), 10000.0);
  const std::vector<std::string> dates{"2023-01-03", "2023-01-04", "2023-01-05"};
  std::ostringstream blotter, equity, kv;
  write_blotter_csv(blotter, r, dates);
  write_equity_csv(equity, r, dates);
  write_metrics_kv(kv, r.metrics);
  CHECK(blotter.str() ==
        "date,day,side,price,shares,notional,cost,realized_gain\n"
        "2023-01-03,0,buy,100.000000,100.000000,10000.000000,0.000000,0.000000\n"
        "2023-01-05,2,sell,121.000000,100.000000,12100.000000,0.000000,2100.000000\n");
  CHECK(equity.str().find("3,2023-01-05,cash,12100.000000") != std::string::npos);
  CHECK(kv.str().find("total_return=0.210000") != std::string::npos);
}
