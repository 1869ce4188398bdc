#include "labelstrat/search_ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include <fmt/format.h>
#include <fmt/os.h>

#include "json.hpp"
#include "labelstrat/error.hpp"
#include "labelstrat/parallel.hpp"
#include "labelstrat/rng.hpp"
#include "labelstrat/stats.hpp"
#include "labelstrat/time.hpp"

namespace labelstrat {

namespace {

void check_inputs(std::span<const Bar> bars, const SignalInputs& inputs, std::size_t width,
                  const char* window) {
  if (bars.empty() || inputs.rows() == 0) {
    throw ValidationError(fmt::format("{} window has no probability rows", window));
  }
  if (inputs.rows() != bars.size()) {
    throw ValidationError(fmt::format("{} window: {} probability rows for {} bars", window,
                                      inputs.rows(), bars.size()));
  }
  if (inputs.width != width) {
    throw ValidationError(fmt::format("{} window: probability width {} but strategies expect {}",
                                      window, inputs.width, width));
  }
}

bool is_flat(std::span<const double> values) {
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return lo == values.end() || *lo == *hi;
}

double days_of(std::size_t bars) { return static_cast<double>(bars) / kMinutesPerDay; }

BacktestMetrics run_on(const StrategyParams& params, std::span<const Bar> bars,
                       const SignalInputs& inputs, double fee_rate) {
  const auto positions = execute(signals(inputs, params), params);
  return compute_metrics(run_backtest(bars, positions, fee_rate), days_of(bars.size()));
}

}  // namespace

StrategyParams sample_strategy(const StrategySpace& space, std::uint64_t seed) {
  Rng rng(seed);
  StrategyParams p;
  p.weights.resize(2 * space.label_count);
  for (double& w : p.weights) w = rng.uniform(space.weight_lo, space.weight_hi);
  p.y_buy = rng.uniform(space.y_buy_lo, space.y_buy_hi);
  p.y_sell = rng.uniform(space.y_sell_lo, space.y_sell_hi);
  p.y_width = rng.uniform(space.y_width_lo, space.y_width_hi);
  return p;
}

bool ranks_before(const StrategyRecord& a, const StrategyRecord& b) {
  if (a.rung != b.rung) return a.rung > b.rung;
  if (a.score.score != b.score.score) return a.score.score > b.score.score;
  if (a.past.transactions != b.past.transactions) return a.past.transactions < b.past.transactions;
  const auto key = [](const StrategyRecord& r) {
    return std::tie(r.params.weights, r.params.y_buy, r.params.y_sell, r.params.y_width);
  };
  if (key(a) != key(b)) return key(a) < key(b);
  return a.id < b.id;
}

std::vector<StrategyRecord> search_strategies(const StrategySpace& space,
                                              std::span<const Bar> past_bars,
                                              const SignalInputs& past_inputs,
                                              const StrategySearchOptions& options) {
  check_inputs(past_bars, past_inputs, 2 * space.label_count, "past");
  if (options.budget < 1) throw ValidationError("strategy budget must be at least 1");
  if (options.rungs < 1) throw ValidationError("strategy rungs must be at least 1");
  if (!(options.eta > 1.0)) throw ValidationError("eta must exceed 1");

  std::vector<StrategyRecord> records(options.budget);
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].id = i;
    records[i].params = sample_strategy(space, derive_seed(options.seed, i));
  }
  std::vector<std::size_t> alive(records.size());
  std::iota(alive.begin(), alive.end(), 0);

  for (int rung = 0; rung < options.rungs; ++rung) {
    const double shrink = std::pow(options.eta, options.rungs - 1 - rung);
    const std::size_t len = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::floor(static_cast<double>(past_bars.size()) / shrink)), 1,
        past_bars.size());
    const auto bars = past_bars.first(len);
    const auto inputs = past_inputs.slice(0, len);
    parallel_for(alive.size(), options.workers, [&](std::size_t k) {
      StrategyRecord& r = records[alive[k]];
      r.past = run_on(r.params, bars, inputs, options.fee_rate);
      r.score = score(r.past);
      r.rung = rung;
      r.past_bars = len;
    });
    std::sort(alive.begin(), alive.end(), [&](std::size_t a, std::size_t b) {
      return ranks_before(records[a], records[b]);
    });
    if (rung + 1 < options.rungs) {
      const auto keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(static_cast<double>(alive.size()) / options.eta)));
      alive.resize(std::min(keep, alive.size()));
    }
  }
  std::sort(records.begin(), records.end(), ranks_before);
  return records;
}

void evaluate_future(std::vector<StrategyRecord>& records, std::span<const Bar> future_bars,
                     const SignalInputs& future_inputs, double fee_rate, int workers) {
  if (records.empty()) return;
  check_inputs(future_bars, future_inputs, records.front().params.weights.size(), "future");
  parallel_for(records.size(), workers, [&](std::size_t i) {
    StrategyRecord& r = records[i];
    r.future = run_on(r.params, future_bars, future_inputs, fee_rate);
    r.significant = significance_flag(*r.future);
  });
}

EnsembleResult build_ensemble(std::span<const StrategyRecord> ranked, std::size_t k,
                              std::span<const Bar> future_bars,
                              const SignalInputs& future_inputs, double fee_rate) {
  if (k < 1) throw ValidationError("ensemble size must be at least 1");
  if (ranked.size() < k) {
    throw ValidationError(
        fmt::format("ensemble of {} requested but only {} strategies exist", k, ranked.size()));
  }
  check_inputs(future_bars, future_inputs, ranked.front().params.weights.size(), "future");
  EnsembleResult out;
  out.positions.assign(future_bars.size(), 0.0);
  const double share = 1.0 / static_cast<double>(k);
  for (std::size_t m = 0; m < k; ++m) {
    const auto& member = ranked[m];
    out.members.push_back(member.id);
    const auto positions = execute(signals(future_inputs, member.params), member.params);
    for (std::size_t t = 0; t < positions.executed.size(); ++t) {
      out.positions[t] += share * positions.executed[t];
    }
    const auto member_metrics = compute_metrics(run_backtest(future_bars, positions, fee_rate),
                                                days_of(future_bars.size()));
    out.max_member_volatility = std::max(out.max_member_volatility, member_metrics.return_volatility);
  }
  for (double& p : out.positions) p = std::clamp(p, 0.0, 1.0);
  out.backtest = run_backtest(future_bars, out.positions, fee_rate);
  out.metrics = compute_metrics(out.backtest, days_of(future_bars.size()));
  out.returns = out.backtest.returns();
  const auto bench = benchmark_returns(future_bars);
  out.benchmark_volatility = sample_stddev(bench);
  out.ensemble_volatility = sample_stddev(out.returns);
  if (!is_flat(out.returns)) out.risk_adjusted_returns = risk_adjust(out.returns, bench);
  return out;
}

std::vector<double> benchmark_returns(std::span<const Bar> bars) {
  std::vector<double> out(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double base = i == 0 ? bars[0].open : bars[i - 1].close;
    out[i] = bars[i].close / base - 1.0;
  }
  return out;
}

std::vector<double> risk_adjust(std::span<const double> ensemble_returns,
                                std::span<const double> benchmark) {
  if (ensemble_returns.size() != benchmark.size()) {
    throw std::invalid_argument("ensemble and benchmark returns are not aligned");
  }
  const double sigma_e = sample_stddev(ensemble_returns);
  if (is_flat(ensemble_returns) || !std::isfinite(sigma_e)) {
    throw std::invalid_argument("ensemble returns are flat; risk adjustment undefined");
  }
  const double factor = sample_stddev(benchmark) / sigma_e;
  std::vector<double> out(ensemble_returns.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ensemble_returns[i] * factor;
  return out;
}

namespace {

void correlate(const std::vector<CrossDatasetRow>& rows, Correlation& rank, Correlation& linear) {
  std::vector<double> past, future;
  for (const auto& r : rows) {
    if (!r.significant) continue;
    past.push_back(r.past);
    future.push_back(r.future_return);
  }
  if (past.size() < 2) {
    rank.undefined = linear.undefined = true;
    return;
  }
  for (auto [c, v] : {std::pair{&rank, spearman(past, future)}, std::pair{&linear, pearson(past, future)}}) {
    if (v) {
      c->value = *v;
    } else {
      c->value = 0.0;
      c->degenerate = true;
    }
  }
}

}  // namespace

CrossDatasetReport cross_dataset_report(std::span<const StrategyRecord> records) {
  CrossDatasetReport report;
  for (const auto& r : records) {
    if (!r.future) continue;
    report.returns_table.push_back({r.id, r.past.monthly_return, r.future->monthly_return, r.significant});
    report.scores_table.push_back({r.id, r.score.score, r.future->monthly_return, r.significant});
    if (r.significant) ++report.significant_count;
  }
  correlate(report.returns_table, report.return_spearman, report.return_pearson);
  correlate(report.scores_table, report.score_spearman, report.score_pearson);
  return report;
}

void write_report_csv(const std::filesystem::path& path, std::span<const CrossDatasetRow> rows,
                      const std::string& past_column) {
  auto out = fmt::output_file(path.string());
  out.print("id,{},future_monthly_return,significant\n", past_column);
  for (const auto& r : rows) {
    out.print("{},{},{},{}\n", r.id, r.past, r.future_return, r.significant ? 1 : 0);
  }
}

namespace {

using nlohmann::json;

json metrics_json(const BacktestMetrics& m) {
  return {{"monthly_return", m.monthly_return},
          {"transactions_per_month", m.transactions_per_month},
          {"mean_capital_involvement", m.mean_capital_involvement},
          {"return_volatility", m.return_volatility},
          {"total_return", m.total_return},
          {"transactions", m.transactions},
          {"window_days", m.window_days}};
}

BacktestMetrics metrics_from(const json& j) {
  BacktestMetrics m;
  m.monthly_return = j.at("monthly_return").get<double>();
  m.transactions_per_month = j.at("transactions_per_month").get<double>();
  m.mean_capital_involvement = j.at("mean_capital_involvement").get<double>();
  m.return_volatility = j.at("return_volatility").get<double>();
  m.total_return = j.at("total_return").get<double>();
  m.transactions = j.at("transactions").get<std::size_t>();
  m.window_days = j.at("window_days").get<double>();
  return m;
}

}  // namespace

void write_records_jsonl(const std::filesystem::path& path,
                         std::span<const StrategyRecord> records) {
  auto out = fmt::output_file(path.string());
  for (const auto& r : records) {
    json j = {{"id", r.id},
              {"params",
               {{"weights", r.params.weights},
                {"y_buy", r.params.y_buy},
                {"y_sell", r.params.y_sell},
                {"y_width", r.params.y_width}}},
              {"rung", r.rung},
              {"past_bars", r.past_bars},
              {"past", metrics_json(r.past)},
              {"score",
               {{"score", r.score.score},
                {"monthly_return", r.score.monthly_return},
                {"transaction_penalty", r.score.transaction_penalty},
                {"capital_penalty", r.score.capital_penalty}}},
              {"future", r.future ? metrics_json(*r.future) : json(nullptr)},
              {"significant", r.significant}};
    out.print("{}\n", j.dump());
  }
}

std::vector<StrategyRecord> read_records_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  std::vector<StrategyRecord> records;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      StrategyRecord r;
      r.id = j.at("id").get<std::size_t>();
      const auto& p = j.at("params");
      r.params.weights = p.at("weights").get<std::vector<double>>();
      r.params.y_buy = p.at("y_buy").get<double>();
      r.params.y_sell = p.at("y_sell").get<double>();
      r.params.y_width = p.at("y_width").get<double>();
      r.rung = j.at("rung").get<int>();
      r.past_bars = j.at("past_bars").get<std::size_t>();
      r.past = metrics_from(j.at("past"));
      const auto& s = j.at("score");
      r.score.score = s.at("score").get<double>();
      r.score.monthly_return = s.at("monthly_return").get<double>();
      r.score.transaction_penalty = s.at("transaction_penalty").get<double>();
      r.score.capital_penalty = s.at("capital_penalty").get<double>();
      if (!j.at("future").is_null()) r.future = metrics_from(j.at("future"));
      r.significant = j.at("significant").get<bool>();
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), n, e.what()));
    }
  }
  return records;
}

}  // namespace labelstrat
