#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labelstrat/backtest.hpp"
#include "labelstrat/ingest.hpp"
#include "labelstrat/strategy.hpp"

namespace labelstrat {

struct StrategyRecord {
  std::size_t id = 0;
  StrategyParams params;
  BacktestMetrics past;
  StrategyScore score;
  int rung = 0;               // last rung evaluated
  std::size_t past_bars = 0;  // prefix length the score refers to
  std::optional<BacktestMetrics> future;
  bool significant = false;   // future transactions per month >= 5
};

/// Uniform draw within every bound of the space.
StrategyParams sample_strategy(const StrategySpace& space, std::uint64_t seed);

struct StrategySearchOptions {
  std::size_t budget = 200;
  int rungs = 1;
  double eta = 3.0;
  double fee_rate = kDefaultFeeRate;
  std::uint64_t seed = 0;
  int workers = 1;
};

/// Strict ranking order: deeper rung, higher score, fewer transactions, then
/// lexicographically smaller parameters.
bool ranks_before(const StrategyRecord& a, const StrategyRecord& b);

/// Successive halving on growing past-data prefixes: rung k scores every
/// survivor on the first past_bars / eta^(rungs-1-k) bars and keeps the best
/// 1/eta. Every candidate is returned with the score of its last rung, ranked.
/// Throws ValidationError for empty or misaligned inputs.
std::vector<StrategyRecord> search_strategies(const StrategySpace& space,
                                              std::span<const Bar> past_bars,
                                              const SignalInputs& past_inputs,
                                              const StrategySearchOptions& options);

/// Backtests every record on the future window and sets its significance flag.
void evaluate_future(std::vector<StrategyRecord>& records, std::span<const Bar> future_bars,
                     const SignalInputs& future_inputs, double fee_rate, int workers = 1);

struct EnsembleResult {
  std::vector<std::size_t> members;  // record ids, best first
  std::vector<double> positions;     // mean of member executed positions
  BacktestResult backtest;
  BacktestMetrics metrics;
  std::vector<double> returns;                // per-bar ensemble returns
  std::vector<double> risk_adjusted_returns;  // scaled to benchmark volatility
  double benchmark_volatility = 0.0;
  double ensemble_volatility = 0.0;
  double max_member_volatility = 0.0;
};

/// Equal-weight mean of the executed positions of the first K ranked records,
/// backtested as one account on the future window. Throws ValidationError
/// when fewer than K records exist.
EnsembleResult build_ensemble(std::span<const StrategyRecord> ranked, std::size_t k,
                              std::span<const Bar> future_bars,
                              const SignalInputs& future_inputs, double fee_rate);

/// Close-to-close returns of holding the asset.
std::vector<double> benchmark_returns(std::span<const Bar> bars);

/// Multiplies each return by sigma_benchmark / sigma_ensemble.
/// Throws std::invalid_argument when the ensemble series is flat or sizes differ.
std::vector<double> risk_adjust(std::span<const double> ensemble_returns,
                                std::span<const double> benchmark_returns);

struct Correlation {
  std::optional<double> value;
  bool undefined = false;   // fewer than two significant records
  bool degenerate = false;  // zero variance; value reported as 0
};

struct CrossDatasetRow {
  std::size_t id = 0;
  double past = 0.0;  // past monthly return or past score
  double future_return = 0.0;
  bool significant = false;
};

struct CrossDatasetReport {
  std::vector<CrossDatasetRow> returns_table;  // past return vs future return
  std::vector<CrossDatasetRow> scores_table;   // past score vs future return
  std::size_t significant_count = 0;
  Correlation return_spearman, return_pearson;
  Correlation score_spearman, score_pearson;
};

/// Records lacking future metrics are skipped.
CrossDatasetReport cross_dataset_report(std::span<const StrategyRecord> records);

void write_report_csv(const std::filesystem::path& path, std::span<const CrossDatasetRow> rows,
                      const std::string& past_column);

void write_records_jsonl(const std::filesystem::path& path,
                         std::span<const StrategyRecord> records);
std::vector<StrategyRecord> read_records_jsonl(const std::filesystem::path& path);

}  // namespace labelstrat
