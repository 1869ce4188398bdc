#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "labelstrat/classifier.hpp"
#include "labelstrat/features.hpp"
#include "labelstrat/ingest.hpp"
#include "labelstrat/labels.hpp"
#include "labelstrat/separation.hpp"
#include "labelstrat/strategy.hpp"

// JSON and CSV readers/writers for the configuration files and stage artifacts.
// Parse failures throw ValidationError.
namespace labelstrat::io {

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// `{name, kind, tau, horizon_min, ma_window_min}`; a bare object or a list.
std::vector<LabelSpec> load_label_specs(const std::filesystem::path& path);
LabelSpec parse_label_spec(const std::string& json_text);

/// List of `{family, param_range:[lo, hi]}`.
FeatureSpace load_feature_space(const std::filesystem::path& path);
FeatureSpace parse_feature_space(const std::string& json_text);

/// List of `{family, param}`.
std::vector<FeatureSpec> load_feature_set(const std::filesystem::path& path);
void save_feature_set(const std::filesystem::path& path, std::span<const FeatureSpec> specs);

/// `{weights:[...], y_buy, y_sell, y_width}`.
StrategyParams load_strategy(const std::filesystem::path& path);
StrategyParams parse_strategy(const std::string& json_text);
void save_strategy(const std::filesystem::path& path, const StrategyParams& params);

Hyperparameters parse_hyperparameters(const std::string& json_text);
HyperSpace parse_hyper_space(const std::string& json_text);

void save_separation_report(const std::filesystem::path& path, const std::string& label_name,
                            const FeatureSearchResult& result);

void save_metrics(const std::filesystem::path& path, const ClassificationMetrics& metrics);

/// `open_time,<label>_p0,<label>_p1,<label>_p2,...`
struct ProbabilityTable {
  std::vector<std::string> labels;
  std::vector<std::int64_t> open_time;
  std::vector<double> values;  // row-major, 3 per label

  std::size_t rows() const noexcept { return open_time.size(); }
};

void write_probabilities_csv(const std::filesystem::path& path, const ProbabilityTable& table);
ProbabilityTable read_probabilities_csv(const std::filesystem::path& path);

/// Buy and sell probabilities per label, rows aligned with `bars` by open_time.
/// Throws ValidationError when a bar has no probability row.
SignalInputs signal_inputs(const ProbabilityTable& table, std::span<const Bar> bars);

}  // namespace labelstrat::io
