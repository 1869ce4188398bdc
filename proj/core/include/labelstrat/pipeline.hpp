#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "labelstrat/classifier.hpp"
#include "labelstrat/features.hpp"
#include "labelstrat/ingest.hpp"
#include "labelstrat/labels.hpp"
#include "labelstrat/search_ensemble.hpp"
#include "labelstrat/separation.hpp"
#include "labelstrat/strategy.hpp"
#include "labelstrat/synth.hpp"

namespace labelstrat {

struct PipelineConfig {
  std::filesystem::path base_dir;  // relative paths resolve here
  std::optional<std::filesystem::path> ticks_path;
  std::optional<std::filesystem::path> bars_path;
  std::optional<SynthConfig> synthetic;
  SplitConfig windows;
  std::vector<LabelSpec> labels;
  FeatureSpace feature_space;
  FeatureSearchOptions separation;
  HyperSpace hyper_space;
  std::size_t tuning_budget = 3;
  double tuning_eta = 3.0;
  StrategySpace strategy_space;
  StrategySearchOptions strategy_search;
  std::vector<std::size_t> ensemble_sizes{5, 10, 20};
  double fee_rate = kDefaultFeeRate;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  int workers = 1;
};

/// Schema and cross-field checks on a JSON config. Empty means valid.
/// `base_dir` resolves relative file references, which must exist.
std::vector<std::string> validate_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir);
std::vector<std::string> validate_config_file(const std::filesystem::path& path);

/// Validates then parses. Throws ValidationError listing every diagnostic.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Runtime failure inside a pipeline stage; `stage()` names it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct PipelineOutcome {
  std::filesystem::path out_dir;
  std::vector<std::string> stages_completed;
};

/// ingest -> labels -> feature search -> classifiers -> probability streams ->
/// strategy search -> ensembles -> reports. Every stage writes its artifacts
/// under config.out_dir and STATUS.json records the last stage reached.
/// Identical config and seeds give byte-identical artifacts.
PipelineOutcome run_pipeline(const PipelineConfig& config, std::ostream* log = nullptr);

}  // namespace labelstrat
