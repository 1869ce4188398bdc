#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "labelstrat/backtest.hpp"
#include "labelstrat/classifier.hpp"
#include "labelstrat/error.hpp"
#include "labelstrat/features.hpp"
#include "labelstrat/ingest.hpp"
#include "labelstrat/io.hpp"
#include "labelstrat/labels.hpp"
#include "labelstrat/pipeline.hpp"
#include "labelstrat/rng.hpp"
#include "labelstrat/search_ensemble.hpp"
#include "labelstrat/separation.hpp"
#include "labelstrat/strategy.hpp"
#include "labelstrat/synth.hpp"
#include "labelstrat/time.hpp"

namespace fs = std::filesystem;
using namespace labelstrat;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  int workers = 1;

  std::uint64_t seed_or(std::uint64_t fallback) const { return seed.value_or(fallback); }
  fs::path out_dir() const {
    fs::create_directories(out);
    return out;
  }
};

json metrics_json(const BacktestMetrics& m) {
  return {{"monthly_return", m.monthly_return},
          {"transactions_per_month", m.transactions_per_month},
          {"mean_capital_involvement", m.mean_capital_involvement},
          {"return_volatility", m.return_volatility},
          {"total_return", m.total_return},
          {"transactions", m.transactions},
          {"window_days", m.window_days}};
}

/// Drops leading bars without a probability row (classifier warm-up) and
/// returns inputs aligned to the remaining bars.
SignalInputs load_inputs(const std::string& probabilities, std::vector<Bar>& bars) {
  const auto table = io::read_probabilities_csv(probabilities);
  if (table.rows() > 0) {
    const auto first = std::find_if(bars.begin(), bars.end(), [&](const Bar& b) {
      return b.open_time >= table.open_time.front();
    });
    if (first != bars.begin()) {
      fmt::print(stderr, "skipping {} bars before the first probability row\n",
                 std::distance(bars.begin(), first));
      bars.erase(bars.begin(), first);
    }
  }
  return io::signal_inputs(table, bars);
}

StrategySpace space_for(const SignalInputs& inputs) {
  StrategySpace space;
  space.label_count = inputs.width / 2;
  return space;
}

// ---- subcommands ----

struct SynthArgs {
  std::string start_date = "2020-01-01";
  int days = 30;
  double ticks_per_minute = 3.0;
};

void run_synth(const Globals& g, const SynthArgs& a) {
  SynthConfig config;
  config.start_day = parse_iso_date(a.start_date);
  config.days = a.days;
  config.ticks_per_minute = a.ticks_per_minute;
  config.seed = g.seed_or(1);
  const auto ticks = generate_ticks(config);
  const auto path = g.out_dir() / "ticks.csv";
  write_ticks_csv(path, ticks);
  fmt::print("{} ticks -> {}\n", ticks.size(), path.string());
}

void run_ingest(const Globals& g, const std::string& ticks_path) {
  const auto bars = aggregate_ticks(read_ticks_csv(ticks_path));
  const auto path = g.out_dir() / "bars.csv";
  write_bars_csv(path, bars);
  fmt::print("{} bars -> {}\n", bars.size(), path.string());
}

void run_label(const Globals& g, const std::string& bars_path, const std::string& label_config) {
  const auto bars = read_bars_csv(bars_path);
  const auto specs = label_config.empty() ? builtin_label_specs() : io::load_label_specs(label_config);
  const auto dir = g.out_dir() / "labels";
  fs::create_directories(dir);
  for (const auto& spec : specs) {
    const auto labels = compute_labels(bars, spec);
    const auto c = labels.class_counts();
    write_labels_csv(dir / (spec.name + ".csv"), bars, labels);
    fmt::print("{}: buy={} neutral={} sell={}\n", spec.name, c[0], c[1], c[2]);
  }
}

struct SepArgs {
  std::string bars, label, space;
  std::size_t budget = 27, n_per_class = 300, min_per_class = 100;
  double eta = 3.0;
};

void run_sep(const Globals& g, const SepArgs& a) {
  const auto bars = read_bars_csv(a.bars);
  const auto specs = io::load_label_specs(a.label);
  if (specs.size() != 1) throw ValidationError("sep expects exactly one label");
  FeatureSearchOptions options;
  options.budget = a.budget;
  options.n_per_class = a.n_per_class;
  options.min_per_class = a.min_per_class;
  options.eta = a.eta;
  options.seed = g.seed_or(0);
  options.workers = g.workers;
  const auto result = search_feature_set(bars, io::load_feature_space(a.space), specs[0], options);
  const auto out = g.out_dir();
  fs::create_directories(out / "features");
  fs::create_directories(out / "separation");
  io::save_feature_set(out / "features" / (specs[0].name + ".json"), result.chosen);
  io::save_separation_report(out / "separation" / (specs[0].name + ".json"), specs[0].name, result);
  fmt::print("{}: separation power {}\n", specs[0].name, result.report.power);
}

struct TrainArgs {
  std::string bars, label, features, hyper, hyper_space;
  std::size_t tune_budget = 0;
};

void run_train(const Globals& g, const TrainArgs& a) {
  const auto bars = read_bars_csv(a.bars);
  const auto specs = io::load_label_specs(a.label);
  if (specs.size() != 1) throw ValidationError("train expects exactly one label");
  const auto features = io::load_feature_set(a.features);
  const auto matrix = feature_matrix(bars, features);
  const auto labels = compute_labels(bars, specs[0]);
  const Samples samples = make_samples(matrix, labels);
  ClassifierModel model;
  if (a.tune_budget > 0) {
    const HyperSpace space =
        a.hyper_space.empty() ? HyperSpace{} : io::parse_hyper_space(io::read_text(a.hyper_space));
    model = tune_hyperparameters(space, samples, a.tune_budget, g.seed_or(0),
                                 TuningOptions{3.0, g.workers}).model;
  } else {
    const Hyperparameters h =
        a.hyper.empty() ? Hyperparameters{} : io::parse_hyperparameters(io::read_text(a.hyper));
    model = train(samples, h, g.seed_or(0));
  }
  model.label_name = specs[0].name;
  model.features = features;
  const auto dir = g.out_dir() / "models";
  fs::create_directories(dir);
  save_model(model, dir / (specs[0].name + ".json"), dir / (specs[0].name + ".bin"));
  const auto metrics = evaluate(model, samples);
  io::save_metrics(dir / (specs[0].name + "_metrics.json"), metrics);
  fmt::print("{}: {} epochs, balanced accuracy {}\n", specs[0].name, model.epochs_trained,
             metrics.balanced_accuracy);
}

void run_signal(const Globals& g, const std::string& bars_path,
                const std::vector<std::string>& model_paths) {
  const auto bars = read_bars_csv(bars_path);
  io::ProbabilityTable table;
  std::vector<ClassifierModel> models;
  std::vector<FeatureMatrix> matrices;
  for (const auto& p : model_paths) {
    models.push_back(load_model(p));
    if (models.back().features.empty()) throw ValidationError(p + ": model lists no features");
    matrices.push_back(feature_matrix(bars, models.back().features));
    table.labels.push_back(models.back().label_name);
  }
  for (std::size_t b = 0; b < bars.size(); ++b) {
    std::vector<double> row;
    bool complete = true;
    for (std::size_t m = 0; m < models.size() && complete; ++m) {
      const auto features = matrices[m].row_for_bar(b);
      if (!features) {
        complete = false;
        break;
      }
      const auto p = predict(models[m], *features);
      row.insert(row.end(), p.begin(), p.end());
    }
    if (!complete) continue;  // warm-up bars carry no prediction
    table.open_time.push_back(bars[b].open_time);
    table.values.insert(table.values.end(), row.begin(), row.end());
  }
  const auto path = g.out_dir() / "probabilities.csv";
  io::write_probabilities_csv(path, table);
  fmt::print("{} probability rows -> {}\n", table.rows(), path.string());
}

struct BacktestArgs {
  std::string strategy, bars, probabilities;
  double fee = kDefaultFeeRate;
};

void run_backtest_cmd(const Globals& g, const BacktestArgs& a) {
  auto bars = read_bars_csv(a.bars);
  const auto inputs = load_inputs(a.probabilities, bars);
  const auto params = io::load_strategy(a.strategy);
  validate(params, space_for(inputs));
  const auto positions = execute(signals(inputs, params), params);
  const auto result = run_backtest(bars, positions, a.fee);
  const auto metrics = compute_metrics(result, static_cast<double>(bars.size()) / kMinutesPerDay);
  const auto s = score(metrics);
  const auto out = g.out_dir();
  write_equity_csv(out / "equity.csv", bars, result);
  write_positions_csv(out / "positions.csv", bars, positions);
  const json j = {{"metrics", metrics_json(metrics)},
                  {"score",
                   {{"score", s.score},
                    {"monthly_return", s.monthly_return},
                    {"transaction_penalty", s.transaction_penalty},
                    {"capital_penalty", s.capital_penalty}}},
                  {"significant", significance_flag(metrics)},
                  {"fee_rate", a.fee},
                  {"equity_csv", "equity.csv"},
                  {"warnings", result.warnings}};
  io::write_text(out / "backtest.json", j.dump(2) + "\n");
  for (const auto& w : result.warnings) fmt::print(stderr, "warning: {}\n", w);
  fmt::print("monthly return {} %, {} tx/month, MCI {} %, score {}\n", metrics.monthly_return,
             metrics.transactions_per_month, metrics.mean_capital_involvement, s.score);
}

struct SearchArgs {
  std::string past_bars, past_probabilities, future_bars, future_probabilities;
  std::size_t budget = 200;
  int rungs = 1;
  double eta = 3.0, fee = kDefaultFeeRate;
};

void run_search(const Globals& g, const SearchArgs& a) {
  auto past = read_bars_csv(a.past_bars);
  const auto past_inputs = load_inputs(a.past_probabilities, past);
  StrategySearchOptions options;
  options.budget = a.budget;
  options.rungs = a.rungs;
  options.eta = a.eta;
  options.fee_rate = a.fee;
  options.seed = g.seed_or(0);
  options.workers = g.workers;
  auto records = search_strategies(space_for(past_inputs), past, past_inputs, options);
  if (!a.future_bars.empty()) {
    auto future = read_bars_csv(a.future_bars);
    const auto future_inputs = load_inputs(a.future_probabilities, future);
    evaluate_future(records, future, future_inputs, a.fee, g.workers);
  }
  const auto path = g.out_dir() / "records.jsonl";
  write_records_jsonl(path, records);
  fmt::print("{} records -> {}\n", records.size(), path.string());
}

struct EnsembleArgs {
  std::string records, bars, probabilities;
  std::size_t k = 5;
  double fee = kDefaultFeeRate;
};

void run_ensemble(const Globals& g, const EnsembleArgs& a) {
  const auto records = read_records_jsonl(a.records);
  auto bars = read_bars_csv(a.bars);
  const auto inputs = load_inputs(a.probabilities, bars);
  const auto e = build_ensemble(records, a.k, bars, inputs, a.fee);
  const auto dir = g.out_dir() / "ensembles";
  fs::create_directories(dir);
  const std::string stem = fmt::format("top{}", a.k);
  write_equity_csv(dir / (stem + "_equity.csv"), bars, e.backtest);
  const json j = {{"k", a.k},
                  {"members", e.members},
                  {"future", metrics_json(e.metrics)},
                  {"benchmark_volatility", e.benchmark_volatility},
                  {"ensemble_volatility", e.ensemble_volatility},
                  {"max_member_volatility", e.max_member_volatility},
                  {"risk_adjusted_returns", e.risk_adjusted_returns}};
  io::write_text(dir / (stem + ".json"), j.dump(2) + "\n");
  fmt::print("top {}: monthly return {} %\n", a.k, e.metrics.monthly_return);
}

json correlation_json(const Correlation& c) {
  return {{"value", c.value ? json(*c.value) : json(nullptr)},
          {"undefined", c.undefined},
          {"degenerate", c.degenerate}};
}

void run_report(const Globals& g, const std::string& records_path) {
  const auto records = read_records_jsonl(records_path);
  const auto rep = cross_dataset_report(records);
  const auto out = g.out_dir();
  write_report_csv(out / "report_returns.csv", rep.returns_table, "past_monthly_return");
  write_report_csv(out / "report_scores.csv", rep.scores_table, "past_score");
  const json j = {{"significant", rep.significant_count},
                  {"past_return_vs_future_return",
                   {{"spearman", correlation_json(rep.return_spearman)},
                    {"pearson", correlation_json(rep.return_pearson)}}},
                  {"past_score_vs_future_return",
                   {{"spearman", correlation_json(rep.score_spearman)},
                    {"pearson", correlation_json(rep.score_pearson)}}}};
  io::write_text(out / "report.json", j.dump(2) + "\n");
  fmt::print("{} significant strategies\n", rep.significant_count);
}

int run_pipeline_cmd(const Globals& g, bool validate_only, bool out_given, bool workers_given) {
  if (g.config.empty()) throw ValidationError("pipeline needs --config");
  const auto diagnostics = validate_config_file(g.config);
  if (!diagnostics.empty()) {
    for (const auto& d : diagnostics) fmt::print(stderr, "config: {}\n", d);
    return 2;
  }
  if (validate_only) {
    fmt::print("{}: valid\n", g.config);
    return 0;
  }
  PipelineConfig config = load_pipeline_config(g.config);
  if (g.seed) config.seed = *g.seed;
  if (out_given) config.out_dir = g.out;
  if (workers_given) {
    config.workers = g.workers;
    config.separation.workers = g.workers;
    config.strategy_search.workers = g.workers;
  }
  const auto outcome = run_pipeline(config, &std::cerr);
  fmt::print("pipeline complete ({} stages) -> {}\n", outcome.stages_completed.size(),
             outcome.out_dir.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-driven strategy research pipeline"};
  app.require_subcommand(1);
  Globals g;
  auto* config_opt = app.add_option("--config", g.config, "Pipeline config (JSON)");
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for every random draw");
  auto* out_opt = app.add_option("--out", g.out, "Output directory");
  auto* workers_opt = app.add_option("--workers", g.workers, "Worker threads (results do not depend on it)")
                          ->check(CLI::PositiveNumber);
  for (auto* o : {config_opt, seed_opt, out_opt, workers_opt}) o->configurable(false);
  app.fallthrough();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a regime-switching synthetic tick stream");
  synth->add_option("--start-date", synth_args.start_date, "First day (YYYY-MM-DD)");
  synth->add_option("--days", synth_args.days, "Number of days")->check(CLI::PositiveNumber);
  synth->add_option("--ticks-per-minute", synth_args.ticks_per_minute, "Mean tick rate");

  std::string ticks_path;
  auto* ingest = app.add_subcommand("ingest", "Aggregate ticks into one-minute bars");
  ingest->add_option("--ticks", ticks_path, "Tick CSV (timestamp_ms,price,quantity)")->required();

  std::string bars_path, label_config;
  auto* label = app.add_subcommand("label", "Compute label series for bars");
  label->add_option("--bars", bars_path, "Bar CSV")->required();
  label->add_option("--labels", label_config, "Label config JSON (default: built-in labels)");

  SepArgs sep_args;
  auto* sep = app.add_subcommand("sep", "Search the feature set with the highest separation power");
  sep->add_option("--bars", sep_args.bars, "Bar CSV")->required();
  sep->add_option("--label", sep_args.label, "Label config JSON (one label)")->required();
  sep->add_option("--space", sep_args.space, "Feature space JSON")->required();
  sep->add_option("--budget", sep_args.budget, "Candidate assignments");
  sep->add_option("--n-per-class", sep_args.n_per_class, "Per-class sample at the final rung");
  sep->add_option("--min-per-class", sep_args.min_per_class, "Per-class sample at the first rung");
  sep->add_option("--eta", sep_args.eta, "Halving rate");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier for one label");
  train_cmd->add_option("--bars", train_args.bars, "Bar CSV")->required();
  train_cmd->add_option("--label", train_args.label, "Label config JSON (one label)")->required();
  train_cmd->add_option("--features", train_args.features, "Feature set JSON")->required();
  train_cmd->add_option("--hyper", train_args.hyper, "Hyperparameter JSON");
  train_cmd->add_option("--tune-budget", train_args.tune_budget, "Tune over this many sampled configs");
  train_cmd->add_option("--hyper-space", train_args.hyper_space, "Hyperparameter space JSON for tuning");

  std::string signal_bars;
  std::vector<std::string> model_paths;
  auto* signal_cmd = app.add_subcommand("signal", "Write class probabilities per bar");
  signal_cmd->add_option("--bars", signal_bars, "Bar CSV")->required();
  signal_cmd->add_option("--models", model_paths, "Model header JSON files, one per label")->required();

  BacktestArgs backtest_args;
  auto* backtest = app.add_subcommand("backtest", "Backtest one strategy");
  backtest->add_option("--strategy", backtest_args.strategy, "Strategy JSON")->required();
  backtest->add_option("--bars", backtest_args.bars, "Bar CSV")->required();
  backtest->add_option("--probabilities", backtest_args.probabilities, "Probability CSV")->required();
  backtest->add_option("--fee", backtest_args.fee, "Proportional fee rate");

  SearchArgs search_args;
  auto* search = app.add_subcommand("search", "Sample and rank strategies on the past window");
  search->add_option("--past-bars", search_args.past_bars, "Past bar CSV")->required();
  search->add_option("--past-probabilities", search_args.past_probabilities, "Past probability CSV")->required();
  auto* fb = search->add_option("--future-bars", search_args.future_bars, "Future bar CSV");
  auto* fp = search->add_option("--future-probabilities", search_args.future_probabilities,
                                "Future probability CSV");
  fb->needs(fp);
  fp->needs(fb);
  search->add_option("--budget", search_args.budget, "Candidates");
  search->add_option("--rungs", search_args.rungs, "Halving rungs");
  search->add_option("--eta", search_args.eta, "Halving rate");
  search->add_option("--fee", search_args.fee, "Proportional fee rate");

  EnsembleArgs ensemble_args;
  auto* ensemble = app.add_subcommand("ensemble", "Combine the top K strategies");
  ensemble->add_option("--records", ensemble_args.records, "Ranked records JSONL")->required();
  ensemble->add_option("--bars", ensemble_args.bars, "Future bar CSV")->required();
  ensemble->add_option("--probabilities", ensemble_args.probabilities, "Future probability CSV")->required();
  ensemble->add_option("--k", ensemble_args.k, "Ensemble size")->check(CLI::PositiveNumber);
  ensemble->add_option("--fee", ensemble_args.fee, "Proportional fee rate");

  std::string records_path;
  auto* report = app.add_subcommand("report", "Cross-dataset tables and correlations");
  report->add_option("--records", records_path, "Records JSONL with future metrics")->required();

  bool validate_only = false;
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage from a config");
  pipeline->add_flag("--validate-only", validate_only, "Check the config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) run_synth(g, synth_args);
    if (*ingest) run_ingest(g, ticks_path);
    if (*label) run_label(g, bars_path, label_config);
    if (*sep) run_sep(g, sep_args);
    if (*train_cmd) run_train(g, train_args);
    if (*signal_cmd) run_signal(g, signal_bars, model_paths);
    if (*backtest) run_backtest_cmd(g, backtest_args);
    if (*search) run_search(g, search_args);
    if (*ensemble) run_ensemble(g, ensemble_args);
    if (*report) run_report(g, records_path);
    if (*pipeline) return run_pipeline_cmd(g, validate_only, out_opt->count() > 0, workers_opt->count() > 0);
    return 0;
  } catch (const ValidationError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const IngestError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const StageError& e) {
    fmt::print(stderr, "stage failed: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
