#include "labelstrat/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "json.hpp"
#include "labelstrat/backtest.hpp"
#include "labelstrat/error.hpp"
#include "labelstrat/io.hpp"
#include "labelstrat/parallel.hpp"
#include "labelstrat/rng.hpp"
#include "labelstrat/stats.hpp"
#include "labelstrat/time.hpp"

namespace labelstrat {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Collects diagnostics while filling a PipelineConfig; each section parses independently.
class ConfigReader {
 public:
  ConfigReader(const json& root, fs::path base_dir) : root_(root), base_(std::move(base_dir)) {
    cfg_.base_dir = base_;
  }

  PipelineConfig read() {
    if (!root_.is_object()) {
      fail("config root must be a JSON object");
      return cfg_;
    }
    section("general", [&] { general(); });
    section("data", [&] { data(); });
    section("windows", [&] { windows(); });
    section("labels", [&] { labels(); });
    section("feature_space", [&] { feature_space(); });
    section("separation", [&] { separation(); });
    section("classifier", [&] { classifier(); });
    section("strategy", [&] { strategy(); });
    section("ensembles", [&] { ensembles(); });
    cross_checks();
    return cfg_;
  }

  std::vector<std::string> diagnostics;

 private:
  void fail(std::string message) { diagnostics.push_back(std::move(message)); }

  template <class Fn>
  void section(const char* name, Fn&& fn) {
    try {
      fn();
    } catch (const json::exception& e) {
      fail(fmt::format("{}: {}", name, e.what()));
    } catch (const ValidationError& e) {
      fail(fmt::format("{}: {}", name, e.what()));
    } catch (const std::invalid_argument& e) {
      fail(fmt::format("{}: {}", name, e.what()));
    }
  }

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base_ / path;
  }

  fs::path existing(const std::string& p, const char* what) {
    const fs::path path = resolve(p);
    if (!fs::exists(path)) fail(fmt::format("{} '{}' does not exist", what, path.string()));
    return path;
  }

  static std::pair<double, double> range_of(const json& j, const char* key,
                                            std::pair<double, double> fallback) {
    if (!j.contains(key)) return fallback;
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 2) throw ValidationError(fmt::format("{} must be [lo, hi]", key));
    return {v[0], v[1]};
  }

  void general() {
    cfg_.seed = root_.value("seed", std::uint64_t{0});
    cfg_.out_dir = resolve(root_.value("out_dir", std::string("out")));
    cfg_.workers = root_.value("workers", 1);
    cfg_.fee_rate = root_.value("fee_rate", kDefaultFeeRate);
    if (!(cfg_.fee_rate >= 0.0 && cfg_.fee_rate < 1.0)) fail("fee_rate must lie in [0, 1)");
    if (cfg_.workers < 1) fail("workers must be at least 1");
  }

  void data() {
    const json& d = root_.at("data");
    int sources = 0;
    if (d.contains("ticks")) {
      ++sources;
      cfg_.ticks_path = existing(d.at("ticks").get<std::string>(), "tick file");
    }
    if (d.contains("bars")) {
      ++sources;
      cfg_.bars_path = existing(d.at("bars").get<std::string>(), "bar file");
    }
    if (d.contains("synthetic")) {
      ++sources;
      const json& s = d.at("synthetic");
      SynthConfig sc;
      if (s.contains("start_date")) sc.start_day = parse_iso_date(s.at("start_date").get<std::string>());
      sc.days = s.value("days", sc.days);
      sc.initial_price = s.value("initial_price", sc.initial_price);
      sc.ticks_per_minute = s.value("ticks_per_minute", sc.ticks_per_minute);
      sc.volatility_per_minute = s.value("volatility_per_minute", sc.volatility_per_minute);
      sc.drift_per_minute = s.value("drift_per_minute", sc.drift_per_minute);
      sc.mean_regime_minutes = s.value("mean_regime_minutes", sc.mean_regime_minutes);
      sc.trend_probability = s.value("trend_probability", sc.trend_probability);
      sc.mean_quantity = s.value("mean_quantity", sc.mean_quantity);
      sc.trend_volume_multiplier = s.value("trend_volume_multiplier", sc.trend_volume_multiplier);
      sc.seed = s.value("seed", derive_seed(root_.value("seed", std::uint64_t{0}), 0x5EED));
      if (sc.days < 1) fail("data.synthetic.days must be positive");
      if (!(sc.initial_price > 0.0) || !(sc.ticks_per_minute > 0.0)) {
        fail("data.synthetic prices and tick rate must be positive");
      }
      if (sc.trend_probability < 0.0 || sc.trend_probability > 1.0) {
        fail("data.synthetic.trend_probability must lie in [0, 1]");
      }
      if (!(sc.mean_regime_minutes >= 1.0)) fail("data.synthetic.mean_regime_minutes must be >= 1");
      cfg_.synthetic = sc;
    }
    if (sources != 1) fail("data must name exactly one of ticks, bars or synthetic");
  }

  DateWindow window(const json& w, const char* name) {
    const auto dates = w.at(name).get<std::vector<std::string>>();
    if (dates.size() != 2) throw ValidationError(fmt::format("{} must be [first_date, last_date]", name));
    DateWindow out{parse_iso_date(dates[0]), parse_iso_date(dates[1])};
    if (out.last_day < out.first_day) fail(fmt::format("windows.{} ends before it starts", name));
    return out;
  }

  void windows() {
    const json& w = root_.at("windows");
    cfg_.windows.train = window(w, "train");
    cfg_.windows.past = window(w, "past");
    cfg_.windows.future = window(w, "future");
    cfg_.windows.min_gap_days = w.value("min_gap_days", std::int64_t{1});
    if (cfg_.windows.min_gap_days < 1) fail("windows.min_gap_days must be at least 1");
    const auto gap1 = cfg_.windows.past.first_day - cfg_.windows.train.last_day;
    const auto gap2 = cfg_.windows.future.first_day - cfg_.windows.past.last_day;
    if (gap1 < cfg_.windows.min_gap_days) {
      fail(fmt::format("windows: train->past gap of {} days is below the minimum {}", gap1,
                       cfg_.windows.min_gap_days));
    }
    if (gap2 < cfg_.windows.min_gap_days) {
      fail(fmt::format("windows: past->future gap of {} days is below the minimum {}", gap2,
                       cfg_.windows.min_gap_days));
    }
  }

  void labels() {
    if (root_.contains("labels_file")) {
      const auto path = existing(root_.at("labels_file").get<std::string>(), "label file");
      if (fs::exists(path)) cfg_.labels = io::load_label_specs(path);
    } else {
      for (const auto& l : root_.at("labels")) {
        cfg_.labels.push_back(io::parse_label_spec(l.dump()));
      }
    }
    if (cfg_.labels.empty()) fail("labels: at least one label required");
    std::set<std::string> names;
    for (const auto& l : cfg_.labels) {
      if (!names.insert(l.name).second) fail(fmt::format("labels: duplicate name '{}'", l.name));
      if (l.name.empty() || l.name.find_first_of(",/\\ ") != std::string::npos) {
        fail(fmt::format("labels: name '{}' must be non-empty without commas, slashes or spaces",
                         l.name));
      }
    }
  }

  void feature_space() {
    if (root_.contains("feature_space_file")) {
      const auto path = existing(root_.at("feature_space_file").get<std::string>(), "feature space file");
      if (fs::exists(path)) cfg_.feature_space = io::load_feature_space(path);
    } else {
      cfg_.feature_space = io::parse_feature_space(root_.at("feature_space").dump());
    }
  }

  void separation() {
    const json s = root_.value("separation", json::object());
    auto& o = cfg_.separation;
    o.budget = s.value("budget", o.budget);
    o.n_per_class = s.value("n_per_class", o.n_per_class);
    o.min_per_class = s.value("min_per_class", o.min_per_class);
    o.eta = s.value("eta", o.eta);
    o.bins = s.value("bins", o.bins);
    o.weight.cutoff = s.value("weight_cutoff", o.weight.cutoff);
    o.power_cap = s.value("power_cap", o.power_cap);
    if (o.budget < 1) fail("separation.budget must be at least 1");
    if (o.n_per_class < 1 || o.min_per_class < 1 || o.min_per_class > o.n_per_class) {
      fail("separation: need 1 <= min_per_class <= n_per_class");
    }
    if (!(o.eta > 1.0)) fail("separation.eta must exceed 1");
    if (o.bins < 1) fail("separation.bins must be positive");
    if (!(o.weight.cutoff > 0.0)) fail("separation.weight_cutoff must be positive");
  }

  void classifier() {
    const json c = root_.value("classifier", json::object());
    if (c.contains("space")) cfg_.hyper_space = io::parse_hyper_space(c.at("space").dump());
    cfg_.tuning_budget = c.value("tuning_budget", cfg_.tuning_budget);
    cfg_.tuning_eta = c.value("eta", cfg_.tuning_eta);
    const auto& h = cfg_.hyper_space;
    if (cfg_.tuning_budget < 1) fail("classifier.tuning_budget must be at least 1");
    if (!(cfg_.tuning_eta > 1.0)) fail("classifier.eta must exceed 1");
    if (!(h.validation_fraction > 0.0 && h.validation_fraction < 1.0)) {
      fail("classifier.space.validation_fraction must lie in (0, 1)");
    }
    for (int w : h.widths) {
      if (w < 1) fail("classifier.space.widths must be positive");
    }
    for (auto b : h.batch_sizes) {
      if (b < 1) fail("classifier.space.batch_sizes must be positive");
    }
  }

  void strategy() {
    const json s = root_.value("strategy", json::object());
    auto& o = cfg_.strategy_search;
    o.budget = s.value("budget", o.budget);
    o.rungs = s.value("rungs", o.rungs);
    o.eta = s.value("eta", o.eta);
    if (o.budget < 1) fail("strategy.budget must be at least 1");
    if (o.rungs < 1) fail("strategy.rungs must be at least 1");
    if (!(o.eta > 1.0)) fail("strategy.eta must exceed 1");
    auto& sp = cfg_.strategy_space;
    const json space = s.value("space", json::object());
    std::tie(sp.y_buy_lo, sp.y_buy_hi) = range_of(space, "y_buy", {sp.y_buy_lo, sp.y_buy_hi});
    std::tie(sp.y_sell_lo, sp.y_sell_hi) = range_of(space, "y_sell", {sp.y_sell_lo, sp.y_sell_hi});
    std::tie(sp.y_width_lo, sp.y_width_hi) =
        range_of(space, "y_width", {sp.y_width_lo, sp.y_width_hi});
    std::tie(sp.weight_lo, sp.weight_hi) = range_of(space, "weight", {sp.weight_lo, sp.weight_hi});
    for (auto [name, lo, hi] : {std::tuple{"y_buy", sp.y_buy_lo, sp.y_buy_hi},
                                std::tuple{"y_sell", sp.y_sell_lo, sp.y_sell_hi},
                                std::tuple{"y_width", sp.y_width_lo, sp.y_width_hi}}) {
      if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) {
        fail(fmt::format("strategy.space.{} must satisfy 0 <= lo <= hi <= 1", name));
      }
    }
    if (!(sp.weight_lo <= sp.weight_hi)) fail("strategy.space.weight must satisfy lo <= hi");
    if (sp.y_sell_hi >= sp.y_buy_lo) {
      fail(fmt::format("strategy.space: y_sell upper bound {} must be below y_buy lower bound {}",
                       sp.y_sell_hi, sp.y_buy_lo));
    }
  }

  void ensembles() {
    if (root_.contains("ensemble_sizes")) {
      cfg_.ensemble_sizes = root_.at("ensemble_sizes").get<std::vector<std::size_t>>();
    }
    for (auto k : cfg_.ensemble_sizes) {
      if (k < 1) fail("ensemble_sizes must be positive");
    }
    if (!std::is_sorted(cfg_.ensemble_sizes.begin(), cfg_.ensemble_sizes.end())) {
      fail("ensemble_sizes must be ascending");
    }
  }

  void cross_checks() {
    cfg_.strategy_space.label_count = cfg_.labels.size();
    cfg_.strategy_search.fee_rate = cfg_.fee_rate;
    cfg_.strategy_search.workers = cfg_.workers;
    cfg_.separation.workers = cfg_.workers;
    for (auto k : cfg_.ensemble_sizes) {
      if (k > cfg_.strategy_search.budget) {
        fail(fmt::format("ensemble size {} exceeds the strategy budget {}", k,
                         cfg_.strategy_search.budget));
      }
    }
    if (cfg_.synthetic) {
      const auto last = cfg_.synthetic->start_day + cfg_.synthetic->days - 1;
      if (cfg_.windows.train.first_day < cfg_.synthetic->start_day || cfg_.windows.future.last_day > last) {
        fail(fmt::format("windows fall outside the synthetic market {}..{}",
                         format_iso_date(cfg_.synthetic->start_day), format_iso_date(last)));
      }
    }
  }

  const json& root_;
  fs::path base_;
  PipelineConfig cfg_;
};

std::pair<PipelineConfig, std::vector<std::string>> read_config(const std::string& text,
                                                                const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    return {PipelineConfig{}, {fmt::format("config is not valid JSON: {}", e.what())}};
  }
  ConfigReader reader(root, base_dir);
  PipelineConfig cfg = reader.read();
  return {std::move(cfg), std::move(reader.diagnostics)};
}

fs::path config_dir(const fs::path& path) {
  const fs::path parent = path.parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

}  // namespace

std::vector<std::string> validate_config(const std::string& json_text, const fs::path& base_dir) {
  return read_config(json_text, base_dir).second;
}

std::vector<std::string> validate_config_file(const fs::path& path) {
  if (!fs::exists(path)) return {fmt::format("config file '{}' does not exist", path.string())};
  return validate_config(io::read_text(path), config_dir(path));
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  if (!fs::exists(path)) {
    throw ValidationError(fmt::format("config file '{}' does not exist", path.string()));
  }
  auto [cfg, diagnostics] = read_config(io::read_text(path), config_dir(path));
  if (!diagnostics.empty()) {
    std::string message = fmt::format("{} has {} problem(s):", path.string(), diagnostics.size());
    for (const auto& d : diagnostics) message += "\n  " + d;
    throw ValidationError(message);
  }
  return cfg;
}

namespace {

LabelSeries slice_labels(const LabelSeries& labels, IndexRange range) {
  LabelSeries out;
  const auto b = static_cast<std::ptrdiff_t>(range.begin);
  const auto e = static_cast<std::ptrdiff_t>(range.end);
  out.cls.assign(labels.cls.begin() + b, labels.cls.begin() + e);
  out.continuous.assign(labels.continuous.begin() + b, labels.continuous.begin() + e);
  out.valid.assign(labels.valid.begin() + b, labels.valid.begin() + e);
  return out;
}

json correlation_json(const Correlation& c) {
  return {{"value", c.value ? json(*c.value) : json(nullptr)},
          {"undefined", c.undefined},
          {"degenerate", c.degenerate}};
}

json metrics_json(const BacktestMetrics& m) {
  return {{"monthly_return", m.monthly_return},
          {"transactions_per_month", m.transactions_per_month},
          {"mean_capital_involvement", m.mean_capital_involvement},
          {"return_volatility", m.return_volatility},
          {"total_return", m.total_return},
          {"transactions", m.transactions},
          {"window_days", m.window_days}};
}

json range_json(std::span<const Bar> bars, IndexRange r) {
  return {{"begin", r.begin},
          {"end", r.end},
          {"first_open_time", bars[r.begin].open_time},
          {"last_open_time", bars[r.end - 1].open_time}};
}

class Runner {
 public:
  Runner(const PipelineConfig& config, std::ostream* log) : cfg_(config), log_(log) {}

  PipelineOutcome run() {
    fs::create_directories(cfg_.out_dir);
    for (const char* sub : {"labels", "features", "separation", "models", "ensembles"}) {
      fs::create_directories(cfg_.out_dir / sub);
    }
    stage("ingest", [&] { ingest(); });
    stage("labels", [&] { labels(); });
    stage("features", [&] { features(); });
    stage("train", [&] { train_models(); });
    stage("signal", [&] { probabilities(); });
    stage("search", [&] { search(); });
    stage("ensemble", [&] { ensembles(); });
    stage("report", [&] { report(); });
    return outcome_;
  }

 private:
  template <class Fn>
  void stage(const std::string& name, Fn&& fn) {
    say("[{}] start", name);
    try {
      fn();
    } catch (const StageError&) {
      throw;
    } catch (const ValidationError& e) {
      write_status(name, e.what());
      throw ValidationError(name + ": " + e.what());
    } catch (const std::exception& e) {
      write_status(name, e.what());
      throw StageError(name, e.what());
    }
    outcome_.stages_completed.push_back(name);
    write_status({}, {});
    say("[{}] done", name);
  }

  template <class... Args>
  void say(fmt::format_string<Args...> f, Args&&... args) {
    if (log_) *log_ << fmt::format(f, std::forward<Args>(args)...) << '\n' << std::flush;
  }

  void write_status(const std::string& failed_stage, const std::string& message) {
    json j = {{"completed", outcome_.stages_completed},
              {"last_completed",
               outcome_.stages_completed.empty() ? json(nullptr) : json(outcome_.stages_completed.back())},
              {"failed_stage", failed_stage.empty() ? json(nullptr) : json(failed_stage)},
              {"error", message.empty() ? json(nullptr) : json(message)}};
    io::write_text(cfg_.out_dir / "STATUS.json", j.dump(2) + "\n");
  }

  std::span<const Bar> window(IndexRange r) const { return slice(bars_, r); }

  void ingest() {
    if (cfg_.bars_path) {
      bars_ = read_bars_csv(*cfg_.bars_path);
    } else {
      const auto ticks = cfg_.ticks_path ? read_ticks_csv(*cfg_.ticks_path)
                                         : generate_ticks(*cfg_.synthetic);
      say("  {} ticks", ticks.size());
      bars_ = aggregate_ticks(ticks);
    }
    say("  {} bars", bars_.size());
    split_ = split_datasets(bars_, cfg_.windows);
    write_bars_csv(cfg_.out_dir / "bars.csv", bars_);
    write_bars_csv(cfg_.out_dir / "bars_past.csv", window(split_.past));
    write_bars_csv(cfg_.out_dir / "bars_future.csv", window(split_.future));
    const json j = {{"train", range_json(bars_, split_.train)},
                    {"past", range_json(bars_, split_.past)},
                    {"future", range_json(bars_, split_.future)},
                    {"gap_days", split_.gap_days}};
    io::write_text(cfg_.out_dir / "split.json", j.dump(2) + "\n");
  }

  void labels() {
    for (const auto& spec : cfg_.labels) {
      label_series_.push_back(compute_labels(bars_, spec));
      const auto counts = slice_labels(label_series_.back(), split_.train).class_counts();
      say("  {}: train classes buy={} neutral={} sell={}", spec.name, counts[0], counts[1], counts[2]);
      write_labels_csv(cfg_.out_dir / "labels" / (spec.name + ".csv"), bars_, label_series_.back());
    }
  }

  void features() {
    const auto train_bars = window(split_.train);
    for (std::size_t l = 0; l < cfg_.labels.size(); ++l) {
      const auto& name = cfg_.labels[l].name;
      FeatureSearchOptions options = cfg_.separation;
      options.seed = derive_seed(cfg_.seed, 1000 + l);
      const auto result = search_feature_set(train_bars, cfg_.feature_space,
                                             slice_labels(label_series_[l], split_.train), options);
      say("  {}: separation power {} over {} rung(s)", name, result.report.power, result.rungs);
      io::save_feature_set(cfg_.out_dir / "features" / (name + ".json"), result.chosen);
      io::save_separation_report(cfg_.out_dir / "separation" / (name + ".json"), name, result);
      feature_sets_.push_back(result.chosen);
    }
  }

  void train_models() {
    for (std::size_t l = 0; l < cfg_.labels.size(); ++l) {
      const auto& name = cfg_.labels[l].name;
      matrices_.push_back(feature_matrix(bars_, feature_sets_[l]));
      const Samples samples = make_samples(matrices_.back(), label_series_[l], split_.train);
      TuningResult tuned = tune_hyperparameters(cfg_.hyper_space, samples, cfg_.tuning_budget,
                                                derive_seed(cfg_.seed, 2000 + l),
                                                TuningOptions{cfg_.tuning_eta, cfg_.workers});
      tuned.model.label_name = name;
      tuned.model.features = feature_sets_[l];
      const std::size_t split = samples.size() - static_cast<std::size_t>(std::floor(
          static_cast<double>(samples.size()) * tuned.best.validation_fraction));
      const auto metrics = evaluate(tuned.model, samples.subset(split, samples.size()));
      say("  {}: {} samples, validation balanced accuracy {}", name, samples.size(),
          metrics.balanced_accuracy);
      save_model(tuned.model, cfg_.out_dir / "models" / (name + ".json"),
                 cfg_.out_dir / "models" / (name + ".bin"));
      io::save_metrics(cfg_.out_dir / "models" / (name + "_metrics.json"), metrics);
      models_.push_back(std::move(tuned.model));
    }
  }

  io::ProbabilityTable probability_table(IndexRange range) const {
    io::ProbabilityTable table;
    for (const auto& l : cfg_.labels) table.labels.push_back(l.name);
    const std::size_t width = 3 * models_.size();
    table.values.assign(range.size() * width, 0.0);
    for (std::size_t b = range.begin; b < range.end; ++b) table.open_time.push_back(bars_[b].open_time);
    parallel_for(range.size(), cfg_.workers, [&](std::size_t i) {
      const std::size_t bar = range.begin + i;
      for (std::size_t l = 0; l < models_.size(); ++l) {
        const auto row = matrices_[l].row_for_bar(bar);
        if (!row) {
          throw std::runtime_error(
              fmt::format("bar {} lies inside the feature warm-up of label '{}'", bar,
                          cfg_.labels[l].name));
        }
        const auto p = predict(models_[l], *row);
        std::copy(p.begin(), p.end(), table.values.begin() + static_cast<std::ptrdiff_t>(i * width + 3 * l));
      }
    });
    return table;
  }

  void probabilities() {
    const auto past = probability_table(split_.past);
    const auto future = probability_table(split_.future);
    io::write_probabilities_csv(cfg_.out_dir / "probabilities_past.csv", past);
    io::write_probabilities_csv(cfg_.out_dir / "probabilities_future.csv", future);
    past_inputs_ = io::signal_inputs(past, window(split_.past));
    future_inputs_ = io::signal_inputs(future, window(split_.future));
  }

  void search() {
    StrategySearchOptions options = cfg_.strategy_search;
    options.seed = derive_seed(cfg_.seed, 3000);
    records_ = search_strategies(cfg_.strategy_space, window(split_.past), past_inputs_, options);
    evaluate_future(records_, window(split_.future), future_inputs_, cfg_.fee_rate, cfg_.workers);
    write_records_jsonl(cfg_.out_dir / "records.jsonl", records_);
    const auto significant = std::count_if(records_.begin(), records_.end(),
                                           [](const StrategyRecord& r) { return r.significant; });
    say("  {} strategies, {} significant on the future window", records_.size(), significant);
  }

  void ensembles() {
    const auto future_bars = window(split_.future);
    for (std::size_t k : cfg_.ensemble_sizes) {
      const auto e = build_ensemble(records_, k, future_bars, future_inputs_, cfg_.fee_rate);
      const std::string stem = fmt::format("top{}", k);
      write_equity_csv(cfg_.out_dir / "ensembles" / (stem + "_equity.csv"), future_bars, e.backtest);
      const double adjusted_total = [&] {
        double equity = 1.0;
        for (double r : e.risk_adjusted_returns) equity *= 1.0 + r;
        return equity - 1.0;
      }();
      json j = {{"k", k},
                {"members", e.members},
                {"future", metrics_json(e.metrics)},
                {"benchmark_volatility", e.benchmark_volatility},
                {"ensemble_volatility", e.ensemble_volatility},
                {"max_member_volatility", e.max_member_volatility},
                {"risk_adjusted_total_return",
                 e.risk_adjusted_returns.empty() ? json(nullptr) : json(adjusted_total)},
                {"warnings", e.backtest.warnings}};
      io::write_text(cfg_.out_dir / "ensembles" / (stem + ".json"), j.dump(2) + "\n");
      say("  top {}: future monthly return {}", k, e.metrics.monthly_return);
      ensemble_summaries_.push_back(j);
    }
  }

  void report() {
    const auto rep = cross_dataset_report(records_);
    write_report_csv(cfg_.out_dir / "report_returns.csv", rep.returns_table, "past_monthly_return");
    write_report_csv(cfg_.out_dir / "report_scores.csv", rep.scores_table, "past_score");
    std::vector<double> significant_future;
    for (const auto& r : rep.returns_table) {
      if (r.significant) significant_future.push_back(r.future_return);
    }
    json median = nullptr;
    if (!significant_future.empty()) {
      std::sort(significant_future.begin(), significant_future.end());
      const std::size_t n = significant_future.size();
      median = n % 2 ? significant_future[n / 2]
                     : 0.5 * (significant_future[n / 2 - 1] + significant_future[n / 2]);
    }
    const json j = {{"strategies", records_.size()},
                    {"significant", rep.significant_count},
                    {"past_return_vs_future_return",
                     {{"spearman", correlation_json(rep.return_spearman)},
                      {"pearson", correlation_json(rep.return_pearson)}}},
                    {"past_score_vs_future_return",
                     {{"spearman", correlation_json(rep.score_spearman)},
                      {"pearson", correlation_json(rep.score_pearson)}}},
                    {"median_significant_future_monthly_return", median},
                    {"ensembles", ensemble_summaries_}};
    io::write_text(cfg_.out_dir / "report.json", j.dump(2) + "\n");
    if (rep.score_spearman.value) say("  score/future spearman {}", *rep.score_spearman.value);
  }

  const PipelineConfig& cfg_;
  std::ostream* log_;
  PipelineOutcome outcome_;
  std::vector<Bar> bars_;
  DatasetSplit split_;
  std::vector<LabelSeries> label_series_;
  std::vector<std::vector<FeatureSpec>> feature_sets_;
  std::vector<FeatureMatrix> matrices_;
  std::vector<ClassifierModel> models_;
  SignalInputs past_inputs_, future_inputs_;
  std::vector<StrategyRecord> records_;
  std::vector<json> ensemble_summaries_;
};

}  // namespace

PipelineOutcome run_pipeline(const PipelineConfig& config, std::ostream* log) {
  Runner runner(config, log);
  PipelineOutcome outcome = runner.run();
  outcome.out_dir = config.out_dir;
  return outcome;
}

}  // namespace labelstrat
