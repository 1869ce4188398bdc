#include "labelstrat/io.hpp"

#include <fstream>
#include <unordered_map>

#include <fmt/format.h>
#include <fmt/os.h>

#include "csv_util.hpp"
#include "json.hpp"
#include "labelstrat/error.hpp"

namespace labelstrat::io {

using nlohmann::json;

namespace {

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", what, e.what()));
  }
}

template <class Fn>
auto guarded(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", what, e.what()));
  }
}

LabelSpec label_from(const json& j) {
  LabelSpec spec;
  const std::string kind = j.value("kind", std::string("threshold"));
  if (kind == "threshold") {
    spec.kind = LabelKind::threshold;
  } else if (kind == "ma_threshold") {
    spec.kind = LabelKind::ma_threshold;
  } else {
    throw ValidationError(fmt::format("label: unknown kind '{}'", kind));
  }
  spec.tau = j.at("tau").get<double>();
  spec.horizon = j.value("horizon_min", spec.horizon);
  spec.ma_window = j.value("ma_window_min", spec.ma_window);
  // unnamed labels read like "threshold_1.2pct_5m" or "ma_threshold_0.8pct_60m"
  spec.name = j.contains("name")
                  ? j.at("name").get<std::string>()
                  : fmt::format("{}_{:g}pct_{}m", kind, spec.tau * 100.0,
                                spec.kind == LabelKind::threshold ? spec.horizon : spec.ma_window);
  validate(spec);
  return spec;
}

FeatureSpace space_from(const json& j) {
  if (!j.is_array() || j.empty()) throw ValidationError("feature space must be a non-empty list");
  FeatureSpace space;
  for (const auto& e : j) {
    FeatureSlot slot;
    slot.family = parse_family(e.at("family").get<std::string>());
    const auto range = e.at("param_range").get<std::vector<int>>();
    if (range.size() != 2 || range[0] < 1 || range[1] < range[0]) {
      throw ValidationError(fmt::format("{}: param_range must be [lo, hi] with 1 <= lo <= hi",
                                        family_name(slot.family)));
    }
    slot.range = ParamRange{range[0], range[1]};
    slot.norm_window = e.value("norm_window", 0);
    for (int p : {slot.range.lo, slot.range.hi}) {
      validate(FeatureSpec{slot.family, p, slot.range, slot.norm_window});
    }
    space.push_back(slot);
  }
  return space;
}

StrategyParams strategy_from(const json& j) {
  StrategyParams p;
  p.weights = j.at("weights").get<std::vector<double>>();
  p.y_buy = j.at("y_buy").get<double>();
  p.y_sell = j.at("y_sell").get<double>();
  p.y_width = j.at("y_width").get<double>();
  return p;
}

}  // namespace

std::string read_text(const std::filesystem::path& path) { return detail::slurp(path); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
}

std::vector<LabelSpec> load_label_specs(const std::filesystem::path& path) {
  const json j = parse_json(read_text(path), path.string());
  return guarded(path.string(), [&] {
    std::vector<LabelSpec> out;
    if (j.is_array()) {
      for (const auto& e : j) out.push_back(label_from(e));
    } else {
      out.push_back(label_from(j));
    }
    return out;
  });
}

LabelSpec parse_label_spec(const std::string& json_text) {
  const json j = parse_json(json_text, "label spec");
  return guarded("label spec", [&] { return label_from(j); });
}

FeatureSpace load_feature_space(const std::filesystem::path& path) {
  const json j = parse_json(read_text(path), path.string());
  return guarded(path.string(), [&] { return space_from(j); });
}

FeatureSpace parse_feature_space(const std::string& json_text) {
  const json j = parse_json(json_text, "feature space");
  return guarded("feature space", [&] { return space_from(j); });
}

std::vector<FeatureSpec> load_feature_set(const std::filesystem::path& path) {
  const json j = parse_json(read_text(path), path.string());
  return guarded(path.string(), [&] {
    const json& list = j.is_object() ? j.at("features") : j;
    std::vector<FeatureSpec> specs;
    for (const auto& e : list) {
      FeatureSpec spec;
      spec.family = parse_family(e.at("family").get<std::string>());
      spec.param = e.at("param").get<int>();
      spec.range = ParamRange{spec.param, spec.param};
      spec.norm_window = e.value("norm_window", 0);
      validate(spec);
      specs.push_back(spec);
    }
    if (specs.empty()) throw ValidationError(fmt::format("{}: empty feature set", path.string()));
    return specs;
  });
}

void save_feature_set(const std::filesystem::path& path, std::span<const FeatureSpec> specs) {
  json list = json::array();
  for (const auto& s : specs) {
    list.push_back({{"family", std::string(family_name(s.family))},
                    {"param", s.param},
                    {"norm_window", s.effective_norm_window()}});
  }
  write_text(path, list.dump(2) + "\n");
}

StrategyParams load_strategy(const std::filesystem::path& path) {
  return parse_strategy(read_text(path));
}

StrategyParams parse_strategy(const std::string& json_text) {
  const json j = parse_json(json_text, "strategy");
  return guarded("strategy", [&] { return strategy_from(j); });
}

void save_strategy(const std::filesystem::path& path, const StrategyParams& params) {
  const json j = {{"weights", params.weights},
                  {"y_buy", params.y_buy},
                  {"y_sell", params.y_sell},
                  {"y_width", params.y_width}};
  write_text(path, j.dump(2) + "\n");
}

Hyperparameters parse_hyperparameters(const std::string& json_text) {
  const json j = parse_json(json_text, "hyperparameters");
  return guarded("hyperparameters", [&] {
    Hyperparameters h;
    h.hidden = j.value("hidden", h.hidden);
    h.learning_rate = j.value("learning_rate", h.learning_rate);
    h.batch_size = j.value("batch_size", h.batch_size);
    h.beta = j.value("beta", h.beta);
    h.epochs = j.value("epochs", h.epochs);
    h.patience = j.value("patience", h.patience);
    h.validation_fraction = j.value("validation_fraction", h.validation_fraction);
    return h;
  });
}

HyperSpace parse_hyper_space(const std::string& json_text) {
  const json j = parse_json(json_text, "hyperparameter space");
  return guarded("hyperparameter space", [&] {
    HyperSpace s;
    s.widths = j.value("widths", s.widths);
    s.hidden_layers = j.value("hidden_layers", s.hidden_layers);
    if (j.contains("learning_rate")) {
      const auto lr = j.at("learning_rate").get<std::vector<double>>();
      if (lr.size() != 2 || !(lr[0] > 0.0) || lr[1] < lr[0]) {
        throw ValidationError("learning_rate must be [lo, hi] with 0 < lo <= hi");
      }
      s.learning_rate_lo = lr[0];
      s.learning_rate_hi = lr[1];
    }
    s.batch_sizes = j.value("batch_sizes", s.batch_sizes);
    if (j.contains("beta")) {
      const auto b = j.at("beta").get<std::vector<double>>();
      if (b.size() != 2 || b[0] < 0.0 || b[1] >= 1.0 || b[1] < b[0]) {
        throw ValidationError("beta must be [lo, hi] within [0, 1)");
      }
      s.beta_lo = b[0];
      s.beta_hi = b[1];
    }
    s.max_epochs = j.value("max_epochs", s.max_epochs);
    s.min_epochs = j.value("min_epochs", s.min_epochs);
    s.patience = j.value("patience", s.patience);
    s.validation_fraction = j.value("validation_fraction", s.validation_fraction);
    if (s.widths.empty() || s.batch_sizes.empty() || s.hidden_layers < 1 || s.max_epochs < 1) {
      throw ValidationError("hyperparameter space has an empty dimension");
    }
    return s;
  });
}

void save_separation_report(const std::filesystem::path& path, const std::string& label_name,
                            const FeatureSearchResult& result) {
  json features = json::array();
  for (const auto& s : result.chosen) {
    features.push_back({{"family", std::string(family_name(s.family))},
                        {"param", s.param},
                        {"norm_window", s.effective_norm_window()}});
  }
  json pairs = json::array();
  for (const auto& h : result.report.distances.pairs) {
    pairs.push_back({{"classes", {h.class_a, h.class_b}},
                     {"d_max", h.d_max},
                     {"n_a", h.n_a},
                     {"n_b", h.n_b},
                     {"counts", h.counts}});
  }
  json candidates = json::array();
  for (const auto& c : result.candidates) {
    candidates.push_back({{"params", c.params},
                          {"power", c.power},
                          {"rung", c.rung},
                          {"degenerate", c.degenerate}});
  }
  const json j = {{"label", label_name},
                  {"features", features},
                  {"power", result.report.power},
                  {"power_cap", result.report.power_cap},
                  {"weight_cutoff", result.report.weight.cutoff},
                  {"rungs", result.rungs},
                  {"available_per_class", result.report.distances.available},
                  {"sampled_per_class", result.report.distances.sampled},
                  {"histograms", pairs},
                  {"candidates", candidates}};
  write_text(path, j.dump(2) + "\n");
}

void save_metrics(const std::filesystem::path& path, const ClassificationMetrics& m) {
  const json j = {{"count", m.count},
                  {"confusion", m.confusion},
                  {"precision", m.precision},
                  {"recall", m.recall},
                  {"balanced_accuracy", m.balanced_accuracy},
                  {"scaled_loss", m.scaled_loss}};
  write_text(path, j.dump(2) + "\n");
}

void write_probabilities_csv(const std::filesystem::path& path, const ProbabilityTable& table) {
  auto out = fmt::output_file(path.string());
  out.print("open_time");
  for (const auto& l : table.labels) out.print(",{0}_p0,{0}_p1,{0}_p2", l);
  out.print("\n");
  const std::size_t width = 3 * table.labels.size();
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out.print("{}", table.open_time[r]);
    for (std::size_t c = 0; c < width; ++c) out.print(",{}", table.values[r * width + c]);
    out.print("\n");
  }
}

ProbabilityTable read_probabilities_csv(const std::filesystem::path& path) {
  const std::string text = detail::slurp(path);
  const auto lines = detail::lines_of(text);
  if (lines.empty()) throw ValidationError(fmt::format("{}: empty probability file", path.string()));
  ProbabilityTable table;
  const auto header = detail::split_fields(lines[0]);
  if (header.empty() || header[0] != "open_time" || (header.size() - 1) % 3 != 0) {
    throw ValidationError(fmt::format("{}: expected open_time followed by 3 columns per label",
                                      path.string()));
  }
  for (std::size_t c = 1; c < header.size(); c += 3) {
    std::string_view name = header[c];
    if (name.size() < 3 || name.substr(name.size() - 3) != "_p0") {
      throw ValidationError(fmt::format("{}: unexpected column '{}'", path.string(), name));
    }
    table.labels.emplace_back(name.substr(0, name.size() - 3));
  }
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto fields = detail::split_fields(lines[n]);
    if (fields.size() != header.size()) {
      throw ValidationError(fmt::format("{}:{}: expected {} fields", path.string(), n + 1,
                                        header.size()));
    }
    table.open_time.push_back(detail::parse_number<std::int64_t>(fields[0], n + 1, path));
    for (std::size_t c = 1; c < fields.size(); ++c) {
      table.values.push_back(detail::parse_number<double>(fields[c], n + 1, path));
    }
  }
  return table;
}

SignalInputs signal_inputs(const ProbabilityTable& table, std::span<const Bar> bars) {
  std::unordered_map<std::int64_t, std::size_t> index;
  index.reserve(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) index.emplace(table.open_time[r], r);
  const std::size_t labels = table.labels.size();
  SignalInputs out;
  out.width = 2 * labels;
  out.values.reserve(bars.size() * out.width);
  for (const Bar& bar : bars) {
    const auto it = index.find(bar.open_time);
    if (it == index.end()) {
      throw ValidationError(fmt::format("no probability row for bar {}", bar.open_time));
    }
    const double* row = table.values.data() + it->second * 3 * labels;
    for (std::size_t l = 0; l < labels; ++l) {
      out.values.push_back(row[3 * l]);
      out.values.push_back(row[3 * l + 2]);
    }
  }
  return out;
}

}  // namespace labelstrat::io
