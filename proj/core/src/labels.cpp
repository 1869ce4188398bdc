#include "labelstrat/labels.hpp"

#include <cmath>

#include <fmt/format.h>
#include <fmt/os.h>

#include "labelstrat/error.hpp"

namespace labelstrat {

void validate(const LabelSpec& spec) {
  if (!(spec.tau > 0.0) || !std::isfinite(spec.tau)) {
    throw ValidationError(fmt::format("label '{}': tau must be positive", spec.name));
  }
  if (spec.horizon < 1) {
    throw ValidationError(fmt::format("label '{}': horizon must be at least 1 minute", spec.name));
  }
  if (spec.ma_window < 1) {
    throw ValidationError(fmt::format("label '{}': ma_window must be at least 1 minute", spec.name));
  }
}

std::array<std::size_t, 3> LabelSeries::class_counts() const {
  std::array<std::size_t, 3> counts{};
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (valid[i]) ++counts[cls[i]];
  }
  return counts;
}

std::size_t LabelSeries::valid_count() const {
  std::size_t n = 0;
  for (auto v : valid) n += v ? 1 : 0;
  return n;
}

std::optional<double> forward_return(std::span<const double> prices, std::size_t i,
                                     std::size_t horizon) {
  if (i >= prices.size() || horizon >= prices.size() - i) return std::nullopt;
  return prices[i + horizon] / prices[i] - 1.0;
}

int threshold_direction(double r, double tau) {
  if (std::abs(r) > tau) return r > 0.0 ? 1 : -1;
  return 0;
}

double continuous_direction(double r, double tau) {
  if (std::abs(r) > tau) return r > 0.0 ? 1.0 : -1.0;
  const double q = r / tau;
  return q * q * q;
}

namespace {

LabelSeries empty_series(std::size_t n) {
  LabelSeries out;
  out.cls.assign(n, kNeutral);
  out.continuous.assign(n, 1.0);
  out.valid.assign(n, 0);
  return out;
}

void set_label(LabelSeries& out, std::size_t i, double r, double tau) {
  out.cls[i] = static_cast<std::uint8_t>(1 - threshold_direction(r, tau));
  out.continuous[i] = direction_to_class(continuous_direction(r, tau));
  out.valid[i] = 1;
}

}  // namespace

LabelSeries threshold_label(std::span<const double> prices, const LabelSpec& spec) {
  validate(spec);
  LabelSeries out = empty_series(prices.size());
  const auto horizon = static_cast<std::size_t>(spec.horizon);
  for (std::size_t i = 0; i < prices.size(); ++i) {
    const auto r = forward_return(prices, i, horizon);
    if (!r) break;
    set_label(out, i, *r, spec.tau);
  }
  return out;
}

LabelSeries ma_threshold_label(std::span<const Bar> bars, const LabelSpec& spec) {
  validate(spec);
  const std::size_t n = bars.size();
  LabelSeries out = empty_series(n);
  const auto w = static_cast<std::size_t>(spec.ma_window);
  if (n <= w) return out;
  for (std::size_t i = 0; i + w < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = i + 1; j <= i + w; ++j) sum += bars[j].vwap;
    set_label(out, i, (sum / static_cast<double>(w)) / bars[i].vwap - 1.0, spec.tau);
  }
  return out;
}

std::vector<double> vwap_prices(std::span<const Bar> bars) {
  std::vector<double> out(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) out[i] = bars[i].vwap;
  return out;
}

LabelSeries compute_labels(std::span<const Bar> bars, const LabelSpec& spec) {
  switch (spec.kind) {
    case LabelKind::threshold:
      return threshold_label(vwap_prices(bars), spec);
    case LabelKind::ma_threshold:
      return ma_threshold_label(bars, spec);
  }
  throw ValidationError("unknown label kind");
}

std::vector<LabelSpec> builtin_label_specs() {
  return {
      {"threshold_1.2pct_5m", LabelKind::threshold, 0.012, 5, 1},
      {"threshold_1.2pct_60m", LabelKind::threshold, 0.012, 60, 1},
      {"threshold_2.2pct_2m", LabelKind::threshold, 0.022, 2, 1},
      {"threshold_3pct_5m", LabelKind::threshold, 0.03, 5, 1},
      {"threshold_3pct_60m", LabelKind::threshold, 0.03, 60, 1},
  };
}

LabelRegistry LabelRegistry::with_builtin() {
  LabelRegistry registry;
  for (const auto& spec : builtin_label_specs()) registry.add(spec);
  return registry;
}

void LabelRegistry::add(std::string name, LabelFunction fn) {
  if (name.empty()) throw ValidationError("label name must not be empty");
  entries_.insert_or_assign(std::move(name), std::move(fn));
}

void LabelRegistry::add(const LabelSpec& spec) {
  validate(spec);
  add(spec.name, [spec](std::span<const Bar> bars) { return compute_labels(bars, spec); });
}

bool LabelRegistry::contains(std::string_view name) const {
  return entries_.find(name) != entries_.end();
}

const LabelFunction& LabelRegistry::at(std::string_view name) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError(fmt::format("unknown label '{}'", name));
  return it->second;
}

std::vector<std::string> LabelRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, fn] : entries_) out.push_back(name);
  return out;
}

void write_labels_csv(const std::filesystem::path& path, std::span<const Bar> bars,
                      const LabelSeries& labels) {
  auto out = fmt::output_file(path.string());
  out.print("open_time,class,continuous\n");
  for (std::size_t i = 0; i < labels.size() && i < bars.size(); ++i) {
    if (!labels.valid[i]) continue;
    out.print("{},{},{}\n", bars[i].open_time, static_cast<int>(labels.cls[i]),
              labels.continuous[i]);
  }
}

}  // namespace labelstrat
