#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "labelstrat/error.hpp"
#include "labelstrat/io.hpp"
#include "labelstrat/pipeline.hpp"
#include "support.hpp"

using namespace labelstrat;
using labelstrat::testing::TempDir;
using nlohmann::json;

namespace {

json small_config() {
  return json::parse(R"({
    "seed": 7,
    "out_dir": "out",
    "fee_rate": 0.0005,
    "data": {"synthetic": {"start_date": "2020-01-01", "days": 14, "seed": 3,
                           "drift_per_minute": 0.0002}},
    "windows": {"train": ["2020-01-02", "2020-01-06"],
                "past": ["2020-01-08", "2020-01-10"],
                "future": ["2020-01-12", "2020-01-14"],
                "min_gap_days": 1},
    "labels": [{"name": "thr05", "tau": 0.005, "horizon_min": 30},
               {"kind": "ma_threshold", "tau": 0.004, "ma_window_min": 20}],
    "feature_space": [{"family": "vwap_minus_sma", "param_range": [2, 10]},
                      {"family": "momentum", "param_range": [5, 30]},
                      {"family": "realized_vol", "param_range": [10, 40]}],
    "separation": {"budget": 3, "n_per_class": 100, "min_per_class": 50},
    "classifier": {"tuning_budget": 1,
                   "space": {"widths": [8], "max_epochs": 2, "min_epochs": 1, "patience": 2,
                             "batch_sizes": [128]}},
    "strategy": {"budget": 20, "rungs": 2},
    "ensemble_sizes": [1, 3]
  })");
}

std::vector<std::string> diagnostics(const json& cfg, const std::filesystem::path& dir) {
  return validate_config(cfg.dump(), dir);
}

bool mentions(const std::vector<std::string>& diags, std::string_view needle) {
  return std::any_of(diags.begin(), diags.end(),
                     [&](const std::string& d) { return d.find(needle) != std::string::npos; });
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, SmallConfigIsValid) {
  TempDir dir("cfg_ok");
  EXPECT_TRUE(diagnostics(small_config(), dir.path()).empty());
}

TEST(Config, BundledConfigIsValid) {
  const auto diags =
      validate_config_file(std::filesystem::path(LABELSTRAT_SOURCE_DIR) / "configs/synthetic_pipeline.json");
  EXPECT_TRUE(diags.empty()) << (diags.empty() ? "" : diags.front());
}

TEST(Config, ReportsEveryProblem) {
  TempDir dir("cfg_bad");
  auto cfg = small_config();
  cfg["strategy"]["space"] = json::parse(R"({"y_buy": [0.2, 0.9], "y_sell": [0.0, 0.3]})");
  cfg["labels"][0]["tau"] = 0.0;
  cfg["windows"]["past"] = json::array({"2020-01-06", "2020-01-10"});
  const auto diags = diagnostics(cfg, dir.path());
  EXPECT_TRUE(mentions(diags, "y_sell")) << diags.size();
  EXPECT_TRUE(mentions(diags, "tau"));
  EXPECT_GE(diags.size(), 3u);
}

TEST(Config, MissingTickFileAndDuplicateLabels) {
  TempDir dir("cfg_missing");
  auto cfg = small_config();
  cfg["data"] = json::parse(R"({"ticks": "nowhere.csv"})");
  cfg["labels"][1]["name"] = "thr05";
  const auto diags = diagnostics(cfg, dir.path());
  EXPECT_TRUE(mentions(diags, "nowhere.csv"));
  EXPECT_TRUE(mentions(diags, "duplicate"));
}

TEST(Config, LoadThrowsWithDiagnostics) {
  TempDir dir("cfg_throw");
  auto cfg = small_config();
  cfg["ensemble_sizes"] = json::array({3, 1});
  std::ofstream(dir / "c.json") << cfg.dump();
  EXPECT_THROW(load_pipeline_config(dir / "c.json"), ValidationError);
}

TEST(Labels, UnnamedSpecGetsDescriptiveName) {
  const auto spec = io::parse_label_spec(R"({"tau": 0.012, "horizon_min": 5})");
  EXPECT_EQ(spec.name, "threshold_1.2pct_5m");
}

TEST(Pipeline, SmallRunIsReproducible) {
  TempDir dir("pipeline_small");
  std::ofstream(dir / "c.json") << small_config().dump(2);
  auto cfg = load_pipeline_config(dir / "c.json");
  cfg.out_dir = dir / "a";
  const auto outcome = run_pipeline(cfg);
  EXPECT_EQ(outcome.stages_completed.back(), "report");
  cfg.out_dir = dir / "b";
  cfg.workers = 2;
  run_pipeline(cfg);

  std::size_t compared = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), dir / "a");
    EXPECT_EQ(slurp(entry.path()), slurp(dir / "b" / rel)) << rel;
    ++compared;
  }
  EXPECT_GT(compared, 15u);
  const auto report = json::parse(slurp(dir / "a" / "report.json"));
  EXPECT_EQ(report.at("strategies").get<int>(), 20);
  const auto status = json::parse(slurp(dir / "a" / "STATUS.json"));
  EXPECT_EQ(status.at("last_completed"), "report");
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "labels" / "ma_threshold_0.4pct_20m.csv"));
}
