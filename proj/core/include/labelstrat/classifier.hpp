#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "labelstrat/features.hpp"
#include "labelstrat/ingest.hpp"
#include "labelstrat/labels.hpp"
#include "labelstrat/network.hpp"

namespace labelstrat {

/// Per-class base weights plus attenuation between integer class coordinates.
struct LossScaler {
  std::array<double, 3> weights{1.0, 1.0, 1.0};
  double beta = 0.0;  // in [0, 1)
};

/// Class index for a continuous label: nearest integer, half-integers go to neutral.
int class_of_continuous(double continuous);

/// Triangular dip: 0 at integers, 1 at half-integers.
double attenuation_profile(double continuous);

/// w[class_of_continuous(c)] * (1 - beta * tri(c)). Throws std::invalid_argument outside [0, 2].
double loss_scale(double continuous, const LossScaler& scaler);

/// Same curve with the class weight taken from the discrete label. Used for
/// training samples: inside the threshold band the discrete class is always
/// neutral even when the cubic companion has drifted close to 0 or 2.
double loss_scale(int cls, double continuous, const LossScaler& scaler);

/// Chooses w0 = w2 and w1 so that the summed scales of buy and sell samples
/// equal the summed scales of neutral samples, then rescales to mean 1.
/// Throws ValidationError when a class is missing.
LossScaler calibrate_scaler(std::span<const std::uint8_t> classes,
                            std::span<const double> continuous, double beta);
LossScaler calibrate_scaler(const LabelSeries& labels, double beta);

/// Feature rows paired with label targets.
struct Samples {
  std::size_t dim = 0;
  std::vector<double> x;  // row-major
  std::vector<std::uint8_t> cls;
  std::vector<double> continuous;
  std::vector<std::size_t> bar;  // source bar index

  std::size_t size() const noexcept { return cls.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
  void push(std::span<const double> features, std::uint8_t c, double c_hat, std::size_t bar_index);
  Samples subset(std::size_t begin, std::size_t end) const;
};

/// Rows whose bar has both a feature row and a valid label, restricted to `bars`.
Samples make_samples(const FeatureMatrix& matrix, const LabelSeries& labels, IndexRange bars);
Samples make_samples(const FeatureMatrix& matrix, const LabelSeries& labels);

struct Hyperparameters {
  std::vector<int> hidden{32, 32};
  double learning_rate = 3e-3;
  std::size_t batch_size = 128;
  double beta = 0.5;
  int epochs = 30;
  int patience = 5;
  double validation_fraction = 0.2;
};

struct ClassifierModel {
  Network network;
  LossScaler scaler;
  Hyperparameters hyper;
  std::string label_name;
  std::vector<FeatureSpec> features;
  std::uint64_t seed = 0;
  int epochs_trained = 0;
  int best_epoch = 0;
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
};

/// Mean of scale_i * (-log p[target_i]) over the given rows; fills `grad` when non-empty.
double scaled_cross_entropy(const Network& net, const Samples& samples,
                            std::span<const double> scales, std::span<const std::size_t> rows,
                            std::span<double> grad);

/// Mini-batch Adam on the scaled cross-entropy. The last `validation_fraction`
/// of the samples (chronological order) is held out for early stopping; the
/// parameters of the best validation epoch are returned. Deterministic in seed.
/// Throws TrainingError on a non-finite loss and ValidationError on a missing class.
ClassifierModel train(const Samples& samples, const Hyperparameters& hyper, std::uint64_t seed,
                      std::string label_name = {}, std::vector<FeatureSpec> features = {});

ClassifierModel train(const FeatureMatrix& matrix, const LabelSeries& labels,
                      const Hyperparameters& hyper, std::uint64_t seed,
                      std::string label_name = {});

/// Class probabilities (buy, neutral, sell) for one feature row. Uses no label data.
/// Throws std::invalid_argument on a dimension mismatch.
std::array<double, 3> predict(const ClassifierModel& model, std::span<const double> row);

struct ClassificationMetrics {
  std::array<std::array<std::size_t, 3>, 3> confusion{};  // [true][predicted]
  std::array<double, 3> precision{};
  std::array<double, 3> recall{};
  double balanced_accuracy = 0.0;  // mean recall over classes with support
  double scaled_loss = 0.0;
  std::size_t count = 0;
};

ClassificationMetrics confusion_metrics(std::span<const std::uint8_t> truth,
                                        std::span<const std::uint8_t> predicted);

ClassificationMetrics evaluate(const ClassifierModel& model, const Samples& samples);
ClassificationMetrics evaluate(const ClassifierModel& model, const FeatureMatrix& matrix,
                               const LabelSeries& labels);

/// Search ranges for hyperparameter tuning.
struct HyperSpace {
  std::vector<int> widths{16, 32, 64};
  int hidden_layers = 2;
  double learning_rate_lo = 1e-3;
  double learning_rate_hi = 1e-2;
  std::vector<std::size_t> batch_sizes{64, 128, 256};
  double beta_lo = 0.0;
  double beta_hi = 0.9;
  int max_epochs = 30;
  int min_epochs = 3;
  int patience = 5;
  double validation_fraction = 0.2;
};

Hyperparameters sample_hyperparameters(const HyperSpace& space, Rng& rng);

struct TuningOptions {
  double eta = 3.0;
  int workers = 1;
};

struct TrialRecord {
  Hyperparameters hyper;
  int rung = 0;
  int epochs = 0;
  double validation_balanced_accuracy = 0.0;
  double validation_loss = 0.0;
  bool diverged = false;
  std::string diagnostic;
};

struct TuningResult {
  Hyperparameters best;
  ClassifierModel model;  // winner trained at the final rung
  std::vector<TrialRecord> trials;
};

/// Successive halving over sampled hyperparameters with training epochs as the
/// rung resource, ranking by validation balanced accuracy. budget = number of
/// sampled configurations. Throws TrainingError when every candidate diverges.
TuningResult tune_hyperparameters(const HyperSpace& space, const Samples& samples,
                                  std::size_t budget, std::uint64_t seed,
                                  const TuningOptions& options = {});

/// JSON header at `header_path`, float64 little-endian weights in `weights_path`.
void save_model(const ClassifierModel& model, const std::filesystem::path& header_path,
                const std::filesystem::path& weights_path);
ClassifierModel load_model(const std::filesystem::path& header_path);

}  // namespace labelstrat
