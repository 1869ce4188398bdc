#include "labelstrat/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "json.hpp"
#include "labelstrat/error.hpp"
#include "labelstrat/parallel.hpp"
#include "labelstrat/rng.hpp"

namespace labelstrat {

int class_of_continuous(double continuous) {
  const double lower = std::floor(continuous);
  const double frac = continuous - lower;
  if (frac == 0.5) return 1;  // ties go to neutral
  return static_cast<int>(frac < 0.5 ? lower : lower + 1.0);
}

double attenuation_profile(double continuous) {
  const double frac = continuous - std::floor(continuous);
  return 2.0 * std::min(frac, 1.0 - frac);
}

double loss_scale(int cls, double continuous, const LossScaler& scaler) {
  if (!(continuous >= 0.0 && continuous <= 2.0)) {
    throw std::invalid_argument(fmt::format("continuous label {} outside [0, 2]", continuous));
  }
  if (cls < 0 || cls > 2) throw std::invalid_argument(fmt::format("class {} outside 0..2", cls));
  return scaler.weights[static_cast<std::size_t>(cls)] *
         (1.0 - scaler.beta * attenuation_profile(continuous));
}

double loss_scale(double continuous, const LossScaler& scaler) {
  if (!(continuous >= 0.0 && continuous <= 2.0)) {
    throw std::invalid_argument(fmt::format("continuous label {} outside [0, 2]", continuous));
  }
  return loss_scale(class_of_continuous(continuous), continuous, scaler);
}

LossScaler calibrate_scaler(std::span<const std::uint8_t> classes,
                            std::span<const double> continuous, double beta) {
  if (classes.size() != continuous.size()) throw std::invalid_argument("label size mismatch");
  if (!(beta >= 0.0 && beta < 1.0)) throw ValidationError("beta must lie in [0, 1)");
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> mass{};  // summed attenuation per class
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const std::uint8_t c = classes[i];
    if (c > 2) throw std::invalid_argument("class outside 0..2");
    ++counts[c];
    mass[c] += 1.0 - beta * attenuation_profile(continuous[i]);
  }
  if (counts[0] == 0 || counts[1] == 0 || counts[2] == 0) {
    throw ValidationError(fmt::format(
        "loss scaling needs all three classes (counts buy={}, neutral={}, sell={})", counts[0],
        counts[1], counts[2]));
  }
  // w_edge * (mass0 + mass2) = w1 * mass1 with w1 = 1, then normalise the mean to 1.
  LossScaler scaler;
  scaler.beta = beta;
  const double edge = mass[1] / (mass[0] + mass[2]);
  scaler.weights = {edge, 1.0, edge};
  const double total = edge * (mass[0] + mass[2]) + mass[1];
  const double norm = static_cast<double>(classes.size()) / total;
  for (double& w : scaler.weights) w *= norm;
  return scaler;
}

LossScaler calibrate_scaler(const LabelSeries& labels, double beta) {
  std::vector<std::uint8_t> cls;
  std::vector<double> cont;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels.valid[i]) continue;
    cls.push_back(labels.cls[i]);
    cont.push_back(labels.continuous[i]);
  }
  return calibrate_scaler(cls, cont, beta);
}

void Samples::push(std::span<const double> features, std::uint8_t c, double c_hat,
                   std::size_t bar_index) {
  if (dim == 0) dim = features.size();
  if (features.size() != dim) throw std::invalid_argument("sample dimension mismatch");
  x.insert(x.end(), features.begin(), features.end());
  cls.push_back(c);
  continuous.push_back(c_hat);
  bar.push_back(bar_index);
}

Samples Samples::subset(std::size_t begin, std::size_t end) const {
  Samples out;
  out.dim = dim;
  end = std::min(end, size());
  if (begin >= end) return out;
  out.x.assign(x.begin() + static_cast<std::ptrdiff_t>(begin * dim),
               x.begin() + static_cast<std::ptrdiff_t>(end * dim));
  out.cls.assign(cls.begin() + static_cast<std::ptrdiff_t>(begin),
                 cls.begin() + static_cast<std::ptrdiff_t>(end));
  out.continuous.assign(continuous.begin() + static_cast<std::ptrdiff_t>(begin),
                        continuous.begin() + static_cast<std::ptrdiff_t>(end));
  out.bar.assign(bar.begin() + static_cast<std::ptrdiff_t>(begin),
                 bar.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

Samples make_samples(const FeatureMatrix& matrix, const LabelSeries& labels, IndexRange bars) {
  Samples out;
  out.dim = matrix.cols();
  const std::size_t end = std::min(bars.end, labels.size());
  for (std::size_t b = bars.begin; b < end; ++b) {
    if (!labels.valid[b]) continue;
    const auto row = matrix.row_for_bar(b);
    if (!row) continue;
    out.push(*row, labels.cls[b], labels.continuous[b], b);
  }
  return out;
}

Samples make_samples(const FeatureMatrix& matrix, const LabelSeries& labels) {
  return make_samples(matrix, labels, IndexRange{0, labels.size()});
}

double scaled_cross_entropy(const Network& net, const Samples& samples,
                            std::span<const double> scales, std::span<const std::size_t> rows,
                            std::span<double> grad) {
  if (rows.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  if (grad.empty()) {
    for (std::size_t r : rows) {
      const auto p = net.forward(samples.row(r));
      loss += scales[r] * -std::log(std::max(p[samples.cls[r]], 1e-300));
    }
  } else {
    for (std::size_t r : rows) {
      loss += scales[r] * net.accumulate_gradient(samples.row(r), samples.cls[r], scales[r] * inv,
                                                  grad);
    }
  }
  return loss * inv;
}

namespace {

void validate(const Hyperparameters& h) {
  if (h.hidden.empty()) throw ValidationError("at least one hidden layer required");
  for (int w : h.hidden) {
    if (w < 1) throw ValidationError("hidden widths must be positive");
  }
  if (!(h.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (h.batch_size < 1) throw ValidationError("batch size must be positive");
  if (h.epochs < 1) throw ValidationError("epochs must be positive");
  if (!(h.validation_fraction >= 0.0 && h.validation_fraction < 1.0)) {
    throw ValidationError("validation fraction must lie in [0, 1)");
  }
}

std::vector<double> scales_for(const Samples& s, const LossScaler& scaler) {
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = loss_scale(s.cls[i], s.continuous[i], scaler);
  return out;
}

std::size_t validation_start(std::size_t n, double fraction) {
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction));
  return n - std::min(n_val, n > 0 ? n - 1 : 0);
}

struct Adam {
  explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  std::vector<double> m, v;
  long t = 0;
};

}  // namespace

ClassifierModel train(const Samples& samples, const Hyperparameters& hyper, std::uint64_t seed,
                      std::string label_name, std::vector<FeatureSpec> features) {
  validate(hyper);
  if (samples.size() < 2 || samples.dim == 0) throw ValidationError("not enough training samples");
  const std::size_t split = validation_start(samples.size(), hyper.validation_fraction);
  const Samples fit = samples.subset(0, split);
  const Samples held_out = samples.subset(split, samples.size());

  ClassifierModel model;
  model.hyper = hyper;
  model.label_name = std::move(label_name);
  model.features = std::move(features);
  model.seed = seed;
  model.scaler = calibrate_scaler(fit.cls, fit.continuous, hyper.beta);

  const auto fit_scales = scales_for(fit, model.scaler);
  const auto held_scales = scales_for(held_out, model.scaler);
  std::vector<std::size_t> held_rows(held_out.size());
  std::iota(held_rows.begin(), held_rows.end(), 0);

  Rng rng(seed);
  Network net(samples.dim, hyper.hidden);
  net.initialize(rng);
  Adam adam(net.parameter_count());
  std::vector<double> grad(net.parameter_count());
  std::vector<std::size_t> order(fit.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> best = {net.parameters().begin(), net.parameters().end()};
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), begin + hyper.batch_size);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = scaled_cross_entropy(net, fit, fit_scales, batch, grad);
      if (!std::isfinite(loss)) {
        throw TrainingError(fmt::format(
            "non-finite training loss at epoch {} batch {} (learning rate {}, label '{}')", epoch,
            begin / hyper.batch_size, hyper.learning_rate, model.label_name));
      }
      epoch_loss += loss * static_cast<double>(batch.size());
      adam.step(net.parameters(), grad, hyper.learning_rate);
    }
    epoch_loss /= static_cast<double>(order.size());
    const double held_loss = held_out.size() > 0
                                 ? scaled_cross_entropy(net, held_out, held_scales, held_rows, {})
                                 : epoch_loss;
    if (!std::isfinite(held_loss)) {
      throw TrainingError(fmt::format("non-finite validation loss at epoch {} (label '{}')", epoch,
                                      model.label_name));
    }
    model.train_loss.push_back(epoch_loss);
    model.validation_loss.push_back(held_loss);
    model.epochs_trained = epoch;
    if (held_loss < best_loss) {
      best_loss = held_loss;
      best.assign(net.parameters().begin(), net.parameters().end());
      model.best_epoch = epoch;
      since_best = 0;
    } else if (hyper.patience > 0 && ++since_best >= hyper.patience) {
      break;
    }
  }
  std::copy(best.begin(), best.end(), net.parameters().begin());
  model.network = std::move(net);
  return model;
}

ClassifierModel train(const FeatureMatrix& matrix, const LabelSeries& labels,
                      const Hyperparameters& hyper, std::uint64_t seed, std::string label_name) {
  return train(make_samples(matrix, labels), hyper, seed, std::move(label_name), matrix.specs());
}

std::array<double, 3> predict(const ClassifierModel& model, std::span<const double> row) {
  if (row.size() != model.network.input_dim()) {
    throw std::invalid_argument(fmt::format("feature row has {} values, model expects {}",
                                            row.size(), model.network.input_dim()));
  }
  return model.network.forward(row);
}

ClassificationMetrics confusion_metrics(std::span<const std::uint8_t> truth,
                                        std::span<const std::uint8_t> predicted) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("prediction size mismatch");
  ClassificationMetrics m;
  m.count = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) ++m.confusion[truth[i]][predicted[i]];
  double recall_sum = 0.0;
  int supported = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::size_t support = 0, called = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      support += m.confusion[c][k];
      called += m.confusion[k][c];
    }
    m.recall[c] = support ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(support) : 0.0;
    m.precision[c] = called ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(called) : 0.0;
    if (support) {
      recall_sum += m.recall[c];
      ++supported;
    }
  }
  m.balanced_accuracy = supported ? recall_sum / supported : 0.0;
  return m;
}

ClassificationMetrics evaluate(const ClassifierModel& model, const Samples& samples) {
  std::vector<std::uint8_t> predicted(samples.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto p = predict(model, samples.row(i));
    predicted[i] = static_cast<std::uint8_t>(std::max_element(p.begin(), p.end()) - p.begin());
    loss += loss_scale(samples.cls[i], samples.continuous[i], model.scaler) *
            -std::log(std::max(p[samples.cls[i]], 1e-300));
  }
  ClassificationMetrics m = confusion_metrics(samples.cls, predicted);
  m.scaled_loss = samples.size() ? loss / static_cast<double>(samples.size()) : 0.0;
  return m;
}

ClassificationMetrics evaluate(const ClassifierModel& model, const FeatureMatrix& matrix,
                               const LabelSeries& labels) {
  return evaluate(model, make_samples(matrix, labels));
}

Hyperparameters sample_hyperparameters(const HyperSpace& space, Rng& rng) {
  Hyperparameters h;
  h.hidden.clear();
  for (int l = 0; l < space.hidden_layers; ++l) {
    h.hidden.push_back(space.widths[static_cast<std::size_t>(rng.below(space.widths.size()))]);
  }
  h.learning_rate = std::exp(rng.uniform(std::log(space.learning_rate_lo),
                                         std::log(space.learning_rate_hi)));
  h.batch_size = space.batch_sizes[static_cast<std::size_t>(rng.below(space.batch_sizes.size()))];
  h.beta = rng.uniform(space.beta_lo, space.beta_hi);
  h.epochs = space.max_epochs;
  h.patience = space.patience;
  h.validation_fraction = space.validation_fraction;
  return h;
}

TuningResult tune_hyperparameters(const HyperSpace& space, const Samples& samples,
                                  std::size_t budget, std::uint64_t seed,
                                  const TuningOptions& options) {
  if (budget < 1) throw ValidationError("tuning budget must be at least 1");
  if (space.widths.empty() || space.batch_sizes.empty() || space.hidden_layers < 1) {
    throw ValidationError("hyperparameter space is empty");
  }
  if (!(options.eta > 1.0)) throw ValidationError("eta must exceed 1");
  const int max_epochs = std::max(space.max_epochs, 1);
  const int min_epochs = std::clamp(space.min_epochs, 1, max_epochs);

  Rng rng(derive_seed(seed, 0x7E57));
  std::vector<Hyperparameters> configs;
  for (std::size_t i = 0; i < budget; ++i) configs.push_back(sample_hyperparameters(space, rng));

  int rungs = 1;
  if (budget > 1) {
    while (static_cast<double>(max_epochs) / std::pow(options.eta, rungs) >= min_epochs) ++rungs;
  }
  const std::size_t split = validation_start(samples.size(), space.validation_fraction);
  const Samples held_out = samples.subset(split, samples.size());

  struct Slot {
    TrialRecord trial;
    std::optional<ClassifierModel> model;
  };
  std::vector<Slot> slots(budget);
  TuningResult result;
  std::vector<std::size_t> alive(budget);
  std::iota(alive.begin(), alive.end(), 0);

  for (int rung = 0; rung < rungs; ++rung) {
    const int epochs =
        rung + 1 == rungs
            ? max_epochs
            : std::max(1, static_cast<int>(std::lround(max_epochs /
                                                       std::pow(options.eta, rungs - 1 - rung))));
    parallel_for(alive.size(), options.workers, [&](std::size_t k) {
      const std::size_t i = alive[k];
      Slot& slot = slots[i];
      slot.trial = TrialRecord{};
      slot.trial.hyper = configs[i];
      slot.trial.hyper.epochs = epochs;
      slot.trial.rung = rung;
      slot.trial.epochs = epochs;
      try {
        ClassifierModel model = train(samples, slot.trial.hyper, derive_seed(seed, i));
        const auto m = evaluate(model, held_out.size() ? held_out : samples);
        slot.trial.validation_balanced_accuracy = m.balanced_accuracy;
        slot.trial.validation_loss = m.scaled_loss;
        slot.model = std::move(model);
      } catch (const TrainingError& e) {
        slot.trial.diverged = true;
        slot.trial.diagnostic = e.what();
        slot.model.reset();
      }
    });
    for (std::size_t i : alive) result.trials.push_back(slots[i].trial);
    std::stable_sort(alive.begin(), alive.end(), [&](std::size_t a, std::size_t b) {
      const auto& ta = slots[a].trial;
      const auto& tb = slots[b].trial;
      if (ta.diverged != tb.diverged) return !ta.diverged;
      if (ta.validation_balanced_accuracy != tb.validation_balanced_accuracy) {
        return ta.validation_balanced_accuracy > tb.validation_balanced_accuracy;
      }
      if (ta.validation_loss != tb.validation_loss) return ta.validation_loss < tb.validation_loss;
      return a < b;
    });
    if (rung + 1 < rungs) {
      const auto keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(static_cast<double>(alive.size()) / options.eta)));
      alive.resize(std::min(keep, alive.size()));
    }
  }

  Slot& winner = slots[alive.front()];
  if (winner.trial.diverged) {
    std::string diagnostics;
    for (const auto& t : result.trials) diagnostics += "\n  " + t.diagnostic;
    throw TrainingError("every hyperparameter candidate diverged:" + diagnostics);
  }
  result.best = winner.trial.hyper;
  result.model = std::move(*winner.model);
  return result;
}

void save_model(const ClassifierModel& model, const std::filesystem::path& header_path,
                const std::filesystem::path& weights_path) {
  using nlohmann::json;
  json features = json::array();
  for (const auto& f : model.features) {
    features.push_back({{"family", std::string(family_name(f.family))},
                        {"param", f.param},
                        {"norm_window", f.effective_norm_window()}});
  }
  const auto params = model.network.parameters();
  json header = {
      {"label", model.label_name},
      {"features", features},
      {"layer_sizes", model.network.layer_sizes()},
      {"hidden_activation", "tanh"},
      {"output", "softmax"},
      {"loss_scaler", {{"weights", model.scaler.weights}, {"beta", model.scaler.beta}}},
      {"hyperparameters",
       {{"hidden", model.hyper.hidden},
        {"learning_rate", model.hyper.learning_rate},
        {"batch_size", model.hyper.batch_size},
        {"beta", model.hyper.beta},
        {"epochs", model.hyper.epochs},
        {"patience", model.hyper.patience},
        {"validation_fraction", model.hyper.validation_fraction}}},
      {"seed", model.seed},
      {"epochs_trained", model.epochs_trained},
      {"best_epoch", model.best_epoch},
      {"train_loss", model.train_loss},
      {"validation_loss", model.validation_loss},
      {"weights_file", weights_path.filename().string()},
      {"weights_format", "float64 little-endian, row-major per layer: weights then biases"},
      {"weight_count", params.size()},
  };
  std::ofstream(header_path) << header.dump(2) << '\n';

  std::vector<char> bytes(params.size() * sizeof(double));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(params[i]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    std::memcpy(bytes.data() + i * sizeof(double), &bits, sizeof(bits));
  }
  std::ofstream out(weights_path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", weights_path.string()));
}

ClassifierModel load_model(const std::filesystem::path& header_path) {
  using nlohmann::json;
  std::ifstream in(header_path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", header_path.string()));
  json header;
  try {
    header = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", header_path.string(), e.what()));
  }
  try {
    ClassifierModel model;
    model.label_name = header.at("label").get<std::string>();
    for (const auto& f : header.at("features")) {
      FeatureSpec spec;
      spec.family = parse_family(f.at("family").get<std::string>());
      spec.param = f.at("param").get<int>();
      spec.range = ParamRange{spec.param, spec.param};
      spec.norm_window = f.value("norm_window", 0);
      model.features.push_back(spec);
    }
    const auto sizes = header.at("layer_sizes").get<std::vector<std::size_t>>();
    const auto& sc = header.at("loss_scaler");
    model.scaler.weights = sc.at("weights").get<std::array<double, 3>>();
    model.scaler.beta = sc.at("beta").get<double>();
    const auto& h = header.at("hyperparameters");
    model.hyper.hidden = h.at("hidden").get<std::vector<int>>();
    model.hyper.learning_rate = h.at("learning_rate").get<double>();
    model.hyper.batch_size = h.at("batch_size").get<std::size_t>();
    model.hyper.beta = h.at("beta").get<double>();
    model.hyper.epochs = h.at("epochs").get<int>();
    model.hyper.patience = h.at("patience").get<int>();
    model.hyper.validation_fraction = h.at("validation_fraction").get<double>();
    model.seed = header.at("seed").get<std::uint64_t>();
    model.epochs_trained = header.at("epochs_trained").get<int>();
    model.best_epoch = header.value("best_epoch", 0);
    model.train_loss = header.at("train_loss").get<std::vector<double>>();
    model.validation_loss = header.at("validation_loss").get<std::vector<double>>();

    const auto weights_path = header_path.parent_path() / header.at("weights_file").get<std::string>();
    const auto count = header.at("weight_count").get<std::size_t>();
    std::ifstream win(weights_path, std::ios::binary);
    if (!win) throw ValidationError(fmt::format("cannot open '{}'", weights_path.string()));
    std::vector<char> bytes(count * sizeof(double));
    win.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (win.gcount() != static_cast<std::streamsize>(bytes.size())) {
      throw ValidationError(fmt::format("'{}' holds fewer than {} weights", weights_path.string(), count));
    }
    std::vector<double> params(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, bytes.data() + i * sizeof(double), sizeof(bits));
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
      params[i] = std::bit_cast<double>(bits);
    }
    model.network = Network::from_parameters(sizes, std::move(params));
    if (!model.features.empty() && model.features.size() != model.network.input_dim()) {
      throw ValidationError("feature list does not match the network input size");
    }
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", header_path.string(), e.what()));
  } catch (const std::invalid_argument& e) {
    throw ValidationError(fmt::format("{}: {}", header_path.string(), e.what()));
  }
}

}  // namespace labelstrat
