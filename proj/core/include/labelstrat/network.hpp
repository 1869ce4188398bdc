#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "labelstrat/rng.hpp"

namespace labelstrat {

/// Fully connected tanh network with a 3-way softmax output.
///
/// Parameters live in one flat vector, layer by layer: the weight matrix
/// (outputs x inputs, row-major) followed by the bias vector.
class Network {
 public:
  static constexpr std::size_t kOutputs = 3;

  Network() = default;
  /// `hidden` widths between `inputs` and the 3 outputs. All weights start at zero.
  Network(std::size_t inputs, std::span<const int> hidden);

  /// Xavier-uniform weights, zero biases.
  void initialize(Rng& rng);

  std::size_t input_dim() const noexcept { return sizes_.empty() ? 0 : sizes_.front(); }
  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  std::array<double, kOutputs> forward(std::span<const double> x) const;

  /// Adds scale * d(-log p[target]) / d(params) into `grad`; returns -log p[target].
  double accumulate_gradient(std::span<const double> x, int target, double scale,
                             std::span<double> grad) const;

  /// Reconstructs a network from layer sizes and a flat parameter vector.
  static Network from_parameters(std::vector<std::size_t> sizes, std::vector<double> params);

 private:
  std::size_t layer_offset(std::size_t layer) const { return offsets_[layer]; }

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Numerically stable softmax of three logits.
std::array<double, 3> softmax3(std::span<const double, 3> logits);

}  // namespace labelstrat
