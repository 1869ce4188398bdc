#include "labelstrat/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace labelstrat {

std::array<double, 3> softmax3(std::span<const double, 3> logits) {
  const double m = std::max({logits[0], logits[1], logits[2]});
  std::array<double, 3> p{std::exp(logits[0] - m), std::exp(logits[1] - m),
                          std::exp(logits[2] - m)};
  const double z = p[0] + p[1] + p[2];
  for (double& v : p) v /= z;
  return p;
}

Network::Network(std::size_t inputs, std::span<const int> hidden) {
  if (inputs == 0) throw std::invalid_argument("network needs at least one input");
  sizes_.push_back(inputs);
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("hidden layer width must be positive");
    sizes_.push_back(static_cast<std::size_t>(h));
  }
  sizes_.push_back(kOutputs);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(offset);
    offset += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  }
  params_.assign(offset, 0.0);
}

Network Network::from_parameters(std::vector<std::size_t> sizes, std::vector<double> params) {
  if (sizes.size() < 2 || sizes.back() != kOutputs) {
    throw std::invalid_argument("layer sizes must end with the 3 outputs");
  }
  std::vector<int> hidden;
  for (std::size_t l = 1; l + 1 < sizes.size(); ++l) hidden.push_back(static_cast<int>(sizes[l]));
  Network net(sizes.front(), hidden);
  if (params.size() != net.params_.size()) {
    throw std::invalid_argument("parameter count does not match the layer sizes");
  }
  net.params_ = std::move(params);
  return net;
}

void Network::initialize(Rng& rng) {
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const std::size_t in = sizes_[l];
    const std::size_t out = sizes_[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    double* w = params_.data() + offsets_[l];
    for (std::size_t k = 0; k < in * out; ++k) w[k] = rng.uniform(-limit, limit);
    std::fill(w + in * out, w + in * out + out, 0.0);
  }
}

std::array<double, Network::kOutputs> Network::forward(std::span<const double> x) const {
  if (x.size() != input_dim()) throw std::invalid_argument("input dimension mismatch");
  std::vector<double> current(x.begin(), x.end());
  std::vector<double> next;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = sizes_[l];
    const std::size_t out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = w + in * out;
    next.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double z = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) z += row[i] * current[i];
      next[o] = l + 1 < layers ? std::tanh(z) : z;
    }
    current.swap(next);
  }
  return softmax3(std::span<const double, 3>(current.data(), 3));
}

double Network::accumulate_gradient(std::span<const double> x, int target, double scale,
                                    std::span<double> grad) const {
  if (x.size() != input_dim()) throw std::invalid_argument("input dimension mismatch");
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient size mismatch");
  const std::size_t layers = sizes_.size() - 1;

  // Forward pass keeping every activation.
  std::vector<std::vector<double>> acts(layers + 1);
  acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = sizes_[l];
    const std::size_t out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = w + in * out;
    acts[l + 1].assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double z = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) z += row[i] * acts[l][i];
      acts[l + 1][o] = l + 1 < layers ? std::tanh(z) : z;
    }
  }
  const auto p = softmax3(std::span<const double, 3>(acts[layers].data(), 3));
  const double loss = -std::log(std::max(p[static_cast<std::size_t>(target)], 1e-300));

  // delta holds dL/dz for the current layer's pre-activations.
  std::vector<double> delta(kOutputs);
  for (std::size_t o = 0; o < kOutputs; ++o) {
    delta[o] = scale * (p[o] - (static_cast<int>(o) == target ? 1.0 : 0.0));
  }
  std::vector<double> prev_delta;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = sizes_[l];
    const std::size_t out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    double* gw = grad.data() + offsets_[l];
    double* gb = gw + in * out;
    const auto& a = acts[l];
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += d * a[i];
    }
    if (l == 0) break;
    prev_delta.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) prev_delta[i] += d * row[i];
    }
    for (std::size_t i = 0; i < in; ++i) prev_delta[i] *= 1.0 - a[i] * a[i];  // tanh'
    delta.swap(prev_delta);
  }
  return loss;
}

}  // namespace labelstrat
