#pragma once

// Piecewise-linear feedforward networks: dense affine layers with ReLU
// activations on every hidden layer and a linear output layer. Networks are
// immutable after construction; forward and gradient are pure functions and
// safe to call from any number of threads.

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "relumip/linalg.hpp"

namespace relumip {

enum class Activation { ReLU, Linear };

inline const char* activation_name(Activation a) { return a == Activation::ReLU ? "relu" : "linear"; }

struct Layer {
  Matrix weights;  // rows = this layer's width, cols = previous width
  Vec bias;
  Activation activation = Activation::ReLU;

  int out_dim() const { return weights.rows; }
  int in_dim() const { return weights.cols; }
};

class Network {
 public:
  Network() = default;

  explicit Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw std::invalid_argument("network: needs at least one layer");
    for (size_t l = 0; l < layers_.size(); ++l) {
      const Layer& layer = layers_[l];
      if (layer.weights.rows != static_cast<int>(layer.bias.size()))
        throw std::invalid_argument("network: layer " + std::to_string(l) + ": bias length " +
                                    std::to_string(layer.bias.size()) + " != weight rows " +
                                    std::to_string(layer.weights.rows));
      if (l > 0 && layer.weights.cols != layers_[l - 1].weights.rows)
        throw std::invalid_argument("network: layer " + std::to_string(l) + ": input width " +
                                    std::to_string(layer.weights.cols) + " != previous layer width " +
                                    std::to_string(layers_[l - 1].weights.rows));
      if (!layer.weights.all_finite())
        throw std::invalid_argument("network: layer " + std::to_string(l) + ": non-finite weight");
      for (double b : layer.bias)
        if (!std::isfinite(b))
          throw std::invalid_argument("network: layer " + std::to_string(l) + ": non-finite bias");
      const bool last = (l + 1 == layers_.size());
      if (last && layer.activation != Activation::Linear)
        throw std::invalid_argument("network: last layer must be linear");
      if (!last && layer.activation != Activation::ReLU)
        throw std::invalid_argument("network: layer " + std::to_string(l) + ": hidden layers must be relu");
    }
  }

  const std::vector<Layer>& layers() const { return layers_; }
  int depth() const { return static_cast<int>(layers_.size()); }
  int input_dim() const { return layers_.front().weights.cols; }
  int output_dim() const { return layers_.back().weights.rows; }
  int hidden_node_count() const {
    int n = 0;
    for (int l = 0; l + 1 < depth(); ++l) n += layers_[l].out_dim();
    return n;
  }

 private:
  std::vector<Layer> layers_;
};

// Post-activation values of every layer, x^1 ... x^L.
inline std::vector<Vec> forward(const Network& net, const Vec& x0) {
  if (static_cast<int>(x0.size()) != net.input_dim())
    throw std::invalid_argument("forward: input length " + std::to_string(x0.size()) +
                                " != network input_dim " + std::to_string(net.input_dim()));
  for (double v : x0)
    if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input value");
  std::vector<Vec> values;
  values.reserve(net.depth());
  const Vec* cur = &x0;
  for (const Layer& layer : net.layers()) {
    Vec z = layer.weights.multiply(*cur);
    for (int k = 0; k < layer.out_dim(); ++k) z[k] += layer.bias[k];
    if (layer.activation == Activation::ReLU)
      for (double& v : z) v = std::max(0.0, v);
    values.push_back(std::move(z));
    cur = &values.back();
  }
  return values;
}

inline Vec output(const Network& net, const Vec& x0) { return forward(net, x0).back(); }

// Subgradient of sum_j |F(x0)_j - t_j| with respect to x0. sign(0) = 0 and
// the ReLU subgradient is 0 at the kink (inactive convention).
inline Vec gradient(const Network& net, const Vec& x0, const Vec& target) {
  if (static_cast<int>(target.size()) != net.output_dim())
    throw std::invalid_argument("gradient: target length " + std::to_string(target.size()) +
                                " != network output_dim " + std::to_string(net.output_dim()));
  // Forward pass keeping preactivations for the ReLU masks.
  std::vector<Vec> pre;
  pre.reserve(net.depth());
  Vec cur = x0;
  if (static_cast<int>(cur.size()) != net.input_dim())
    throw std::invalid_argument("gradient: input length " + std::to_string(cur.size()) +
                                " != network input_dim " + std::to_string(net.input_dim()));
  for (const Layer& layer : net.layers()) {
    Vec z = layer.weights.multiply(cur);
    for (int k = 0; k < layer.out_dim(); ++k) z[k] += layer.bias[k];
    pre.push_back(z);
    if (layer.activation == Activation::ReLU)
      for (double& v : z) v = std::max(0.0, v);
    cur = std::move(z);
  }
  // Backward pass: seed with sign(x^L - t).
  Vec delta(net.output_dim());
  for (int j = 0; j < net.output_dim(); ++j) {
    const double e = pre.back()[j] - target[j];
    delta[j] = (e > 0.0) ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
  }
  for (int l = net.depth() - 1; l >= 0; --l) {
    const Layer& layer = net.layers()[l];
    if (layer.activation == Activation::ReLU)
      for (int k = 0; k < layer.out_dim(); ++k)
        if (pre[l][k] <= 0.0) delta[k] = 0.0;
    delta = layer.weights.multiply_transposed(delta);
  }
  return delta;
}

}  // namespace relumip
