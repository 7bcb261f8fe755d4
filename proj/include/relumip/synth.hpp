#pragma once

// Seeded synthetic networks and problems for tests and the scalability
// benchmark. Weights are uniform with a fan-in scale so boxes like [0,1]^m
// produce a healthy mix of stable and unstable ReLUs.

#include <vector>

#include "relumip/encoder.hpp"
#include "relumip/network.hpp"

namespace relumip {

struct NetSpec {
  int inputs = 2;
  std::vector<int> hidden = {3};
  int outputs = 2;
  double weight_scale = 1.0;
  double bias_scale = 0.5;
};

inline Network make_random_network(uint64_t seed, const NetSpec& spec) {
  Rng rng(seed);
  std::vector<Layer> layers;
  int prev = spec.inputs;
  std::vector<int> widths = spec.hidden;
  widths.push_back(spec.outputs);
  for (size_t l = 0; l < widths.size(); ++l) {
    const int w = widths[l];
    Layer layer;
    layer.weights = Matrix(w, prev);
    layer.bias.resize(w);
    const double scale = spec.weight_scale / std::sqrt(static_cast<double>(prev));
    for (int r = 0; r < w; ++r) {
      for (int c = 0; c < prev; ++c) layer.weights(r, c) = rng.uniform(-scale, scale);
      layer.bias[r] = rng.uniform(-spec.bias_scale, spec.bias_scale);
    }
    layer.activation = l + 1 == widths.size() ? Activation::Linear : Activation::ReLU;
    layers.push_back(std::move(layer));
    prev = w;
  }
  return Network(std::move(layers));
}

inline Vec random_box_point(Rng& rng, const Vec& lo, const Vec& hi) {
  Vec x(lo.size());
  for (size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(lo[i], hi[i]);
  return x;
}

// A target near (offset = 0) or off (offset > 0) the reachable set: the
// forward image of a random box point, shifted outward per coordinate.
inline Vec make_target(const Network& net, Rng& rng, const Vec& lo, const Vec& hi, double offset = 0.0) {
  Vec y = output(net, random_box_point(rng, lo, hi));
  for (double& v : y) v += offset * (rng.uniform01() < 0.5 ? -1.0 : 1.0) * (1.0 + rng.uniform01());
  return y;
}

inline InverseProblem make_box_problem(const Network& net, std::vector<Vec> targets, double lo = 0.0,
                                       double hi = 1.0) {
  InverseProblem p;
  p.targets = std::move(targets);
  p.design_lower.assign(net.input_dim(), lo);
  p.design_upper.assign(net.input_dim(), hi);
  return p;
}

}  // namespace relumip
