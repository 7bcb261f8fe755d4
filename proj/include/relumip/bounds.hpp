#pragma once

// Per-node preactivation bounds and ReLU stability classes. Interval
// propagation lives here; the MILP tightening pass is in tightening.hpp
// because it needs the encoder.

#include <stdexcept>
#include <string>
#include <vector>

#include "relumip/network.hpp"

namespace relumip {

enum class ReluStability { StablyActive, StablyInactive, Unstable };
enum class BoundProvenance { Interval, MilpExact, MilpRelaxed };

inline const char* stability_name(ReluStability s) {
  switch (s) {
    case ReluStability::StablyActive: return "stably_active";
    case ReluStability::StablyInactive: return "stably_inactive";
    default: return "unstable";
  }
}

inline const char* provenance_name(BoundProvenance p) {
  switch (p) {
    case BoundProvenance::Interval: return "interval";
    case BoundProvenance::MilpExact: return "milp_exact";
    default: return "milp_relaxed";
  }
}

// Bounds of exactly 0 count as stable; no strict inequalities anywhere.
inline ReluStability classify_relu(double lower, double upper) {
  if (lower >= 0.0) return ReluStability::StablyActive;
  if (upper <= 0.0) return ReluStability::StablyInactive;
  return ReluStability::Unstable;
}

struct NodeBounds {
  double lower = -kInf;
  double upper = kInf;
  ReluStability stability = ReluStability::Unstable;
  BoundProvenance provenance = BoundProvenance::Interval;
  double compute_time_s = 0.0;
};

struct BoundsTable {
  // layers[l-1][k] = preactivation bounds of node k in layer l (1-based per
  // the usual network indexing; includes the linear output layer).
  std::vector<std::vector<NodeBounds>> layers;

  const NodeBounds& at(int layer, int node) const { return layers[layer - 1][node]; }
  NodeBounds& at(int layer, int node) { return layers[layer - 1][node]; }

  void check_shape(const Network& net) const {
    if (static_cast<int>(layers.size()) != net.depth())
      throw std::invalid_argument("bounds: table has " + std::to_string(layers.size()) + " layers, network has " +
                                  std::to_string(net.depth()));
    for (int l = 0; l < net.depth(); ++l)
      if (static_cast<int>(layers[l].size()) != net.layers()[l].out_dim())
        throw std::invalid_argument("bounds: layer " + std::to_string(l + 1) + " has wrong width");
    for (size_t l = 0; l < layers.size(); ++l)
      for (const NodeBounds& nb : layers[l])
        if (!(nb.lower <= nb.upper))
          throw std::invalid_argument("bounds: lower > upper in layer " + std::to_string(l + 1));
  }

  // Counts over hidden layers only; the output layer has no activation.
  struct Census {
    int stably_active = 0;
    int stably_inactive = 0;
    int unstable = 0;
  };
  Census census(const Network& net) const {
    Census c;
    for (int l = 1; l < net.depth(); ++l) {
      for (const NodeBounds& nb : layers[l - 1]) {
        switch (nb.stability) {
          case ReluStability::StablyActive: ++c.stably_active; break;
          case ReluStability::StablyInactive: ++c.stably_inactive; break;
          default: ++c.unstable;
        }
      }
    }
    return c;
  }

  int unstable_count(const Network& net) const { return census(net).unstable; }
};

// Plain interval arithmetic through the network: sound but loose. Exact for
// the first layer, since an affine image of a box is exact per coordinate.
inline BoundsTable interval_bounds(const Network& net, const Vec& design_lower, const Vec& design_upper) {
  if (static_cast<int>(design_lower.size()) != net.input_dim() ||
      static_cast<int>(design_upper.size()) != net.input_dim())
    throw std::invalid_argument("interval_bounds: box dimension != network input_dim");
  for (int i = 0; i < net.input_dim(); ++i) {
    if (!std::isfinite(design_lower[i]) || !std::isfinite(design_upper[i]))
      throw std::invalid_argument("interval_bounds: non-finite design box");
    if (design_lower[i] > design_upper[i])
      throw std::invalid_argument("interval_bounds: empty design box at input " + std::to_string(i));
  }
  BoundsTable table;
  table.layers.resize(net.depth());
  Vec in_lo = design_lower, in_hi = design_upper;
  for (int l = 0; l < net.depth(); ++l) {
    const Layer& layer = net.layers()[l];
    auto& out = table.layers[l];
    out.resize(layer.out_dim());
    Vec post_lo(layer.out_dim()), post_hi(layer.out_dim());
    for (int k = 0; k < layer.out_dim(); ++k) {
      double lo = layer.bias[k], hi = layer.bias[k];
      for (int c = 0; c < layer.in_dim(); ++c) {
        const double w = layer.weights(k, c);
        if (w >= 0.0) {
          lo += w * in_lo[c];
          hi += w * in_hi[c];
        } else {
          lo += w * in_hi[c];
          hi += w * in_lo[c];
        }
      }
      out[k].lower = lo;
      out[k].upper = hi;
      out[k].stability = classify_relu(lo, hi);
      out[k].provenance = BoundProvenance::Interval;
      if (layer.activation == Activation::ReLU) {
        post_lo[k] = std::max(0.0, lo);
        post_hi[k] = std::max(0.0, hi);
      } else {
        post_lo[k] = lo;
        post_hi[k] = hi;
      }
    }
    in_lo = std::move(post_lo);
    in_hi = std::move(post_hi);
  }
  return table;
}

}  // namespace relumip
