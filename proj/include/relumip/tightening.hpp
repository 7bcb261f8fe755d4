#pragma once

// Layer-by-layer bound tightening. Every node's preactivation is minimized
// and maximized as its own MILP over the already-committed encoding of the
// preceding layers, each solve under a wall-clock budget. When a solve stops
// early the stored bound is the solver's relaxed bound -- never the
// incumbent, which would overtighten and misclassify ReLUs. Bounds for layer
// l are committed before layer l+1 starts; nodes within one layer are
// independent and run on a small worker pool.

#include <chrono>
#include <thread>
#include <vector>

#include "relumip/bnb.hpp"
#include "relumip/bounds.hpp"
#include "relumip/encoder.hpp"

namespace relumip {

struct TightenConfig {
  double t_max_per_node = 150.0;  // per direction (min and max each get the budget)
  int jobs = 1;
  double gap_tol = 1e-9;
  double lp_tol = 1e-7;
};

namespace detail {

// min/max of node (layer, k)'s preactivation subject to the encoding of
// layers 1..layer-1 under the committed table.
inline std::pair<double, bool> node_extremum(const Network& net, const BoundsTable& table, const Vec& lo,
                                             const Vec& hi, const std::vector<InputConstraint>& extras,
                                             int layer, int k, bool maximize, const TightenConfig& cfg) {
  MilpModel model;
  std::vector<int> inputs(net.input_dim());
  for (int i = 0; i < net.input_dim(); ++i)
    inputs[i] = model.add_var("x0_i" + std::to_string(i), VarKind::Continuous, lo[i], hi[i]);
  CopyVars cv = append_network_copy(model, net, table, inputs, 0, layer - 1);
  for (const InputConstraint& c : extras) {
    LinRow row;
    for (size_t i = 0; i < c.coeffs.size(); ++i)
      if (c.coeffs[i] != 0.0) row.coeffs.emplace_back(inputs[i], c.coeffs[i]);
    row.sense = c.sense;
    row.rhs = c.rhs;
    model.add_row(std::move(row));
  }
  const Layer& lay = net.layers()[layer - 1];
  const std::vector<int>& prev = layer == 1 ? inputs : cv.node[layer - 2];
  for (int c = 0; c < lay.in_dim(); ++c) {
    const int pv = prev[c];
    const double w = lay.weights(k, c);
    if (pv >= 0 && w != 0.0) model.objective.emplace_back(pv, w);
  }
  model.objective_constant = lay.bias[k];
  model.sense = maximize ? ObjSense::Maximize : ObjSense::Minimize;

  BnbConfig bnb;
  bnb.time_limit = cfg.t_max_per_node;
  bnb.gap_tol = cfg.gap_tol;
  bnb.lp_tol = cfg.lp_tol;
  SolveReport rep = solve_milp(model, bnb);
  if (rep.status == SolveStatus::Infeasible || rep.status == SolveStatus::Unbounded)
    throw std::runtime_error("tighten_bounds: node subproblem layer " + std::to_string(layer) + " node " +
                             std::to_string(k) + " reported " + solve_status_name(rep.status));
  // The relaxed bound is the sound choice in both exit states; at optimality
  // it coincides with the optimum up to gap_tol.
  return {rep.relaxed_bound, rep.status == SolveStatus::Optimal};
}

}  // namespace detail

inline BoundsTable tighten_bounds(const Network& net, const Vec& design_lower, const Vec& design_upper,
                                  const std::vector<InputConstraint>& extras, const TightenConfig& cfg = {}) {
  BoundsTable table = interval_bounds(net, design_lower, design_upper);
  const int jobs = std::max(1, cfg.jobs);
  for (int l = 1; l <= net.depth(); ++l) {
    // The first layer is an affine image of the box, which interval
    // arithmetic already bounds exactly -- unless extra design constraints
    // cut into the box.
    if (l == 1 && extras.empty()) continue;
    auto& layer_bounds = table.layers[l - 1];
    const int width = static_cast<int>(layer_bounds.size());
    std::vector<NodeBounds> result(layer_bounds);
    std::vector<int> todo;
    for (int k = 0; k < width; ++k) {
      const bool hidden = net.layers()[l - 1].activation == Activation::ReLU;
      if (hidden && layer_bounds[k].stability != ReluStability::Unstable) continue;  // already stable: skip
      todo.push_back(k);
    }
    auto worker = [&](int first, int step) {
      for (size_t idx = first; idx < todo.size(); idx += step) {
        const int k = todo[idx];
        const auto t0 = std::chrono::steady_clock::now();
        auto [lo_val, lo_exact] = detail::node_extremum(net, table, design_lower, design_upper, extras, l, k,
                                                        /*maximize=*/false, cfg);
        auto [hi_val, hi_exact] = detail::node_extremum(net, table, design_lower, design_upper, extras, l, k,
                                                        /*maximize=*/true, cfg);
        NodeBounds nb;
        nb.lower = std::max(lo_val, layer_bounds[k].lower);  // never looser than interval
        nb.upper = std::min(hi_val, layer_bounds[k].upper);
        nb.stability = classify_relu(nb.lower, nb.upper);
        nb.provenance = lo_exact && hi_exact ? BoundProvenance::MilpExact : BoundProvenance::MilpRelaxed;
        nb.compute_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result[k] = nb;
      }
    };
    if (jobs == 1 || todo.size() <= 1) {
      worker(0, 1);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < jobs; ++w) pool.emplace_back(worker, w, jobs);
      for (auto& th : pool) th.join();
    }
    layer_bounds = std::move(result);  // commit before the next layer
  }
  return table;
}

inline BoundsTable tighten_bounds(const Network& net, const InverseProblem& problem, const TightenConfig& cfg = {}) {
  Vec lo, hi;
  problem.effective_box(lo, hi);
  return tighten_bounds(net, lo, hi, problem.extra_constraints, cfg);
}

// Same pass over the epsilon hypercube around a candidate design,
// intersected with the design box. Small boxes stabilize most ReLUs, which
// is what makes the robustness MILP cheap.
inline BoundsTable bounds_for_robustness(const Network& net, const Vec& candidate, double epsilon,
                                         const Vec& design_lower, const Vec& design_upper,
                                         const std::vector<InputConstraint>& extras = {},
                                         const TightenConfig& cfg = {}) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("bounds_for_robustness: epsilon must be >= 0");
  Vec lo(design_lower.size()), hi(design_upper.size());
  for (size_t i = 0; i < lo.size(); ++i) {
    lo[i] = std::max(design_lower[i], candidate[i] - epsilon);
    hi[i] = std::min(design_upper[i], candidate[i] + epsilon);
    if (lo[i] > hi[i])
      throw std::invalid_argument("bounds_for_robustness: empty box at input " + std::to_string(i));
  }
  return tighten_bounds(net, lo, hi, extras, cfg);
}

}  // namespace relumip
