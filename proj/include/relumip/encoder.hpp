#pragma once

// Translates inverse-design queries over a ReLU network into MILP models.
//
// Each unstable ReLU node contributes one continuous and one binary variable
// and the four big-M inequalities built from its precomputed preactivation
// bounds. Stably active nodes keep a continuous variable pinned by an
// equality; stably inactive nodes are dropped entirely and their outgoing
// weights contribute nothing. The L1 objective is linearized with one
// residual variable per output: an epigraph pair when minimizing, and a
// binary disjunction with output-bound big-Ms when maximizing (robustness),
// where the epigraph alone would be invalid.

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relumip/bounds.hpp"
#include "relumip/milp.hpp"
#include "relumip/network.hpp"

namespace relumip {

struct InputConstraint {
  Vec coeffs;  // dense over the input coordinates
  RowSense sense = RowSense::Eq;
  double rhs = 0.0;
};

struct RobustnessQuery {
  Vec candidate;
  double epsilon = 0.0;
};

struct InverseProblem {
  std::vector<Vec> targets;
  Vec design_lower;
  Vec design_upper;
  std::vector<bool> integer_design;   // empty means all-continuous
  std::optional<int> selection_budget;
  std::optional<RobustnessQuery> robustness;
  std::vector<InputConstraint> extra_constraints;
  Vec display_scale;                  // cosmetic per-input scale for reports; empty = 1

  bool any_integer() const {
    for (bool b : integer_design)
      if (b) return true;
    return false;
  }

  void validate(const Network& net) const {
    const int m = net.input_dim();
    if (targets.empty()) throw std::invalid_argument("problem: needs at least one target");
    for (const Vec& t : targets)
      if (static_cast<int>(t.size()) != net.output_dim())
        throw std::invalid_argument("problem: target length " + std::to_string(t.size()) +
                                    " != network output_dim " + std::to_string(net.output_dim()));
    if (static_cast<int>(design_lower.size()) != m || static_cast<int>(design_upper.size()) != m)
      throw std::invalid_argument("problem: design box dimension != network input_dim");
    for (int i = 0; i < m; ++i) {
      if (!std::isfinite(design_lower[i]) || !std::isfinite(design_upper[i]))
        throw std::invalid_argument("problem: non-finite design bound at input " + std::to_string(i));
      if (design_lower[i] > design_upper[i])
        throw std::invalid_argument("problem: design lower > upper at input " + std::to_string(i));
    }
    if (!integer_design.empty() && static_cast<int>(integer_design.size()) != m)
      throw std::invalid_argument("problem: integer flag count != input_dim");
    if (selection_budget) {
      if (*selection_budget < 1 || *selection_budget > m)
        throw std::invalid_argument("problem: selection budget must be in [1, input_dim]");
      for (int i = 0; i < m; ++i)
        if (design_lower[i] < 0.0)
          throw std::invalid_argument("problem: selection requires design lower bounds >= 0");
    }
    if (robustness) {
      if (selection_budget) throw std::invalid_argument("problem: robustness and selection are mutually exclusive");
      if (targets.size() != 1) throw std::invalid_argument("problem: robustness takes exactly one target");
      if (!(robustness->epsilon >= 0.0)) throw std::invalid_argument("problem: epsilon must be >= 0");
      if (static_cast<int>(robustness->candidate.size()) != m)
        throw std::invalid_argument("problem: robustness candidate dimension != input_dim");
    }
    for (const InputConstraint& c : extra_constraints)
      if (static_cast<int>(c.coeffs.size()) != m)
        throw std::invalid_argument("problem: extra constraint coefficient count != input_dim");
    if (!display_scale.empty() && static_cast<int>(display_scale.size()) != m)
      throw std::invalid_argument("problem: scale length != input_dim");
  }

  // The input box actually optimized over: the design box, intersected with
  // the epsilon hypercube in robustness mode.
  void effective_box(Vec& lo, Vec& hi) const {
    lo = design_lower;
    hi = design_upper;
    if (robustness) {
      for (size_t i = 0; i < lo.size(); ++i) {
        lo[i] = std::max(lo[i], robustness->candidate[i] - robustness->epsilon);
        hi[i] = std::min(hi[i], robustness->candidate[i] + robustness->epsilon);
        if (lo[i] > hi[i])
          throw std::invalid_argument("problem: epsilon box empty after intersection at input " + std::to_string(i));
      }
    }
  }
};

struct EncodedProblem {
  MilpModel model;
  InverseProblem problem;
  int n_copies = 0;

  // Variable maps; -1 marks a variable that was structurally removed.
  std::vector<std::vector<int>> input_var;               // [copy][i]
  std::vector<std::vector<std::vector<int>>> node_var;   // [copy][layer-1][k] post-activation
  std::vector<std::vector<std::vector<int>>> relu_var;   // [copy][layer-1][k] binary, hidden layers
  std::vector<std::vector<int>> resid_var;               // [copy][j]
  std::vector<int> select_var;                           // q, selection mode only
  std::vector<std::vector<int>> absdir_var;              // [copy][j] binary, robustness mode only
};

namespace detail {

inline std::string vname(const std::string& stem, int copy, const std::string& tail) {
  return stem + "_c" + std::to_string(copy) + "_" + tail;
}

// Emits variables and constraints for layers 1..L of one network copy.
// Returns post-activation variable indices per layer plus ReLU binaries.
struct CopyVars {
  std::vector<std::vector<int>> node;
  std::vector<std::vector<int>> relu;
};

inline CopyVars append_network_copy(MilpModel& model, const Network& net, const BoundsTable& bounds,
                                    const std::vector<int>& input_vars, int copy, int upto_layers = -1) {
  // upto_layers < depth builds a prefix of the network (every built layer is
  // then treated as a hidden ReLU layer); bound tightening uses this.
  const int depth = upto_layers < 0 ? net.depth() : upto_layers;
  CopyVars out;
  out.node.resize(depth);
  out.relu.resize(depth);
  const std::vector<int>* prev = &input_vars;
  for (int l = 1; l <= depth; ++l) {
    const Layer& layer = net.layers()[l - 1];
    const bool last = layer.activation == Activation::Linear;
    auto& nodes = out.node[l - 1];
    auto& relus = out.relu[l - 1];
    nodes.assign(layer.out_dim(), -1);
    relus.assign(layer.out_dim(), -1);
    for (int k = 0; k < layer.out_dim(); ++k) {
      const NodeBounds& nb = bounds.at(l, k);
      // Affine expression of the preactivation over surviving upstream vars.
      std::vector<std::pair<int, double>> expr;
      for (int c = 0; c < layer.in_dim(); ++c) {
        const int pv = (*prev)[c];
        const double w = layer.weights(k, c);
        if (pv >= 0 && w != 0.0) expr.emplace_back(pv, w);
      }
      const double b = layer.bias[k];
      const std::string tail = "l" + std::to_string(l) + "_n" + std::to_string(k);
      if (last) {
        const int y = model.add_var(vname("y", copy, "j" + std::to_string(k)), VarKind::Continuous, nb.lower, nb.upper);
        nodes[k] = y;
        LinRow eq;
        eq.coeffs = expr;
        eq.coeffs.emplace_back(y, -1.0);
        eq.sense = RowSense::Eq;
        eq.rhs = -b;  // sum(w*prev) - y = -b
        model.add_row(std::move(eq));
        continue;
      }
      switch (nb.stability) {
        case ReluStability::StablyInactive:
          break;  // dropped; downstream contributions vanish
        case ReluStability::StablyActive: {
          const int x = model.add_var(vname("h", copy, tail), VarKind::Continuous, std::max(0.0, nb.lower), nb.upper);
          nodes[k] = x;
          LinRow eq;
          eq.coeffs = expr;
          eq.coeffs.emplace_back(x, -1.0);
          eq.sense = RowSense::Eq;
          eq.rhs = -b;
          model.add_row(std::move(eq));
          break;
        }
        case ReluStability::Unstable: {
          const int x = model.add_var(vname("h", copy, tail), VarKind::Continuous, 0.0, nb.upper);
          const int z = model.add_var(vname("z", copy, tail), VarKind::Binary, 0.0, 1.0);
          nodes[k] = x;
          relus[k] = z;
          // x <= W x_prev + b - l(1-z)
          LinRow up;
          up.coeffs.emplace_back(x, 1.0);
          for (const auto& [pv, w] : expr) up.coeffs.emplace_back(pv, -w);
          up.coeffs.emplace_back(z, -nb.lower);
          up.sense = RowSense::Le;
          up.rhs = b - nb.lower;
          model.add_row(std::move(up));
          // x >= W x_prev + b
          LinRow lo;
          lo.coeffs.emplace_back(x, 1.0);
          for (const auto& [pv, w] : expr) lo.coeffs.emplace_back(pv, -w);
          lo.sense = RowSense::Ge;
          lo.rhs = b;
          model.add_row(std::move(lo));
          // x <= u z
          LinRow cap;
          cap.coeffs.emplace_back(x, 1.0);
          cap.coeffs.emplace_back(z, -nb.upper);
          cap.sense = RowSense::Le;
          cap.rhs = 0.0;
          model.add_row(std::move(cap));
          // x >= 0 is the variable's lower bound
          break;
        }
      }
    }
    prev = &nodes;
  }
  return out;
}

inline void append_extra_constraints(MilpModel& model, const InverseProblem& problem,
                                     const std::vector<int>& input_vars) {
  for (const InputConstraint& c : problem.extra_constraints) {
    LinRow row;
    for (size_t i = 0; i < c.coeffs.size(); ++i)
      if (c.coeffs[i] != 0.0) row.coeffs.emplace_back(input_vars[i], c.coeffs[i]);
    row.sense = c.sense;
    row.rhs = c.rhs;
    model.add_row(std::move(row));
  }
}

}  // namespace detail

// Eq. 6-style minimization encoding, one network copy per target, residual
// epigraph objective min sum_j s_j summed over targets.
inline EncodedProblem encode_inverse(const Network& net, const BoundsTable& bounds, const InverseProblem& problem) {
  problem.validate(net);
  if (problem.robustness)
    throw std::invalid_argument("encode_inverse: problem has a robustness query; use encode_robustness");
  bounds.check_shape(net);

  EncodedProblem enc;
  enc.problem = problem;
  enc.n_copies = static_cast<int>(problem.targets.size());
  MilpModel& model = enc.model;
  model.sense = ObjSense::Minimize;

  Vec lo, hi;
  problem.effective_box(lo, hi);
  const auto& out_bounds = bounds.layers.back();

  for (int c = 0; c < enc.n_copies; ++c) {
    std::vector<int> inputs(net.input_dim());
    for (int i = 0; i < net.input_dim(); ++i)
      inputs[i] = model.add_var(detail::vname("x0", c, "i" + std::to_string(i)), VarKind::Continuous, lo[i], hi[i]);
    enc.input_var.push_back(inputs);
    detail::CopyVars cv = detail::append_network_copy(model, net, bounds, inputs, c);
    enc.node_var.push_back(std::move(cv.node));
    enc.relu_var.push_back(std::move(cv.relu));

    const Vec& t = problem.targets[c];
    std::vector<int> resid(net.output_dim());
    for (int j = 0; j < net.output_dim(); ++j) {
      const double s_up = std::max(out_bounds[j].upper - t[j], t[j] - out_bounds[j].lower);
      const int s = model.add_var(detail::vname("s", c, "j" + std::to_string(j)), VarKind::Continuous, 0.0,
                                  std::max(0.0, s_up));
      resid[j] = s;
      const int y = enc.node_var[c].back()[j];
      LinRow a;  // s >= y - t  <=>  s - y >= -t
      a.coeffs = {{s, 1.0}, {y, -1.0}};
      a.sense = RowSense::Ge;
      a.rhs = -t[j];
      model.add_row(std::move(a));
      LinRow bconstr;  // s >= t - y  <=>  s + y >= t
      bconstr.coeffs = {{s, 1.0}, {y, 1.0}};
      bconstr.sense = RowSense::Ge;
      bconstr.rhs = t[j];
      model.add_row(std::move(bconstr));
      model.objective.emplace_back(s, 1.0);
    }
    enc.resid_var.push_back(std::move(resid));
    detail::append_extra_constraints(model, problem, enc.input_var[c]);
  }
  model.validate();
  return enc;
}

// Eq. 7: binary selector per input shared across all target copies,
// sum q <= D, and 0 <= x0_i <= q_i in every copy.
inline void add_selection(EncodedProblem& enc, int budget) {
  const int k0 = static_cast<int>(enc.input_var[0].size());
  if (budget < 1 || budget > k0)
    throw std::invalid_argument("add_selection: budget must be in [1, " + std::to_string(k0) + "]");
  for (int c = 0; c < enc.n_copies; ++c)
    for (int i = 0; i < k0; ++i)
      if (enc.model.vars[enc.input_var[c][i]].lower < 0.0)
        throw std::invalid_argument("add_selection: inputs must be normalized to nonnegative lower bounds");

  MilpModel& model = enc.model;
  enc.select_var.resize(k0);
  LinRow cap;
  for (int i = 0; i < k0; ++i) {
    enc.select_var[i] = model.add_var("q_i" + std::to_string(i), VarKind::Binary, 0.0, 1.0);
    cap.coeffs.emplace_back(enc.select_var[i], 1.0);
  }
  cap.sense = RowSense::Le;
  cap.rhs = budget;
  model.add_row(std::move(cap));
  for (int c = 0; c < enc.n_copies; ++c) {
    for (int i = 0; i < k0; ++i) {
      LinRow link;  // x0 <= q
      link.coeffs = {{enc.input_var[c][i], 1.0}, {enc.select_var[i], -1.0}};
      link.sense = RowSense::Le;
      link.rhs = 0.0;
      model.add_row(std::move(link));
    }
  }
  model.validate();
}

// Flagged inputs become general-integer variables (finite bounds required).
inline void encode_integer_design(EncodedProblem& enc) {
  const InverseProblem& p = enc.problem;
  if (p.integer_design.empty()) return;
  for (int c = 0; c < enc.n_copies; ++c) {
    for (size_t i = 0; i < p.integer_design.size(); ++i) {
      if (!p.integer_design[i]) continue;
      Variable& v = enc.model.vars[enc.input_var[c][i]];
      if (!std::isfinite(v.lower) || !std::isfinite(v.upper))
        throw std::invalid_argument("encode_integer_design: input " + std::to_string(i) + " has unbounded box");
      v.kind = VarKind::Integer;
    }
  }
  enc.model.validate();
}

// Eq. 9: worst-case L1 deviation over the epsilon hypercube, encoded as a
// maximization with a per-output binary choosing the sign of the residual.
// Outputs whose error interval has a fixed sign need no binary.
inline EncodedProblem encode_robustness(const Network& net, const BoundsTable& bounds,
                                        const InverseProblem& problem) {
  problem.validate(net);
  if (!problem.robustness) throw std::invalid_argument("encode_robustness: problem lacks a robustness query");
  bounds.check_shape(net);

  EncodedProblem enc;
  enc.problem = problem;
  enc.n_copies = 1;
  MilpModel& model = enc.model;
  model.sense = ObjSense::Maximize;

  Vec lo, hi;
  problem.effective_box(lo, hi);

  std::vector<int> inputs(net.input_dim());
  for (int i = 0; i < net.input_dim(); ++i)
    inputs[i] = model.add_var(detail::vname("x0", 0, "i" + std::to_string(i)), VarKind::Continuous, lo[i], hi[i]);
  enc.input_var.push_back(inputs);
  detail::CopyVars cv = detail::append_network_copy(model, net, bounds, inputs, 0);
  enc.node_var.push_back(std::move(cv.node));
  enc.relu_var.push_back(std::move(cv.relu));

  const Vec& t = problem.targets[0];
  const auto& out_bounds = bounds.layers.back();
  std::vector<int> resid(net.output_dim());
  std::vector<int> dirs(net.output_dim(), -1);
  for (int j = 0; j < net.output_dim(); ++j) {
    const int y = enc.node_var[0].back()[j];
    const double e_lo = out_bounds[j].lower - t[j];
    const double e_hi = out_bounds[j].upper - t[j];
    const double s_up = std::max({0.0, e_hi, -e_lo});
    const int s = model.add_var(detail::vname("s", 0, "j" + std::to_string(j)), VarKind::Continuous, 0.0, s_up);
    resid[j] = s;
    model.objective.emplace_back(s, 1.0);
    if (e_lo >= 0.0) {  // error provably nonnegative: s = y - t
      LinRow eq;
      eq.coeffs = {{s, 1.0}, {y, -1.0}};
      eq.sense = RowSense::Eq;
      eq.rhs = -t[j];
      model.add_row(std::move(eq));
      continue;
    }
    if (e_hi <= 0.0) {  // provably nonpositive: s = t - y
      LinRow eq;
      eq.coeffs = {{s, 1.0}, {y, 1.0}};
      eq.sense = RowSense::Eq;
      eq.rhs = t[j];
      model.add_row(std::move(eq));
      continue;
    }
    const int d = model.add_var(detail::vname("d", 0, "j" + std::to_string(j)), VarKind::Binary, 0.0, 1.0);
    dirs[j] = d;
    const double m1 = -2.0 * e_lo;
    const double m2 = 2.0 * e_hi;
    LinRow c1;  // s <= (y - t) + M1 (1 - d)
    c1.coeffs = {{s, 1.0}, {y, -1.0}, {d, m1}};
    c1.sense = RowSense::Le;
    c1.rhs = -t[j] + m1;
    model.add_row(std::move(c1));
    LinRow c2;  // s <= (t - y) + M2 d
    c2.coeffs = {{s, 1.0}, {y, 1.0}, {d, -m2}};
    c2.sense = RowSense::Le;
    c2.rhs = t[j];
    model.add_row(std::move(c2));
    LinRow g1;  // s >= y - t
    g1.coeffs = {{s, 1.0}, {y, -1.0}};
    g1.sense = RowSense::Ge;
    g1.rhs = -t[j];
    model.add_row(std::move(g1));
    LinRow g2;  // s >= t - y
    g2.coeffs = {{s, 1.0}, {y, 1.0}};
    g2.sense = RowSense::Ge;
    g2.rhs = t[j];
    model.add_row(std::move(g2));
  }
  enc.resid_var.push_back(std::move(resid));
  enc.absdir_var.push_back(std::move(dirs));
  detail::append_extra_constraints(model, problem, enc.input_var[0]);
  model.validate();
  return enc;
}

struct DecodedSolution {
  std::vector<Vec> inputs;   // per target copy
  std::vector<Vec> outputs;  // re-simulated network outputs
  double objective_resimulated = 0.0;
  std::vector<int> selected;  // selection mode: indices with q = 1
};

// Pull the design out of a MILP assignment and re-simulate it through the
// network; the re-simulated objective must agree with the solver's.
inline DecodedSolution decode_solution(const Network& net, const EncodedProblem& enc, const Vec& assignment) {
  DecodedSolution dec;
  for (int c = 0; c < enc.n_copies; ++c) {
    Vec x0(enc.input_var[c].size());
    for (size_t i = 0; i < x0.size(); ++i) x0[i] = assignment[enc.input_var[c][i]];
    Vec y = output(net, x0);
    dec.objective_resimulated += l1_distance(y, enc.problem.targets[c]);
    dec.inputs.push_back(std::move(x0));
    dec.outputs.push_back(std::move(y));
  }
  for (size_t i = 0; i < enc.select_var.size(); ++i)
    if (assignment[enc.select_var[i]] > 0.5) dec.selected.push_back(static_cast<int>(i));
  return dec;
}

// Lift a design (one input vector per copy) to a full MILP assignment by
// running the network and reading the activation pattern off the
// preactivations. For any in-box design with sound bounds the result is
// feasible; used for incumbent injection and the completeness tests.
inline Vec lift_point(const Network& net, const EncodedProblem& enc, const std::vector<Vec>& inputs) {
  if (static_cast<int>(inputs.size()) != enc.n_copies)
    throw std::invalid_argument("lift_point: need one input vector per target copy");
  Vec x(enc.model.num_vars(), 0.0);
  for (int c = 0; c < enc.n_copies; ++c) {
    const Vec& x0 = inputs[c];
    for (size_t i = 0; i < enc.input_var[c].size(); ++i) x[enc.input_var[c][i]] = x0[i];
    // Forward pass with preactivations.
    Vec cur = x0;
    for (int l = 1; l <= net.depth(); ++l) {
      const Layer& layer = net.layers()[l - 1];
      Vec pre = layer.weights.multiply(cur);
      for (int k = 0; k < layer.out_dim(); ++k) pre[k] += layer.bias[k];
      Vec post = pre;
      if (layer.activation == Activation::ReLU)
        for (double& v : post) v = std::max(0.0, v);
      for (int k = 0; k < layer.out_dim(); ++k) {
        const int nv = enc.node_var[c][l - 1][k];
        if (nv >= 0) x[nv] = post[k];
        const int zv = enc.relu_var[c][l - 1][k];
        if (zv >= 0) x[zv] = pre[k] > 0.0 ? 1.0 : 0.0;
      }
      cur = std::move(post);
    }
    for (int j = 0; j < net.output_dim(); ++j) {
      const double e = cur[j] - enc.problem.targets[c][j];
      x[enc.resid_var[c][j]] = std::fabs(e);
      if (!enc.absdir_var.empty() && enc.absdir_var[c][j] >= 0)
        x[enc.absdir_var[c][j]] = e > 0.0 ? 1.0 : 0.0;
    }
  }
  for (size_t i = 0; i < enc.select_var.size(); ++i) {
    bool used = false;
    for (int c = 0; c < enc.n_copies; ++c) used = used || inputs[c][i] > 0.0;
    x[enc.select_var[i]] = used ? 1.0 : 0.0;
  }
  return x;
}

}  // namespace relumip
