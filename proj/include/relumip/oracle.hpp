#pragma once

// Independent brute-force references for the test and acceptance suites.
// Deliberately simple and slow: activation patterns are enumerated
// exhaustively and each pattern becomes a plain LP with equality/inequality
// consistency rows. The big-M encoding and branch-and-bound are never used
// here, so a bug shared with the encoder would still be caught.

#include <optional>
#include <vector>

#include "relumip/bounds.hpp"
#include "relumip/encoder.hpp"
#include "relumip/simplex.hpp"

namespace relumip {
namespace oracle {

struct Optimum {
  double objective = kInf;
  std::vector<Vec> inputs;  // per target
  bool feasible = false;
};

namespace detail {

struct UnstableNode {
  int layer;  // 1-based
  int node;
};

// LP for one activation pattern of one target: active nodes carry an
// equality and preact >= 0, inactive nodes are zero with preact <= 0.
inline std::optional<std::pair<double, Vec>> pattern_lp(const Network& net, const Vec& lo, const Vec& hi,
                                                        const std::vector<InputConstraint>& extras, const Vec& t,
                                                        const BoundsTable& itv,
                                                        const std::vector<UnstableNode>& unstable,
                                                        unsigned long mask) {
  MilpModel lp;
  std::vector<int> inputs(net.input_dim());
  for (int i = 0; i < net.input_dim(); ++i)
    inputs[i] = lp.add_var("x" + std::to_string(i), VarKind::Continuous, lo[i], hi[i]);
  for (const InputConstraint& c : extras) {
    LinRow row;
    for (size_t i = 0; i < c.coeffs.size(); ++i)
      if (c.coeffs[i] != 0.0) row.coeffs.emplace_back(inputs[i], c.coeffs[i]);
    row.sense = c.sense;
    row.rhs = c.rhs;
    lp.add_row(std::move(row));
  }

  std::vector<char> active_flag;  // resolved per unstable node, in order
  {
    active_flag.resize(unstable.size());
    for (size_t u = 0; u < unstable.size(); ++u) active_flag[u] = (mask >> u) & 1u;
  }

  size_t next_unstable = 0;
  std::vector<int> prev = inputs;
  for (int l = 1; l <= net.depth(); ++l) {
    const Layer& layer = net.layers()[l - 1];
    const bool last = l == net.depth();
    std::vector<int> cur(layer.out_dim(), -1);
    for (int k = 0; k < layer.out_dim(); ++k) {
      std::vector<std::pair<int, double>> expr;
      for (int c = 0; c < layer.in_dim(); ++c)
        if (prev[c] >= 0 && layer.weights(k, c) != 0.0) expr.emplace_back(prev[c], layer.weights(k, c));
      const double b = layer.bias[k];
      bool active;
      bool need_sign_row = false;
      if (last) {
        active = true;  // linear output: identity
      } else {
        switch (itv.at(l, k).stability) {
          case ReluStability::StablyActive: active = true; break;
          case ReluStability::StablyInactive: active = false; break;
          default: {
            active = active_flag[next_unstable];
            ++next_unstable;
            need_sign_row = true;
          }
        }
      }
      if (active) {
        const int v = lp.add_var("n" + std::to_string(l) + "_" + std::to_string(k), VarKind::Continuous,
                                 last ? -kInf : 0.0, kInf);
        cur[k] = v;
        LinRow eq;
        eq.coeffs = expr;
        eq.coeffs.emplace_back(v, -1.0);
        eq.sense = RowSense::Eq;
        eq.rhs = -b;
        lp.add_row(std::move(eq));
        if (need_sign_row) {
          LinRow sign;  // preactivation >= 0
          sign.coeffs = expr;
          sign.sense = RowSense::Ge;
          sign.rhs = -b;
          lp.add_row(std::move(sign));
        }
      } else {
        cur[k] = -1;
        if (need_sign_row) {
          LinRow sign;  // preactivation <= 0
          sign.coeffs = expr;
          sign.sense = RowSense::Le;
          sign.rhs = -b;
          lp.add_row(std::move(sign));
        }
      }
    }
    prev = std::move(cur);
  }
  // L1 epigraph over the outputs.
  for (int j = 0; j < net.output_dim(); ++j) {
    const int s = lp.add_var("s" + std::to_string(j), VarKind::Continuous, 0.0, kInf);
    lp.objective.emplace_back(s, 1.0);
    LinRow a;
    a.coeffs = {{s, 1.0}};
    if (prev[j] >= 0) a.coeffs.emplace_back(prev[j], -1.0);
    a.sense = RowSense::Ge;
    a.rhs = -t[j];
    lp.add_row(std::move(a));
    LinRow c;
    c.coeffs = {{s, 1.0}};
    if (prev[j] >= 0) c.coeffs.emplace_back(prev[j], 1.0);
    c.sense = RowSense::Ge;
    c.rhs = t[j];
    lp.add_row(std::move(c));
  }
  LpResult r = solve_lp(lp);
  if (r.status != LpStatus::Optimal) return std::nullopt;
  Vec x0(net.input_dim());
  for (int i = 0; i < net.input_dim(); ++i) x0[i] = r.x[inputs[i]];
  return std::make_pair(r.obj, std::move(x0));
}

inline std::pair<double, Vec> single_target_optimum(const Network& net, const Vec& lo, const Vec& hi,
                                                    const std::vector<InputConstraint>& extras, const Vec& t,
                                                    int max_unstable) {
  const BoundsTable itv = interval_bounds(net, lo, hi);
  std::vector<UnstableNode> unstable;
  for (int l = 1; l < net.depth(); ++l)
    for (int k = 0; k < net.layers()[l - 1].out_dim(); ++k)
      if (itv.at(l, k).stability == ReluStability::Unstable) unstable.push_back({l, k});
  if (static_cast<int>(unstable.size()) > max_unstable)
    throw std::invalid_argument("oracle: " + std::to_string(unstable.size()) + " unstable ReLUs exceed the limit of " +
                                std::to_string(max_unstable));
  double best = kInf;
  Vec best_x;
  const unsigned long n_patterns = 1ul << unstable.size();
  for (unsigned long mask = 0; mask < n_patterns; ++mask) {
    auto r = pattern_lp(net, lo, hi, extras, t, itv, unstable, mask);
    if (r && r->first < best) {
      best = r->first;
      best_x = std::move(r->second);
    }
  }
  return {best, std::move(best_x)};
}

}  // namespace detail

// Global optimum of the L1 inversion by enumerating every activation
// pattern of the interval-unstable ReLUs. Targets are independent (they
// share nothing without selection), so the optimum is the per-target sum.
inline Optimum enumerate_patterns(const Network& net, const InverseProblem& problem, int max_unstable = 16) {
  problem.validate(net);
  Vec lo, hi;
  problem.effective_box(lo, hi);
  Optimum best;
  best.objective = 0.0;
  best.feasible = true;
  for (const Vec& t : problem.targets) {
    auto [obj, x0] = detail::single_target_optimum(net, lo, hi, problem.extra_constraints, t, max_unstable);
    if (!std::isfinite(obj)) return {};  // no feasible pattern
    best.objective += obj;
    best.inputs.push_back(std::move(x0));
  }
  return best;
}

struct SelectionOptimum {
  double objective = kInf;
  std::vector<int> support;
  std::vector<Vec> inputs;
  bool feasible = false;
};

// Exhaustive subset loop: every support of size <= budget, inputs outside it
// fixed to zero, inner optimum by pattern enumeration.
inline SelectionOptimum enumerate_selection(const Network& net, const InverseProblem& problem, int budget,
                                            long max_subsets = 10000, int max_unstable = 16) {
  problem.validate(net);
  const int k0 = net.input_dim();
  if (budget < 1 || budget > k0) throw std::invalid_argument("enumerate_selection: bad budget");
  long count = 0, binom = 1;
  for (int d = 1; d <= budget; ++d) {
    binom = binom * (k0 - d + 1) / d;
    count += binom;
  }
  if (count > max_subsets)
    throw std::invalid_argument("enumerate_selection: " + std::to_string(count) + " subsets exceed the limit");

  SelectionOptimum best;
  Vec base_lo = problem.design_lower, base_hi = problem.design_upper;
  std::vector<int> subset;
  auto evaluate = [&]() {
    Vec lo(k0), hi(k0);
    for (int i = 0; i < k0; ++i) {
      const bool in = std::find(subset.begin(), subset.end(), i) != subset.end();
      if (in) {
        lo[i] = std::max(base_lo[i], 0.0);
        hi[i] = std::min(base_hi[i], 1.0);
      } else {
        if (base_lo[i] > 0.0) return;  // zero-fixing impossible: subset infeasible
        lo[i] = hi[i] = 0.0;
      }
      if (lo[i] > hi[i]) return;
    }
    double total = 0.0;
    std::vector<Vec> inputs;
    for (const Vec& t : problem.targets) {
      auto [obj, x0] = detail::single_target_optimum(net, lo, hi, problem.extra_constraints, t, max_unstable);
      if (!std::isfinite(obj)) return;
      total += obj;
      inputs.push_back(std::move(x0));
    }
    if (total < best.objective - 1e-15) {
      best.objective = total;
      best.support = subset;
      best.inputs = std::move(inputs);
      best.feasible = true;
    }
  };
  // Subsets of size 0..budget in lexicographic order.
  std::vector<int> stack;
  auto rec = [&](auto&& self, int start) -> void {
    evaluate();
    if (static_cast<int>(subset.size()) == budget) return;
    for (int i = start; i < k0; ++i) {
      subset.push_back(i);
      self(self, i + 1);
      subset.pop_back();
    }
  };
  rec(rec, 0);
  return best;
}

struct RobustnessSample {
  double max_deviation = 0.0;
  Vec worst_input;
};

// Inner approximation of the worst case: random points in the epsilon box
// plus every vertex when the dimension allows it.
inline RobustnessSample sample_robustness(const Network& net, const Vec& candidate, double epsilon, const Vec& lo_box,
                                          const Vec& hi_box, const Vec& target, int n_samples, uint64_t seed = 0) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("sample_robustness: epsilon must be >= 0");
  const int m = net.input_dim();
  Vec lo(m), hi(m);
  for (int i = 0; i < m; ++i) {
    lo[i] = std::max(lo_box[i], candidate[i] - epsilon);
    hi[i] = std::min(hi_box[i], candidate[i] + epsilon);
    if (lo[i] > hi[i]) throw std::invalid_argument("sample_robustness: empty box");
  }
  RobustnessSample out;
  auto consider = [&](const Vec& x) {
    const double d = l1_distance(output(net, x), target);
    if (d >= out.max_deviation) {
      out.max_deviation = d;
      out.worst_input = x;
    }
  };
  consider(clamp_to_box(candidate, lo, hi));
  Rng rng(seed);
  Vec x(m);
  for (int s = 0; s < n_samples; ++s) {
    for (int i = 0; i < m; ++i) x[i] = rng.uniform(lo[i], hi[i]);
    consider(x);
  }
  if (m <= 12) {
    for (unsigned long mask = 0; mask < (1ul << m); ++mask) {
      for (int i = 0; i < m; ++i) x[i] = (mask >> i) & 1u ? hi[i] : lo[i];
      consider(x);
    }
  }
  return out;
}

// All-integer design scan: walk the integer lattice of the box, keep points
// satisfying the extra constraints, score by forward evaluation.
inline Optimum enumerate_integer_designs(const Network& net, const InverseProblem& problem,
                                         long max_points = 2000000) {
  problem.validate(net);
  const int m = net.input_dim();
  for (int i = 0; i < m; ++i)
    if (problem.integer_design.empty() || !problem.integer_design[i])
      throw std::invalid_argument("enumerate_integer_designs: every input must be integer-flagged");
  std::vector<long> lo(m), hi(m);
  long total = 1;
  for (int i = 0; i < m; ++i) {
    lo[i] = static_cast<long>(std::ceil(problem.design_lower[i] - 1e-9));
    hi[i] = static_cast<long>(std::floor(problem.design_upper[i] + 1e-9));
    if (lo[i] > hi[i]) return {};
    total *= hi[i] - lo[i] + 1;
    if (total > max_points) throw std::invalid_argument("enumerate_integer_designs: lattice too large");
  }
  Optimum best;
  std::vector<long> point(m, 0);
  for (int i = 0; i < m; ++i) point[i] = lo[i];
  Vec x(m);
  std::vector<Vec> best_inputs(problem.targets.size());
  std::vector<double> best_obj(problem.targets.size(), kInf);
  while (true) {
    for (int i = 0; i < m; ++i) x[i] = static_cast<double>(point[i]);
    bool ok = true;
    for (const InputConstraint& c : problem.extra_constraints) {
      double a = 0.0;
      for (int i = 0; i < m; ++i) a += c.coeffs[i] * x[i];
      if (c.sense == RowSense::Le) ok = a <= c.rhs + 1e-9;
      else if (c.sense == RowSense::Ge) ok = a >= c.rhs - 1e-9;
      else ok = std::fabs(a - c.rhs) <= 1e-9;
      if (!ok) break;
    }
    if (ok) {
      const Vec y = output(net, x);
      for (size_t ti = 0; ti < problem.targets.size(); ++ti) {
        const double obj = l1_distance(y, problem.targets[ti]);
        if (obj < best_obj[ti] - 1e-15) {
          best_obj[ti] = obj;
          best_inputs[ti] = x;
        }
      }
    }
    int carry = 0;
    while (carry < m && ++point[carry] > hi[carry]) {
      point[carry] = lo[carry];
      ++carry;
    }
    if (carry == m) break;
  }
  best.objective = 0.0;
  for (size_t ti = 0; ti < problem.targets.size(); ++ti) {
    if (!std::isfinite(best_obj[ti])) return {};
    best.objective += best_obj[ti];
    best.inputs.push_back(best_inputs[ti]);
  }
  best.feasible = true;
  return best;
}

// Brute-force LP reference: enumerate all basic points (n tight rows chosen
// from constraints and finite bounds), keep the feasible ones, return the
// best objective. Exponential; only for tiny test models.
inline std::optional<double> lp_vertex_optimum(const MilpModel& model) {
  const int n = model.num_vars();
  struct Row {
    Vec a;
    double b;
  };
  std::vector<Row> rows;
  for (const LinRow& r : model.constraints) {
    Row row{Vec(n, 0.0), r.rhs};
    for (const auto& [idx, c] : r.coeffs) row.a[idx] += c;
    rows.push_back(std::move(row));
  }
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(model.vars[j].lower)) {
      Row row{Vec(n, 0.0), model.vars[j].lower};
      row.a[j] = 1.0;
      rows.push_back(std::move(row));
    }
    if (std::isfinite(model.vars[j].upper)) {
      Row row{Vec(n, 0.0), model.vars[j].upper};
      row.a[j] = 1.0;
      rows.push_back(std::move(row));
    }
  }
  const int total = static_cast<int>(rows.size());
  std::optional<double> best;
  std::vector<int> pick(n, 0);
  auto feasible = [&](const Vec& x) {
    for (int j = 0; j < n; ++j)
      if (x[j] < model.vars[j].lower - 1e-7 || x[j] > model.vars[j].upper + 1e-7) return false;
    for (const LinRow& r : model.constraints) {
      const double a = model.row_activity(r, x);
      if (r.sense == RowSense::Le && a > r.rhs + 1e-7) return false;
      if (r.sense == RowSense::Ge && a < r.rhs - 1e-7) return false;
      if (r.sense == RowSense::Eq && std::fabs(a - r.rhs) > 1e-7) return false;
    }
    return true;
  };
  auto rec = [&](auto&& self, int start, int depth) -> void {
    if (depth == n) {
      Matrix a(n, n);
      Vec b(n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) a(i, j) = rows[pick[i]].a[j];
        b[i] = rows[pick[i]].b;
      }
      Vec x;
      if (!solve_dense(a, b, x)) return;
      if (!feasible(x)) return;
      const double obj = model.objective_value(x);
      if (!best) best = obj;
      else if (model.sense == ObjSense::Minimize) best = std::min(*best, obj);
      else best = std::max(*best, obj);
      return;
    }
    for (int i = start; i < total; ++i) {
      pick[depth] = i;
      self(self, i + 1, depth + 1);
    }
  };
  rec(rec, 0, 0);
  return best;
}

}  // namespace oracle
}  // namespace relumip
