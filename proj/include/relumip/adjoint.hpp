#pragma once

// Gradient-based inversion (the neural-adjoint baseline) and the hybrid
// coordinator that runs it next to branch-and-bound. The descent minimizes
// the L1 objective plus a quadratic boundary penalty for leaving the design
// box; iterates are projected onto the box before they are scored, so every
// returned design is feasible and always injectable.

#include <atomic>
#include <mutex>
#include <thread>

#include "relumip/bnb.hpp"
#include "relumip/encoder.hpp"
#include "relumip/network.hpp"

namespace relumip {

struct AdjointConfig {
  int restarts = 8;
  int max_iters = 2000;
  int patience = 10;            // consecutive non-improving iterations before stopping
  double improvement_tol = 1e-6;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double boundary_penalty_weight = 10.0;
  uint64_t seed = 0;
  std::vector<Vec> initial_points;  // informed initializations, tried before random ones

  void validate() const {
    if (restarts < 1 || max_iters < 1 || patience < 1)
      throw std::invalid_argument("adjoint: restarts, max_iters and patience must be >= 1");
  }
};

struct AdjointResult {
  std::vector<Vec> inputs;  // one design per target
  double objective = 0.0;   // summed true L1 objective of the projected designs
  struct RestartRecord {
    int target = 0;
    int restart = 0;
    int iterations = 0;
    double objective = 0.0;
  };
  std::vector<RestartRecord> trace;
};

namespace detail {

inline double true_objective(const Network& net, const Vec& x0, const Vec& t) {
  return l1_distance(output(net, x0), t);
}

struct DescentOutcome {
  Vec x0;
  double objective = 0.0;
  int iterations = 0;
};

inline DescentOutcome adam_descent(const Network& net, const Vec& t, const Vec& lo, const Vec& hi, Vec x,
                                   const AdjointConfig& cfg) {
  const int m = static_cast<int>(x.size());
  Vec m1(m, 0.0), m2(m, 0.0);
  Vec best_x = clamp_to_box(x, lo, hi);
  double best = true_objective(net, best_x, t);
  int bad = 0, it = 0;
  for (it = 1; it <= cfg.max_iters; ++it) {
    Vec g = gradient(net, x, t);
    for (int i = 0; i < m; ++i) {
      // d/dx of w * (max(0, x-u)^2 + max(0, l-x)^2)
      if (x[i] > hi[i]) g[i] += 2.0 * cfg.boundary_penalty_weight * (x[i] - hi[i]);
      else if (x[i] < lo[i]) g[i] -= 2.0 * cfg.boundary_penalty_weight * (lo[i] - x[i]);
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, it);
    const double bc2 = 1.0 - std::pow(cfg.beta2, it);
    for (int i = 0; i < m; ++i) {
      m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * g[i];
      m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      x[i] -= cfg.learning_rate * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + cfg.adam_eps);
    }
    const Vec proj = clamp_to_box(x, lo, hi);
    const double obj = true_objective(net, proj, t);
    if (obj < best - cfg.improvement_tol) bad = 0;
    else ++bad;
    if (obj < best) {
      best = obj;
      best_x = proj;
    }
    if (bad >= cfg.patience) break;
  }
  return {std::move(best_x), best, std::min(it, cfg.max_iters)};
}

}  // namespace detail

// Continuous box-constrained inversion only; selection and integer problems
// have no usable gradient and are rejected.
inline AdjointResult adjoint_invert(const Network& net, const InverseProblem& problem, const AdjointConfig& cfg) {
  cfg.validate();
  problem.validate(net);
  if (problem.selection_budget || problem.any_integer())
    throw std::invalid_argument("adjoint_invert: only continuous, non-selection problems are supported");
  Vec lo, hi;
  problem.effective_box(lo, hi);
  for (const Vec& p : cfg.initial_points)
    if (p.size() != lo.size()) throw std::invalid_argument("adjoint_invert: initial point dimension mismatch");

  Rng rng(cfg.seed);
  AdjointResult res;
  for (size_t ti = 0; ti < problem.targets.size(); ++ti) {
    const Vec& t = problem.targets[ti];
    Vec best_x;
    double best = kInf;
    for (int r = 0; r < cfg.restarts; ++r) {
      Vec init(lo.size());
      if (r < static_cast<int>(cfg.initial_points.size())) {
        init = clamp_to_box(cfg.initial_points[r], lo, hi);
      } else {
        for (size_t i = 0; i < init.size(); ++i) init[i] = rng.uniform(lo[i], hi[i]);
      }
      detail::DescentOutcome out = detail::adam_descent(net, t, lo, hi, std::move(init), cfg);
      res.trace.push_back({static_cast<int>(ti), r, out.iterations, out.objective});
      if (out.objective < best) {
        best = out.objective;
        best_x = std::move(out.x0);
      }
    }
    res.objective += best;
    res.inputs.push_back(std::move(best_x));
  }
  return res;
}

enum class GapSource { Milp, Adjoint };

struct GapEntry {
  double time_s = 0.0;
  double incumbent_obj = std::numeric_limits<double>::quiet_NaN();
  double relaxed_bound = 0.0;
  double gap = kInf;
  GapSource source = GapSource::Milp;
};

struct HybridResult {
  SolveReport report;
  std::vector<GapEntry> trace;
  EncodedProblem encoded;
};

// Runs branch-and-bound and the adjoint loop concurrently. Each finished
// restart is lifted to a full assignment and offered as an incumbent; the
// solver keeps the certified bound, so the final gap is valid no matter
// which side supplied the incumbent.
inline HybridResult hybrid_solve(const Network& net, const BoundsTable& bounds, const InverseProblem& problem,
                                 const AdjointConfig& adjoint_cfg, const BnbConfig& bnb_cfg) {
  adjoint_cfg.validate();
  problem.validate(net);
  if (problem.selection_budget || problem.any_integer() || problem.robustness)
    throw std::invalid_argument("hybrid_solve: only continuous, non-selection minimization is supported");

  HybridResult out;
  out.encoded = encode_inverse(net, bounds, problem);
  BranchAndBound solver(out.encoded.model, bnb_cfg);
  std::mutex trace_mu;
  solver.set_event_callback([&](const BnbEvent& e) {
    std::lock_guard<std::mutex> lock(trace_mu);
    out.trace.push_back({e.time_s, e.incumbent_obj, e.relaxed_bound, e.gap,
                         e.source == IncumbentSource::Injected ? GapSource::Adjoint : GapSource::Milp});
  });

  std::atomic<bool> done{false};
  std::thread tree([&] {
    out.report = solver.solve();
    done.store(true, std::memory_order_release);
  });

  Vec lo, hi;
  problem.effective_box(lo, hi);
  Rng rng(adjoint_cfg.seed);
  for (int r = 0; r < adjoint_cfg.restarts && !done.load(std::memory_order_acquire); ++r) {
    std::vector<Vec> designs;
    designs.reserve(problem.targets.size());
    for (const Vec& t : problem.targets) {
      Vec init(lo.size());
      if (r < static_cast<int>(adjoint_cfg.initial_points.size())) {
        init = clamp_to_box(adjoint_cfg.initial_points[r], lo, hi);
      } else {
        for (size_t i = 0; i < init.size(); ++i) init[i] = rng.uniform(lo[i], hi[i]);
      }
      designs.push_back(detail::adam_descent(net, t, lo, hi, std::move(init), adjoint_cfg).x0);
    }
    if (done.load(std::memory_order_acquire)) break;
    solver.inject_incumbent(lift_point(net, out.encoded, designs));
  }
  tree.join();
  return out;
}

inline void write_gap_trace_csv(std::ostream& os, const std::vector<GapEntry>& trace) {
  os << "time_s,incumbent,relaxed_bound,gap,source\n";
  char buf[160];
  for (const GapEntry& e : trace) {
    const char* src = e.source == GapSource::Adjoint ? "adjoint" : "milp";
    if (std::isnan(e.incumbent_obj))
      std::snprintf(buf, sizeof(buf), "%.6f,,%.12g,,%s\n", e.time_s, e.relaxed_bound, src);
    else
      std::snprintf(buf, sizeof(buf), "%.6f,%.12g,%.12g,%.12g,%s\n", e.time_s, e.incumbent_obj, e.relaxed_bound,
                    e.gap, src);
    os << buf;
  }
}

}  // namespace relumip
