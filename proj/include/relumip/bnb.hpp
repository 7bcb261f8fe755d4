#pragma once

// Branch-and-bound over the LP relaxation: best-bound node selection,
// most-fractional branching with index tie-break, floor/ceil splits for
// general integers. The tree runs on a single worker; feasible solutions can
// be injected from another thread mid-solve and become the incumbent when
// they validate and improve. Deterministic for a fixed model + config when
// nothing is injected.

#include <chrono>
#include <cmath>
#include <functional>
#include <mutex>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "relumip/simplex.hpp"

namespace relumip {

struct BnbConfig {
  double time_limit = 150.0;       // seconds
  double gap_tol = 1e-6;
  double integrality_tol = 1e-6;
  double lp_tol = 1e-7;
  uint64_t seed = 0;               // reserved for perturbation retries; tree search itself is deterministic
  long max_nodes = 50'000'000;

  void validate() const {
    if (!(time_limit > 0) || !(gap_tol > 0) || !(integrality_tol > 0) || !(lp_tol > 0))
      throw std::invalid_argument("bnb: tolerances and time limit must be positive");
  }
};

enum class SolveStatus { Optimal, Feasible, Infeasible, TimeLimit, Unbounded };

inline const char* solve_status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::TimeLimit: return "time_limit";
    case SolveStatus::Unbounded: return "unbounded";
  }
  return "?";
}

// Relative gap with an absolute floor on the denominator.
inline double relative_gap(double incumbent_obj, double relaxed_bound) {
  if (!std::isfinite(incumbent_obj) || !std::isfinite(relaxed_bound)) return kInf;
  return std::fabs(incumbent_obj - relaxed_bound) / std::max(1e-10, std::fabs(incumbent_obj));
}

struct SolveReport {
  SolveStatus status = SolveStatus::Infeasible;
  std::optional<Vec> incumbent;
  double incumbent_obj = std::numeric_limits<double>::quiet_NaN();
  double relaxed_bound = -kInf;  // certified bound in the model's own sense
  double gap = kInf;
  long nodes_explored = 0;
  double wall_time_s = 0.0;
};

enum class IncumbentSource { Milp, Injected };

// Progress event, emitted whenever the incumbent or the certified bound
// moves. Objective values are in the model's own sense.
struct BnbEvent {
  double time_s = 0.0;
  double incumbent_obj = std::numeric_limits<double>::quiet_NaN();
  double relaxed_bound = 0.0;
  double gap = kInf;
  IncumbentSource source = IncumbentSource::Milp;
};

class BranchAndBound {
 public:
  BranchAndBound(const MilpModel& model, BnbConfig config)
      : model_(model), cfg_(config), maximize_(model.sense == ObjSense::Maximize) {
    cfg_.validate();
    model_.validate();
    for (int j = 0; j < model_.num_vars(); ++j)
      if (model_.vars[j].kind != VarKind::Continuous) int_vars_.push_back(j);
  }

  void set_event_callback(std::function<void(const BnbEvent&)> cb) { on_event_ = std::move(cb); }

  struct InjectResult {
    bool accepted = false;
    std::string reason;
    double max_violation = 0.0;
  };

  // Validates the candidate against constraints, bounds and integrality, then
  // adopts it when it improves the incumbent. Safe to call from another
  // thread while solve() runs.
  InjectResult inject_incumbent(const Vec& candidate) {
    InjectResult r;
    if (static_cast<int>(candidate.size()) != model_.num_vars())
      throw std::invalid_argument("inject_incumbent: candidate has " + std::to_string(candidate.size()) +
                                  " entries, model has " + std::to_string(model_.num_vars()) + " vars");
    const double viol = model_.max_violation(candidate);
    r.max_violation = viol;
    if (viol > cfg_.lp_tol) {
      r.reason = "infeasible: max constraint/bound violation " + std::to_string(viol);
      return r;
    }
    for (int j : int_vars_) {
      const double f = std::fabs(candidate[j] - std::round(candidate[j]));
      if (f > cfg_.integrality_tol) {
        r.reason = "infeasible: var " + model_.vars[j].name + " off integer by " + std::to_string(f);
        return r;
      }
    }
    const double obj_min = signed_obj(model_.objective_value(candidate));
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (has_incumbent_ && obj_min >= best_obj_ - 1e-12) {
        r.reason = "not improving: objective " + std::to_string(unsigned_obj(obj_min)) + " vs incumbent " +
                   std::to_string(unsigned_obj(best_obj_));
        return r;
      }
      best_obj_ = obj_min;
      best_x_ = candidate;
      has_incumbent_ = true;
      r.accepted = true;
      emit_locked(IncumbentSource::Injected);
    }
    return r;
  }

  SolveReport solve(const Vec* incumbent_hint = nullptr) {
    start_ = Clock::now();
    bound_min_ = -kInf;
    nodes_ = 0;
    if (incumbent_hint) {
      InjectResult r = inject_incumbent(*incumbent_hint);
      if (!r.accepted && r.reason.rfind("not improving", 0) != 0)
        throw std::invalid_argument("solve: incumbent hint rejected: " + r.reason);
    }

    LpOptions lp_opt;
    lp_opt.feas_tol = cfg_.lp_tol;

    // Node-local bounds are reconstructed by walking the parent chain.
    struct Node {
      double bound;  // parent LP objective, minimize sense
      int parent;    // index into arena, -1 at root
      int var = -1;
      double nlo = 0.0, nhi = 0.0;
      uint64_t id = 0;
    };
    std::vector<Node> arena;
    using QEntry = std::pair<double, uint64_t>;  // (bound, id): best bound first, FIFO on ties
    std::priority_queue<QEntry, std::vector<QEntry>, std::greater<QEntry>> open;
    std::vector<size_t> id_to_arena;

    Vec lo(model_.num_vars()), hi(model_.num_vars());
    auto node_bounds = [&](int idx) {
      for (int j = 0; j < model_.num_vars(); ++j) {
        lo[j] = model_.vars[j].lower;
        hi[j] = model_.vars[j].upper;
      }
      for (int cur = idx; cur >= 0; cur = arena[cur].parent) {
        const Node& nd = arena[cur];
        if (nd.var >= 0) {
          lo[nd.var] = std::max(lo[nd.var], nd.nlo);
          hi[nd.var] = std::min(hi[nd.var], nd.nhi);
        }
      }
    };

    // Root relaxation: always solved, so a certified bound exists even when
    // the time budget is already spent.
    MilpModel relax = model_;
    if (maximize_) {
      relax.sense = ObjSense::Minimize;
      for (auto& [idx, c] : relax.objective) c = -c;
      relax.objective_constant = -relax.objective_constant;
    }
    node_bounds(-1);
    LpResult root = solve_lp(relax, &lo, &hi, lp_opt);
    ++nodes_;
    if (root.status == LpStatus::Infeasible) {
      bound_min_ = kInf;  // empty feasible set
      return finish(SolveStatus::Infeasible);
    }
    if (root.status == LpStatus::Unbounded) return finish(SolveStatus::Unbounded);

    update_bound(root.obj);
    uint64_t next_id = 0;
    arena.push_back({root.obj, -1});
    arena.back().id = next_id;
    id_to_arena.push_back(0);
    open.push({root.obj, next_id++});

    while (!open.empty()) {
      if (elapsed() > cfg_.time_limit) return finish(SolveStatus::TimeLimit);
      if (nodes_ >= cfg_.max_nodes) return finish(SolveStatus::TimeLimit);

      auto [pbound, pid] = open.top();
      open.pop();
      // Best-first: the popped bound is the smallest among open nodes.
      update_bound(pbound);
      if (done_by_gap()) return finish(SolveStatus::Optimal);
      {
        std::lock_guard<std::mutex> lock(mu_);
        if (has_incumbent_ && pbound >= best_obj_ - prune_eps()) {
          // Everything still open is at least as bad; the tree is exhausted.
          bound_min_ = best_obj_;
          emit_locked(IncumbentSource::Milp);
          break;
        }
      }
      const int ni = static_cast<int>(id_to_arena[pid]);
      node_bounds(ni);
      LpResult lp = solve_lp(relax, &lo, &hi, lp_opt);
      ++nodes_;
      if (lp.status != LpStatus::Optimal) continue;  // infeasible child: prune
      const double node_obj = std::max(lp.obj, pbound);
      {
        std::lock_guard<std::mutex> lock(mu_);
        if (has_incumbent_ && node_obj >= best_obj_ - prune_eps()) continue;
      }

      const int branch_var = pick_branch_var(lp.x);
      if (branch_var < 0) {
        accept_integral(relax, lp, lo, hi, lp_opt);
        if (done_by_gap()) return finish(SolveStatus::Optimal);
        continue;
      }
      const double v = lp.x[branch_var];
      const double fl = std::floor(v), ce = std::ceil(v);
      arena.push_back({node_obj, ni, branch_var, -kInf, fl, next_id});
      id_to_arena.push_back(arena.size() - 1);
      open.push({node_obj, next_id++});
      arena.push_back({node_obj, ni, branch_var, ce, kInf, next_id});
      id_to_arena.push_back(arena.size() - 1);
      open.push({node_obj, next_id++});
    }

    // Tree exhausted.
    std::lock_guard<std::mutex> lock(mu_);
    if (!has_incumbent_) {
      bound_min_ = kInf;
      return finish_locked(SolveStatus::Infeasible);
    }
    bound_min_ = std::max(bound_min_, best_obj_);
    return finish_locked(SolveStatus::Optimal);
  }

 private:
  using Clock = std::chrono::steady_clock;

  double signed_obj(double v) const { return maximize_ ? -v : v; }    // to minimize space
  double unsigned_obj(double v) const { return maximize_ ? -v : v; }  // back to model sense

  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  double prune_eps() const { return 1e-12 * std::max(1.0, std::fabs(best_obj_)); }

  int pick_branch_var(const Vec& x) const {
    int best = -1;
    double best_frac = cfg_.integrality_tol;
    for (int j : int_vars_) {
      const double f = std::fabs(x[j] - std::round(x[j]));
      if (f > best_frac + 1e-15) {
        best_frac = f;
        best = j;
      }
    }
    return best;
  }

  // LP solution integral within tolerance: snap the integer variables and
  // re-solve the continuous part so the stored incumbent is exactly integral.
  void accept_integral(const MilpModel& relax, const LpResult& lp, Vec lo, Vec hi, const LpOptions& lp_opt) {
    Vec cand = lp.x;
    double obj = lp.obj;
    if (!int_vars_.empty()) {
      for (int j : int_vars_) {
        const double r = std::round(cand[j]);
        lo[j] = r;
        hi[j] = r;
      }
      LpResult fixed = solve_lp(relax, &lo, &hi, lp_opt);
      ++nodes_;
      if (fixed.status == LpStatus::Optimal) {
        cand = fixed.x;
        for (int j : int_vars_) cand[j] = std::round(cand[j]);
        obj = fixed.obj;
      }
    }
    std::lock_guard<std::mutex> lock(mu_);
    if (!has_incumbent_ || obj < best_obj_ - 1e-12) {
      best_obj_ = obj;
      best_x_ = cand;
      has_incumbent_ = true;
      emit_locked(IncumbentSource::Milp);
    }
  }

  void update_bound(double candidate_min_bound) {
    std::lock_guard<std::mutex> lock(mu_);
    if (candidate_min_bound > bound_min_ + 1e-15) {
      bound_min_ = candidate_min_bound;
      if (has_incumbent_) bound_min_ = std::min(bound_min_, best_obj_);
      emit_locked(IncumbentSource::Milp);
    }
  }

  bool done_by_gap() {
    std::lock_guard<std::mutex> lock(mu_);
    if (!has_incumbent_) return false;
    return relative_gap(best_obj_, bound_min_) <= cfg_.gap_tol;
  }

  void emit_locked(IncumbentSource src) {
    if (!on_event_) return;
    BnbEvent e;
    e.time_s = elapsed();
    e.incumbent_obj = has_incumbent_ ? unsigned_obj(best_obj_) : std::numeric_limits<double>::quiet_NaN();
    e.relaxed_bound = unsigned_obj(bound_min_);
    e.gap = has_incumbent_ ? relative_gap(best_obj_, bound_min_) : kInf;
    e.source = src;
    on_event_(e);
  }

  SolveReport finish(SolveStatus status) {
    std::lock_guard<std::mutex> lock(mu_);
    return finish_locked(status);
  }

  SolveReport finish_locked(SolveStatus status) {
    SolveReport rep;
    rep.nodes_explored = nodes_;
    rep.wall_time_s = elapsed();
    if (has_incumbent_) {
      rep.incumbent = best_x_;
      rep.incumbent_obj = unsigned_obj(best_obj_);
      rep.gap = relative_gap(best_obj_, bound_min_);
    }
    rep.relaxed_bound = unsigned_obj(bound_min_);
    if (status == SolveStatus::Infeasible && has_incumbent_) status = SolveStatus::Optimal;
    if (status == SolveStatus::Optimal && rep.gap > cfg_.gap_tol) status = SolveStatus::Feasible;
    rep.status = status;
    return rep;
  }

  MilpModel model_;
  BnbConfig cfg_;
  bool maximize_ = false;
  std::vector<int> int_vars_;
  std::function<void(const BnbEvent&)> on_event_;

  Clock::time_point start_{};
  long nodes_ = 0;

  std::mutex mu_;
  bool has_incumbent_ = false;
  Vec best_x_;
  double best_obj_ = kInf;   // minimize space
  double bound_min_ = -kInf; // minimize space
};

// One-call interface matching the library's usual flow.
inline SolveReport solve_milp(const MilpModel& model, const BnbConfig& config = {},
                              const Vec* incumbent_hint = nullptr) {
  BranchAndBound solver(model, config);
  return solver.solve(incumbent_hint);
}

}  // namespace relumip
