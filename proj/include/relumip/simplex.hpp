#pragma once

// Two-phase primal simplex on a dense tableau, with general variable bounds
// handled natively (nonbasic variables rest at either bound and the ratio
// test includes bound flips). Phase 1 minimizes the sum of artificial
// variables; phase 2 runs with the model objective. Dantzig pricing with a
// permanent switch to Bland's rule after a degeneracy stall, which keeps the
// method finite. Everything is deterministic: no randomization anywhere.
//
// Instances here are small (a few hundred rows), so the dense tableau is a
// deliberate choice over a revised/sparse implementation.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "relumip/milp.hpp"

namespace relumip {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Vec x;          // structural variables only
  double obj = 0.0;
  long iterations = 0;
};

struct LpOptions {
  double feas_tol = 1e-7;   // row/bound feasibility
  double rc_tol = 1e-9;     // reduced-cost optimality tolerance
  double piv_tol = 1e-9;    // minimum pivot magnitude
  long max_iters = 2000000;
  bool bland = false;       // Bland's rule from the first iteration
};

class SimplexError : public std::runtime_error {
 public:
  explicit SimplexError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

class DenseSimplex {
 public:
  DenseSimplex(const MilpModel& model, const Vec& lower, const Vec& upper, const LpOptions& opt)
      : opt_(opt), n_struct_(model.num_vars()), m_(static_cast<int>(model.constraints.size())) {
    // Column layout: [structural | slack per row | artificials appended on demand].
    ncols_ = n_struct_ + m_;
    lo_ = lower;
    hi_ = upper;
    lo_.resize(ncols_);
    hi_.resize(ncols_);
    rhs_.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      const LinRow& row = model.constraints[i];
      rhs_[i] = row.rhs;
      const int s = n_struct_ + i;
      switch (row.sense) {
        case RowSense::Le: lo_[s] = 0.0; hi_[s] = kInf; break;
        case RowSense::Ge: lo_[s] = -kInf; hi_[s] = 0.0; break;
        case RowSense::Eq: lo_[s] = 0.0; hi_[s] = 0.0; break;
      }
    }
    // Cost vectors in minimize form.
    cost_.assign(ncols_, 0.0);
    const double flip = model.sense == ObjSense::Maximize ? -1.0 : 1.0;
    for (const auto& [idx, c] : model.objective) cost_[idx] += flip * c;

    // Dense tableau rows; two extra rows hold phase-2 and phase-1 reduced costs.
    tab_.assign(static_cast<size_t>(m_ + 2), Vec());
    for (int i = 0; i < m_; ++i) {
      tab_[i].assign(ncols_ + 1, 0.0);
      for (const auto& [idx, c] : model.constraints[i].coeffs) tab_[i][idx] += c;
      tab_[i][n_struct_ + i] = 1.0;
      tab_[i][ncols_] = rhs_[i];
    }
  }

  LpResult run() {
    init_start_point();
    LpResult res;
    if (!phase1()) {
      res.status = LpStatus::Infeasible;
      res.iterations = iters_;
      return res;
    }
    const int code = phase2();
    res.iterations = iters_;
    if (code == kUnbounded) {
      res.status = LpStatus::Unbounded;
      return res;
    }
    refresh_basics();
    res.status = LpStatus::Optimal;
    res.x.assign(n_struct_, 0.0);
    for (int j = 0; j < n_struct_; ++j) res.x[j] = value_of(j);
    return res;
  }

 private:
  enum NbState : unsigned char { kAtLower, kAtUpper, kFree };
  static constexpr int kOptimal = 0;
  static constexpr int kUnbounded = 1;

  const LpOptions opt_;
  int n_struct_, m_, ncols_;
  Vec lo_, hi_, rhs_;
  Vec cost_;
  std::vector<Vec> tab_;           // m_ rows + cost row (m_) + phase1 row (m_+1)
  std::vector<int> basis_;         // row -> column
  std::vector<int> where_;         // column -> row, -1 if nonbasic
  std::vector<NbState> nb_state_;  // meaningful for nonbasic columns
  Vec beta_;                       // current basic values, by row
  long iters_ = 0;
  long stall_ = 0;
  bool bland_ = false;
  int n_art_ = 0;

  bool is_fixed(int j) const { return lo_[j] == hi_[j]; }

  double nonbasic_value(int j) const {
    switch (nb_state_[j]) {
      case kAtLower: return lo_[j];
      case kAtUpper: return hi_[j];
      default: return 0.0;
    }
  }

  double value_of(int j) const { return where_[j] >= 0 ? beta_[where_[j]] : nonbasic_value(j); }

  void init_start_point() {
    bland_ = opt_.bland;
    nb_state_.assign(ncols_, kAtLower);
    where_.assign(ncols_, -1);
    basis_.assign(m_, -1);
    for (int j = 0; j < ncols_; ++j) {
      if (std::isfinite(lo_[j])) nb_state_[j] = kAtLower;
      else if (std::isfinite(hi_[j])) nb_state_[j] = kAtUpper;
      else nb_state_[j] = kFree;
    }
    // Natural slack values with all structurals resting at their bounds.
    beta_.assign(m_, 0.0);
    std::vector<char> needs_art(m_, 0);
    for (int i = 0; i < m_; ++i) {
      double s = rhs_[i];
      for (int j = 0; j < n_struct_; ++j)
        if (tab_[i][j] != 0.0) s -= tab_[i][j] * nonbasic_value(j);
      const int sc = n_struct_ + i;
      if (s >= lo_[sc] && s <= hi_[sc]) {
        basis_[i] = sc;
        where_[sc] = i;
        beta_[i] = s;
      } else {
        needs_art[i] = 1;
        nb_state_[sc] = s < lo_[sc] ? kAtLower : kAtUpper;
        beta_[i] = std::fabs(s - nonbasic_value(sc));
      }
    }
    // Artificial columns, one per infeasible row, scaled so the tableau stays
    // equal to B^{-1} A with a unit basic coefficient.
    int total_art = 0;
    for (int i = 0; i < m_; ++i) total_art += needs_art[i];
    n_art_ = total_art;
    if (total_art > 0) {
      const int art_base = ncols_;
      ncols_ += total_art;
      lo_.resize(ncols_, 0.0);
      hi_.resize(ncols_, kInf);
      cost_.resize(ncols_, 0.0);
      nb_state_.resize(ncols_, kAtLower);
      where_.resize(ncols_, -1);
      for (int i = 0; i < m_; ++i) tab_[i].insert(tab_[i].end() - 1, total_art, 0.0);
      int a = art_base;
      for (int i = 0; i < m_; ++i) {
        if (!needs_art[i]) continue;
        double resid = rhs_[i];
        for (int j = 0; j < art_base; ++j)
          if (tab_[i][j] != 0.0 && where_[j] < 0) resid -= tab_[i][j] * nonbasic_value(j);
        const double sigma = resid >= 0.0 ? 1.0 : -1.0;
        tab_[i][a] = sigma;
        if (sigma < 0.0)
          for (double& v : tab_[i]) v = -v;
        basis_[i] = a;
        where_[a] = i;
        ++a;
      }
    }
    // Cost rows. Row m_ carries phase-2 reduced costs, row m_+1 phase-1.
    tab_[m_].assign(ncols_ + 1, 0.0);
    tab_[m_ + 1].assign(ncols_ + 1, 0.0);
    for (int j = 0; j < ncols_; ++j) tab_[m_][j] = j < static_cast<int>(cost_.size()) ? cost_[j] : 0.0;
    for (int i = 0; i < m_; ++i) {
      const int b = basis_[i];
      if (b >= n_struct_ + m_) {  // artificial: phase-1 cost 1
        for (int j = 0; j <= ncols_; ++j) tab_[m_ + 1][j] -= tab_[i][j];
      }
      // Slack/structural basics have zero cost in both phases here.
    }
    for (int i = 0; i < m_; ++i)
      if (basis_[i] >= n_struct_ + m_) tab_[m_ + 1][basis_[i]] += 1.0;
    stall_ = 0;
  }

  double phase1_objective() const {
    double s = 0.0;
    const int art_base = n_struct_ + m_;
    for (int j = art_base; j < ncols_; ++j) s += value_of(j);
    return s;
  }

  bool phase1() {
    if (n_art_ == 0) return true;
    const int code = optimize(m_ + 1);
    if (code == kUnbounded) throw SimplexError("simplex: phase-1 reported unbounded");
    refresh_basics();
    double scale = 1.0;
    for (double b : rhs_) scale = std::max(scale, std::fabs(b));
    if (phase1_objective() > opt_.feas_tol * scale) return false;
    // Pin artificials at zero for phase 2; basic ones stay pinned by bounds.
    for (int j = n_struct_ + m_; j < ncols_; ++j) {
      lo_[j] = 0.0;
      hi_[j] = 0.0;
      if (where_[j] < 0) nb_state_[j] = kAtLower;
    }
    return true;
  }

  int phase2() { return optimize(m_); }

  // Core loop pricing against cost row `crow`.
  int optimize(int crow) {
    while (true) {
      if (iters_ >= opt_.max_iters)
        throw SimplexError("simplex: iteration limit exceeded (" + std::to_string(opt_.max_iters) + ")");
      if ((iters_ & 255) == 255) refresh_basics();
      int enter = -1, dir = 0;
      pick_entering(crow, enter, dir);
      if (enter < 0) return kOptimal;
      if (!ratio_step(enter, dir)) return kUnbounded;
      ++iters_;
    }
  }

  void pick_entering(int crow, int& enter, int& dir) const {
    const Vec& d = tab_[crow];
    double best = 0.0;
    enter = -1;
    dir = 0;
    for (int j = 0; j < ncols_; ++j) {
      if (where_[j] >= 0 || is_fixed(j)) continue;
      const double rc = d[j];
      int cand_dir = 0;
      if (nb_state_[j] == kAtLower && rc < -opt_.rc_tol) cand_dir = +1;
      else if (nb_state_[j] == kAtUpper && rc > opt_.rc_tol) cand_dir = -1;
      else if (nb_state_[j] == kFree && std::fabs(rc) > opt_.rc_tol) cand_dir = rc < 0 ? +1 : -1;
      if (cand_dir == 0) continue;
      if (bland_) {  // first improving index
        enter = j;
        dir = cand_dir;
        return;
      }
      const double score = std::fabs(rc);
      if (score > best + 1e-15) {
        best = score;
        enter = j;
        dir = cand_dir;
      }
    }
  }

  // Move the entering variable; returns false iff the step is unbounded.
  bool ratio_step(int enter, int dir) {
    // Bound flip of the entering variable itself is one of the candidates.
    double t = kInf;
    if (std::isfinite(lo_[enter]) && std::isfinite(hi_[enter])) t = hi_[enter] - lo_[enter];
    int leave_row = -1;
    bool leave_to_upper = false;
    double best_pivot = 0.0;
    for (int i = 0; i < m_; ++i) {
      const double alpha = tab_[i][enter];
      if (std::fabs(alpha) <= opt_.piv_tol) continue;
      const int k = basis_[i];
      const double da = dir * alpha;
      double ratio;
      bool to_upper;
      if (da > 0.0) {  // basic value decreases toward its lower bound
        if (!std::isfinite(lo_[k])) continue;
        ratio = (beta_[i] - lo_[k]) / da;
        to_upper = false;
      } else {  // increases toward its upper bound
        if (!std::isfinite(hi_[k])) continue;
        ratio = (hi_[k] - beta_[i]) / (-da);
        to_upper = true;
      }
      if (ratio < 0.0) ratio = 0.0;  // tiny infeasibility from roundoff: degenerate step
      bool take = false;
      if (leave_row < 0) {
        // Competing only against the flip limit; keep the flip on an exact tie.
        take = !std::isfinite(t) || ratio < t - 1e-9 * (1.0 + t);
      } else {
        const double tie = 1e-9 * (1.0 + std::fabs(t));
        if (ratio < t - tie) {
          take = true;
        } else if (ratio <= t + tie) {
          // Tie. Bland: smallest basic index. Otherwise prefer the sturdier pivot.
          take = bland_ ? (k < basis_[leave_row])
                        : (std::fabs(alpha) > best_pivot + 1e-12 ||
                           (std::fabs(alpha) >= best_pivot - 1e-12 && k < basis_[leave_row]));
        }
      }
      if (take) {
        t = std::min(t, ratio);
        leave_row = i;
        leave_to_upper = to_upper;
        best_pivot = std::fabs(alpha);
      }
    }
    if (!std::isfinite(t)) return false;  // unbounded ray
    if (t <= 1e-12) ++stall_; else stall_ = 0;
    if (!bland_ && stall_ > 2L * (m_ + ncols_) + 64) bland_ = true;

    const double delta = dir * t;
    if (delta != 0.0)
      for (int i = 0; i < m_; ++i) beta_[i] -= delta * tab_[i][enter];

    if (leave_row < 0) {  // bound flip, no basis change
      nb_state_[enter] = nb_state_[enter] == kAtLower ? kAtUpper : kAtLower;
      return true;
    }
    const double enter_val = nonbasic_value(enter) + delta;
    const int leaving = basis_[leave_row];
    pivot(leave_row, enter);
    nb_state_[leaving] = leave_to_upper ? kAtUpper : kAtLower;
    where_[leaving] = -1;
    beta_[leave_row] = enter_val;
    return true;
  }

  void pivot(int prow, int pcol) {
    Vec& prowv = tab_[prow];
    const double inv = 1.0 / prowv[pcol];
    for (double& v : prowv) v *= inv;
    prowv[pcol] = 1.0;  // kill roundoff
    for (int i = 0; i < m_ + 2; ++i) {
      if (i == prow) continue;
      Vec& rowv = tab_[i];
      const double f = rowv[pcol];
      if (f == 0.0) continue;
      for (int j = 0; j <= ncols_; ++j) rowv[j] -= f * prowv[j];
      rowv[pcol] = 0.0;
    }
    where_[basis_[prow]] = -1;
    basis_[prow] = pcol;
    where_[pcol] = prow;
  }

  // beta_i = (B^-1 b)_i - sum over nonbasic j of (B^-1 A)_ij * value_j.
  void refresh_basics() {
    for (int i = 0; i < m_; ++i) {
      double v = tab_[i][ncols_];
      for (int j = 0; j < ncols_; ++j) {
        if (where_[j] >= 0) continue;
        const double xv = nonbasic_value(j);
        if (xv != 0.0 && tab_[i][j] != 0.0) v -= tab_[i][j] * xv;
      }
      beta_[i] = v;
    }
  }
};

}  // namespace detail

// Solve the LP relaxation of `model` (integrality dropped). Optional bound
// vectors override the model's variable bounds, which is how branch-and-bound
// passes node-local bounds without copying the model.
inline LpResult solve_lp(const MilpModel& model, const Vec* lower = nullptr, const Vec* upper = nullptr,
                         const LpOptions& options = {}) {
  Vec lo(model.num_vars()), hi(model.num_vars());
  for (int j = 0; j < model.num_vars(); ++j) {
    lo[j] = lower ? (*lower)[j] : model.vars[j].lower;
    hi[j] = upper ? (*upper)[j] : model.vars[j].upper;
    if (lo[j] > hi[j]) {
      LpResult r;
      r.status = LpStatus::Infeasible;
      return r;
    }
  }
  auto attempt = [&](bool bland) {
    LpOptions opt = options;
    opt.bland = bland || options.bland;
    detail::DenseSimplex s(model, lo, hi, opt);
    return s.run();
  };
  LpResult res = attempt(false);
  if (res.status == LpStatus::Optimal) {
    // Verify against the original data; retry with Bland's rule if the
    // tableau drifted. A wrong answer must never leave this function quietly.
    auto violation = [&](const Vec& x) {
      double worst = 0.0;
      for (int j = 0; j < model.num_vars(); ++j) {
        worst = std::max(worst, lo[j] - x[j]);
        worst = std::max(worst, x[j] - hi[j]);
      }
      for (const LinRow& row : model.constraints) {
        const double a = model.row_activity(row, x);
        if (row.sense == RowSense::Le) worst = std::max(worst, a - row.rhs);
        else if (row.sense == RowSense::Ge) worst = std::max(worst, row.rhs - a);
        else worst = std::max(worst, std::fabs(a - row.rhs));
      }
      return worst;
    };
    if (violation(res.x) > 50.0 * options.feas_tol) {
      res = attempt(true);
      if (res.status == LpStatus::Optimal && violation(res.x) > 50.0 * options.feas_tol)
        throw SimplexError("simplex: solution failed the residual check twice");
    }
  }
  if (res.status == LpStatus::Optimal) res.obj = model.objective_value(res.x);
  return res;
}

}  // namespace relumip
