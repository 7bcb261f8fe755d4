#pragma once

// Mixed-integer linear program data model. Plain data plus validation and a
// dump to the standard LP text format for cross-checking against external
// solvers (write-only; we never read it back).

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "relumip/linalg.hpp"

namespace relumip {

enum class VarKind { Continuous, Binary, Integer };
enum class RowSense { Le, Eq, Ge };
enum class ObjSense { Minimize, Maximize };

struct Variable {
  std::string name;
  VarKind kind = VarKind::Continuous;
  double lower = -kInf;
  double upper = kInf;
};

struct LinRow {
  std::vector<std::pair<int, double>> coeffs;  // (var index, coefficient)
  RowSense sense = RowSense::Le;
  double rhs = 0.0;
};

struct MilpModel {
  std::vector<Variable> vars;
  std::vector<LinRow> constraints;
  std::vector<std::pair<int, double>> objective;
  double objective_constant = 0.0;
  ObjSense sense = ObjSense::Minimize;

  int add_var(std::string name, VarKind kind, double lower, double upper) {
    vars.push_back({std::move(name), kind, lower, upper});
    return static_cast<int>(vars.size()) - 1;
  }

  void add_row(LinRow row) { constraints.push_back(std::move(row)); }

  int num_vars() const { return static_cast<int>(vars.size()); }

  int num_integral_vars() const {
    int n = 0;
    for (const Variable& v : vars)
      if (v.kind != VarKind::Continuous) ++n;
    return n;
  }

  // Throws std::invalid_argument on the first structural defect found.
  void validate() const {
    for (size_t j = 0; j < vars.size(); ++j) {
      const Variable& v = vars[j];
      if (std::isnan(v.lower) || std::isnan(v.upper) || v.lower > v.upper)
        throw std::invalid_argument("milp: var " + v.name + ": bad bounds");
      if (v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0))
        throw std::invalid_argument("milp: var " + v.name + ": binary bounds must lie in [0,1]");
      if (v.kind == VarKind::Integer && (!std::isfinite(v.lower) || !std::isfinite(v.upper)))
        throw std::invalid_argument("milp: var " + v.name + ": integer vars need finite bounds");
    }
    auto check_terms = [&](const std::vector<std::pair<int, double>>& terms, const std::string& where) {
      for (const auto& [idx, c] : terms) {
        if (idx < 0 || idx >= num_vars())
          throw std::invalid_argument("milp: " + where + ": var index " + std::to_string(idx) + " out of range");
        if (!std::isfinite(c)) throw std::invalid_argument("milp: " + where + ": non-finite coefficient");
      }
    };
    for (size_t i = 0; i < constraints.size(); ++i) {
      check_terms(constraints[i].coeffs, "row " + std::to_string(i));
      if (!std::isfinite(constraints[i].rhs))
        throw std::invalid_argument("milp: row " + std::to_string(i) + ": non-finite rhs");
    }
    check_terms(objective, "objective");
  }

  double objective_value(const Vec& x) const {
    double acc = objective_constant;
    for (const auto& [idx, c] : objective) acc += c * x[idx];
    return acc;
  }

  double row_activity(const LinRow& row, const Vec& x) const {
    double acc = 0.0;
    for (const auto& [idx, c] : row.coeffs) acc += c * x[idx];
    return acc;
  }

  // Largest violation of constraints and bounds at x (0 when feasible).
  double max_violation(const Vec& x) const {
    double worst = 0.0;
    for (size_t j = 0; j < vars.size(); ++j) {
      worst = std::max(worst, vars[j].lower - x[j]);
      worst = std::max(worst, x[j] - vars[j].upper);
    }
    for (const LinRow& row : constraints) {
      const double a = row_activity(row, x);
      if (row.sense == RowSense::Le) worst = std::max(worst, a - row.rhs);
      else if (row.sense == RowSense::Ge) worst = std::max(worst, row.rhs - a);
      else worst = std::max(worst, std::fabs(a - row.rhs));
    }
    return worst;
  }
};

namespace detail {
inline std::string lp_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
inline void lp_terms(std::ostream& os, const std::vector<std::pair<int, double>>& terms,
                     const std::vector<Variable>& vars) {
  bool first = true;
  for (const auto& [idx, c] : terms) {
    if (c == 0.0) continue;
    if (first) {
      os << (c < 0 ? "- " : "") << lp_num(std::fabs(c)) << " " << vars[idx].name;
      first = false;
    } else {
      os << (c < 0 ? " - " : " + ") << lp_num(std::fabs(c)) << " " << vars[idx].name;
    }
  }
  if (first) os << "0";
}
}  // namespace detail

// Standard LP file format (CPLEX dialect), good enough to paste into any
// mainstream solver for a manual cross-check.
inline void write_lp_format(const MilpModel& model, std::ostream& os) {
  os << (model.sense == ObjSense::Minimize ? "Minimize" : "Maximize") << "\n obj: ";
  detail::lp_terms(os, model.objective, model.vars);
  if (model.objective_constant != 0.0)
    os << " + " << detail::lp_num(model.objective_constant);
  os << "\nSubject To\n";
  for (size_t i = 0; i < model.constraints.size(); ++i) {
    const LinRow& row = model.constraints[i];
    os << " c" << i << ": ";
    detail::lp_terms(os, row.coeffs, model.vars);
    os << (row.sense == RowSense::Le ? " <= " : row.sense == RowSense::Ge ? " >= " : " = ");
    os << detail::lp_num(row.rhs) << "\n";
  }
  os << "Bounds\n";
  for (const Variable& v : model.vars) {
    if (v.lower == -kInf && v.upper == kInf) {
      os << " " << v.name << " free\n";
    } else if (v.lower == -kInf) {
      os << " -inf <= " << v.name << " <= " << detail::lp_num(v.upper) << "\n";
    } else if (v.upper == kInf) {
      os << " " << v.name << " >= " << detail::lp_num(v.lower) << "\n";
    } else {
      os << " " << detail::lp_num(v.lower) << " <= " << v.name << " <= " << detail::lp_num(v.upper) << "\n";
    }
  }
  bool have_general = false, have_binary = false;
  for (const Variable& v : model.vars) {
    have_general |= v.kind == VarKind::Integer;
    have_binary |= v.kind == VarKind::Binary;
  }
  if (have_general) {
    os << "Generals\n";
    for (const Variable& v : model.vars)
      if (v.kind == VarKind::Integer) os << " " << v.name << "\n";
  }
  if (have_binary) {
    os << "Binaries\n";
    for (const Variable& v : model.vars)
      if (v.kind == VarKind::Binary) os << " " << v.name << "\n";
  }
  os << "End\n";
}

}  // namespace relumip
