// Command-line front end: load a network + problem, run bounds
// precomputation, inversion, selection, robustness or the hybrid mode, and
// write structured solution files plus CSV traces. Every run emits a
// manifest (inputs, digests, config, seed) so reruns are reproducible;
// solution files are byte-identical across reruns except for the manifest's
// wall_time_s field.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relumip/adjoint.hpp"
#include "relumip/io.hpp"
#include "relumip/oracle.hpp"
#include "relumip/synth.hpp"
#include "relumip/tightening.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using namespace relumip;
using Clock = std::chrono::steady_clock;

int status_exit_code(const SolveReport& rep) {
  switch (rep.status) {
    case SolveStatus::Optimal:
    case SolveStatus::Feasible:
      return 0;
    case SolveStatus::TimeLimit:
      return rep.incumbent ? 2 : 3;
    default:
      return 3;
  }
}

struct CommonOpts {
  std::string net_file;
  std::string problem_file;
  std::string bounds_file;
  std::string out_file;
  std::string lp_dump;
  std::string trace_file;
  double time_limit = 150.0;
  double gap_tol = 1e-6;
  double t_max = 150.0;
  int jobs = 1;
  uint64_t seed = 0;
  bool no_tighten = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_problem = true) {
  cmd->add_option("net", o.net_file, "network file (JSON)")->required();
  if (with_problem) cmd->add_option("problem", o.problem_file, "problem file (JSON)")->required();
  cmd->add_option("--bounds", o.bounds_file, "precomputed bounds cache to reuse");
  cmd->add_option("--out", o.out_file, "solution file to write");
  cmd->add_option("--time-limit", o.time_limit, "solver wall-clock limit in seconds");
  cmd->add_option("--gap-tol", o.gap_tol, "relative optimality gap tolerance");
  cmd->add_option("--t-max", o.t_max, "per-node time budget for bound tightening (s)");
  cmd->add_option("--jobs", o.jobs, "worker threads for bound tightening");
  cmd->add_option("--seed", o.seed, "random seed recorded in the manifest");
  cmd->add_option("--dump-lp", o.lp_dump, "write the MILP in LP text format");
  cmd->add_option("--trace", o.trace_file, "write a gap trace CSV");
  cmd->add_flag("--no-tighten", o.no_tighten, "use interval bounds only (skip MILP tightening)");
}

// Optional config file with default solver settings, pointed at by
// RELUMIP_CONFIG. Command-line flags still win.
void apply_env_config(CommonOpts& o) {
  const char* path = std::getenv("RELUMIP_CONFIG");
  if (!path || !*path) return;
  std::ifstream in(path);
  if (!in) throw FileFormatError(std::string(path) + ": cannot open RELUMIP_CONFIG file");
  Json j = Json::parse(in);
  o.time_limit = j.value("time_limit", o.time_limit);
  o.gap_tol = j.value("gap_tol", o.gap_tol);
  o.t_max = j.value("t_max", o.t_max);
  o.jobs = j.value("jobs", o.jobs);
  o.seed = j.value("seed", o.seed);
}

BnbConfig make_bnb(const CommonOpts& o) {
  BnbConfig cfg;
  cfg.time_limit = o.time_limit;
  cfg.gap_tol = o.gap_tol;
  cfg.seed = o.seed;
  return cfg;
}

BoundsTable obtain_bounds(const CommonOpts& o, const Network& net, const InverseProblem& problem) {
  Vec lo, hi;
  problem.effective_box(lo, hi);
  if (!o.bounds_file.empty()) return load_bounds_cache(o.bounds_file, net, lo, hi);
  if (o.no_tighten) return interval_bounds(net, lo, hi);
  TightenConfig cfg;
  cfg.t_max_per_node = o.t_max;
  cfg.jobs = o.jobs;
  return tighten_bounds(net, lo, hi, problem.extra_constraints, cfg);
}

Json make_manifest(const std::string& command, const CommonOpts& o, double wall_s) {
  Json m;
  m["command"] = command;
  m["tool_version"] = kVersion;
  m["network_file"] = o.net_file;
  m["network_file_digest"] = file_digest(o.net_file);
  if (!o.problem_file.empty()) {
    m["problem_file"] = o.problem_file;
    m["problem_file_digest"] = file_digest(o.problem_file);
  }
  Json cfg;
  cfg["time_limit"] = o.time_limit;
  cfg["gap_tol"] = o.gap_tol;
  cfg["t_max"] = o.t_max;
  cfg["jobs"] = o.jobs;
  cfg["tighten"] = !o.no_tighten;
  m["config"] = std::move(cfg);
  m["seed"] = o.seed;
  m["wall_time_s"] = wall_s;
  return m;
}

Json report_to_json(const SolveReport& rep) {
  Json j;
  j["status"] = solve_status_name(rep.status);
  j["objective_solver"] = rep.incumbent ? Json(rep.incumbent_obj) : Json(nullptr);
  j["relaxed_bound"] = std::isfinite(rep.relaxed_bound) ? Json(rep.relaxed_bound) : Json(nullptr);
  j["gap"] = std::isfinite(rep.gap) ? Json(rep.gap) : Json(nullptr);
  j["nodes_explored"] = rep.nodes_explored;
  return j;
}

Json designs_json(const std::vector<Vec>& designs) {
  Json a = Json::array();
  for (const Vec& d : designs) a.push_back(d);
  return a;
}

void attach_solution(Json& j, const Network& net, const EncodedProblem& enc, const SolveReport& rep) {
  if (!rep.incumbent) return;
  DecodedSolution dec = decode_solution(net, enc, *rep.incumbent);
  j["designs"] = designs_json(dec.inputs);
  if (!enc.problem.display_scale.empty()) {
    std::vector<Vec> scaled = dec.inputs;
    for (Vec& d : scaled)
      for (size_t i = 0; i < d.size(); ++i) d[i] *= enc.problem.display_scale[i];
    j["designs_scaled"] = designs_json(scaled);
  }
  j["outputs"] = designs_json(dec.outputs);
  j["objective_resimulated"] = dec.objective_resimulated;
  if (!enc.select_var.empty()) j["selected"] = dec.selected;
}

void write_outputs(const Json& j, const CommonOpts& o) {
  if (!o.out_file.empty()) detail::write_file(o.out_file, j);
}

void maybe_dump_lp(const CommonOpts& o, const MilpModel& model) {
  if (o.lp_dump.empty()) return;
  std::ofstream out(o.lp_dump);
  write_lp_format(model, out);
}

int finish_solve_command(const std::string& command, const CommonOpts& o, const Network& net,
                         const EncodedProblem& enc, const SolveReport& rep, Clock::time_point t0,
                         Json extra = Json::object()) {
  Json j;
  j["format_version"] = 1;
  j["manifest"] = make_manifest(command, o, std::chrono::duration<double>(Clock::now() - t0).count());
  Json rj = report_to_json(rep);
  for (auto& [k, v] : rj.items()) j[k] = v;
  attach_solution(j, net, enc, rep);
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_outputs(j, o);
  std::cout << command << ": " << solve_status_name(rep.status);
  if (rep.incumbent) std::cout << ", objective " << rep.incumbent_obj << ", gap " << rep.gap;
  std::cout << ", nodes " << rep.nodes_explored << "\n";
  return status_exit_code(rep);
}

// ---------------------------------------------------------------------------

int cmd_forward(const std::string& net_file, const std::string& input_csv) {
  Network net = load_network(net_file);
  Vec x0;
  std::stringstream ss(input_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) x0.push_back(std::stod(tok));
  const Vec y = output(net, x0);
  for (size_t j = 0; j < y.size(); ++j) std::cout << (j ? " " : "") << Json(y[j]).dump();
  std::cout << "\n";
  return 0;
}

int cmd_bounds(const CommonOpts& o) {
  const auto t0 = Clock::now();
  Network net = load_network(o.net_file);
  InverseProblem problem = load_problem(o.problem_file);
  problem.validate(net);
  Vec lo, hi;
  problem.effective_box(lo, hi);
  BoundsTable table;
  if (o.no_tighten) {
    table = interval_bounds(net, lo, hi);
  } else {
    TightenConfig cfg;
    cfg.t_max_per_node = o.t_max;
    cfg.jobs = o.jobs;
    table = tighten_bounds(net, lo, hi, problem.extra_constraints, cfg);
  }
  if (!o.out_file.empty()) save_bounds_cache(table, net, lo, hi, o.out_file);
  const auto census = table.census(net);
  std::cout << "bounds: " << census.stably_active << " stably active, " << census.stably_inactive
            << " stably inactive, " << census.unstable << " unstable ("
            << std::chrono::duration<double>(Clock::now() - t0).count() << " s)\n";
  return 0;
}

// Nearest-integer rounding of a continuous design, with a largest-remainder
// repair when a single all-ones equality over the inputs must be preserved
// (the stacked-layers setup).
Vec round_design(const Vec& x, const InverseProblem& problem) {
  Vec r(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    r[i] = std::clamp(std::round(x[i]), std::ceil(problem.design_lower[i] - 1e-9),
                      std::floor(problem.design_upper[i] + 1e-9));
  const InputConstraint* sum_row = nullptr;
  if (problem.extra_constraints.size() == 1 && problem.extra_constraints[0].sense == RowSense::Eq) {
    bool all_ones = true;
    for (double c : problem.extra_constraints[0].coeffs) all_ones = all_ones && c == 1.0;
    if (all_ones) sum_row = &problem.extra_constraints[0];
  }
  if (sum_row) {
    long deficit = std::lround(sum_row->rhs);
    for (double v : r) deficit -= std::lround(v);
    // Adjust the entries with the largest remainder in the needed direction.
    std::vector<size_t> order(x.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return (x[a] - r[a]) * (deficit > 0 ? 1.0 : -1.0) > (x[b] - r[b]) * (deficit > 0 ? 1.0 : -1.0);
    });
    for (size_t oi = 0; deficit != 0 && oi < order.size(); ++oi) {
      const size_t i = order[oi];
      const double step = deficit > 0 ? 1.0 : -1.0;
      const double cand = r[i] + step;
      if (cand >= problem.design_lower[i] - 1e-9 && cand <= problem.design_upper[i] + 1e-9) {
        r[i] = cand;
        deficit += deficit > 0 ? -1 : 1;
      }
    }
  }
  return r;
}

int cmd_invert(const CommonOpts& o, bool force_integer, bool round_compare) {
  const auto t0 = Clock::now();
  Network net = load_network(o.net_file);
  InverseProblem problem = load_problem(o.problem_file);
  if (force_integer && !problem.any_integer()) problem.integer_design.assign(net.input_dim(), true);
  problem.validate(net);
  BoundsTable table = obtain_bounds(o, net, problem);
  EncodedProblem enc = encode_inverse(net, table, problem);
  encode_integer_design(enc);
  maybe_dump_lp(o, enc.model);
  BranchAndBound solver(enc.model, make_bnb(o));
  std::vector<GapEntry> trace;
  if (!o.trace_file.empty())
    solver.set_event_callback([&](const BnbEvent& e) {
      trace.push_back({e.time_s, e.incumbent_obj, e.relaxed_bound, e.gap, GapSource::Milp});
    });
  SolveReport rep = solver.solve();
  if (!o.trace_file.empty()) {
    std::ofstream out(o.trace_file);
    write_gap_trace_csv(out, trace);
  }

  Json extra = Json::object();
  if (round_compare && problem.any_integer()) {
    InverseProblem cont = problem;
    cont.integer_design.clear();
    EncodedProblem cenc = encode_inverse(net, table, cont);
    SolveReport crep = solve_milp(cenc.model, make_bnb(o));
    if (crep.incumbent) {
      DecodedSolution cdec = decode_solution(net, cenc, *crep.incumbent);
      Json rc;
      rc["continuous_objective"] = crep.incumbent_obj;
      rc["continuous_design"] = designs_json(cdec.inputs);
      std::vector<Vec> rounded;
      double robj = 0.0;
      for (size_t c = 0; c < cdec.inputs.size(); ++c) {
        Vec r = round_design(cdec.inputs[c], problem);
        robj += l1_distance(output(net, r), problem.targets[c]);
        rounded.push_back(std::move(r));
      }
      rc["rounded_design"] = designs_json(rounded);
      rc["rounded_objective"] = robj;
      extra["round_compare"] = std::move(rc);
    }
  }
  return finish_solve_command("invert", o, net, enc, rep, t0, std::move(extra));
}

int cmd_select(const CommonOpts& o, int budget_override) {
  const auto t0 = Clock::now();
  Network net = load_network(o.net_file);
  InverseProblem problem = load_problem(o.problem_file);
  if (budget_override > 0) problem.selection_budget = budget_override;
  if (!problem.selection_budget) throw std::invalid_argument("select: problem has no selection budget (use --budget)");
  problem.validate(net);
  BoundsTable table = obtain_bounds(o, net, problem);
  EncodedProblem enc = encode_inverse(net, table, problem);
  add_selection(enc, *problem.selection_budget);
  encode_integer_design(enc);
  maybe_dump_lp(o, enc.model);
  SolveReport rep = solve_milp(enc.model, make_bnb(o));
  return finish_solve_command("select", o, net, enc, rep, t0);
}

int cmd_robust(const CommonOpts& o, double epsilon_override) {
  const auto t0 = Clock::now();
  Network net = load_network(o.net_file);
  InverseProblem problem = load_problem(o.problem_file);
  if (epsilon_override >= 0.0) {
    if (!problem.robustness) throw std::invalid_argument("robust: problem has no robustness block");
    problem.robustness->epsilon = epsilon_override;
  }
  if (!problem.robustness) throw std::invalid_argument("robust: problem has no robustness block");
  problem.validate(net);
  BoundsTable table = obtain_bounds(o, net, problem);
  EncodedProblem enc = encode_robustness(net, table, problem);
  maybe_dump_lp(o, enc.model);
  SolveReport rep = solve_milp(enc.model, make_bnb(o));
  Json extra = Json::object();
  if (rep.incumbent) {
    DecodedSolution dec = decode_solution(net, enc, *rep.incumbent);
    Json rj;
    rj["candidate"] = problem.robustness->candidate;
    rj["epsilon"] = problem.robustness->epsilon;
    rj["max_deviation"] = rep.incumbent_obj;
    rj["worst_input"] = dec.inputs[0];
    extra["robustness"] = std::move(rj);
  }
  return finish_solve_command("robust", o, net, enc, rep, t0, std::move(extra));
}

int cmd_hybrid(const CommonOpts& o, const AdjointConfig& acfg_in) {
  const auto t0 = Clock::now();
  Network net = load_network(o.net_file);
  InverseProblem problem = load_problem(o.problem_file);
  problem.validate(net);
  BoundsTable table = obtain_bounds(o, net, problem);
  AdjointConfig acfg = acfg_in;
  acfg.seed = o.seed;
  HybridResult hy = hybrid_solve(net, table, problem, acfg, make_bnb(o));
  if (!o.trace_file.empty()) {
    std::ofstream out(o.trace_file);
    write_gap_trace_csv(out, hy.trace);
  }
  maybe_dump_lp(o, hy.encoded.model);
  return finish_solve_command("hybrid", o, net, hy.encoded, hy.report, t0);
}

int cmd_bench(const CommonOpts& o, std::vector<int> depths, int depth_width, std::vector<int> widths, int reps) {
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!o.out_file.empty()) {
    file.open(o.out_file);
    os = &file;
  }
  *os << "sweep,depth,width,hidden_nodes,unstable,mean_time_s,mean_gap,mean_nodes\n";
  auto run_case = [&](const char* sweep, int depth, int width) {
    NetSpec spec;
    spec.inputs = 6;
    spec.outputs = 4;
    spec.hidden.assign(depth, width);
    spec.weight_scale = 1.6;
    spec.bias_scale = 0.3;
    double total_t = 0.0, total_gap = 0.0, total_nodes = 0.0;
    int unstable = 0;
    for (int r = 0; r < reps; ++r) {
      const uint64_t seed = o.seed + 7919 * (depth * 100 + width) + r;
      Network net = make_random_network(seed, spec);
      Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
      InverseProblem problem = make_box_problem(net, {make_target(net, rng, Vec(6, 0.0), Vec(6, 1.0), 0.2)});
      TightenConfig tcfg;
      tcfg.t_max_per_node = std::min(o.t_max, 2.0);
      tcfg.jobs = o.jobs;
      BoundsTable table = tighten_bounds(net, problem, tcfg);
      unstable = table.unstable_count(net);
      EncodedProblem enc = encode_inverse(net, table, problem);
      const auto t0 = Clock::now();
      SolveReport rep = solve_milp(enc.model, make_bnb(o));
      total_t += std::chrono::duration<double>(Clock::now() - t0).count();
      total_gap += std::isfinite(rep.gap) ? rep.gap : 1.0;
      total_nodes += static_cast<double>(rep.nodes_explored);
    }
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%d,%d,%d,%d,%.6f,%.3g,%.1f\n", sweep, depth, width, depth * width,
                  unstable, total_t / reps, total_gap / reps, total_nodes / reps);
    *os << line;
    std::cout << "bench " << sweep << " depth=" << depth << " width=" << width << " mean_time=" << total_t / reps
              << "s\n";
  };
  for (int d : depths) run_case("depth", d, depth_width);
  for (int w : widths) run_case("width", 1, w);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse design over piecewise-linear neural surrogates via mixed-integer programming"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonOpts opt;
  try {
    apply_env_config(opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }

  auto* fwd = app.add_subcommand("forward", "evaluate the network on one input vector");
  std::string fwd_net, fwd_input;
  fwd->add_option("net", fwd_net, "network file (JSON)")->required();
  fwd->add_option("--input", fwd_input, "comma-separated input vector")->required();

  auto* bounds_cmd = app.add_subcommand("bounds", "precompute per-node preactivation bounds");
  CommonOpts bounds_opt = opt;
  add_common(bounds_cmd, bounds_opt);

  auto* invert_cmd = app.add_subcommand("invert", "invert the network toward the problem targets");
  CommonOpts invert_opt = opt;
  bool force_integer = false, round_compare = false;
  add_common(invert_cmd, invert_opt);
  invert_cmd->add_flag("--integer", force_integer, "require every design variable to be integer");
  invert_cmd->add_flag("--round-compare", round_compare,
                       "also solve the continuous relaxation and report the rounded objective");

  auto* select_cmd = app.add_subcommand("select", "invert with a cardinality budget on the inputs");
  CommonOpts select_opt = opt;
  int budget_override = -1;
  add_common(select_cmd, select_opt);
  select_cmd->add_option("--budget", budget_override, "selection budget D (overrides problem file)");

  auto* robust_cmd = app.add_subcommand("robust", "worst-case deviation over an epsilon hypercube");
  CommonOpts robust_opt = opt;
  double epsilon_override = -1.0;
  add_common(robust_cmd, robust_opt);
  robust_cmd->add_option("--epsilon", epsilon_override, "override the problem file's epsilon");

  auto* hybrid_cmd = app.add_subcommand("hybrid", "run gradient descent and branch-and-bound together");
  CommonOpts hybrid_opt = opt;
  AdjointConfig acfg;
  add_common(hybrid_cmd, hybrid_opt);
  hybrid_cmd->add_option("--restarts", acfg.restarts, "adjoint restarts");
  hybrid_cmd->add_option("--adjoint-iters", acfg.max_iters, "max gradient iterations per restart");
  hybrid_cmd->add_option("--patience", acfg.patience, "non-improving iterations before a restart stops");
  hybrid_cmd->add_option("--lr", acfg.learning_rate, "gradient step size");

  auto* bench_cmd = app.add_subcommand("bench", "solve-time sweeps over seeded synthetic networks");
  CommonOpts bench_opt = opt;
  std::vector<int> depths = {2, 3, 4, 5, 6};
  std::vector<int> widths = {10, 20, 30, 40};
  int depth_width = 10, reps = 3;
  bench_cmd->add_option("--depths", depths, "hidden-layer counts for the depth sweep");
  bench_cmd->add_option("--depth-width", depth_width, "hidden width used in the depth sweep");
  bench_cmd->add_option("--widths", widths, "hidden widths for the single-layer width sweep");
  bench_cmd->add_option("--reps", reps, "targets per configuration");
  bench_cmd->add_option("--seed", bench_opt.seed, "base seed");
  bench_cmd->add_option("--time-limit", bench_opt.time_limit, "per-solve time limit (s)");
  bench_cmd->add_option("--jobs", bench_opt.jobs, "worker threads for bound tightening");
  bench_cmd->add_option("--out", bench_opt.out_file, "CSV output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fwd) return cmd_forward(fwd_net, fwd_input);
    if (*bounds_cmd) return cmd_bounds(bounds_opt);
    if (*invert_cmd) return cmd_invert(invert_opt, force_integer, round_compare);
    if (*select_cmd) return cmd_select(select_opt, budget_override);
    if (*robust_cmd) return cmd_robust(robust_opt, epsilon_override);
    if (*hybrid_cmd) return cmd_hybrid(hybrid_opt, acfg);
    if (*bench_cmd) return cmd_bench(bench_opt, depths, depth_width, widths, reps);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
