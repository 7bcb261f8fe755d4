// End-to-end runs of the command-line tool against temp files. These shell
// out to the real binary, so they cover argument parsing, file formats, exit
// codes and the determinism contract of solution files.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "relumip/io.hpp"
#include "relumip/oracle.hpp"
#include "relumip/synth.hpp"

using namespace relumip;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("relumip_cli_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args, const std::string& log) {
  const std::string cmd = std::string(RELUMIP_CLI_PATH) + " " + args + " >" + log + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json load_json(const std::string& path) { return Json::parse(std::ifstream(path)); }

// Solution files are byte-identical across reruns except for wall_time_s.
std::string canonical_solution(const std::string& path) {
  Json j = load_json(path);
  j["manifest"].erase("wall_time_s");
  return j.dump(2);
}

}  // namespace

TEST_CASE("forward command prints the output vector", "[cli]") {
  TempDir tmp;
  const Network net = make_random_network(3, {2, {3}, 2});
  save_network(net, tmp.file("net.json"));
  const std::string log = tmp.file("out.txt");
  REQUIRE(run_cli("forward " + tmp.file("net.json") + " --input 0.3,0.7", log) == 0);
  std::istringstream is(slurp(log));
  Vec got(2);
  is >> got[0] >> got[1];
  const Vec expect = output(net, {0.3, 0.7});
  REQUIRE(got[0] == Catch::Approx(expect[0]).margin(1e-12));
  REQUIRE(got[1] == Catch::Approx(expect[1]).margin(1e-12));
}

TEST_CASE("invert matches the oracle end to end", "[cli]") {
  TempDir tmp;
  const Network net = make_random_network(21, {2, {3}, 2});
  Rng rng(4);
  InverseProblem p = make_box_problem(net, {make_target(net, rng, Vec(2, 0.0), Vec(2, 1.0), 0.1)});
  save_network(net, tmp.file("net.json"));
  save_problem(p, tmp.file("prob.json"));
  const std::string sol = tmp.file("sol.json");
  REQUIRE(run_cli("invert " + tmp.file("net.json") + " " + tmp.file("prob.json") + " --gap-tol 1e-9 --out " + sol,
                  tmp.file("log.txt")) == 0);
  const Json j = load_json(sol);
  REQUIRE(j["status"] == "optimal");
  const auto ref = oracle::enumerate_patterns(net, p);
  REQUIRE(j["objective_solver"].get<double>() == Catch::Approx(ref.objective).margin(1e-6));
  // Re-simulated objective agrees with the solver's objective.
  REQUIRE(j["objective_resimulated"].get<double>() ==
          Catch::Approx(j["objective_solver"].get<double>()).margin(1e-6));
  REQUIRE(j["manifest"]["network_file_digest"] == file_digest(tmp.file("net.json")));
}

TEST_CASE("bounds command writes a reusable cache", "[cli]") {
  TempDir tmp;
  const Network net = make_random_network(22, {2, {4}, 1});
  Rng rng(5);
  InverseProblem p = make_box_problem(net, {make_target(net, rng, Vec(2, 0.0), Vec(2, 1.0))});
  save_network(net, tmp.file("net.json"));
  save_problem(p, tmp.file("prob.json"));
  const std::string cache = tmp.file("cache.json");
  const std::string log = tmp.file("log.txt");
  REQUIRE(run_cli("bounds " + tmp.file("net.json") + " " + tmp.file("prob.json") + " --out " + cache, log) == 0);
  REQUIRE_THAT(slurp(log), Catch::Matchers::ContainsSubstring("unstable"));
  // Hand-count: census printed matches the cache contents.
  const BoundsTable table = load_bounds_cache(cache, net, p.design_lower, p.design_upper);
  const auto census = table.census(net);
  REQUIRE_THAT(slurp(log), Catch::Matchers::ContainsSubstring(std::to_string(census.unstable) + " unstable"));
  // The cache feeds invert.
  REQUIRE(run_cli("invert " + tmp.file("net.json") + " " + tmp.file("prob.json") + " --bounds " + cache + " --out " +
                      tmp.file("sol.json"),
                  tmp.file("log2.txt")) == 0);
}

TEST_CASE("select reports the chosen support", "[cli]") {
  TempDir tmp;
  const Network net = make_random_network(23, {4, {3}, 2});
  Rng rng(6);
  InverseProblem p = make_box_problem(net, {make_target(net, rng, Vec(4, 0.0), Vec(4, 1.0))});
  p.selection_budget = 1;
  save_network(net, tmp.file("net.json"));
  save_problem(p, tmp.file("prob.json"));
  const std::string sol = tmp.file("sol.json");
  REQUIRE(run_cli("select " + tmp.file("net.json") + " " + tmp.file("prob.json") + " --gap-tol 1e-9 --out " + sol,
                  tmp.file("log.txt")) == 0);
  const Json j = load_json(sol);
  const auto ref = oracle::enumerate_selection(net, p, 1);
  REQUIRE(j["objective_solver"].get<double>() == Catch::Approx(ref.objective).margin(1e-6));
  REQUIRE(j["selected"].size() <= 1);
}

TEST_CASE("robust emits the worst-case witness", "[cli]") {
  TempDir tmp;
  const Network net = make_random_network(24, {3, {3}, 2});
  Rng rng(7);
  const Vec cand = random_box_point(rng, Vec(3, 0.0), Vec(3, 1.0));
  InverseProblem p = make_box_problem(net, {make_target(net, rng, Vec(3, 0.0), Vec(3, 1.0))});
  p.robustness = RobustnessQuery{cand, 1e-3};
  save_network(net, tmp.file("net.json"));
  save_problem(p, tmp.file("prob.json"));
  const std::string sol = tmp.file("sol.json");
  REQUIRE(run_cli("robust " + tmp.file("net.json") + " " + tmp.file("prob.json") + " --gap-tol 1e-9 --out " + sol,
                  tmp.file("log.txt")) == 0);
  const Json j = load_json(sol);
  const double worst = j["robustness"]["max_deviation"].get<double>();
  // The witness reproduces the reported deviation and samples never beat it.
  Vec witness = j["robustness"]["worst_input"].get<Vec>();
  REQUIRE(l1_distance(output(net, witness), p.targets[0]) == Catch::Approx(worst).margin(1e-6));
  const auto sampled = oracle::sample_robustness(net, cand, 1e-3, p.design_lower, p.design_upper, p.targets[0], 500, 1);
  REQUIRE(sampled.max_deviation <= worst + 1e-7);
}

TEST_CASE("hybrid writes a gap trace", "[cli]") {
  TempDir tmp;
  const Network net = make_random_network(25, {2, {4}, 2});
  Rng rng(8);
  InverseProblem p = make_box_problem(net, {make_target(net, rng, Vec(2, 0.0), Vec(2, 1.0), 0.1)});
  save_network(net, tmp.file("net.json"));
  save_problem(p, tmp.file("prob.json"));
  const std::string trace = tmp.file("trace.csv");
  REQUIRE(run_cli("hybrid " + tmp.file("net.json") + " " + tmp.file("prob.json") + " --restarts 2 --trace " + trace +
                      " --out " + tmp.file("sol.json"),
                  tmp.file("log.txt")) == 0);
  const std::string csv = slurp(trace);
  REQUIRE_THAT(csv, Catch::Matchers::StartsWith("time_s,incumbent,relaxed_bound,gap,source"));
  REQUIRE(csv.find("\n") != std::string::npos);
}

TEST_CASE("exit codes for failure modes", "[cli]") {
  TempDir tmp;
  const Network net = make_random_network(26, {2, {2}, 1});
  save_network(net, tmp.file("net.json"));

  // Empty design box -> infeasible encoding is caught as an input error.
  InverseProblem infeasible = make_box_problem(net, {{{0.5}}});
  infeasible.extra_constraints.push_back({{1.0, 1.0}, RowSense::Ge, 5.0});  // unreachable over [0,1]^2
  save_problem(infeasible, tmp.file("inf.json"));
  REQUIRE(run_cli("invert " + tmp.file("net.json") + " " + tmp.file("inf.json") + " --no-tighten", tmp.file("a.txt")) ==
          3);

  // Malformed problem file -> exit 4.
  {
    std::ofstream out(tmp.file("broken.json"));
    out << "{ not json";
  }
  REQUIRE(run_cli("invert " + tmp.file("net.json") + " " + tmp.file("broken.json"), tmp.file("b.txt")) == 4);
  REQUIRE(run_cli("forward " + tmp.file("nothere.json") + " --input 0.5", tmp.file("c.txt")) == 4);
}

TEST_CASE("solution files are deterministic modulo wall time", "[cli]") {
  TempDir tmp;
  const Network net = make_random_network(27, {2, {3}, 2});
  Rng rng(9);
  InverseProblem p = make_box_problem(net, {make_target(net, rng, Vec(2, 0.0), Vec(2, 1.0), 0.2)});
  save_network(net, tmp.file("net.json"));
  save_problem(p, tmp.file("prob.json"));
  const std::string args = "invert " + tmp.file("net.json") + " " + tmp.file("prob.json") + " --seed 7 --out ";
  REQUIRE(run_cli(args + tmp.file("sol_a.json"), tmp.file("a.txt")) == 0);
  REQUIRE(run_cli(args + tmp.file("sol_b.json"), tmp.file("b.txt")) == 0);
  REQUIRE(canonical_solution(tmp.file("sol_a.json")) == canonical_solution(tmp.file("sol_b.json")));
}

TEST_CASE("integer inversion with round-compare", "[cli]") {
  TempDir tmp;
  // relu cliff below 1.4 makes naive rounding of the continuous optimum bad.
  Layer h;
  h.weights = Matrix(2, 1);
  h.weights(0, 0) = -1.0;
  h.weights(1, 0) = 1.0;
  h.bias = {1.4, 0.0};
  h.activation = Activation::ReLU;
  Layer out;
  out.weights = Matrix(1, 2);
  out.weights(0, 0) = 10.0;
  out.weights(0, 1) = 1.0;
  out.bias = {0.0};
  out.activation = Activation::Linear;
  const Network net({h, out});
  InverseProblem p = make_box_problem(net, {{{1.4}}}, 0.0, 3.0);
  p.integer_design = {true};
  save_network(net, tmp.file("net.json"));
  save_problem(p, tmp.file("prob.json"));
  const std::string sol = tmp.file("sol.json");
  REQUIRE(run_cli("invert " + tmp.file("net.json") + " " + tmp.file("prob.json") + " --round-compare --out " + sol,
                  tmp.file("log.txt")) == 0);
  const Json j = load_json(sol);
  const double integer_obj = j["objective_solver"].get<double>();
  const double rounded_obj = j["round_compare"]["rounded_objective"].get<double>();
  REQUIRE(integer_obj == Catch::Approx(0.6).margin(1e-6));
  REQUIRE(rounded_obj == Catch::Approx(3.6).margin(1e-6));
  REQUIRE(integer_obj < rounded_obj - 1.0);  // strict dominance by a wide margin
}

TEST_CASE("bench writes the sweep csv", "[cli]") {
  TempDir tmp;
  const std::string csv = tmp.file("bench.csv");
  REQUIRE(run_cli("bench --depths 2 --widths 4 --depth-width 4 --reps 1 --time-limit 5 --out " + csv,
                  tmp.file("log.txt")) == 0);
  const std::string text = slurp(csv);
  REQUIRE_THAT(text, Catch::Matchers::StartsWith("sweep,depth,width,hidden_nodes,unstable,mean_time_s"));
  REQUIRE_THAT(text, Catch::Matchers::ContainsSubstring("depth,2,4"));
  REQUIRE_THAT(text, Catch::Matchers::ContainsSubstring("width,1,4"));
}

TEST_CASE("environment config file sets defaults", "[cli]") {
  TempDir tmp;
  const Network net = make_random_network(28, {2, {2}, 1});
  Rng rng(10);
  InverseProblem p = make_box_problem(net, {make_target(net, rng, Vec(2, 0.0), Vec(2, 1.0))});
  save_network(net, tmp.file("net.json"));
  save_problem(p, tmp.file("prob.json"));
  {
    std::ofstream out(tmp.file("cfg.json"));
    out << R"({"gap_tol": 0.5, "time_limit": 9.0})";
  }
  const std::string cmd = "RELUMIP_CONFIG=" + tmp.file("cfg.json") + " " + RELUMIP_CLI_PATH + " invert " +
                          tmp.file("net.json") + " " + tmp.file("prob.json") + " --out " + tmp.file("sol.json") +
                          " >" + tmp.file("log.txt") + " 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  const Json j = load_json(tmp.file("sol.json"));
  REQUIRE(j["manifest"]["config"]["gap_tol"].get<double>() == 0.5);
  REQUIRE(j["manifest"]["config"]["time_limit"].get<double>() == 9.0);
}
