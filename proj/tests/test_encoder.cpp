#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "relumip/bnb.hpp"
#include "relumip/encoder.hpp"
#include "relumip/oracle.hpp"
#include "relumip/synth.hpp"
#include "relumip/tightening.hpp"

using namespace relumip;

namespace {

// Identity-through-ReLU scalar net: hidden h = relu(x), output y = h.
Network relu_identity_net() {
  Layer h;
  h.weights = Matrix(1, 1);
  h.weights(0, 0) = 1.0;
  h.bias = {0.0};
  h.activation = Activation::ReLU;
  Layer out;
  out.weights = Matrix(1, 1);
  out.weights(0, 0) = 1.0;
  out.bias = {0.0};
  out.activation = Activation::Linear;
  return Network({h, out});
}

void check_var_map_partition(const EncodedProblem& enc) {
  std::vector<int> seen(enc.model.num_vars(), 0);
  auto mark = [&](int v) {
    if (v >= 0) ++seen[v];
  };
  for (const auto& c : enc.input_var)
    for (int v : c) mark(v);
  for (const auto& c : enc.node_var)
    for (const auto& l : c)
      for (int v : l) mark(v);
  for (const auto& c : enc.relu_var)
    for (const auto& l : c)
      for (int v : l) mark(v);
  for (const auto& c : enc.resid_var)
    for (int v : c) mark(v);
  for (int v : enc.select_var) mark(v);
  for (const auto& c : enc.absdir_var)
    for (int v : c) mark(v);
  for (int j = 0; j < enc.model.num_vars(); ++j) REQUIRE(seen[j] == 1);
}

// Re-simulate a MILP assignment and compare every surviving node variable.
double resim_max_node_error(const Network& net, const EncodedProblem& enc, const Vec& x) {
  double worst = 0.0;
  for (int c = 0; c < enc.n_copies; ++c) {
    Vec x0(enc.input_var[c].size());
    for (size_t i = 0; i < x0.size(); ++i) x0[i] = x[enc.input_var[c][i]];
    const auto vals = forward(net, x0);
    for (int l = 1; l <= net.depth(); ++l)
      for (size_t k = 0; k < vals[l - 1].size(); ++k) {
        const int v = enc.node_var[c][l - 1][k];
        const double model_val = v >= 0 ? x[v] : 0.0;
        worst = std::max(worst, std::fabs(model_val - vals[l - 1][k]));
      }
  }
  return worst;
}

}  // namespace

TEST_CASE("toy single-node encoding reaches both relu branches", "[encoder]") {
  const Network net = relu_identity_net();
  // Hand-built bounds: preactivation of h in [-1, 1], output in [0, 1].
  BoundsTable bounds;
  bounds.layers = {{{-1.0, 1.0, ReluStability::Unstable, BoundProvenance::Interval, 0.0}},
                   {{0.0, 1.0, ReluStability::Unstable, BoundProvenance::Interval, 0.0}}};

  SECTION("reachable target lands on the active branch") {
    InverseProblem p = make_box_problem(net, {{{0.5}}}, -1.0, 1.0);
    EncodedProblem enc = encode_inverse(net, bounds, p);
    const SolveReport rep = solve_milp(enc.model);
    REQUIRE(rep.status == SolveStatus::Optimal);
    REQUIRE(rep.incumbent_obj == Catch::Approx(0.0).margin(1e-9));
    const DecodedSolution dec = decode_solution(net, enc, *rep.incumbent);
    REQUIRE(dec.inputs[0][0] == Catch::Approx(0.5).margin(1e-7));
    REQUIRE((*rep.incumbent)[enc.relu_var[0][0][0]] == Catch::Approx(1.0));
  }

  SECTION("negative target is floored by the relu") {
    InverseProblem p = make_box_problem(net, {{{-0.3}}}, -1.0, 1.0);
    EncodedProblem enc = encode_inverse(net, bounds, p);
    const SolveReport rep = solve_milp(enc.model);
    REQUIRE(rep.status == SolveStatus::Optimal);
    REQUIRE(rep.incumbent_obj == Catch::Approx(0.3).margin(1e-9));
    const DecodedSolution dec = decode_solution(net, enc, *rep.incumbent);
    REQUIRE(output(net, dec.inputs[0])[0] == Catch::Approx(0.0).margin(1e-7));
  }
}

TEST_CASE("stably active nodes get an equality and no binary", "[encoder]") {
  const Network net = relu_identity_net();
  BoundsTable bounds;
  bounds.layers = {{{0.2, 1.0, ReluStability::StablyActive, BoundProvenance::MilpExact, 0.0}},
                   {{0.2, 1.0, ReluStability::Unstable, BoundProvenance::MilpExact, 0.0}}};
  InverseProblem p = make_box_problem(net, {{{0.5}}}, 0.2, 1.0);
  EncodedProblem enc = encode_inverse(net, bounds, p);
  REQUIRE(enc.relu_var[0][0][0] == -1);
  for (const Variable& v : enc.model.vars) REQUIRE(v.kind == VarKind::Continuous);
  const SolveReport rep = solve_milp(enc.model);
  REQUIRE(rep.incumbent_obj == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("stably inactive nodes are dropped structurally", "[encoder]") {
  const Network net = relu_identity_net();
  BoundsTable bounds;
  bounds.layers = {{{-1.0, -0.2, ReluStability::StablyInactive, BoundProvenance::MilpExact, 0.0}},
                   {{0.0, 0.0, ReluStability::Unstable, BoundProvenance::MilpExact, 0.0}}};
  InverseProblem p = make_box_problem(net, {{{0.4}}}, -1.0, -0.2);
  EncodedProblem enc = encode_inverse(net, bounds, p);
  REQUIRE(enc.node_var[0][0][0] == -1);
  const SolveReport rep = solve_milp(enc.model);
  // Output is pinned at zero, so the objective is the full target distance.
  REQUIRE(rep.incumbent_obj == Catch::Approx(0.4).margin(1e-9));
}

TEST_CASE("encoding bookkeeping and errors", "[encoder]") {
  const Network net = make_random_network(2, {2, {3}, 2});
  const Vec lo(2, 0.0), hi(2, 1.0);
  const BoundsTable bounds = interval_bounds(net, lo, hi);
  Rng rng(1);
  InverseProblem p = make_box_problem(net, {make_target(net, rng, lo, hi)});
  EncodedProblem enc = encode_inverse(net, bounds, p);
  check_var_map_partition(enc);

  BoundsTable wrong = bounds;
  wrong.layers.pop_back();
  REQUIRE_THROWS_AS(encode_inverse(net, wrong, p), std::invalid_argument);

  BoundsTable flipped = bounds;
  flipped.at(1, 0).lower = 2.0;
  flipped.at(1, 0).upper = -2.0;
  REQUIRE_THROWS_AS(encode_inverse(net, flipped, p), std::invalid_argument);

  InverseProblem bad = p;
  bad.targets.clear();
  REQUIRE_THROWS_AS(encode_inverse(net, bounds, bad), std::invalid_argument);
}

TEST_CASE("soundness and completeness on seeded nets", "[encoder]") {
  for (uint64_t seed = 0; seed < 8; ++seed) {
    const Network net = make_random_network(seed, {2, {3, 3}, 2});
    const Vec lo(2, 0.0), hi(2, 1.0);
    const BoundsTable bounds = tighten_bounds(net, lo, hi, {});
    Rng rng(seed + 500);
    InverseProblem p = make_box_problem(net, {make_target(net, rng, lo, hi, 0.1)});
    EncodedProblem enc = encode_inverse(net, bounds, p);

    // Soundness: the solver's assignment re-simulates exactly.
    const SolveReport rep = solve_milp(enc.model);
    REQUIRE(rep.status == SolveStatus::Optimal);
    REQUIRE(resim_max_node_error(net, enc, *rep.incumbent) < 1e-6);

    // Completeness: lifted box points are feasible assignments.
    for (int trial = 0; trial < 120; ++trial) {
      const Vec x0 = random_box_point(rng, lo, hi);
      const Vec lifted = lift_point(net, enc, {x0});
      REQUIRE(enc.model.max_violation(lifted) <= 1e-9);
    }
  }
}

TEST_CASE("milp optimum equals pattern enumeration", "[encoder]") {
  BnbConfig cfg;
  cfg.gap_tol = 1e-9;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const Network net = make_random_network(seed + 40, {2, {3, 2}, 2});
    const Vec lo(2, 0.0), hi(2, 1.0);
    const BoundsTable bounds = tighten_bounds(net, lo, hi, {});
    Rng rng(seed);
    InverseProblem p = make_box_problem(net, {make_target(net, rng, lo, hi, 0.15)});
    EncodedProblem enc = encode_inverse(net, bounds, p);
    const SolveReport rep = solve_milp(enc.model, cfg);
    const auto ref = oracle::enumerate_patterns(net, p);
    REQUIRE(ref.feasible);
    REQUIRE(rep.incumbent_obj == Catch::Approx(ref.objective).margin(1e-6));
  }
}

TEST_CASE("selection constraints", "[encoder]") {
  const Network net = make_random_network(77, {4, {3}, 2});
  const Vec lo(4, 0.0), hi(4, 1.0);
  const BoundsTable bounds = tighten_bounds(net, lo, hi, {});
  Rng rng(3);
  InverseProblem p = make_box_problem(net, {make_target(net, rng, lo, hi)});
  BnbConfig cfg;
  cfg.gap_tol = 1e-9;

  SECTION("a full budget is vacuous") {
    EncodedProblem plain = encode_inverse(net, bounds, p);
    const double unconstrained = solve_milp(plain.model, cfg).incumbent_obj;
    EncodedProblem enc = encode_inverse(net, bounds, p);
    add_selection(enc, 4);
    const SolveReport rep = solve_milp(enc.model, cfg);
    REQUIRE(rep.incumbent_obj == Catch::Approx(unconstrained).margin(1e-6));
  }

  SECTION("budget one matches fixing each input alone") {
    EncodedProblem enc = encode_inverse(net, bounds, p);
    add_selection(enc, 1);
    const SolveReport rep = solve_milp(enc.model, cfg);
    const auto ref = oracle::enumerate_selection(net, p, 1);
    REQUIRE(ref.feasible);
    REQUIRE(rep.incumbent_obj == Catch::Approx(ref.objective).margin(1e-6));
    // Selection semantics: at most one strictly positive input.
    const DecodedSolution dec = decode_solution(net, enc, *rep.incumbent);
    int positive = 0;
    for (double v : dec.inputs[0])
      if (v > 1e-6) ++positive;
    REQUIRE(positive <= 1);
  }

  SECTION("selector variables are shared across targets") {
    InverseProblem multi = p;
    multi.targets.push_back(make_target(net, rng, lo, hi));
    EncodedProblem enc = encode_inverse(net, bounds, multi);
    add_selection(enc, 2);
    REQUIRE(enc.n_copies == 2);
    REQUIRE(enc.select_var.size() == 4);
    const SolveReport rep = solve_milp(enc.model, cfg);
    REQUIRE(rep.status == SolveStatus::Optimal);
    const DecodedSolution dec = decode_solution(net, enc, *rep.incumbent);
    // Both copies draw from the same support.
    for (int c = 0; c < 2; ++c)
      for (size_t i = 0; i < 4; ++i)
        if (dec.inputs[c][i] > 1e-6)
          REQUIRE(std::find(dec.selected.begin(), dec.selected.end(), static_cast<int>(i)) != dec.selected.end());
    REQUIRE(dec.selected.size() <= 2);
  }

  SECTION("budget bounds are validated") {
    EncodedProblem enc = encode_inverse(net, bounds, p);
    REQUIRE_THROWS_AS(add_selection(enc, 0), std::invalid_argument);
    EncodedProblem enc2 = encode_inverse(net, bounds, p);
    REQUIRE_THROWS_AS(add_selection(enc2, 5), std::invalid_argument);
  }
}

TEST_CASE("integer design constraints", "[encoder]") {
  BnbConfig cfg;
  cfg.gap_tol = 1e-9;

  SECTION("relaxation dominance on a one-input net") {
    const Network net = relu_identity_net();
    const BoundsTable bounds = tighten_bounds(net, {0.0}, {3.0}, {});
    InverseProblem p = make_box_problem(net, {{{1.4}}}, 0.0, 3.0);
    EncodedProblem cont = encode_inverse(net, bounds, p);
    const double cont_obj = solve_milp(cont.model, cfg).incumbent_obj;

    p.integer_design = {true};
    EncodedProblem enc = encode_inverse(net, bounds, p);
    encode_integer_design(enc);
    const SolveReport rep = solve_milp(enc.model, cfg);
    const double x = decode_solution(net, enc, *rep.incumbent).inputs[0][0];
    REQUIRE((x == Catch::Approx(1.0) || x == Catch::Approx(2.0)));
    REQUIRE(rep.incumbent_obj >= cont_obj - 1e-9);
  }

  SECTION("contoning-style lattice: sum pinned to 4") {
    const Network net = make_random_network(8, {3, {4}, 2});
    InverseProblem p = make_box_problem(net, {{{0.25, -0.1}}}, 0.0, 4.0);
    p.integer_design = {true, true, true};
    InputConstraint sum;
    sum.coeffs = {1.0, 1.0, 1.0};
    sum.sense = RowSense::Eq;
    sum.rhs = 4.0;
    p.extra_constraints.push_back(sum);
    const BoundsTable bounds = tighten_bounds(net, p);
    EncodedProblem enc = encode_inverse(net, bounds, p);
    encode_integer_design(enc);
    const SolveReport rep = solve_milp(enc.model, cfg);
    REQUIRE(rep.status == SolveStatus::Optimal);
    const auto ref = oracle::enumerate_integer_designs(net, p);
    REQUIRE(ref.feasible);
    REQUIRE(rep.incumbent_obj == Catch::Approx(ref.objective).margin(1e-6));
    const DecodedSolution dec = decode_solution(net, enc, *rep.incumbent);
    const double total = std::accumulate(dec.inputs[0].begin(), dec.inputs[0].end(), 0.0);
    REQUIRE(total == Catch::Approx(4.0).margin(1e-6));
  }
}

TEST_CASE("robustness encoding", "[encoder]") {
  BnbConfig cfg;
  cfg.gap_tol = 1e-9;

  SECTION("epsilon zero reproduces the candidate deviation exactly") {
    const Network net = make_random_network(14, {3, {4}, 2});
    const Vec lo(3, 0.0), hi(3, 1.0);
    Rng rng(2);
    const Vec cand = random_box_point(rng, lo, hi);
    InverseProblem p = make_box_problem(net, {make_target(net, rng, lo, hi)});
    p.robustness = RobustnessQuery{cand, 0.0};
    const BoundsTable bounds = bounds_for_robustness(net, cand, 0.0, lo, hi);
    EncodedProblem enc = encode_robustness(net, bounds, p);
    const SolveReport rep = solve_milp(enc.model, cfg);
    REQUIRE(rep.status == SolveStatus::Optimal);
    REQUIRE(rep.incumbent_obj == Catch::Approx(l1_distance(output(net, cand), p.targets[0])).margin(1e-7));
  }

  SECTION("purely linear net: analytic vertex law") {
    // One linear layer y = w.x0; worst case is |w.cand - t| + eps * sum|w|.
    Layer out;
    out.weights = Matrix(1, 3);
    out.weights(0, 0) = 0.8;
    out.weights(0, 1) = -1.3;
    out.weights(0, 2) = 0.4;
    out.bias = {0.1};
    out.activation = Activation::Linear;
    const Network net({out});
    const Vec cand = {0.4, 0.5, 0.6};
    const double eps = 0.05;
    const Vec lo(3, 0.0), hi(3, 1.0);
    InverseProblem p = make_box_problem(net, {{{0.0}}});
    p.targets[0][0] = output(net, cand)[0];  // zero deviation at the candidate
    p.robustness = RobustnessQuery{cand, eps};
    const BoundsTable bounds = bounds_for_robustness(net, cand, eps, lo, hi);
    EncodedProblem enc = encode_robustness(net, bounds, p);
    const SolveReport rep = solve_milp(enc.model, cfg);
    const double analytic = eps * (0.8 + 1.3 + 0.4);
    REQUIRE(rep.incumbent_obj == Catch::Approx(analytic).margin(1e-6));
    // Vertex sweep agrees.
    const auto sampled = oracle::sample_robustness(net, cand, eps, lo, hi, p.targets[0], 200, 9);
    REQUIRE(sampled.max_deviation == Catch::Approx(analytic).margin(1e-9));
  }

  SECTION("sampled deviations never exceed the milp optimum") {
    const Network net = make_random_network(91, {3, {4, 3}, 2});
    const Vec lo(3, 0.0), hi(3, 1.0);
    Rng rng(4);
    const Vec cand = random_box_point(rng, lo, hi);
    InverseProblem p = make_box_problem(net, {make_target(net, rng, lo, hi)});
    p.robustness = RobustnessQuery{cand, 0.05};
    const BoundsTable bounds = bounds_for_robustness(net, cand, 0.05, lo, hi);
    EncodedProblem enc = encode_robustness(net, bounds, p);
    const SolveReport rep = solve_milp(enc.model, cfg);
    const auto sampled = oracle::sample_robustness(net, cand, 0.05, lo, hi, p.targets[0], 1000, 11);
    REQUIRE(sampled.max_deviation <= rep.incumbent_obj + 1e-7);
    check_var_map_partition(enc);
  }

  SECTION("empty epsilon box is rejected") {
    const Network net = make_random_network(1, {2, {2}, 1});
    InverseProblem p = make_box_problem(net, {{{0.0}}});
    p.robustness = RobustnessQuery{{5.0, 5.0}, 0.1};
    const BoundsTable bounds = interval_bounds(net, {0.0, 0.0}, {1.0, 1.0});
    REQUIRE_THROWS_AS(encode_robustness(net, bounds, p), std::invalid_argument);
  }
}

TEST_CASE("degenerate target outside the reachable range", "[encoder]") {
  const Network net = relu_identity_net();
  const BoundsTable bounds = tighten_bounds(net, {0.0}, {1.0}, {});
  InverseProblem p = make_box_problem(net, {{{5.0}}});  // reachable set is [0, 1]
  EncodedProblem enc = encode_inverse(net, bounds, p);
  const SolveReport rep = solve_milp(enc.model);
  REQUIRE(rep.status == SolveStatus::Optimal);
  REQUIRE(rep.incumbent_obj == Catch::Approx(4.0).margin(1e-7));
}
