#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "relumip/io.hpp"
#include "relumip/synth.hpp"
#include "relumip/tightening.hpp"

using namespace relumip;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("relumip_fmt_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("network round-trip preserves forward outputs bit for bit", "[formats]") {
  TempDir tmp;
  const Network net = make_random_network(42, {2, {3}, 2});
  const std::string path = tmp.file("net.json");
  save_network(net, path);
  const Network back = load_network(path);
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec x0 = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    const Vec a = output(net, x0);
    const Vec b = output(back, x0);
    REQUIRE(a == b);  // exact equality, not approx
  }
  REQUIRE(network_digest(net) == network_digest(back));
}

TEST_CASE("network schema violations are reported with their layer", "[formats]") {
  TempDir tmp;
  const std::string path = tmp.file("bad.json");
  {
    std::ofstream out(path);
    out << R"({"format_version":1,"layers":[
      {"weights":[[1.0],[2.0]],"bias":[0.0],"activation":"relu"},
      {"weights":[[1.0,1.0]],"bias":[0.0],"activation":"linear"}]})";
  }
  REQUIRE_THROWS_WITH(load_network(path), Catch::Matchers::ContainsSubstring("layer 0"));

  const std::string path2 = tmp.file("relu_last.json");
  {
    std::ofstream out(path2);
    out << R"({"format_version":1,"layers":[{"weights":[[1.0]],"bias":[0.0],"activation":"relu"}]})";
  }
  REQUIRE_THROWS_WITH(load_network(path2), Catch::Matchers::ContainsSubstring("last layer must be linear"));

  const std::string path3 = tmp.file("nonfinite.json");
  {
    std::ofstream out(path3);
    out << R"({"format_version":1,"layers":[{"weights":[[1e999]],"bias":[0.0],"activation":"linear"}]})";
  }
  REQUIRE_THROWS_AS(load_network(path3), FileFormatError);

  REQUIRE_THROWS_AS(load_network(tmp.file("missing.json")), FileFormatError);
}

TEST_CASE("problem file round-trip covers every field", "[formats]") {
  TempDir tmp;
  InverseProblem p;
  p.targets = {{0.1, 0.2}, {0.3, 0.4}};
  p.design_lower = {0.0, 0.0, 0.0};
  p.design_upper = {1.0, 2.0, 3.0};
  p.integer_design = {true, false, true};
  p.selection_budget = 2;
  InputConstraint c;
  c.coeffs = {1.0, 1.0, 1.0};
  c.sense = RowSense::Le;
  c.rhs = 4.0;
  p.extra_constraints.push_back(c);
  p.display_scale = {10.0, 10.0, 10.0};
  const std::string path = tmp.file("prob.json");
  save_problem(p, path);
  const InverseProblem q = load_problem(path);
  REQUIRE(q.targets == p.targets);
  REQUIRE(q.design_lower == p.design_lower);
  REQUIRE(q.design_upper == p.design_upper);
  REQUIRE(q.integer_design == p.integer_design);
  REQUIRE(q.selection_budget == p.selection_budget);
  REQUIRE(q.extra_constraints.size() == 1);
  REQUIRE(q.extra_constraints[0].coeffs == c.coeffs);
  REQUIRE(q.extra_constraints[0].sense == RowSense::Le);
  REQUIRE(q.display_scale == p.display_scale);

  InverseProblem r;
  r.targets = {{0.5}};
  r.design_lower = {0.0};
  r.design_upper = {1.0};
  r.robustness = RobustnessQuery{{0.5}, 1e-3};
  const std::string path2 = tmp.file("robust.json");
  save_problem(r, path2);
  const InverseProblem s = load_problem(path2);
  REQUIRE(s.robustness.has_value());
  REQUIRE(s.robustness->epsilon == 1e-3);
  REQUIRE(s.robustness->candidate == r.robustness->candidate);
}

TEST_CASE("bounds cache round-trip and digest key", "[formats]") {
  TempDir tmp;
  const Network net = make_random_network(7, {2, {3}, 1});
  const Vec lo(2, 0.0), hi(2, 1.0);
  const BoundsTable table = tighten_bounds(net, lo, hi, {});
  const std::string path = tmp.file("cache.json");
  save_bounds_cache(table, net, lo, hi, path);
  const BoundsTable back = load_bounds_cache(path, net, lo, hi);
  for (int l = 1; l <= net.depth(); ++l)
    for (int k = 0; k < net.layers()[l - 1].out_dim(); ++k) {
      REQUIRE(back.at(l, k).lower == table.at(l, k).lower);
      REQUIRE(back.at(l, k).upper == table.at(l, k).upper);
      REQUIRE(back.at(l, k).stability == table.at(l, k).stability);
      REQUIRE(back.at(l, k).provenance == table.at(l, k).provenance);
    }

  // Wrong network or box: the digest refuses the cache.
  const Network other = make_random_network(8, {2, {3}, 1});
  REQUIRE_THROWS_WITH(load_bounds_cache(path, other, lo, hi),
                      Catch::Matchers::ContainsSubstring("different network"));
  const Vec hi2 = {1.0, 2.0};
  REQUIRE_THROWS_WITH(load_bounds_cache(path, net, lo, hi2),
                      Catch::Matchers::ContainsSubstring("different design box"));
}

TEST_CASE("digests are stable and input-sensitive", "[formats]") {
  const Network a = make_random_network(1, {2, {2}, 1});
  const Network b = make_random_network(2, {2, {2}, 1});
  REQUIRE(network_digest(a) == network_digest(a));
  REQUIRE(network_digest(a) != network_digest(b));
  REQUIRE(box_digest({0.0}, {1.0}) != box_digest({0.0}, {2.0}));
}
