#pragma once

// All on-disk formats in one place: network files, problem files, bounds
// caches, solution records and the gap-trace CSV. Everything is JSON with a
// format_version field; numbers round-trip at full double precision. See
// docs/FORMATS.md for the schemas.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "relumip/bnb.hpp"
#include "relumip/bounds.hpp"
#include "relumip/encoder.hpp"
#include "relumip/network.hpp"

namespace relumip {

using Json = nlohmann::ordered_json;

class FileFormatError : public std::runtime_error {
 public:
  explicit FileFormatError(const std::string& what) : std::runtime_error(what) {}
};

// 64-bit FNV-1a; used to key bounds caches and to fingerprint input files in
// run manifests. Not cryptographic, just collision-resistant enough here.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline uint64_t digest_doubles(const Vec& v, uint64_t h) {
  return fnv1a64(v.data(), v.size() * sizeof(double), h);
}

inline std::string network_digest(const Network& net) {
  uint64_t h = 1469598103934665603ull;
  for (const Layer& layer : net.layers()) {
    const int dims[2] = {layer.weights.rows, layer.weights.cols};
    h = fnv1a64(dims, sizeof(dims), h);
    h = fnv1a64(layer.weights.data.data(), layer.weights.data.size() * sizeof(double), h);
    h = digest_doubles(layer.bias, h);
    const char a = layer.activation == Activation::ReLU ? 'r' : 'l';
    h = fnv1a64(&a, 1, h);
  }
  return hex64(h);
}

inline std::string box_digest(const Vec& lo, const Vec& hi) {
  uint64_t h = 1469598103934665603ull;
  h = digest_doubles(lo, h);
  h = digest_doubles(hi, h);
  return hex64(h);
}

inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileFormatError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  return hex64(fnv1a64(bytes.data(), bytes.size()));
}

namespace detail {
inline Json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileFormatError(path + ": cannot open");
  try {
    return Json::parse(in);
  } catch (const std::exception& e) {
    throw FileFormatError(path + ": " + e.what());
  }
}

inline void write_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw FileFormatError(path + ": cannot open for writing");
  out << j.dump(2) << "\n";
}

inline Vec to_vec(const Json& j, const std::string& where) {
  if (!j.is_array()) throw FileFormatError(where + ": expected an array of numbers");
  Vec v;
  v.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number()) throw FileFormatError(where + ": expected a number");
    v.push_back(e.get<double>());
  }
  return v;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Network files

inline Json network_to_json(const Network& net) {
  Json j;
  j["format_version"] = 1;
  Json layers = Json::array();
  for (const Layer& layer : net.layers()) {
    Json lj;
    Json rows = Json::array();
    for (int r = 0; r < layer.weights.rows; ++r) {
      Json row = Json::array();
      for (int c = 0; c < layer.weights.cols; ++c) row.push_back(layer.weights(r, c));
      rows.push_back(std::move(row));
    }
    lj["weights"] = std::move(rows);
    lj["bias"] = layer.bias;
    lj["activation"] = activation_name(layer.activation);
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  return j;
}

inline Network network_from_json(const Json& j, const std::string& where) {
  if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty())
    throw FileFormatError(where + ": missing non-empty 'layers' array");
  std::vector<Layer> layers;
  int idx = 0;
  for (const auto& lj : j["layers"]) {
    const std::string ctx = where + ": layers[" + std::to_string(idx) + "]";
    Layer layer;
    if (!lj.contains("weights") || !lj["weights"].is_array() || lj["weights"].empty())
      throw FileFormatError(ctx + ": missing 'weights' matrix");
    const auto& rows = lj["weights"];
    const int r = static_cast<int>(rows.size());
    const int c = static_cast<int>(rows[0].size());
    layer.weights = Matrix(r, c);
    for (int i = 0; i < r; ++i) {
      const Vec row = detail::to_vec(rows[i], ctx + ".weights[" + std::to_string(i) + "]");
      if (static_cast<int>(row.size()) != c) throw FileFormatError(ctx + ": ragged weights matrix");
      for (int k = 0; k < c; ++k) layer.weights(i, k) = row[k];
    }
    if (!lj.contains("bias")) throw FileFormatError(ctx + ": missing 'bias'");
    layer.bias = detail::to_vec(lj["bias"], ctx + ".bias");
    const std::string act = lj.value("activation", "relu");
    if (act == "relu") layer.activation = Activation::ReLU;
    else if (act == "linear") layer.activation = Activation::Linear;
    else throw FileFormatError(ctx + ": unknown activation '" + act + "'");
    layers.push_back(std::move(layer));
    ++idx;
  }
  try {
    return Network(std::move(layers));
  } catch (const std::invalid_argument& e) {
    throw FileFormatError(where + ": " + e.what());
  }
}

inline void save_network(const Network& net, const std::string& path) {
  detail::write_file(path, network_to_json(net));
}

inline Network load_network(const std::string& path) {
  return network_from_json(detail::parse_file(path), path);
}

// ---------------------------------------------------------------------------
// Problem files

inline Json problem_to_json(const InverseProblem& p) {
  Json j;
  j["format_version"] = 1;
  Json targets = Json::array();
  for (const Vec& t : p.targets) targets.push_back(t);
  j["targets"] = std::move(targets);
  j["lower"] = p.design_lower;
  j["upper"] = p.design_upper;
  if (p.any_integer()) {
    Json flags = Json::array();
    for (bool b : p.integer_design) flags.push_back(b);
    j["integer"] = std::move(flags);
  }
  if (p.selection_budget) j["selection_budget"] = *p.selection_budget;
  if (p.robustness) {
    Json r;
    r["candidate"] = p.robustness->candidate;
    r["epsilon"] = p.robustness->epsilon;
    j["robustness"] = std::move(r);
  }
  if (!p.extra_constraints.empty()) {
    Json rows = Json::array();
    for (const InputConstraint& c : p.extra_constraints) {
      Json row;
      row["coeffs"] = c.coeffs;
      row["sense"] = c.sense == RowSense::Le ? "<=" : c.sense == RowSense::Ge ? ">=" : "=";
      row["rhs"] = c.rhs;
      rows.push_back(std::move(row));
    }
    j["extra_constraints"] = std::move(rows);
  }
  if (!p.display_scale.empty()) j["scale"] = p.display_scale;
  return j;
}

inline InverseProblem problem_from_json(const Json& j, const std::string& where) {
  InverseProblem p;
  if (!j.contains("targets") || !j["targets"].is_array() || j["targets"].empty())
    throw FileFormatError(where + ": missing non-empty 'targets'");
  for (size_t i = 0; i < j["targets"].size(); ++i)
    p.targets.push_back(detail::to_vec(j["targets"][i], where + ": targets[" + std::to_string(i) + "]"));
  if (!j.contains("lower") || !j.contains("upper"))
    throw FileFormatError(where + ": missing 'lower'/'upper' design box");
  p.design_lower = detail::to_vec(j["lower"], where + ": lower");
  p.design_upper = detail::to_vec(j["upper"], where + ": upper");
  if (j.contains("integer")) {
    for (const auto& b : j["integer"]) {
      if (!b.is_boolean()) throw FileFormatError(where + ": 'integer' must be booleans");
      p.integer_design.push_back(b.get<bool>());
    }
  }
  if (j.contains("selection_budget") && !j["selection_budget"].is_null())
    p.selection_budget = j["selection_budget"].get<int>();
  if (j.contains("robustness") && !j["robustness"].is_null()) {
    RobustnessQuery r;
    r.candidate = detail::to_vec(j["robustness"]["candidate"], where + ": robustness.candidate");
    r.epsilon = j["robustness"]["epsilon"].get<double>();
    p.robustness = std::move(r);
  }
  if (j.contains("extra_constraints")) {
    for (const auto& row : j["extra_constraints"]) {
      InputConstraint c;
      c.coeffs = detail::to_vec(row["coeffs"], where + ": extra_constraints.coeffs");
      const std::string s = row.value("sense", "=");
      if (s == "<=") c.sense = RowSense::Le;
      else if (s == ">=") c.sense = RowSense::Ge;
      else if (s == "=" || s == "==") c.sense = RowSense::Eq;
      else throw FileFormatError(where + ": unknown constraint sense '" + s + "'");
      c.rhs = row["rhs"].get<double>();
      p.extra_constraints.push_back(std::move(c));
    }
  }
  if (j.contains("scale")) p.display_scale = detail::to_vec(j["scale"], where + ": scale");
  return p;
}

inline void save_problem(const InverseProblem& p, const std::string& path) {
  detail::write_file(path, problem_to_json(p));
}

inline InverseProblem load_problem(const std::string& path) {
  return problem_from_json(detail::parse_file(path), path);
}

// ---------------------------------------------------------------------------
// Bounds cache files, keyed by a digest of (network, box)

inline void save_bounds_cache(const BoundsTable& table, const Network& net, const Vec& lo, const Vec& hi,
                              const std::string& path) {
  Json j;
  j["format_version"] = 1;
  j["network_digest"] = network_digest(net);
  j["box_digest"] = box_digest(lo, hi);
  j["design_lower"] = lo;
  j["design_upper"] = hi;
  Json entries = Json::array();
  for (size_t l = 0; l < table.layers.size(); ++l) {
    for (size_t k = 0; k < table.layers[l].size(); ++k) {
      const NodeBounds& nb = table.layers[l][k];
      Json e;
      e["layer"] = l + 1;
      e["node"] = k;
      e["lower"] = nb.lower;
      e["upper"] = nb.upper;
      e["stability"] = stability_name(nb.stability);
      e["provenance"] = provenance_name(nb.provenance);
      e["time_s"] = nb.compute_time_s;
      entries.push_back(std::move(e));
    }
  }
  j["entries"] = std::move(entries);
  detail::write_file(path, j);
}

inline BoundsTable load_bounds_cache(const std::string& path, const Network& net, const Vec& lo, const Vec& hi) {
  const Json j = detail::parse_file(path);
  if (j.value("network_digest", "") != network_digest(net))
    throw FileFormatError(path + ": cache was computed for a different network");
  if (j.value("box_digest", "") != box_digest(lo, hi))
    throw FileFormatError(path + ": cache was computed for a different design box");
  BoundsTable table;
  table.layers.resize(net.depth());
  for (int l = 0; l < net.depth(); ++l) table.layers[l].resize(net.layers()[l].out_dim());
  for (const auto& e : j["entries"]) {
    const int l = e["layer"].get<int>();
    const int k = e["node"].get<int>();
    if (l < 1 || l > net.depth() || k < 0 || k >= net.layers()[l - 1].out_dim())
      throw FileFormatError(path + ": entry out of range (layer " + std::to_string(l) + ")");
    NodeBounds nb;
    nb.lower = e["lower"].get<double>();
    nb.upper = e["upper"].get<double>();
    const std::string st = e["stability"].get<std::string>();
    nb.stability = st == "stably_active" ? ReluStability::StablyActive
                 : st == "stably_inactive" ? ReluStability::StablyInactive
                                           : ReluStability::Unstable;
    const std::string pv = e["provenance"].get<std::string>();
    nb.provenance = pv == "interval" ? BoundProvenance::Interval
                  : pv == "milp_exact" ? BoundProvenance::MilpExact
                                       : BoundProvenance::MilpRelaxed;
    nb.compute_time_s = e.value("time_s", 0.0);
    table.at(l, k) = nb;
  }
  table.check_shape(net);
  return table;
}

}  // namespace relumip
