#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xorreach/errors.hpp"
#include "xorreach/rng.hpp"

namespace xorreach {

using NodeIndex = std::uint64_t;
using Label = std::uint32_t;

inline constexpr unsigned kMaxLabelBits = 16;
inline constexpr std::uint64_t kMaxLabeledEdges = std::uint64_t{1} << 26;

/// base^exp, throwing CapacityError instead of overflowing 2^62.
inline std::uint64_t checked_pow(std::uint64_t base, unsigned exp) {
  std::uint64_t r = 1;
  for (unsigned i = 0; i < exp; ++i) {
    if (base != 0 && r > (std::uint64_t{1} << 62) / base) throw CapacityError("B^d overflows a machine word");
    r *= base;
  }
  return r;
}

struct ButterflyParams {
  unsigned degree = 2;  // B
  unsigned depth = 1;   // d
  unsigned bits = 1;    // b

  void validate() const {
    if (degree < 2) throw RangeError("degree B must be >= 2");
    if (depth < 1) throw RangeError("depth d must be >= 1");
    if (bits < 1 || bits > kMaxLabelBits) throw RangeError("label bits b must be in [1, 16]");
    (void)checked_pow(degree, depth + 1);
  }

  friend bool operator==(const ButterflyParams&, const ButterflyParams&) = default;
};

/// An edge from layer `layer` to layer `layer + 1`.
struct Edge {
  unsigned layer = 0;
  NodeIndex from = 0;
  NodeIndex to = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// A source-sink query (s, t).
struct QueryPair {
  NodeIndex s = 0;
  NodeIndex t = 0;

  friend auto operator<=>(const QueryPair&, const QueryPair&) = default;
};

/// Butterfly graph of degree B and depth d. Layers 0..d each hold B^d
/// nodes; sources sit at layer 0 and sinks at layer d. The edges leaving
/// layer i connect nodes whose base-B indices differ at most in digit i
/// (digit 0 least significant). The graph is implicit: nothing is stored
/// beyond the parameters.
class ButterflyGraph {
 public:
  explicit ButterflyGraph(ButterflyParams params) : params_(params) {
    params_.validate();
    powers_.resize(params_.depth + 2);
    powers_[0] = 1;
    for (unsigned c = 1; c < powers_.size(); ++c) powers_[c] = powers_[c - 1] * params_.degree;
  }

  const ButterflyParams& params() const { return params_; }
  unsigned degree() const { return params_.degree; }
  unsigned depth() const { return params_.depth; }
  unsigned bits() const { return params_.bits; }

  /// Nodes per layer, B^d.
  std::uint64_t width() const { return powers_[params_.depth]; }
  unsigned layer_count() const { return params_.depth + 1; }
  std::uint64_t node_count() const { return layer_count() * width(); }
  /// d * B^(d+1)
  std::uint64_t edge_count() const { return params_.depth * powers_[params_.depth + 1]; }

  unsigned digit(NodeIndex x, unsigned c) const {
    return static_cast<unsigned>((x / powers_[c]) % params_.degree);
  }

  NodeIndex replace_digit(NodeIndex x, unsigned c, unsigned value) const {
    return x - digit(x, c) * powers_[c] + value * powers_[c];
  }

  bool has_edge(const Edge& e) const {
    if (e.layer >= params_.depth || e.from >= width() || e.to >= width()) return false;
    for (unsigned c = 0; c < params_.depth; ++c)
      if (c != e.layer && digit(e.from, c) != digit(e.to, c)) return false;
    return true;
  }

  std::vector<Edge> out_edges(unsigned layer, NodeIndex from) const {
    check_node(from);
    if (layer >= params_.depth) return {};
    std::vector<Edge> out;
    out.reserve(params_.degree);
    for (unsigned v = 0; v < params_.degree; ++v) out.push_back({layer, from, replace_digit(from, layer, v)});
    return out;
  }

  /// Dense id in [edge_count()], ordered by (layer, from, to).
  std::uint64_t edge_id(const Edge& e) const {
    if (!has_edge(e)) throw RangeError("not an edge of this butterfly");
    return (e.layer * width() + e.from) * params_.degree + digit(e.to, e.layer);
  }

  Edge edge_at(std::uint64_t id) const {
    if (id >= edge_count()) throw RangeError("edge id out of range");
    const unsigned v = static_cast<unsigned>(id % params_.degree);
    const std::uint64_t rest = id / params_.degree;
    const NodeIndex from = rest % width();
    const unsigned layer = static_cast<unsigned>(rest / width());
    return {layer, from, replace_digit(from, layer, v)};
  }

  /// Node index at every layer of the unique s-t path: layer i carries
  /// digits 0..i-1 of t and digits i..d-1 of s.
  std::vector<NodeIndex> path_nodes(NodeIndex s, NodeIndex t) const {
    check_node(s);
    check_node(t);
    std::vector<NodeIndex> nodes{s};
    nodes.reserve(params_.depth + 1);
    NodeIndex cur = s;
    for (unsigned i = 0; i < params_.depth; ++i) {
      cur = replace_digit(cur, i, digit(t, i));
      nodes.push_back(cur);
    }
    return nodes;
  }

  std::vector<Edge> unique_path(NodeIndex s, NodeIndex t) const {
    const auto nodes = path_nodes(s, t);
    std::vector<Edge> path;
    path.reserve(params_.depth);
    for (unsigned i = 0; i < params_.depth; ++i) path.push_back({i, nodes[i], nodes[i + 1]});
    return path;
  }

 private:
  void check_node(NodeIndex x) const {
    if (x >= width()) throw RangeError("node index outside [B^d]");
  }

  ButterflyParams params_;
  std::vector<std::uint64_t> powers_;
};

/// b-bit label on every edge of a butterfly (the input I).
class EdgeLabeling {
 public:
  explicit EdgeLabeling(ButterflyParams params) : params_(params) {
    ButterflyGraph g(params_);
    if (g.edge_count() > kMaxLabeledEdges) throw CapacityError("butterfly too large to label");
    labels_.assign(g.edge_count(), 0);
  }

  static EdgeLabeling zeros(ButterflyParams params) { return EdgeLabeling(params); }

  static EdgeLabeling uniform(ButterflyParams params, Rng& rng) {
    EdgeLabeling l(params);
    const Label mask = (Label{1} << params.bits) - 1;
    for (auto& x : l.labels_) x = static_cast<Label>(rng()) & mask;
    return l;
  }

  /// Labeling whose dense label vector is the base-2^b digits of `code`.
  /// Enumerates all labelings as code runs over [2^(b * edges)].
  static EdgeLabeling from_code(ButterflyParams params, std::uint64_t code) {
    EdgeLabeling l(params);
    const Label mask = (Label{1} << params.bits) - 1;
    for (auto& x : l.labels_) {
      x = static_cast<Label>(code) & mask;
      code >>= params.bits;
    }
    return l;
  }

  struct Entry {
    Edge edge;
    Label value;
  };

  /// Builds from an explicit edge list, requiring every edge exactly once.
  static EdgeLabeling from_entries(ButterflyParams params, const std::vector<Entry>& entries) {
    EdgeLabeling l(params);
    ButterflyGraph g(params);
    std::vector<bool> seen(l.labels_.size(), false);
    for (const auto& e : entries) {
      const auto id = g.edge_id(e.edge);
      if (seen[id]) throw PreconditionError("edge labeled twice");
      seen[id] = true;
      l.set_by_id(id, e.value);
    }
    for (bool s : seen)
      if (!s) throw IncompleteLabelingError("labeling does not cover every edge");
    return l;
  }

  const ButterflyParams& params() const { return params_; }
  std::size_t size() const { return labels_.size(); }

  Label get(const ButterflyGraph& g, const Edge& e) const { return labels_[g.edge_id(e)]; }
  void set(const ButterflyGraph& g, const Edge& e, Label value) { set_by_id(g.edge_id(e), value); }

  Label get_by_id(std::uint64_t id) const { return labels_.at(id); }
  void set_by_id(std::uint64_t id, Label value) {
    if (value >> params_.bits) throw RangeError("label exceeds b bits");
    labels_.at(id) = value;
  }

  const std::vector<Label>& raw() const { return labels_; }

  friend bool operator==(const EdgeLabeling&, const EdgeLabeling&) = default;

 private:
  ButterflyParams params_;
  std::vector<Label> labels_;
};

inline void check_labeling(const ButterflyGraph& g, const EdgeLabeling& l) {
  if (!(g.params() == l.params())) throw PreconditionError("labeling belongs to a different butterfly");
}

inline Label path_xor(const ButterflyGraph& g, const EdgeLabeling& l, NodeIndex s, NodeIndex t) {
  check_labeling(g, l);
  Label acc = 0;
  for (const auto& e : g.unique_path(s, t)) acc ^= l.get(g, e);
  return acc;
}

/// psi_I(s, t): 1 iff the path XOR is the all-zero string.
inline bool zero_xor_answer(const ButterflyGraph& g, const EdgeLabeling& l, NodeIndex s, NodeIndex t) {
  return path_xor(g, l, s, t) == 0;
}

// JSON: {"B":..,"d":..,"b":..,"labels":[[layer,from,to,value],...]}
inline nlohmann::json labeling_to_json(const EdgeLabeling& l) {
  const ButterflyGraph g(l.params());
  nlohmann::json labels = nlohmann::json::array();
  for (std::uint64_t id = 0; id < g.edge_count(); ++id) {
    const Edge e = g.edge_at(id);
    labels.push_back({e.layer, e.from, e.to, l.get_by_id(id)});
  }
  return {{"B", l.params().degree}, {"d", l.params().depth}, {"b", l.params().bits}, {"labels", labels}};
}

inline EdgeLabeling labeling_from_json(const nlohmann::json& j) {
  ButterflyParams params{j.at("B").get<unsigned>(), j.at("d").get<unsigned>(), j.at("b").get<unsigned>()};
  params.validate();
  std::vector<EdgeLabeling::Entry> entries;
  for (const auto& row : j.at("labels")) {
    if (!row.is_array() || row.size() != 4) throw PreconditionError("label row must be [layer, from, to, value]");
    entries.push_back({{row[0].get<unsigned>(), row[1].get<NodeIndex>(), row[2].get<NodeIndex>()}, row[3].get<Label>()});
  }
  return EdgeLabeling::from_entries(params, entries);
}

}  // namespace xorreach
