#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "xorreach/butterfly.hpp"
#include "xorreach/errors.hpp"
#include "xorreach/rng.hpp"

namespace xorreach {

/// k queries whose unique paths are pairwise node-disjoint.
struct MetaQuery {
  std::vector<QueryPair> pairs;

  std::size_t k() const { return pairs.size(); }
  friend bool operator==(const MetaQuery&, const MetaQuery&) = default;
};

using QuerySet = std::function<bool(QueryPair)>;

inline QuerySet all_pairs() {
  return [](QueryPair) { return true; };
}

/// Pairwise node-disjointness of the unique paths, endpoints included.
inline bool paths_node_disjoint(const ButterflyGraph& g, const std::vector<QueryPair>& pairs) {
  std::set<std::pair<unsigned, NodeIndex>> seen;
  for (const auto& q : pairs) {
    const auto nodes = g.path_nodes(q.s, q.t);
    for (unsigned layer = 0; layer < nodes.size(); ++layer)
      if (!seen.emplace(layer, nodes[layer]).second) return false;
  }
  return true;
}

/// k = max(1, floor(n / lg n)).
inline std::size_t default_meta_size(std::uint64_t n) {
  if (n < 2) return 1;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(n) / std::log2(static_cast<double>(n)))));
}

struct MetaSample {
  std::optional<MetaQuery> meta;  // empty on failure
  std::size_t drawn = 0;          // 10k
  std::size_t qualifying = 0;     // number of indicators X_i = 1
};

/// Draws 10k uniform pairs; X_i = 1 iff pair i lies in the query set and its
/// path shares no node with any other drawn path. Returns the first k
/// qualifying pairs in draw order, or no meta-query if fewer than k qualify.
inline MetaSample sample_meta_query(const ButterflyGraph& g, const QuerySet& query_set, std::size_t k, Rng& rng) {
  if (k == 0) throw PreconditionError("meta-query size must be at least 1");
  const std::uint64_t n = g.width();
  MetaSample out;
  out.drawn = 10 * k;
  std::vector<QueryPair> drawn(out.drawn);
  for (auto& q : drawn) {
    q.s = uniform_below(rng, n);
    q.t = uniform_below(rng, n);
  }
  std::unordered_map<std::uint64_t, std::uint32_t> occupancy;
  std::vector<std::vector<NodeIndex>> paths(drawn.size());
  for (std::size_t i = 0; i < drawn.size(); ++i) {
    paths[i] = g.path_nodes(drawn[i].s, drawn[i].t);
    for (unsigned layer = 0; layer < paths[i].size(); ++layer) ++occupancy[layer * n + paths[i][layer]];
  }
  MetaQuery meta;
  for (std::size_t i = 0; i < drawn.size(); ++i) {
    if (!query_set(drawn[i])) continue;
    bool alone = true;
    for (unsigned layer = 0; layer < paths[i].size() && alone; ++layer) alone = occupancy[layer * n + paths[i][layer]] == 1;
    if (!alone) continue;
    ++out.qualifying;
    if (meta.pairs.size() < k) meta.pairs.push_back(drawn[i]);
  }
  if (meta.pairs.size() == k) out.meta = std::move(meta);
  return out;
}

/// phi_I(s, t): -(1 - 2^-b) if psi = 1, else 2^-b.
inline double phi_weight(bool psi, unsigned bits) {
  const double q = std::ldexp(1.0, -static_cast<int>(bits));
  return psi ? -(1.0 - q) : q;
}

inline double phi_weight(const ButterflyGraph& g, const EdgeLabeling& l, QueryPair q) {
  return phi_weight(zero_xor_answer(g, l, q.s, q.t), g.params().bits);
}

/// P(T, I), the product of phi over the pairs of the meta-query.
inline double weight_P(const ButterflyGraph& g, const EdgeLabeling& l, const MetaQuery& meta) {
  double p = 1.0;
  for (const auto& q : meta.pairs) p *= phi_weight(g, l, q);
  return p;
}

/// XOR of the individual 0-XOR answers.
inline bool meta_answer(const ButterflyGraph& g, const EdgeLabeling& l, const MetaQuery& meta) {
  bool acc = false;
  for (const auto& q : meta.pairs) acc ^= zero_xor_answer(g, l, q.s, q.t);
  return acc;
}

/// 2^-kb, the least possible |P(T, I)|.
inline double beta_floor(std::size_t k, unsigned bits) { return std::ldexp(1.0, -static_cast<int>(k * bits)); }

/// True iff some edge lies on exactly one of the constituent paths.
inline bool has_singleton_edge(const ButterflyGraph& g, const std::vector<MetaQuery>& metas) {
  std::map<std::uint64_t, unsigned> count;
  for (const auto& m : metas)
    for (const auto& q : m.pairs)
      for (const auto& e : g.unique_path(q.s, q.t)) ++count[g.edge_id(e)];
  return std::any_of(count.begin(), count.end(), [](const auto& kv) { return kv.second == 1; });
}

struct MomentOptions {
  bool all_edges = false;             // enumerate unused edges too
  std::uint64_t max_labelings = std::uint64_t{1} << 22;
};

/// Exact E_I[prod_i P(T_i, I)] by enumerating labelings of the edges on the
/// constituent paths (or of every edge). Integer arithmetic throughout:
/// with phi scaled by 2^b the weights are -(2^b - 1) and 1.
inline double product_moment(const ButterflyGraph& g, const std::vector<MetaQuery>& metas, MomentOptions opt = {}) {
  if (metas.empty()) throw PreconditionError("product moment needs at least one meta-query");
  const unsigned b = g.params().bits;

  std::vector<std::uint64_t> edges;
  if (opt.all_edges) {
    for (std::uint64_t id = 0; id < g.edge_count(); ++id) edges.push_back(id);
  } else {
    std::set<std::uint64_t> used;
    for (const auto& m : metas)
      for (const auto& q : m.pairs)
        for (const auto& e : g.unique_path(q.s, q.t)) used.insert(g.edge_id(e));
    edges.assign(used.begin(), used.end());
  }
  std::map<std::uint64_t, std::size_t> slot;
  for (std::size_t j = 0; j < edges.size(); ++j) slot[edges[j]] = j;

  std::vector<std::vector<std::size_t>> paths;  // slots along each constituent path
  for (const auto& m : metas)
    for (const auto& q : m.pairs) {
      std::vector<std::size_t> p;
      for (const auto& e : g.unique_path(q.s, q.t)) p.push_back(slot.at(g.edge_id(e)));
      paths.push_back(std::move(p));
    }
  const std::size_t factors = paths.size();

  const std::uint64_t total_bits = static_cast<std::uint64_t>(b) * edges.size();
  if (total_bits >= 63 || (std::uint64_t{1} << total_bits) > opt.max_labelings)
    throw CapacityError("product moment enumeration too large");
  if (total_bits + static_cast<std::uint64_t>(b) * factors > 120) throw CapacityError("product moment exceeds exact range");
  const std::uint64_t labelings = std::uint64_t{1} << total_bits;
  const std::uint64_t mask = (std::uint64_t{1} << b) - 1;
  const __int128 heavy = -static_cast<__int128>(mask);

  __int128 sum = 0;
  std::vector<std::uint64_t> label(edges.size());
  for (std::uint64_t code = 0; code < labelings; ++code) {
    for (std::size_t j = 0; j < edges.size(); ++j) label[j] = (code >> (j * b)) & mask;
    __int128 term = 1;
    for (const auto& p : paths) {
      std::uint64_t acc = 0;
      for (auto j : p) acc ^= label[j];
      if (acc == 0) term *= heavy;
    }
    sum += term;
  }
  const long double scale = std::ldexp(1.0L, -static_cast<int>(total_bits + b * factors));
  return static_cast<double>(static_cast<long double>(sum) * scale);
}

/// Closed form of E[P(T, I)^2]: prod over pairs of E[phi^2].
inline double identical_moment_closed_form(std::size_t pairs, unsigned bits) {
  const double q = std::ldexp(1.0, -static_cast<int>(bits));
  const double per = q * (1 - q) * (1 - q) + (1 - q) * q * q;
  return std::pow(per, static_cast<double>(pairs));
}

// JSON: {"B","d","k","pairs":[[s,t],...],"layers":[[nodes at layer 0],...],"disjoint":bool}
inline nlohmann::json meta_query_to_json(const ButterflyGraph& g, const MetaQuery& meta) {
  nlohmann::json pairs = nlohmann::json::array();
  std::vector<std::vector<NodeIndex>> layers(g.layer_count());
  for (const auto& q : meta.pairs) {
    pairs.push_back({q.s, q.t});
    const auto nodes = g.path_nodes(q.s, q.t);
    for (unsigned layer = 0; layer < nodes.size(); ++layer) layers[layer].push_back(nodes[layer]);
  }
  for (auto& l : layers) std::sort(l.begin(), l.end());
  return {{"B", g.params().degree},
          {"d", g.params().depth},
          {"k", meta.k()},
          {"pairs", pairs},
          {"layers", layers},
          {"disjoint", paths_node_disjoint(g, meta.pairs)}};
}

}  // namespace xorreach
