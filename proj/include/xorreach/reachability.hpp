#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "xorreach/butterfly.hpp"
#include "xorreach/errors.hpp"
#include "xorreach/multi_butterfly.hpp"

namespace xorreach {

enum class NodeKind : std::uint8_t { kButterflyCopy = 0, kTreeS = 1, kTreeT = 2 };

/// A node of the reachability graph: either the copy u^sigma of butterfly
/// node (layer, index) in G'_graph, or a node of tree S / T at `layer`
/// (the tree depth, leaves at depth d).
struct ReachNodeId {
  NodeKind kind = NodeKind::kButterflyCopy;
  unsigned graph = 0;
  unsigned layer = 0;
  NodeIndex index = 0;
  Label sigma = 0;

  static ReachNodeId copy(unsigned graph, unsigned layer, NodeIndex index, Label sigma) {
    return {NodeKind::kButterflyCopy, graph, layer, index, sigma};
  }
  static ReachNodeId tree_s(unsigned depth, NodeIndex index) { return {NodeKind::kTreeS, 0, depth, index, 0}; }
  static ReachNodeId tree_t(unsigned depth, NodeIndex index) { return {NodeKind::kTreeT, 0, depth, index, 0}; }

  // Bit layout: tag[63:62] graph[61:56] layer[55:50] sigma[49:34] index[33:0]
  std::uint64_t pack() const {
    if (graph >= 64 || layer >= 64 || index >= (std::uint64_t{1} << 34) || sigma >= (1u << 16))
      throw CapacityError("node id field does not fit its bit-field");
    return (std::uint64_t(kind) << 62) | (std::uint64_t(graph) << 56) | (std::uint64_t(layer) << 50) |
           (std::uint64_t(sigma) << 34) | index;
  }

  static ReachNodeId unpack(std::uint64_t id) {
    const auto tag = static_cast<std::uint8_t>(id >> 62);
    if (tag > 2) throw RangeError("invalid node tag");
    return {static_cast<NodeKind>(tag), static_cast<unsigned>((id >> 56) & 63), static_cast<unsigned>((id >> 50) & 63),
            (id & ((std::uint64_t{1} << 34) - 1)), static_cast<Label>((id >> 34) & 0xffff)};
  }

  friend auto operator<=>(const ReachNodeId&, const ReachNodeId&) = default;
};

/// sum_{i=1}^d 2^b (i+1) B^i + 2 sum_{i=0}^d B^i
inline std::uint64_t node_count(unsigned degree, unsigned depth, unsigned bits) {
  ButterflyParams{degree, depth, bits}.validate();
  auto add = [](std::uint64_t a, std::uint64_t b) {
    if (a > UINT64_MAX - b) throw CapacityError("node count overflows");
    return a + b;
  };
  std::uint64_t n = 0;
  for (unsigned i = 1; i <= depth; ++i) {
    const std::uint64_t per = checked_pow(degree, i) * (i + 1);
    if (per > (std::uint64_t{1} << (62 - bits))) throw CapacityError("node count overflows");
    n = add(n, per << bits);
  }
  for (unsigned i = 0; i <= depth; ++i) n = add(n, 2 * checked_pow(degree, i));
  return n;
}

/// Bijection between ReachNodeId and the dense range [node_count).
/// Order: tree S by depth, tree T by depth, then G'_1..G'_d by
/// (layer, index, sigma).
class NodeUniverse {
 public:
  explicit NodeUniverse(MultiShape shape) : shape_(shape) {
    shape_.validate();
    std::uint64_t off = 0;
    tree_s_.resize(shape_.depth + 1);
    tree_t_.resize(shape_.depth + 1);
    for (unsigned k = 0; k <= shape_.depth; ++k) {
      tree_s_[k] = off;
      off += checked_pow(shape_.degree, k);
    }
    for (unsigned k = 0; k <= shape_.depth; ++k) {
      tree_t_[k] = off;
      off += checked_pow(shape_.degree, k);
    }
    graph_.resize(shape_.depth + 2);
    for (unsigned i = 1; i <= shape_.depth; ++i) {
      graph_[i] = off;
      off += (std::uint64_t(i + 1) * checked_pow(shape_.degree, i)) << shape_.bits;
    }
    graph_[shape_.depth + 1] = off;
    size_ = off;
  }

  const MultiShape& shape() const { return shape_; }
  std::uint64_t size() const { return size_; }

  std::uint64_t dense(const ReachNodeId& id) const {
    switch (id.kind) {
      case NodeKind::kTreeS:
      case NodeKind::kTreeT: {
        if (id.layer > shape_.depth || id.index >= checked_pow(shape_.degree, id.layer))
          throw RangeError("tree node outside its level");
        return (id.kind == NodeKind::kTreeS ? tree_s_ : tree_t_)[id.layer] + id.index;
      }
      case NodeKind::kButterflyCopy: {
        if (id.graph < 1 || id.graph > shape_.depth) throw RangeError("graph index outside [1, d]");
        const std::uint64_t width = checked_pow(shape_.degree, id.graph);
        if (id.layer > id.graph || id.index >= width || id.sigma >= (1u << shape_.bits))
          throw RangeError("butterfly copy outside G'_i");
        return graph_[id.graph] + (((id.layer * width + id.index) << shape_.bits) | id.sigma);
      }
    }
    throw RangeError("invalid node kind");
  }

  ReachNodeId node(std::uint64_t dense_id) const {
    if (dense_id >= size_) throw RangeError("dense node id out of range");
    if (dense_id < graph_[1]) {
      const bool is_t = dense_id >= tree_t_[0];
      const auto& offs = is_t ? tree_t_ : tree_s_;
      unsigned k = shape_.depth;
      while (offs[k] > dense_id) --k;
      const NodeIndex idx = dense_id - offs[k];
      return is_t ? ReachNodeId::tree_t(k, idx) : ReachNodeId::tree_s(k, idx);
    }
    unsigned i = 1;
    while (graph_[i + 1] <= dense_id) ++i;
    const std::uint64_t rel = dense_id - graph_[i];
    const Label sigma = static_cast<Label>(rel & ((1u << shape_.bits) - 1));
    const std::uint64_t pos = rel >> shape_.bits;
    const std::uint64_t width = checked_pow(shape_.degree, i);
    return ReachNodeId::copy(i, static_cast<unsigned>(pos / width), pos % width, sigma);
  }

 private:
  MultiShape shape_;
  std::vector<std::uint64_t> tree_s_, tree_t_, graph_;
  std::uint64_t size_ = 0;
};

struct ReachEdge {
  ReachNodeId from;
  ReachNodeId to;

  friend auto operator<=>(const ReachEdge&, const ReachEdge&) = default;
};

/// XOR-to-reachability gadget for one butterfly: each edge u->v labeled
/// sigma becomes the 2^b edges u^tau -> v^(tau xor sigma). Output is in
/// lexicographic (layer, from, to, tau) order.
inline std::vector<ReachEdge> reduce_one_butterfly(const ButterflyGraph& g, const EdgeLabeling& labeling) {
  check_labeling(g, labeling);
  const unsigned graph = g.depth();
  const Label copies = Label{1} << g.bits();
  std::vector<ReachEdge> out;
  out.reserve(g.edge_count() * copies);
  for (std::uint64_t id = 0; id < g.edge_count(); ++id) {
    const Edge e = g.edge_at(id);
    const Label sigma = labeling.get_by_id(id);
    for (Label tau = 0; tau < copies; ++tau)
      out.push_back({ReachNodeId::copy(graph, e.layer, e.from, tau), ReachNodeId::copy(graph, e.layer + 1, e.to, tau ^ sigma)});
  }
  return out;
}

/// Trees S (child -> parent) and T (parent -> child) with B^d leaves, plus
/// the connectors S(i, j) -> (G'_i source j)^0 and (G'_i sink j)^0 -> T(i, j).
inline std::vector<ReachEdge> skeleton_edges(const MultiShape& shape) {
  std::vector<ReachEdge> out;
  for (unsigned k = 1; k <= shape.depth; ++k) {
    const std::uint64_t level = checked_pow(shape.degree, k);
    for (NodeIndex j = 0; j < level; ++j) out.push_back({ReachNodeId::tree_s(k, j), ReachNodeId::tree_s(k - 1, j / shape.degree)});
  }
  for (unsigned k = 1; k <= shape.depth; ++k) {
    const std::uint64_t level = checked_pow(shape.degree, k);
    for (NodeIndex j = 0; j < level; ++j) out.push_back({ReachNodeId::tree_t(k - 1, j / shape.degree), ReachNodeId::tree_t(k, j)});
  }
  for (unsigned i = 1; i <= shape.depth; ++i) {
    const std::uint64_t width = checked_pow(shape.degree, i);
    for (NodeIndex j = 0; j < width; ++j) {
      out.push_back({ReachNodeId::tree_s(i, j), ReachNodeId::copy(i, 0, j, 0)});
      out.push_back({ReachNodeId::copy(i, i, j, 0), ReachNodeId::tree_t(i, j)});
    }
  }
  return out;
}

struct Insertion {
  unsigned epoch = 0;
  std::uint64_t from = 0;  // dense ids
  std::uint64_t to = 0;
};

/// The dynamic reachability graph produced by the reduction, built as an
/// epoch-tagged insertion stream.
class ReachabilityInstance {
 public:
  /// Fresh instance with the trees and connectors inserted, tagged epoch d.
  static ReachabilityInstance build_skeleton(MultiShape shape) {
    ReachabilityInstance inst(shape);
    for (const auto& e : skeleton_edges(shape)) inst.insert(shape.depth, e);
    return inst;
  }

  const MultiShape& shape() const { return universe_.shape(); }
  const NodeUniverse& universe() const { return universe_; }
  const std::vector<Insertion>& insertion_log() const { return log_; }
  std::uint64_t edge_count() const { return log_.size(); }
  unsigned next_epoch() const { return next_; }
  bool complete() const { return next_ == 0; }

  /// Inserts the gadget edges of G'_i; returns the appended insertions.
  std::vector<Insertion> epoch_edge_insertions(unsigned epoch, const EdgeLabeling& labeling) {
    if (epoch != next_) throw StateError("epochs must be inserted in order d, d-1, ..., 1");
    const ButterflyGraph g(shape().graph_params(epoch));
    const std::size_t start = log_.size();
    for (const auto& e : reduce_one_butterfly(g, labeling)) insert(epoch, e);
    --next_;
    return {log_.begin() + static_cast<std::ptrdiff_t>(start), log_.end()};
  }

  bool reachable(std::uint64_t from, std::uint64_t to) const {
    if (from >= adj_.size() || to >= adj_.size()) throw RangeError("node id out of range");
    if (from == to) return true;
    std::vector<std::uint64_t> stack{from};
    std::vector<bool> seen(adj_.size(), false);
    seen[from] = true;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (auto v : adj_[u]) {
        if (v == to) return true;
        if (!seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
    return false;
  }

  /// Does leaf s of S reach leaf t of T?
  bool reachability_answer(NodeIndex s, NodeIndex t) const {
    if (!complete()) throw StateError("not every epoch has been inserted");
    const unsigned d = shape().depth;
    return reachable(universe_.dense(ReachNodeId::tree_s(d, s)), universe_.dense(ReachNodeId::tree_t(d, t)));
  }

  /// Every node reachable from `from`, as dense ids.
  std::vector<std::uint64_t> reachable_set(std::uint64_t from) const {
    std::vector<bool> seen(adj_.size(), false);
    std::vector<std::uint64_t> stack{from}, out;
    seen[from] = true;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      out.push_back(u);
      for (auto v : adj_[u])
        if (!seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  const std::vector<std::vector<std::uint64_t>>& adjacency() const { return adj_; }

 private:
  explicit ReachabilityInstance(MultiShape shape) : universe_(shape), next_(shape.depth) {
    adj_.resize(universe_.size());
  }

  void insert(unsigned epoch, const ReachEdge& e) {
    const auto u = universe_.dense(e.from);
    const auto v = universe_.dense(e.to);
    adj_[u].push_back(v);
    log_.push_back({epoch, u, v});
  }

  NodeUniverse universe_;
  unsigned next_;
  std::vector<std::vector<std::uint64_t>> adj_;
  std::vector<Insertion> log_;
};

/// Builds the full reduction of a completed multi-butterfly instance.
inline ReachabilityInstance reduce_instance(const MultiButterflyInstance& inst) {
  auto reach = ReachabilityInstance::build_skeleton(inst.shape());
  for (unsigned i = inst.shape().depth; i >= 1; --i) reach.epoch_edge_insertions(i, inst.labeling(i));
  return reach;
}

struct WorkloadQuery {
  NodeIndex s = 0;
  NodeIndex t = 0;
  bool expected = false;
};

struct Workload {
  MultiShape shape;
  std::uint64_t nodes = 0;
  std::vector<Insertion> insertions;
  std::vector<WorkloadQuery> queries;
};

// Header "B,d,b,n"; insertions "epoch,from_id,to_id" over dense ids;
// queries "q,s,t,expected" over leaf indices in [B^d].
inline void write_workload(std::ostream& os, const Workload& w) {
  os << w.shape.degree << ',' << w.shape.depth << ',' << w.shape.bits << ',' << w.nodes << '\n';
  for (const auto& ins : w.insertions) os << ins.epoch << ',' << ins.from << ',' << ins.to << '\n';
  for (const auto& q : w.queries) os << "q," << q.s << ',' << q.t << ',' << (q.expected ? 1 : 0) << '\n';
}

inline Workload read_workload(std::istream& is) {
  auto split = [](const std::string& line) {
    std::vector<std::string> parts;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(item);
    return parts;
  };
  auto num = [](const std::string& s) -> std::uint64_t {
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size()) throw PreconditionError("malformed workload number: " + s);
    return v;
  };
  Workload w;
  std::string line;
  if (!std::getline(is, line)) throw PreconditionError("empty workload");
  auto head = split(line);
  if (head.size() != 4) throw PreconditionError("workload header must be B,d,b,n");
  w.shape = {static_cast<unsigned>(num(head[0])), static_cast<unsigned>(num(head[1])), static_cast<unsigned>(num(head[2]))};
  w.nodes = num(head[3]);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto parts = split(line);
    if (parts.size() == 4 && parts[0] == "q") {
      w.queries.push_back({num(parts[1]), num(parts[2]), num(parts[3]) != 0});
    } else if (parts.size() == 3) {
      if (!w.queries.empty()) throw PreconditionError("insertion after query lines");
      w.insertions.push_back({static_cast<unsigned>(num(parts[0])), num(parts[1]), num(parts[2])});
    } else {
      throw PreconditionError("malformed workload line: " + line);
    }
  }
  return w;
}

}  // namespace xorreach
