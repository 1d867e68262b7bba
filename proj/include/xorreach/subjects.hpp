#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>

#include "xorreach/butterfly.hpp"
#include "xorreach/cell_probe.hpp"
#include "xorreach/multi_butterfly.hpp"
#include "xorreach/reach_ds.hpp"
#include "xorreach/reachability.hpp"

namespace xorreach {

/// A dynamic data structure for 0-XOR in Multiple Butterflies, written
/// against CellMemory. Subjects are stateless strategies: everything that
/// affects an answer lives in the memory they are handed.
class XorSubject {
 public:
  virtual ~XorSubject() = default;

  virtual std::string name() const = 0;
  virtual const MultiShape& shape() const = 0;

  /// Processes the updates of one epoch (labels for every edge of G_i).
  virtual void apply_epoch(CellMemory& mem, unsigned epoch, const EdgeLabeling& labeling) const = 0;

  /// phi(s, t) for (s, t) in [B^d] x [B^d].
  virtual bool query(CellMemory& mem, NodeIndex s, NodeIndex t) const = 0;

  /// Worst-case probes spent processing the updates of `epoch`.
  virtual std::uint64_t epoch_probe_bound(unsigned epoch) const = 0;
};

/// Stores every label in its own cell and answers a query by reading the
/// d projected paths. Every epoch-i cell is written in epoch i only.
class DirectLabelSubject final : public XorSubject {
 public:
  explicit DirectLabelSubject(MultiShape shape, bool early_exit = false) : shape_(shape), early_exit_(early_exit) {
    shape_.validate();
    offsets_.assign(shape_.depth + 2, 0);
    for (unsigned i = 1; i <= shape_.depth; ++i) offsets_[i + 1] = offsets_[i] + shape_.epoch_edges(i);
    for (unsigned i = 0; i <= shape_.depth; ++i) graphs_.emplace_back(shape_.graph_params(std::max(1u, i)));
  }

  std::string name() const override { return "direct"; }
  const MultiShape& shape() const override { return shape_; }

  void apply_epoch(CellMemory& mem, unsigned epoch, const EdgeLabeling& labeling) const override {
    check_epoch(epoch);
    if (!(labeling.params() == shape_.graph_params(epoch))) throw PreconditionError("labeling shape does not match G_i");
    for (std::uint64_t id = 0; id < labeling.size(); ++id) mem.write(offsets_[epoch] + id, labeling.get_by_id(id));
  }

  bool query(CellMemory& mem, NodeIndex s, NodeIndex t) const override {
    bool answer = false;
    for (unsigned i = shape_.depth; i >= 1; --i) {
      const auto [si, ti] = project_query(shape_.depth, shape_.degree, i, s, t);
      Word acc = 0;
      for (const auto& e : graphs_[i].unique_path(si, ti)) acc ^= mem.read(cell(i, e));
      if (acc == 0) {
        answer = true;
        if (early_exit_) break;
      }
    }
    return answer;
  }

  std::uint64_t epoch_probe_bound(unsigned epoch) const override { return shape_.epoch_edges(check_epoch(epoch)); }

  Address cell(unsigned epoch, const Edge& e) const { return offsets_[epoch] + graphs_[epoch].edge_id(e); }

 private:
  unsigned check_epoch(unsigned epoch) const {
    if (epoch < 1 || epoch > shape_.depth) throw RangeError("epoch outside [1, d]");
    return epoch;
  }

  MultiShape shape_;
  bool early_exit_;
  std::vector<std::uint64_t> offsets_;
  std::vector<ButterflyGraph> graphs_;
};

/// Stores labels like DirectLabelSubject but answers every query with a
/// constant without probing. Not a correct structure; used to exercise
/// the chronogram bookkeeping at t_q = 0.
class ZeroProbeSubject final : public XorSubject {
 public:
  explicit ZeroProbeSubject(MultiShape shape) : direct_(shape) {}

  std::string name() const override { return "zero-probe"; }
  const MultiShape& shape() const override { return direct_.shape(); }
  void apply_epoch(CellMemory& mem, unsigned epoch, const EdgeLabeling& labeling) const override {
    direct_.apply_epoch(mem, epoch, labeling);
  }
  bool query(CellMemory&, NodeIndex, NodeIndex) const override { return false; }
  std::uint64_t epoch_probe_bound(unsigned epoch) const override { return direct_.epoch_probe_bound(epoch); }

 private:
  DirectLabelSubject direct_;
};

/// 0-XOR in Multiple Butterflies solved through the reduction to
/// incremental reachability, on top of a cell-resident reachability layout.
template <class Layout = AdjacencyListLayout>
class ReductionSubject final : public XorSubject {
 public:
  ReductionSubject(MultiShape shape, Layout layout) : shape_(shape), universe_(shape), layout_(std::move(layout)) {
    if (layout_.node_capacity() < universe_.size()) throw CapacityError("layout smaller than the node universe");
    skeleton_ = skeleton_edges(shape_).size();
  }

  std::string name() const override { return std::string("reduction-") + Layout::kName; }
  const MultiShape& shape() const override { return shape_; }
  const NodeUniverse& universe() const { return universe_; }
  const Layout& layout() const { return layout_; }

  void apply_epoch(CellMemory& mem, unsigned epoch, const EdgeLabeling& labeling) const override {
    if (epoch == shape_.depth)
      for (const auto& e : skeleton_edges(shape_)) layout_.insert_edge(mem, universe_.dense(e.from), universe_.dense(e.to));
    const ButterflyGraph g(shape_.graph_params(epoch));
    for (const auto& e : reduce_one_butterfly(g, labeling))
      layout_.insert_edge(mem, universe_.dense(e.from), universe_.dense(e.to));
  }

  bool query(CellMemory& mem, NodeIndex s, NodeIndex t) const override {
    const unsigned d = shape_.depth;
    return layout_.query_reach(mem, universe_.dense(ReachNodeId::tree_s(d, s)), universe_.dense(ReachNodeId::tree_t(d, t)));
  }

  std::uint64_t insertions(unsigned epoch) const {
    return (shape_.epoch_edges(epoch) << shape_.bits) + (epoch == shape_.depth ? skeleton_ : 0);
  }

  std::uint64_t epoch_probe_bound(unsigned epoch) const override { return layout_.update_bound() * insertions(epoch); }

 private:
  MultiShape shape_;
  NodeUniverse universe_;
  Layout layout_;
  std::uint64_t skeleton_ = 0;
};

/// Reduction subject over adjacency lists sized for the node universe.
inline std::unique_ptr<XorSubject> make_reduction_subject(MultiShape shape) {
  const NodeUniverse u(shape);
  return std::make_unique<ReductionSubject<AdjacencyListLayout>>(
      shape, AdjacencyListLayout(u.size(), std::max<std::uint64_t>(shape.degree, 2)));
}

inline std::unique_ptr<XorSubject> make_subject(const std::string& name, MultiShape shape) {
  if (name == "direct") return std::make_unique<DirectLabelSubject>(shape);
  if (name == "zero-probe") return std::make_unique<ZeroProbeSubject>(shape);
  if (name == "reduction" || name == "reduction-adjacency") return make_reduction_subject(shape);
  if (name == "reduction-closure") {
    const NodeUniverse u(shape);
    return std::make_unique<ReductionSubject<ClosureBitmapLayout>>(shape, ClosureBitmapLayout(u.size()));
  }
  throw PreconditionError("unknown subject: " + name);
}

}  // namespace xorreach
