#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xorreach/butterfly.hpp"
#include "xorreach/errors.hpp"
#include "xorreach/rng.hpp"

namespace xorreach {

inline constexpr std::uint64_t kMaxMultiEdges = std::uint64_t{1} << 20;

/// Shape shared by all graphs of a 0-XOR in Multiple Butterflies instance:
/// degree B, maximum depth d, label width b.
struct MultiShape {
  unsigned degree = 2;
  unsigned depth = 1;
  unsigned bits = 1;

  ButterflyParams graph_params(unsigned epoch) const { return {degree, epoch, bits}; }

  /// Edges of G_i, i * B^(i+1).
  std::uint64_t epoch_edges(unsigned epoch) const { return epoch * checked_pow(degree, epoch + 1); }

  std::uint64_t total_edges() const {
    std::uint64_t total = 0;
    for (unsigned i = 1; i <= depth; ++i) total += epoch_edges(i);
    return total;
  }

  std::uint64_t query_width() const { return checked_pow(degree, depth); }

  void validate() const {
    ButterflyParams{degree, depth, bits}.validate();
    if (total_edges() > kMaxMultiEdges) throw CapacityError("multi-butterfly instance exceeds 2^20 edges");
  }

  friend bool operator==(const MultiShape&, const MultiShape&) = default;
};

/// (floor(s / B^(d-i)), floor(t / B^(d-i))): the pair a query induces on G_i.
inline std::pair<NodeIndex, NodeIndex> project_query(unsigned depth, unsigned degree, unsigned epoch, NodeIndex s,
                                                     NodeIndex t) {
  if (epoch < 1 || epoch > depth) throw RangeError("epoch outside [1, d]");
  const std::uint64_t width = checked_pow(degree, depth);
  if (s >= width || t >= width) throw RangeError("query outside [B^d] x [B^d]");
  const std::uint64_t div = checked_pow(degree, depth - epoch);
  return {s / div, t / div};
}

/// Graphs G_d..G_1 with labelings loaded epoch by epoch, d first.
class MultiButterflyInstance {
 public:
  explicit MultiButterflyInstance(MultiShape shape) : shape_(shape) {
    shape_.validate();
    for (unsigned i = 0; i <= shape_.depth; ++i) graphs_.emplace_back(shape_.graph_params(i == 0 ? 1 : i));
    labelings_.resize(shape_.depth + 1);
  }

  const MultiShape& shape() const { return shape_; }
  const ButterflyGraph& graph(unsigned epoch) const { return graphs_.at(check_epoch(epoch)); }

  /// The next epoch expected by load_epoch, or 0 once every epoch is loaded.
  unsigned next_epoch() const { return next_; }
  bool complete() const { return next_ == 0; }
  bool labeled(unsigned epoch) const { return labelings_.at(check_epoch(epoch)).has_value(); }

  void load_epoch(unsigned epoch, EdgeLabeling labeling) {
    check_epoch(epoch);
    if (epoch != next_) throw StateError("epochs must be loaded in order d, d-1, ..., 1");
    if (!(labeling.params() == shape_.graph_params(epoch)))
      throw PreconditionError("labeling shape does not match G_i");
    labelings_[epoch] = std::move(labeling);
    --next_;
  }

  const EdgeLabeling& labeling(unsigned epoch) const {
    const auto& l = labelings_.at(check_epoch(epoch));
    if (!l) throw StateError("epoch not labeled yet");
    return *l;
  }

  /// phi_i(s, t)
  bool epoch_answer(unsigned epoch, NodeIndex s, NodeIndex t) const {
    const auto [si, ti] = project_query(shape_.depth, shape_.degree, epoch, s, t);
    return zero_xor_answer(graph(epoch), labeling(epoch), si, ti);
  }

  /// phi(s, t) = 1 - prod_j (1 - phi_j(s, t)).
  bool multi_answer(NodeIndex s, NodeIndex t) const {
    if (!complete()) throw StateError("instance has unlabeled epochs");
    for (unsigned i = shape_.depth; i >= 1; --i)
      if (epoch_answer(i, s, t)) return true;
    return false;
  }

  static MultiButterflyInstance uniform(MultiShape shape, Rng& rng) {
    MultiButterflyInstance inst(shape);
    for (unsigned i = shape.depth; i >= 1; --i) inst.load_epoch(i, EdgeLabeling::uniform(shape.graph_params(i), rng));
    return inst;
  }

 private:
  unsigned check_epoch(unsigned epoch) const {
    if (epoch < 1 || epoch > shape_.depth) throw RangeError("epoch outside [1, d]");
    return epoch;
  }

  MultiShape shape_;
  std::vector<ButterflyGraph> graphs_;
  std::vector<std::optional<EdgeLabeling>> labelings_;
  unsigned next_ = shape_.depth;
};

// JSON: {"B":..,"d":..,"b":..,"epochs":[labeling_d, ..., labeling_1]}
inline nlohmann::json multi_instance_to_json(const MultiButterflyInstance& inst) {
  nlohmann::json epochs = nlohmann::json::array();
  for (unsigned i = inst.shape().depth; i >= 1; --i) epochs.push_back(labeling_to_json(inst.labeling(i)));
  return {{"B", inst.shape().degree}, {"d", inst.shape().depth}, {"b", inst.shape().bits}, {"epochs", epochs}};
}

inline MultiButterflyInstance multi_instance_from_json(const nlohmann::json& j) {
  MultiShape shape{j.at("B").get<unsigned>(), j.at("d").get<unsigned>(), j.at("b").get<unsigned>()};
  MultiButterflyInstance inst(shape);
  const auto& epochs = j.at("epochs");
  if (epochs.size() != shape.depth) throw PreconditionError("expected one labeling per epoch");
  unsigned epoch = shape.depth;
  for (const auto& lj : epochs) inst.load_epoch(epoch--, labeling_from_json(lj));
  return inst;
}

}  // namespace xorreach
