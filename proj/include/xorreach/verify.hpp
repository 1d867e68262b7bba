#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xorreach/butterfly.hpp"
#include "xorreach/errors.hpp"
#include "xorreach/multi_butterfly.hpp"
#include "xorreach/reachability.hpp"
#include "xorreach/rng.hpp"

namespace xorreach {

struct ReductionMismatch {
  std::uint64_t instance = 0;  // labeling code (exhaustive) or trial index (sampled)
  NodeIndex s = 0;
  NodeIndex t = 0;
  bool reachable = false;
  bool multi = false;
};

struct ReductionCheck {
  std::uint64_t instances = 0;
  std::uint64_t queries_per_instance = 0;
  std::uint64_t mismatches = 0;
  std::optional<ReductionMismatch> first;
};

/// Compares reachability_answer with multi_answer on every query.
inline void check_instance(const MultiButterflyInstance& inst, std::uint64_t tag, ReductionCheck& out) {
  const auto reach = reduce_instance(inst);
  const std::uint64_t width = inst.shape().query_width();
  out.queries_per_instance = width * width;
  ++out.instances;
  for (NodeIndex s = 0; s < width; ++s)
    for (NodeIndex t = 0; t < width; ++t) {
      const bool r = reach.reachability_answer(s, t);
      const bool m = inst.multi_answer(s, t);
      if (r == m) continue;
      ++out.mismatches;
      if (!out.first) out.first = ReductionMismatch{tag, s, t, r, m};
    }
}

/// Labels of all epochs packed into one code: epoch d occupies the lowest
/// b * m_d bits, then epoch d-1, and so on.
inline MultiButterflyInstance instance_from_code(MultiShape shape, std::uint64_t code) {
  MultiButterflyInstance inst(shape);
  for (unsigned i = shape.depth; i >= 1; --i) {
    const std::uint64_t bits = shape.bits * shape.epoch_edges(i);
    const std::uint64_t mask = bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
    inst.load_epoch(i, EdgeLabeling::from_code(shape.graph_params(i), code & mask));
    code = bits >= 64 ? 0 : code >> bits;
  }
  return inst;
}

inline std::uint64_t exhaustive_instance_count(MultiShape shape, unsigned max_log2 = 22) {
  shape.validate();
  const std::uint64_t bits = shape.bits * shape.total_edges();
  if (bits > max_log2) throw CapacityError("exhaustive verification over more than 2^" + std::to_string(max_log2) + " labelings");
  return std::uint64_t{1} << bits;
}

inline ReductionCheck verify_reduction_exhaustive(MultiShape shape, unsigned max_log2 = 22) {
  const std::uint64_t count = exhaustive_instance_count(shape, max_log2);
  ReductionCheck out;
  for (std::uint64_t code = 0; code < count; ++code) check_instance(instance_from_code(shape, code), code, out);
  return out;
}

/// Trial k uses the labels drawn from substream(seed, "verify", k).
inline ReductionCheck verify_reduction_sampled(MultiShape shape, std::uint64_t trials, std::uint64_t seed) {
  ReductionCheck out;
  for (std::uint64_t k = 0; k < trials; ++k) {
    Rng rng = substream(seed, "verify", k);
    check_instance(MultiButterflyInstance::uniform(shape, rng), k, out);
  }
  return out;
}

}  // namespace xorreach
