#pragma once

// The worked examples on 8 sources with depth 3 used by several suites.

#include "xorreach/multi_butterfly.hpp"
#include "xorreach/rng.hpp"

namespace fixtures {

using namespace xorreach;

/// Forces the XOR of the projected (s_i, t_i) path of G_i to `target` by
/// rewriting its first edge.
inline void force_path_xor(const MultiShape& shape, EdgeLabeling& l, unsigned epoch, NodeIndex s, NodeIndex t, Label target) {
  const ButterflyGraph g(shape.graph_params(epoch));
  const auto [si, ti] = project_query(shape.depth, shape.degree, epoch, s, t);
  const auto path = g.unique_path(si, ti);
  Label rest = 0;
  for (std::size_t k = 1; k < path.size(); ++k) rest ^= l.get(g, path[k]);
  l.set(g, path[0], rest ^ target);
}

/// Query (2, 4) on B = 2, d = 3 where only G_2 answers 1, its path (1, 2)
/// carrying labels 01 and 01 when b = 2.
inline MultiButterflyInstance figure_two_instance(unsigned bits, std::uint64_t seed = 7) {
  const MultiShape shape{2, 3, bits};
  Rng rng(seed);
  MultiButterflyInstance inst(shape);
  for (unsigned i = 3; i >= 1; --i) {
    auto l = EdgeLabeling::uniform(shape.graph_params(i), rng);
    if (i == 2) {
      const ButterflyGraph g(shape.graph_params(2));
      const auto path = g.unique_path(1, 2);
      const Label x = bits >= 2 ? 0b01 : 1;
      l.set(g, path[0], x);
      l.set(g, path[1], x);
    } else {
      force_path_xor(shape, l, i, 2, 4, 1);
    }
    inst.load_epoch(i, std::move(l));
  }
  return inst;
}

}  // namespace fixtures
