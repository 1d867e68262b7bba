#include <gtest/gtest.h>

#include "oracles.hpp"
#include "xorreach/butterfly.hpp"

using namespace xorreach;

namespace {

std::map<oracle::EdgeKey, std::uint32_t> label_map(const ButterflyGraph& g, const EdgeLabeling& l) {
  std::map<oracle::EdgeKey, std::uint32_t> out;
  for (std::uint64_t id = 0; id < g.edge_count(); ++id) {
    const Edge e = g.edge_at(id);
    out[{e.layer, e.from, e.to}] = l.get_by_id(id);
  }
  return out;
}

// Labels along the (2, 1) path of the 8-source example: 00, 10, 11.
EdgeLabeling figure_one_labeling() {
  const ButterflyParams p{2, 3, 2};
  const ButterflyGraph g(p);
  Rng rng(2024);
  auto l = EdgeLabeling::uniform(p, rng);
  l.set(g, {0, 2, 3}, 0b00);
  l.set(g, {1, 3, 1}, 0b10);
  l.set(g, {2, 1, 1}, 0b11);
  return l;
}

}  // namespace

TEST(ButterflyParams, Validation) {
  EXPECT_THROW((ButterflyParams{1, 2, 1}.validate()), RangeError);
  EXPECT_THROW((ButterflyParams{2, 0, 1}.validate()), RangeError);
  EXPECT_THROW((ButterflyParams{2, 2, 0}.validate()), RangeError);
  EXPECT_THROW((ButterflyParams{2, 2, 17}.validate()), RangeError);
  EXPECT_THROW((ButterflyParams{2, 62, 1}.validate()), CapacityError);
  EXPECT_THROW(ButterflyGraph(ButterflyParams{1 << 20, 4, 1}), CapacityError);
}

TEST(BuildButterfly, EightNodeLayersMatchEnumeration) {
  const ButterflyGraph g({2, 3, 1});
  EXPECT_EQ(g.layer_count(), 4u);
  EXPECT_EQ(g.width(), 8u);
  EXPECT_EQ(g.edge_count(), 48u);
  const auto edges = oracle::butterfly_edges(2, 3);
  EXPECT_EQ(edges.size(), 48u);
  for (unsigned layer = 0; layer < 4; ++layer)
    for (NodeIndex j = 0; j < 8; ++j)
      for (NodeIndex k = 0; k < 8; ++k) EXPECT_EQ(g.has_edge({layer, j, k}), edges.count({layer, j, k}) == 1);
}

TEST(BuildButterfly, DepthOneIsCompleteBipartite) {
  const ButterflyGraph g({2, 1, 1});
  EXPECT_EQ(g.layer_count(), 2u);
  EXPECT_EQ(g.width(), 2u);
  EXPECT_EQ(g.edge_count(), 4u);
  for (NodeIndex j = 0; j < 2; ++j)
    for (NodeIndex k = 0; k < 2; ++k) EXPECT_TRUE(g.has_edge({0, j, k}));
}

TEST(BuildButterfly, OutDegreeIsB) {
  const ButterflyGraph g({3, 2, 1});
  for (unsigned layer = 0; layer < 2; ++layer)
    for (NodeIndex j = 0; j < g.width(); ++j) EXPECT_EQ(g.out_edges(layer, j).size(), 3u);
  EXPECT_TRUE(g.out_edges(2, 0).empty());
}

TEST(BuildButterfly, EdgeIdsAreADenseBijection) {
  for (unsigned B : {2u, 3u})
    for (unsigned d : {1u, 2u, 3u}) {
      const ButterflyGraph g({B, d, 1});
      std::set<oracle::EdgeKey> seen;
      for (std::uint64_t id = 0; id < g.edge_count(); ++id) {
        const Edge e = g.edge_at(id);
        EXPECT_EQ(g.edge_id(e), id);
        seen.insert({e.layer, e.from, e.to});
      }
      EXPECT_EQ(seen, oracle::butterfly_edges(B, d));
      EXPECT_EQ(g.edge_count(), d * oracle::power(B, d + 1));
    }
  const ButterflyGraph g({2, 2, 1});
  EXPECT_THROW(g.edge_id({0, 0, 3}), RangeError);
  EXPECT_THROW(g.edge_at(g.edge_count()), RangeError);
}

TEST(UniquePath, FigureOneNodeSequence) {
  const ButterflyGraph g({2, 3, 1});
  EXPECT_EQ(g.path_nodes(2, 1), (std::vector<NodeIndex>{2, 3, 1, 1}));
  const auto paths = oracle::all_paths(2, 3, 2, 1);
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_EQ(paths[0], (std::vector<std::uint64_t>{2, 3, 1, 1}));
}

TEST(UniquePath, SourceEqualsSinkStaysPut) {
  const ButterflyGraph g({3, 3, 1});
  for (NodeIndex s = 0; s < g.width(); ++s)
    for (auto x : g.path_nodes(s, s)) EXPECT_EQ(x, s);
}

TEST(UniquePath, ExhaustiveDfsFindsExactlyOnePath) {
  for (unsigned B : {2u, 3u})
    for (unsigned d : {1u, 2u, 3u}) {
      const ButterflyGraph g({B, d, 1});
      for (NodeIndex s = 0; s < g.width(); ++s)
        for (NodeIndex t = 0; t < g.width(); ++t) {
          const auto paths = oracle::all_paths(B, d, s, t);
          ASSERT_EQ(paths.size(), 1u) << "B=" << B << " d=" << d << " s=" << s << " t=" << t;
          EXPECT_EQ(paths[0].size(), d + 1u);
          const auto nodes = g.path_nodes(s, t);
          EXPECT_EQ(std::vector<std::uint64_t>(nodes.begin(), nodes.end()), paths[0]);
          const auto edges = g.unique_path(s, t);
          ASSERT_EQ(edges.size(), d);
          for (unsigned i = 0; i < d; ++i) EXPECT_TRUE(g.has_edge(edges[i]));
        }
    }
}

TEST(UniquePath, LayerDigitsComeFromSinkThenSource) {
  const ButterflyGraph g({3, 3, 1});
  for (NodeIndex s = 0; s < g.width(); ++s)
    for (NodeIndex t = 0; t < g.width(); ++t) {
      const auto nodes = g.path_nodes(s, t);
      for (unsigned layer = 0; layer <= 3; ++layer) {
        const auto dx = oracle::digits(nodes[layer], 3, 3), ds = oracle::digits(s, 3, 3), dt = oracle::digits(t, 3, 3);
        for (unsigned c = 0; c < 3; ++c) EXPECT_EQ(dx[c], c < layer ? dt[c] : ds[c]);
      }
    }
}

TEST(UniquePath, OutOfRangeIndexIsRangeError) {
  const ButterflyGraph g({2, 3, 1});
  EXPECT_THROW(g.unique_path(8, 0), RangeError);
  EXPECT_THROW(g.unique_path(0, 8), RangeError);
}

TEST(UniquePath, LayerMarginalIsUniform) {
  const ButterflyGraph g({2, 3, 1});
  for (unsigned layer = 0; layer <= 3; ++layer) {
    std::map<NodeIndex, int> count;
    for (NodeIndex s = 0; s < 8; ++s)
      for (NodeIndex t = 0; t < 8; ++t) ++count[g.path_nodes(s, t)[layer]];
    ASSERT_EQ(count.size(), 8u);
    for (const auto& [node, c] : count) EXPECT_EQ(c, 8);
  }
}

TEST(PathXor, FigureOneInstance) {
  const ButterflyGraph g({2, 3, 2});
  const auto l = figure_one_labeling();
  EXPECT_EQ(path_xor(g, l, 2, 1), 0b01u);
  EXPECT_FALSE(zero_xor_answer(g, l, 2, 1));
  EXPECT_EQ(oracle::path_xor(2, 3, label_map(g, l), 2, 1), 0b01u);
}

TEST(PathXor, AllZeroLabeling) {
  const ButterflyGraph g({3, 2, 3});
  const auto l = EdgeLabeling::zeros(g.params());
  for (NodeIndex s = 0; s < g.width(); ++s)
    for (NodeIndex t = 0; t < g.width(); ++t) {
      EXPECT_EQ(path_xor(g, l, s, t), 0u);
      EXPECT_TRUE(zero_xor_answer(g, l, s, t));
    }
}

TEST(PathXor, DepthOneEqualsSingleLabel) {
  const ButterflyGraph g({3, 1, 4});
  Rng rng(8);
  const auto l = EdgeLabeling::uniform(g.params(), rng);
  for (NodeIndex s = 0; s < 3; ++s)
    for (NodeIndex t = 0; t < 3; ++t) EXPECT_EQ(path_xor(g, l, s, t), l.get(g, {0, s, t}));
}

TEST(PathXor, MatchesOracleOnRandomLabelings) {
  for (unsigned B : {2u, 3u}) {
    const ButterflyGraph g({B, 3, 3});
    Rng rng(B);
    for (int trial = 0; trial < 5; ++trial) {
      const auto l = EdgeLabeling::uniform(g.params(), rng);
      const auto labels = label_map(g, l);
      for (NodeIndex s = 0; s < g.width(); ++s)
        for (NodeIndex t = 0; t < g.width(); ++t) EXPECT_EQ(path_xor(g, l, s, t), oracle::path_xor(B, 3, labels, s, t));
    }
  }
}

TEST(PathXor, ForeignLabelingRejected) {
  const ButterflyGraph g({2, 2, 1});
  const auto l = EdgeLabeling::zeros({2, 3, 1});
  EXPECT_THROW(path_xor(g, l, 0, 0), PreconditionError);
}

TEST(ZeroXor, ProbabilityIsTwoToMinusBByEnumeration) {
  // b = 1: every labeling of all 16 edges.
  {
    const ButterflyParams p{2, 2, 1};
    const ButterflyGraph g(p);
    for (const QueryPair q : {QueryPair{0, 0}, QueryPair{1, 2}, QueryPair{3, 1}}) {
      std::uint64_t hits = 0;
      const std::uint64_t total = std::uint64_t{1} << g.edge_count();
      for (std::uint64_t code = 0; code < total; ++code) hits += zero_xor_answer(g, EdgeLabeling::from_code(p, code), q.s, q.t);
      EXPECT_EQ(hits * 2, total);
    }
  }
  // b = 2: every labeling of the path edges; off-path labels cannot matter.
  {
    const ButterflyParams p{2, 2, 2};
    const ButterflyGraph g(p);
    Rng rng(4);
    const auto base = EdgeLabeling::uniform(p, rng);
    const auto path = g.unique_path(1, 2);
    std::uint64_t hits = 0;
    for (std::uint32_t code = 0; code < 16; ++code) {
      auto l = base;
      l.set(g, path[0], code & 3);
      l.set(g, path[1], code >> 2);
      hits += zero_xor_answer(g, l, 1, 2);
    }
    EXPECT_EQ(hits, 4u);
  }
}

TEST(EdgeLabeling, FromEntriesRequiresEveryEdgeOnce) {
  const ButterflyParams p{2, 1, 2};
  std::vector<EdgeLabeling::Entry> entries{{{0, 0, 0}, 1}, {{0, 0, 1}, 2}, {{0, 1, 0}, 3}};
  EXPECT_THROW(EdgeLabeling::from_entries(p, entries), IncompleteLabelingError);
  entries.push_back({{0, 0, 0}, 1});
  EXPECT_THROW(EdgeLabeling::from_entries(p, entries), PreconditionError);
  entries.back() = {{0, 1, 1}, 0};
  const auto l = EdgeLabeling::from_entries(p, entries);
  const ButterflyGraph g(p);
  EXPECT_EQ(l.get(g, {0, 1, 0}), 3u);
  entries.back() = {{0, 1, 1}, 4};
  EXPECT_THROW(EdgeLabeling::from_entries(p, entries), RangeError);
}

TEST(EdgeLabeling, FromCodeEnumeratesDistinctLabelings) {
  const ButterflyParams p{2, 1, 2};
  std::set<std::vector<Label>> seen;
  for (std::uint64_t code = 0; code < 256; ++code) seen.insert(EdgeLabeling::from_code(p, code).raw());
  EXPECT_EQ(seen.size(), 256u);
}

TEST(EdgeLabeling, JsonRoundTrip) {
  const ButterflyParams p{3, 2, 5};
  Rng rng(1);
  const auto l = EdgeLabeling::uniform(p, rng);
  const auto j = labeling_to_json(l);
  EXPECT_EQ(j.at("labels").size(), ButterflyGraph(p).edge_count());
  EXPECT_EQ(labeling_from_json(j), l);
  auto broken = j;
  broken["labels"].erase(broken["labels"].begin());
  EXPECT_THROW(labeling_from_json(broken), IncompleteLabelingError);
}
