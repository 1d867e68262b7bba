// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Tolerances are fixed here; see kSigmas and kMomentTol.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "xorreach/advantage.hpp"
#include "xorreach/chronogram.hpp"
#include "xorreach/meta_queries.hpp"
#include "xorreach/peak.hpp"
#include "xorreach/protocol.hpp"
#include "xorreach/reachability.hpp"
#include "xorreach/subjects.hpp"
#include "xorreach/verify.hpp"

using namespace xorreach;

namespace {

constexpr double kSigmas = 3.0;
constexpr double kMomentTol = 1e-12;
constexpr double kExactTol = 1e-12;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "FAILED: " << what << "; ";
    }
  }
};

using Check = std::function<void(Outcome&)>;

// 1 ------------------------------------------------------------------------
void reduction_equivalence(Outcome& o) {
  std::uint64_t mismatches = 0, instances = 0;
  for (const MultiShape shape : {MultiShape{2, 1, 1}, MultiShape{2, 2, 1}}) {
    const auto r = verify_reduction_exhaustive(shape);
    mismatches += r.mismatches;
    instances += r.instances;
    o.detail << "(" << shape.degree << "," << shape.depth << "," << shape.bits << ") exhaustive " << r.instances << "x"
             << r.queries_per_instance << "; ";
  }
  const auto s = verify_reduction_sampled({2, 3, 2}, 1000, 1);
  mismatches += s.mismatches;
  instances += s.instances;
  o.detail << "(2,3,2) sampled " << s.instances << "x" << s.queries_per_instance << "; mismatches " << mismatches;
  o.require(mismatches == 0, "reachability disagrees with multi-butterfly answer");
  o.require(instances == 16 + (1u << 20) + 1000, "instance count");
}

// 2 ------------------------------------------------------------------------
void worked_examples(Outcome& o) {
  {
    const ButterflyGraph g({2, 3, 2});
    auto l = EdgeLabeling::zeros(g.params());
    l.set(g, {0, 2, 3}, 0b00);
    l.set(g, {1, 3, 1}, 0b10);
    l.set(g, {2, 1, 1}, 0b11);
    const Label x = path_xor(g, l, 2, 1);
    o.require(g.path_nodes(2, 1) == std::vector<NodeIndex>{2, 3, 1, 1}, "single-graph path nodes");
    o.require(x == 0b01 && !zero_xor_answer(g, l, 2, 1), "single-graph query (2,1)");
    o.detail << "single graph (2,1): xor=" << x << " answer=" << zero_xor_answer(g, l, 2, 1) << "; ";
  }
  {
    const auto inst = fixtures::figure_two_instance(2);
    o.require(inst.multi_answer(2, 4) && inst.epoch_answer(2, 2, 4), "multi-graph query (2,4)");
    o.detail << "multi (2,4)=" << inst.multi_answer(2, 4) << "; ";
  }
  {
    const ButterflyGraph g({2, 2, 2});
    auto l = EdgeLabeling::zeros(g.params());
    l.set(g, {0, 0, 0}, 0b01);
    l.set(g, {1, 0, 0}, 0b11);
    const NodeUniverse u(MultiShape{2, 2, 2});
    std::vector<std::pair<std::uint64_t, std::uint64_t>> edges;
    for (const auto& e : reduce_one_butterfly(g, l)) edges.emplace_back(u.dense(e.from), u.dense(e.to));
    const auto seen = oracle::bfs(u.size(), edges, u.dense(ReachNodeId::copy(2, 0, 0, 0b00)));
    std::vector<Label> reached;
    for (Label sigma = 0; sigma < 4; ++sigma)
      if (seen[u.dense(ReachNodeId::copy(2, 2, 0, sigma))]) reached.push_back(sigma);
    o.require(reached == std::vector<Label>{0b10}, "gadget fragment reaches exactly w^10");
    o.detail << "gadget copies reached " << reached.size() << "; ";
  }
  {
    const auto inst = fixtures::figure_two_instance(1);
    const bool r = reduce_instance(inst).reachability_answer(2, 4);
    o.require(r, "reachability query (2,4)");
    o.detail << "reachability (2,4)=" << r;
  }
}

// 3 ------------------------------------------------------------------------
void node_count_formula(Outcome& o) {
  int shapes = 0;
  for (unsigned B : {2u, 3u})
    for (unsigned d : {1u, 2u, 3u})
      for (unsigned b : {1u, 2u, 3u}) {
        const MultiShape shape{B, d, b};
        const NodeUniverse u(shape);
        std::uint64_t enumerated = 0;
        for (std::uint64_t k = 0; k < u.size(); ++k) enumerated += u.dense(u.node(k)) == k;
        o.require(enumerated == oracle::node_count_formula(B, d, b), "node count formula");
        o.require(xorreach::node_count(B, d, b) == u.size(), "node_count agrees with universe");
        ++shapes;
      }
  const auto n = NodeUniverse(MultiShape{2, 3, 2}).size();
  o.require(n == 222, "(2,3,2) -> 222");
  o.detail << shapes << " shapes; (2,3,2) -> " << n;
}

// 4 ------------------------------------------------------------------------
void path_uniqueness(Outcome& o) {
  std::uint64_t pairs = 0;
  for (unsigned B : {2u, 3u})
    for (unsigned d : {1u, 2u, 3u}) {
      const ButterflyGraph g({B, d, 1});
      for (NodeIndex s = 0; s < g.width(); ++s)
        for (NodeIndex t = 0; t < g.width(); ++t) {
          const auto paths = oracle::all_paths(B, d, s, t);
          ++pairs;
          o.require(paths.size() == 1, "exactly one path");
          if (paths.size() != 1) return;
          o.require(paths[0].size() == d + 1 && paths[0] == g.path_nodes(s, t), "path length and nodes");
        }
    }
  o.detail << pairs << " pairs, one path each";
}

// 5 ------------------------------------------------------------------------
void zero_xor_probability(Outcome& o) {
  for (unsigned b : {1u, 2u}) {
    const MultiShape shape{2, 2, b};
    const ButterflyGraph g(shape.graph_params(2));
    const Label mask = (Label{1} << b) - 1;
    // Only the path edges matter: enumerate all of their labels.
    for (NodeIndex s = 0; s < 4; ++s)
      for (NodeIndex t = 0; t < 4; ++t) {
        const auto path = g.unique_path(s, t);
        auto l = EdgeLabeling::zeros(g.params());
        std::uint64_t zeros = 0;
        const std::uint64_t total = std::uint64_t{1} << (b * path.size());
        for (std::uint64_t code = 0; code < total; ++code) {
          for (std::size_t j = 0; j < path.size(); ++j) l.set(g, path[j], (code >> (j * b)) & mask);
          zeros += zero_xor_answer(g, l, s, t);
        }
        o.require(zeros * (std::uint64_t{1} << b) == total, "Pr[psi=1] = 2^-b");
      }
    // Blocking by G_1 when epoch 2 is designated, over every G_1 labeling.
    const auto p1 = shape.graph_params(1);
    const std::uint64_t labelings = std::uint64_t{1} << (b * 4);
    double sum = 0;
    std::uint64_t blocked00 = 0;
    for (std::uint64_t code = 0; code < labelings; ++code) {
      Fixing f{shape, 2, {}, 0};
      f.labelings.emplace(1, EdgeLabeling::from_code(p1, code));
      sum += blocked_fraction(f);
      blocked00 += is_blocked(f, 0, 0);
    }
    const double q = std::ldexp(1.0, -static_cast<int>(b));
    o.require(blocked00 * (std::uint64_t{1} << b) == labelings, "per-epoch blocking 2^-b");
    o.require(std::abs(sum / labelings - q) < kExactTol, "exact block fraction at d=2");
    o.detail << "b=" << b << " exact ok; ";
  }
  {
    // d = 3, epoch 3 designated: per query, enumerate the labels on the
    // projected paths in G_1 and G_2, the only edges that decide blocking.
    const MultiShape shape{2, 3, 1};
    const ButterflyGraph g1(shape.graph_params(1)), g2(shape.graph_params(2));
    std::uint64_t blocked = 0, total = 0;
    for (NodeIndex s = 0; s < 8; ++s)
      for (NodeIndex t = 0; t < 8; ++t) {
        const auto [s1, t1] = project_query(3, 2, 1, s, t);
        const auto [s2, t2] = project_query(3, 2, 2, s, t);
        const auto e1 = g1.unique_path(s1, t1);
        const auto e2 = g2.unique_path(s2, t2);
        for (std::uint64_t code = 0; code < 8; ++code) {
          Fixing f{shape, 3, {}, 0};
          auto l1 = EdgeLabeling::zeros(g1.params());
          auto l2 = EdgeLabeling::zeros(g2.params());
          l1.set(g1, e1[0], code & 1);
          l2.set(g2, e2[0], (code >> 1) & 1);
          l2.set(g2, e2[1], (code >> 2) & 1);
          f.labelings.emplace(1, l1);
          f.labelings.emplace(2, l2);
          blocked += is_blocked(f, s, t);
          ++total;
        }
      }
    o.require(blocked * 4 == total * 3, "exact block fraction at d=3");
    o.detail << "d=3 exact " << blocked << "/" << total << "; ";
  }
  const MultiShape shape{2, 4, 2};
  const int n = 400;
  double sum = 0, sq = 0;
  for (int k = 0; k < n; ++k) {
    const double x = blocked_fraction(Fixing::sample(shape, 3, 5000 + k));
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / (n - 1));
  const double expected = 1 - std::pow(0.75, 3);
  o.require(std::abs(mean - expected) <= kSigmas * se, "Monte-Carlo block fraction at d=4");
  o.detail << "d=4 MC " << mean << " vs " << expected << " (se " << se << ")";
}

// 6 ------------------------------------------------------------------------
std::vector<MetaQuery> small_metas(const ButterflyGraph& g) {
  std::vector<QueryPair> pairs;
  for (NodeIndex s = 0; s < g.width(); ++s)
    for (NodeIndex t = 0; t < g.width(); ++t) pairs.push_back({s, t});
  auto out = enumerate_metas(g, pairs, 1);
  for (auto& m : enumerate_metas(g, pairs, 2)) out.push_back(std::move(m));
  return out;
}

void weighted_problem(Outcome& o) {
  const ButterflyGraph g({2, 2, 1});
  const auto metas = small_metas(g);
  std::vector<double> sums(metas.size(), 0.0);
  const std::uint64_t total = std::uint64_t{1} << g.edge_count();
  for (std::uint64_t code = 0; code < total; ++code) {
    const auto l = EdgeLabeling::from_code(g.params(), code);
    for (std::size_t m = 0; m < metas.size(); ++m) {
      const double p = weight_P(g, l, metas[m]);
      sums[m] += p;
      const bool parity = meta_answer(g, l, metas[m]);
      if (std::abs(p) < beta_floor(metas[m].k(), 1) || (p < 0) != parity) {
        o.require(false, "magnitude or sign of P");
        return;
      }
    }
  }
  double worst = 0;
  for (double s : sums) worst = std::max(worst, std::abs(s / static_cast<double>(total)));
  o.require(worst == 0.0, "E[P] = 0");
  o.detail << metas.size() << " metas x " << total << " labelings; max |E[P]| = " << worst;
}

// 7 ------------------------------------------------------------------------
void vanishing_moments(Outcome& o) {
  const ButterflyGraph g({2, 2, 1});
  const auto metas = small_metas(g);
  Rng rng(8);
  int cases = 0;
  while (cases < 100) {
    std::vector<MetaQuery> pick;
    const auto r = 2 + uniform_below(rng, 2);
    for (std::uint64_t j = 0; j < r; ++j) pick.push_back(metas[uniform_below(rng, metas.size())]);
    if (!has_singleton_edge(g, pick)) continue;
    ++cases;
    o.require(product_moment(g, pick) == 0.0, "moment with a singleton edge");
  }
  double worst = 0;
  for (unsigned b : {1u, 2u}) {
    const ButterflyGraph gb({2, 2, b});
    for (const auto& m : small_metas(gb)) {
      const double got = product_moment(gb, {m, m});
      o.require(got > 0, "identical pair moment positive");
      worst = std::max(worst, std::abs(got - identical_moment_closed_form(m.k(), b)));
    }
  }
  o.require(worst <= kMomentTol, "closed form");
  o.detail << cases << " singleton cases exactly 0; identical-pair max error " << worst;
}

// 8 ------------------------------------------------------------------------
StaticXorStructure direct_structure(MultiShape shape) {
  ChronogramConfig cfg;
  cfg.seed = 1;
  cfg.trace_draws = 5;
  cfg.conditional_draws = 200;
  auto res = run_chronogram(std::make_shared<DirectLabelSubject>(shape), cfg);
  if (!res.structure) throw StateError("no fixing found");
  return std::move(*res.structure);
}

void protocol_accounting(Outcome& o) {
  const auto sx = direct_structure({2, 4, 8});
  const auto classes = sx.query_set();
  const double p = 0.75;
  const unsigned w = 64;
  const double pS = p * static_cast<double>(sx.updated_bound());
  o.require(pS >= 32, "pS >= 32");
  const double bound = communication_bound_bits(p, sx.updated_bound(), sx.cache_size(), w);
  Rng rng(2024);
  const int n = 10000;
  int aborts = 0, wq = 0, wq_correct = 0, over = 0;
  double t_q = 0;
  for (int trial = 0; trial < n; ++trial) {
    const auto loaded = sx.load(EdgeLabeling::uniform(sx.input_params(), rng));
    const auto m = alice_message(sx, loaded, p, rng, rng(), w);
    const MetaQuery meta{{classes[uniform_below(rng, classes.size())]}};
    const auto run = true_run(sx, loaded, meta);
    t_q += static_cast<double>(run.updated_probed.size());
    if (m.aborted()) {
      ++aborts;
      continue;
    }
    over += static_cast<double>(m.bits) > bound;
    if (!wq_event(run, m)) continue;
    ++wq;
    wq_correct += bob_simulate(sx, m, meta).predicted_sign == run.sign;
  }
  t_q /= n;
  const double abort_rate = static_cast<double>(aborts) / n;
  const double wq_rate = static_cast<double>(wq) / n;
  const double wq_se = std::sqrt(wq_rate * (1 - wq_rate) / n);
  const double wq_floor = std::pow(p, 4 * t_q) / 4;
  o.require(over == 0, "message within (8pS + S_cac) w");
  o.require(abort_rate < 0.01, "abort rate below 1%");
  o.require(wq > 0 && wq_correct == wq, "sign correct on W_Q");
  o.require(wq_rate + kSigmas * wq_se >= wq_floor, "Pr[W_Q] >= p^(4 t_q) / 4");
  o.detail << "S=" << sx.updated_bound() << " S_cac=" << sx.cache_size() << " p=" << p << " t_q=" << t_q
           << " aborts=" << abort_rate << " Pr[W_Q]=" << wq_rate << " (floor " << wq_floor << ") correct "
           << wq_correct << "/" << wq;
}

// 9 ------------------------------------------------------------------------
void peak_to_average(Outcome& o) {
  Rng rng(9);
  int checked = 0, met = 0, fallback_ok = 0;
  while (checked < 1000) {
    const std::size_t k = 1 + uniform_below(rng, 3);
    const Word alphabet = 2 + uniform_below(rng, 3);
    PeakFunction f;
    const std::size_t support = 1 + uniform_below(rng, 6);
    for (std::size_t j = 0; j < support; ++j) {
      std::vector<Word> z;
      for (std::size_t i = 0; i < k; ++i) z.push_back(uniform_below(rng, alphabet));
      f[z] += uniform_unit(rng) * (bernoulli(rng, 0.5) ? 1 : -1);
    }
    double total = 0, peak = 0;
    for (const auto& [z, v] : f) total += std::abs(v);
    if (total == 0) continue;
    const double scale = uniform_unit(rng) * 0.5 + 0.5;  // sum |f| in [1/2, 1]
    for (auto& [z, v] : f) {
      v *= scale / total;
      peak = std::max(peak, std::abs(v));
    }
    const double lo = std::ldexp(1.0, -static_cast<int>(k));
    if (peak < lo) continue;
    const double eps = lo + uniform_unit(rng) * (peak - lo);
    ++checked;
    const auto res = find_peak_subset(f, k, eps);
    met += res.met;
    const std::uint32_t full = (1u << k) - 1;
    fallback_ok += marginal_mass(f, full) + 1e-12 >= res.threshold;
  }
  o.require(met == checked, "a subset meeting the threshold is found");
  o.require(fallback_ok == checked, "Y=[k] meets the threshold");
  o.detail << met << "/" << checked << " admissible f met the threshold";
}

// 10 -----------------------------------------------------------------------
void advantage_sanity(Outcome& o) {
  const auto sx = direct_structure({2, 1, 1});
  const ButterflyGraph g(sx.input_params());
  AdvantageGame game{&sx, enumerate_metas(g, sx.query_set(), 2), 64};
  const double empty = exact_advantage(game, MessageModel::kEmpty, 0.5).advantage;
  const double full = exact_advantage(game, MessageModel::kFullInput, 0.5).advantage;
  o.require(std::abs(empty) < kExactTol, "empty message has zero advantage");
  o.require(full + kExactTol >= game.beta(), "full input has advantage >= beta");
  o.detail << "empty=" << empty << " full=" << full << " beta=" << game.beta() << " protocol:";
  double prev = -1;
  for (double p : {0.1, 0.3, 0.5, 0.9}) {
    const double a = exact_advantage(game, MessageModel::kProtocol, p).advantage;
    o.require(a + kExactTol >= prev, "non-decreasing in p");
    o.detail << " p=" << p << ":" << a;
    prev = a;
  }
}

// 11 -----------------------------------------------------------------------
void chronogram_partition(Outcome& o) {
  struct Run {
    std::shared_ptr<const XorSubject> subject;
    std::uint64_t seed;
  };
  std::vector<Run> runs;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    runs.push_back({std::make_shared<DirectLabelSubject>(MultiShape{2, 4, 8}), seed});
    runs.push_back({std::shared_ptr<const XorSubject>(make_reduction_subject({2, 2, 1})), seed});
  }
  int found = 0;
  for (const auto& r : runs) {
    const auto& shape = r.subject->shape();
    // partition of the written cells by last writer
    Rng rng = substream(r.seed, "partition");
    const auto trace = run_epochs(*r.subject, uniform_updates(shape, rng), all_queries(shape.query_width()));
    std::set<Address> all;
    std::size_t sum = 0;
    for (const auto& [phase, cells] : trace.cells_by_epoch) {
      sum += cells.size();
      all.insert(cells.begin(), cells.end());
    }
    o.require(sum == all.size() && all.size() == trace.written_cells, "C_i disjoint and covering");

    ChronogramConfig cfg;
    cfg.seed = r.seed;
    cfg.conditional_draws = 200;
    const auto res = run_chronogram(r.subject, cfg);
    o.require(res.choice.intersection <= 2 * res.stats.t_q / shape.depth + 1e-12, "selected epoch within 2 t_q / d");
    if (!res.search.found) continue;
    ++found;
    const auto& fx = *res.search.fixing;
    const auto& cs = *res.search.stats;
    const double d = shape.depth;
    o.require(cs.draws == 200, "200 conditional draws");
    o.require(blocked_fraction(fx) <= 3 * d * std::ldexp(1.0, -static_cast<int>(shape.bits)), "block fraction bound");
    o.require(cs.overall_intersection <= 6 * res.stats.t_q / d + 1e-12, "conditional intersection bound");
    o.require(cs.overall_cells <= 3 * res.stats.t_q + 1e-12, "conditional cells bound");
  }
  o.require(found > 0, "at least one fixing found");
  o.detail << runs.size() << " seeded runs, " << found << " fixings found and re-checked";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, Check>> checks{
      {"reduction equivalence", reduction_equivalence},
      {"worked examples", worked_examples},
      {"node count", node_count_formula},
      {"path uniqueness", path_uniqueness},
      {"zero-XOR probability and blocking", zero_xor_probability},
      {"weighted problem", weighted_problem},
      {"vanishing moments", vanishing_moments},
      {"protocol accounting", protocol_accounting},
      {"peak-to-average", peak_to_average},
      {"advantage sanity", advantage_sanity},
      {"chronogram partition", chronogram_partition},
  };
  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      checks[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("[%s] %2zu %-36s %6.2fs  %s\n", o.pass ? "PASS" : "FAIL", i + 1, checks[i].first.c_str(), secs,
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", checks.size() - failed, checks.size());
  return failed == 0 ? 0 : 1;
}
