#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "xorreach/butterfly.hpp"
#include "xorreach/cell_probe.hpp"
#include "xorreach/chronogram.hpp"
#include "xorreach/errors.hpp"
#include "xorreach/meta_queries.hpp"
#include "xorreach/rng.hpp"

namespace xorreach {

/// Alice's one-way message. C0 is her private Bernoulli(p) sample of the
/// updated cells; C1 the updated cells among a public Bernoulli(p) sample;
/// C2 the cache contents in directory order.
struct ProtocolMessage {
  bool c0_sent = false;
  bool c1_sent = false;
  std::map<Address, Word> c0;          // sampled, kept for analysis even when not sent
  std::map<Address, Word> c1_updated;  // likewise
  std::vector<Word> c2;                // sent only when both steps pass
  std::uint64_t public_seed = 0;
  std::uint64_t bits = 0;

  bool aborted() const { return !(c0_sent && c1_sent); }
};

/// (8pS + S_cac) * w
inline double communication_bound_bits(double p, std::uint64_t updated_bound, std::uint64_t cache_size, unsigned w) {
  return (8.0 * p * static_cast<double>(updated_bound) + static_cast<double>(cache_size)) * w;
}

/// Abort rule |C| >= 2pS. An empty sample never aborts.
inline bool over_threshold(std::size_t count, double p, std::uint64_t updated_bound) {
  return count > 0 && static_cast<double>(count) >= 2.0 * p * static_cast<double>(updated_bound);
}

/// Public coin for address `addr`: the same seed gives Bob the same sample.
inline bool public_sample(std::uint64_t public_seed, Address addr, double p) { return keyed_coin(public_seed, addr, p); }

/// Builds the message from loaded memory, an explicit C0 and the public
/// sample `in_c1`. Encoding: flag bit, then (address, content) per C0 cell;
/// flag bit, then (address, content) per updated C1 cell; then w bits per
/// cache slot.
template <class InPublicSample>
ProtocolMessage encode_message(const StaticXorStructure& sx, const StaticXorStructure::Loaded& loaded,
                               std::map<Address, Word> c0, InPublicSample&& in_c1, double p, unsigned w) {
  ProtocolMessage m;
  m.c0 = std::move(c0);
  for (const auto& [a, v] : loaded.updated)
    if (in_c1(a)) m.c1_updated.emplace(a, v);
  const std::uint64_t S = sx.updated_bound();
  m.bits = 1;
  if (over_threshold(m.c0.size(), p, S)) return m;
  m.c0_sent = true;
  m.bits += 2ull * w * m.c0.size() + 1;
  if (over_threshold(m.c1_updated.size(), p, S)) return m;
  m.c1_sent = true;
  m.bits += 2ull * w * m.c1_updated.size() + static_cast<std::uint64_t>(w) * sx.cache_size();
  for (const auto& [a, v] : loaded.cache) m.c2.push_back(v);
  return m;
}

inline ProtocolMessage alice_message(const StaticXorStructure& sx, const StaticXorStructure::Loaded& loaded, double p,
                                     Rng& rng, std::uint64_t public_seed, unsigned w = 64) {
  if (!(p > 0 && p < 1)) throw PreconditionError("sampling probability must lie in (0, 1)");
  std::map<Address, Word> c0;
  for (const auto& [a, v] : loaded.updated)
    if (bernoulli(rng, p)) c0.emplace(a, v);
  auto m = encode_message(sx, loaded, std::move(c0), [&](Address a) { return public_sample(public_seed, a, p); }, p, w);
  m.public_seed = public_seed;
  return m;
}

/// Bob's view of the meta-query run on preinit memory overlaid with C0 and
/// the cache.
struct BobSimulation {
  std::vector<Address> c_sim;   // distinct non-cache cells probed, first-probe order
  std::vector<Word> contents;   // z*, the contents Bob used
  std::vector<bool> answers;    // simulated psi per pair
  int predicted_sign = 1;
};

inline BobSimulation bob_simulate(const StaticXorStructure& sx, const ProtocolMessage& m, const MetaQuery& meta) {
  if (m.aborted()) throw StateError("cannot simulate on an aborted transcript");
  const auto cache = sx.cache_from_contents(m.c2);
  BobSimulation sim;
  std::set<Address> seen;
  bool parity = false;
  for (const auto& q : meta.pairs) {
    const auto run = sx.query(m.c0, cache, q);
    sim.answers.push_back(run.answer);
    parity ^= run.answer;
    for (std::size_t j = 0; j < run.probed.size(); ++j)
      if (seen.insert(run.probed[j]).second) {
        sim.c_sim.push_back(run.probed[j]);
        sim.contents.push_back(run.contents[j]);
      }
  }
  sim.predicted_sign = parity ? -1 : 1;
  return sim;
}

/// True execution of a meta-query on the loaded memory.
struct TrueRun {
  std::vector<bool> answers;
  std::set<Address> updated_probed;  // cells of the query's T that are updated
  std::uint64_t total_cells = 0;     // distinct non-cache cells probed
  int sign = 1;                      // sign of P(Q, I)
};

inline TrueRun true_run(const StaticXorStructure& sx, const StaticXorStructure::Loaded& loaded, const MetaQuery& meta) {
  TrueRun r;
  std::set<Address> cells;
  bool parity = false;
  for (const auto& q : meta.pairs) {
    const auto run = sx.query(loaded, q);
    r.answers.push_back(run.answer);
    parity ^= run.answer;
    for (auto a : run.probed) {
      cells.insert(a);
      if (loaded.updated.count(a)) r.updated_probed.insert(a);
    }
  }
  r.total_cells = cells.size();
  r.sign = parity ? -1 : 1;
  return r;
}

/// W_Q: C0 contains every updated cell the query probes.
inline bool wq_event(const TrueRun& run, const ProtocolMessage& m) {
  for (auto a : run.updated_probed)
    if (!m.c0.count(a)) return false;
  return true;
}

/// epsilon = beta * p^(4 t_q) / 4
inline double protocol_epsilon(double beta, double p, double t_q) { return beta * std::pow(p, 4.0 * t_q) / 4.0; }

}  // namespace xorreach
