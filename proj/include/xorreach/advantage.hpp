#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xorreach/butterfly.hpp"
#include "xorreach/chronogram.hpp"
#include "xorreach/errors.hpp"
#include "xorreach/meta_queries.hpp"
#include "xorreach/peak.hpp"
#include "xorreach/protocol.hpp"
#include "xorreach/rng.hpp"

namespace xorreach {

/// What Bob learns: nothing, the whole input, or the transcript of pi.
enum class MessageModel { kEmpty, kFullInput, kProtocol };

/// Alice holds a uniform input to the static structure; Bob a meta-query
/// drawn uniformly from `metas`.
struct AdvantageGame {
  const StaticXorStructure* structure = nullptr;
  std::vector<MetaQuery> metas;
  unsigned w = 64;

  std::size_t k() const { return metas.empty() ? 0 : metas.front().k(); }
  double beta() const { return beta_floor(k(), structure->input_params().bits); }
};

struct AdvantageReport {
  double advantage = 0;
  double stderr_ = 0;
  std::size_t trials = 0;   // Monte-Carlo trials, or enumerated outcomes
  double abort_rate = 0;
  double mean_bits = 0;
  double bound_bits = 0;
  double wq_rate = 0;
  double t_q = 0;           // mean updated cells probed by a meta-query
  double t_tot = 0;         // mean non-cache cells probed by a meta-query
  double beta = 0;
  double epsilon = 0;
  double envelope_exponent = 0;  // sqrt(t_tot (t_q lg 1/p + lg 1/beta)) lg 1/p
  double fitted_constant = std::numeric_limits<double>::quiet_NaN();
  bool bound_respected = true;   // m <= (8pS + S_cac) w on every non-abort
  bool sign_exact_on_wq = true;  // Bob correct whenever W_Q holds and no abort
  std::size_t wq_outcomes = 0;   // non-abort outcomes with W_Q
  std::size_t peak_classes = 0;  // (message, meta) pairs checked for a peak
  std::size_t peak_premise = 0;  // of those, max |f| >= epsilon
  std::size_t peak_met = 0;      // of those, a subset met the threshold
};

inline void finish_envelope(AdvantageReport& r, double p) {
  const double lp = std::log2(1.0 / p);
  r.envelope_exponent = std::sqrt(r.t_tot * (r.t_q * lp + std::log2(1.0 / r.beta))) * lp;
  if (r.advantage > 0 && r.envelope_exponent > 0) r.fitted_constant = -std::log2(r.advantage) / r.envelope_exponent;
}

namespace detail {

inline std::string message_key(const ProtocolMessage& m, const std::string& public_tag) {
  std::ostringstream os;
  os << public_tag << '|';
  if (!m.c0_sent) return os.str() + "x";
  for (const auto& [a, v] : m.c0) os << a << '=' << v << ',';
  os << '|';
  if (!m.c1_sent) return os.str() + "x";
  for (const auto& [a, v] : m.c1_updated) os << a << '=' << v << ',';
  os << '|';
  for (auto v : m.c2) os << v << ',';
  return os.str();
}

/// True content of a non-cache cell after loading.
inline Word true_content(const StaticXorStructure& sx, const StaticXorStructure::Loaded& loaded, Address a) {
  const auto it = loaded.updated.find(a);
  return it != loaded.updated.end() ? it->second : sx.preinit()(a);
}

}  // namespace detail

/// Exact E_{Q, message}[|E_I[P(Q, I) | message]|], enumerating every input,
/// every private sample C0 and every public sample over the updated
/// addresses. The public sample is part of what Bob conditions on.
inline AdvantageReport exact_advantage(const AdvantageGame& game, MessageModel model, double p,
                                       std::uint64_t max_outcomes = std::uint64_t{1} << 22) {
  const StaticXorStructure& sx = *game.structure;
  if (game.metas.empty()) throw PreconditionError("advantage needs at least one meta-query");
  if (model == MessageModel::kProtocol && !(p > 0 && p < 1)) throw PreconditionError("sampling probability must lie in (0, 1)");
  const ButterflyParams params = sx.input_params();
  const ButterflyGraph g(params);
  const std::uint64_t input_bits = params.bits * g.edge_count();
  if (input_bits > 20) throw CapacityError("exact mode needs at most 2^20 input labelings");
  const std::uint64_t inputs = std::uint64_t{1} << input_bits;
  const std::size_t nm = game.metas.size();

  AdvantageReport rep;
  rep.beta = game.beta();
  rep.bound_bits = communication_bound_bits(p, sx.updated_bound(), sx.cache_size(), game.w);

  std::vector<StaticXorStructure::Loaded> loaded;
  std::vector<std::vector<double>> weight(inputs, std::vector<double>(nm));
  std::vector<std::vector<TrueRun>> runs(inputs);
  std::set<Address> universe;
  for (std::uint64_t code = 0; code < inputs; ++code) {
    const auto input = EdgeLabeling::from_code(params, code);
    loaded.push_back(sx.load(input));
    for (const auto& [a, v] : loaded.back().updated) universe.insert(a);
    for (std::size_t q = 0; q < nm; ++q) {
      weight[code][q] = weight_P(g, input, game.metas[q]);
      runs[code].push_back(true_run(sx, loaded.back(), game.metas[q]));
      rep.t_q += static_cast<double>(runs[code][q].updated_probed.size());
      rep.t_tot += static_cast<double>(runs[code][q].total_cells);
    }
  }
  rep.t_q /= static_cast<double>(inputs * nm);
  rep.t_tot /= static_cast<double>(inputs * nm);
  rep.epsilon = protocol_epsilon(rep.beta, model == MessageModel::kProtocol ? p : 0.5, rep.t_q);
  const std::vector<Address> pub(universe.begin(), universe.end());
  if (pub.size() > 20) throw CapacityError("too many updated addresses to enumerate public samples");

  struct ClassAcc {
    std::vector<double> sum;
    double mass = 0;
    std::optional<ProtocolMessage> message;
    std::vector<std::pair<std::uint64_t, double>> members;  // (input, weight)
  };
  std::map<std::string, ClassAcc> classes;
  auto add = [&](const std::string& key, std::uint64_t code, double wgt, const ProtocolMessage* m) {
    auto& c = classes[key];
    if (c.sum.empty()) c.sum.assign(nm, 0.0);
    for (std::size_t q = 0; q < nm; ++q) c.sum[q] += wgt * weight[code][q];
    c.mass += wgt;
    if (m && !c.message) c.message = *m;
    if (m) c.members.emplace_back(code, wgt);
    ++rep.trials;
  };

  const double pin = 1.0 / static_cast<double>(inputs);
  for (std::uint64_t code = 0; code < inputs; ++code) {
    if (model == MessageModel::kEmpty) {
      add("", code, pin, nullptr);
      continue;
    }
    if (model == MessageModel::kFullInput) {
      add(std::to_string(code), code, pin, nullptr);
      continue;
    }
    const auto& ld = loaded[code];
    const std::vector<std::pair<Address, Word>> upd(ld.updated.begin(), ld.updated.end());
    if (upd.size() > 20) throw CapacityError("too many updated cells to enumerate private samples");
    const std::uint64_t c0_count = std::uint64_t{1} << upd.size();
    const std::uint64_t pub_count = std::uint64_t{1} << pub.size();
    if (static_cast<double>(inputs) * static_cast<double>(c0_count) * static_cast<double>(pub_count) > static_cast<double>(max_outcomes))
      throw CapacityError("exact protocol enumeration too large");
    for (std::uint64_t c0mask = 0; c0mask < c0_count; ++c0mask) {
      std::map<Address, Word> c0;
      double w0 = 1;
      for (std::size_t j = 0; j < upd.size(); ++j) {
        const bool in = (c0mask >> j) & 1;
        w0 *= in ? p : 1 - p;
        if (in) c0.insert(upd[j]);
      }
      for (std::uint64_t pmask = 0; pmask < pub_count; ++pmask) {
        double w1 = 1;
        std::set<Address> sample;
        for (std::size_t j = 0; j < pub.size(); ++j) {
          const bool in = (pmask >> j) & 1;
          w1 *= in ? p : 1 - p;
          if (in) sample.insert(pub[j]);
        }
        const auto m = encode_message(sx, ld, c0, [&](Address a) { return sample.count(a) != 0; }, p, game.w);
        const double wgt = pin * w0 * w1;
        if (m.aborted()) {
          rep.abort_rate += wgt;
        } else if (static_cast<double>(m.bits) > rep.bound_bits) {
          rep.bound_respected = false;
        }
        rep.mean_bits += wgt * static_cast<double>(m.bits);
        for (std::size_t q = 0; q < nm; ++q) {
          const bool wq = wq_event(runs[code][q], m);
          rep.wq_rate += wgt * wq / static_cast<double>(nm);
          if (wq && !m.aborted()) {
            ++rep.wq_outcomes;
            if (bob_simulate(sx, m, game.metas[q]).predicted_sign != runs[code][q].sign) rep.sign_exact_on_wq = false;
          }
        }
        add(std::to_string(pmask) + "#" + detail::message_key(m, ""), code, wgt, &m);
      }
    }
  }

  for (const auto& [key, c] : classes)
    for (std::size_t q = 0; q < nm; ++q) rep.advantage += std::abs(c.sum[q]) / static_cast<double>(nm);

  // Peak-to-Average check on Bob's simulated cells for every message class.
  if (model == MessageModel::kProtocol)
    for (const auto& [key, c] : classes) {
      if (!c.message || c.message->aborted() || c.mass <= 0) continue;
      for (std::size_t q = 0; q < nm; ++q) {
        const auto sim = bob_simulate(sx, *c.message, game.metas[q]);
        if (sim.c_sim.size() > 20) continue;
        PeakFunction f;
        for (const auto& [code, wgt] : c.members) {
          std::vector<Word> z;
          for (auto a : sim.c_sim) z.push_back(detail::true_content(sx, loaded[code], a));
          f[z] += wgt / c.mass * weight[code][q];
        }
        ++rep.peak_classes;
        double peak = 0;
        for (const auto& [z, v] : f) peak = std::max(peak, std::abs(v));
        if (peak < rep.epsilon || rep.epsilon <= 0) continue;
        ++rep.peak_premise;
        if (find_peak_subset(f, sim.c_sim.size(), rep.epsilon).met) ++rep.peak_met;
      }
    }
  if (model != MessageModel::kProtocol) {
    rep.abort_rate = 0;
    rep.wq_rate = model == MessageModel::kFullInput ? 1 : 0;
  }
  finish_envelope(rep, model == MessageModel::kProtocol ? p : 0.5);
  return rep;
}

/// Monte-Carlo proxy |mean(P * s)|, s = Bob's predicted sign (+1 on abort).
/// This lower-bounds the advantage because Bob's guess is a function of
/// the message.
inline AdvantageReport monte_carlo_advantage(const AdvantageGame& game, MessageModel model, double p, std::size_t trials,
                                             std::uint64_t seed) {
  const StaticXorStructure& sx = *game.structure;
  if (game.metas.empty()) throw PreconditionError("advantage needs at least one meta-query");
  if (trials < 2) throw PrecisionError("Monte-Carlo advantage needs at least two trials");
  if (model == MessageModel::kProtocol && !(p > 0 && p < 1)) throw PreconditionError("sampling probability must lie in (0, 1)");
  const ButterflyParams params = sx.input_params();
  const ButterflyGraph g(params);
  Rng rng = substream(seed, "advantage");

  AdvantageReport rep;
  rep.trials = trials;
  rep.beta = game.beta();
  rep.bound_bits = communication_bound_bits(p, sx.updated_bound(), sx.cache_size(), game.w);
  double sum = 0, sq = 0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const auto& meta = game.metas[uniform_below(rng, game.metas.size())];
    const auto input = EdgeLabeling::uniform(params, rng);
    const auto loaded = sx.load(input);
    const double P = weight_P(g, input, meta);
    const auto run = true_run(sx, loaded, meta);
    rep.t_q += static_cast<double>(run.updated_probed.size());
    rep.t_tot += static_cast<double>(run.total_cells);
    int guess = 1;
    if (model == MessageModel::kFullInput) {
      guess = run.sign;
      rep.wq_rate += 1;
    } else if (model == MessageModel::kProtocol) {
      const std::uint64_t public_seed = rng();
      const auto m = alice_message(sx, loaded, p, rng, public_seed, game.w);
      const bool wq = wq_event(run, m);
      rep.wq_rate += wq;
      rep.mean_bits += static_cast<double>(m.bits);
      if (m.aborted()) {
        rep.abort_rate += 1;
      } else {
        if (static_cast<double>(m.bits) > rep.bound_bits) rep.bound_respected = false;
        guess = bob_simulate(sx, m, meta).predicted_sign;
        if (wq) {
          ++rep.wq_outcomes;
          if (guess != run.sign) rep.sign_exact_on_wq = false;
        }
      }
    }
    const double x = P * guess;
    sum += x;
    sq += x * x;
  }
  const double n = static_cast<double>(trials);
  const double mean = sum / n;
  rep.advantage = std::abs(mean);
  rep.stderr_ = std::sqrt(std::max(0.0, (sq / n - mean * mean) * n / (n - 1)) / n);
  rep.abort_rate /= n;
  rep.mean_bits /= n;
  rep.wq_rate /= n;
  rep.t_q /= n;
  rep.t_tot /= n;
  rep.epsilon = protocol_epsilon(rep.beta, model == MessageModel::kProtocol ? p : 0.5, rep.t_q);
  finish_envelope(rep, model == MessageModel::kProtocol ? p : 0.5);
  return rep;
}

/// All node-disjoint metas of size k drawn from `classes`, in lexicographic
/// order of their pair lists, up to `cap` of them.
inline std::vector<MetaQuery> enumerate_metas(const ButterflyGraph& g, const std::vector<QueryPair>& classes, std::size_t k,
                                              std::size_t cap = 4096) {
  if (k == 0) throw PreconditionError("meta-query size must be at least 1");
  std::vector<MetaQuery> out;
  std::vector<QueryPair> cur;
  auto rec = [&](auto&& self, std::size_t from) -> void {
    if (out.size() >= cap) return;
    if (cur.size() == k) {
      out.push_back({cur});
      return;
    }
    for (std::size_t j = from; j < classes.size(); ++j) {
      cur.push_back(classes[j]);
      if (paths_node_disjoint(g, cur)) self(self, j + 1);
      cur.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

inline constexpr const char* kProtocolCsvHeader = "p,trials,advantage,stderr,abort_rate,mean_m_bits,bound_bits,wq_rate";

inline void write_protocol_row(std::ostream& os, double p, const AdvantageReport& r) {
  os << p << ',' << r.trials << ',' << r.advantage << ',' << r.stderr_ << ',' << r.abort_rate << ',' << r.mean_bits << ','
     << r.bound_bits << ',' << r.wq_rate << '\n';
}

}  // namespace xorreach
