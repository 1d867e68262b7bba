#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "xorreach/butterfly.hpp"
#include "xorreach/cell_probe.hpp"
#include "xorreach/errors.hpp"
#include "xorreach/multi_butterfly.hpp"
#include "xorreach/rng.hpp"
#include "xorreach/subjects.hpp"

namespace xorreach {

/// Every (s, t) in [B^d] x [B^d], lexicographically.
inline std::vector<QueryPair> all_queries(std::uint64_t width) {
  if (width * width > (std::uint64_t{1} << 20)) throw CapacityError("query space too large to enumerate");
  std::vector<QueryPair> out;
  out.reserve(width * width);
  for (NodeIndex s = 0; s < width; ++s)
    for (NodeIndex t = 0; t < width; ++t) out.push_back({s, t});
  return out;
}

struct QueryProbes {
  QueryPair query;
  bool answer = false;
  std::uint64_t probes = 0;                // with multiplicity
  std::vector<Address> cells;              // T(U, (s, t)), sorted
  std::vector<std::uint32_t> per_epoch;    // |T ∩ C_i| at index i
};

/// One run of all epochs d..1 on a subject followed by a batch of queries.
struct EpochTrace {
  MultiShape shape;
  std::map<Phase, std::set<Address>> cells_by_epoch;  // C_i(U)
  std::size_t written_cells = 0;
  std::vector<QueryProbes> queries;
};

/// Applies the epochs to `mem`, d first. `updates` is ordered d..1.
inline void apply_updates(const XorSubject& subject, CellProbeMachine& mem, const std::vector<EdgeLabeling>& updates) {
  const unsigned d = subject.shape().depth;
  if (updates.size() != d) throw PreconditionError("expected one labeling per epoch, ordered d..1");
  for (unsigned k = 0; k < d; ++k) {
    mem.set_phase(static_cast<Phase>(d - k));
    subject.apply_epoch(mem, d - k, updates[k]);
    mem.reset_log();
  }
  mem.set_phase(0);
}

/// Runs one query on a machine and attributes its probed cells to epochs.
inline QueryProbes probe_query(const XorSubject& subject, CellProbeMachine& mem, QueryPair q) {
  const auto pos = mem.log_position();
  QueryProbes out;
  out.query = q;
  out.answer = subject.query(mem, q.s, q.t);
  out.probes = mem.log_position() - pos;
  out.cells = mem.probed_since(pos);
  std::sort(out.cells.begin(), out.cells.end());
  out.per_epoch.assign(subject.shape().depth + 1, 0);
  for (auto a : out.cells)
    if (auto w = mem.last_writer(a); w && *w >= 1 && *w <= static_cast<Phase>(subject.shape().depth)) ++out.per_epoch[*w];
  mem.reset_log();
  return out;
}

inline EpochTrace run_epochs(const XorSubject& subject, const std::vector<EdgeLabeling>& updates,
                             const std::vector<QueryPair>& queries) {
  CellProbeMachine mem;
  apply_updates(subject, mem, updates);
  EpochTrace trace;
  trace.shape = subject.shape();
  trace.cells_by_epoch = mem.cells_by_phase();
  trace.written_cells = mem.written_count();
  for (const auto& q : queries) trace.queries.push_back(probe_query(subject, mem, q));
  return trace;
}

/// Uniform updates for every epoch, ordered d..1.
inline std::vector<EdgeLabeling> uniform_updates(const MultiShape& shape, Rng& rng) {
  std::vector<EdgeLabeling> out;
  for (unsigned i = shape.depth; i >= 1; --i) out.push_back(EdgeLabeling::uniform(shape.graph_params(i), rng));
  return out;
}

/// Empirical epoch statistics over a set of traces.
struct EpochStats {
  unsigned depth = 0;
  std::vector<double> mean_intersection;  // E|T ∩ C_i| at index i
  double t_q = 0;                         // mean probes per query
  double mean_cells = 0;                  // E|T|
  double mean_attributed = 0;             // E sum_i |T ∩ C_i|
  std::size_t samples = 0;
};

inline EpochStats epoch_stats(const std::vector<EpochTrace>& traces) {
  if (traces.empty()) throw PrecisionError("no traces to summarize");
  EpochStats st;
  st.depth = traces.front().shape.depth;
  st.mean_intersection.assign(st.depth + 1, 0.0);
  for (const auto& tr : traces)
    for (const auto& q : tr.queries) {
      ++st.samples;
      st.t_q += static_cast<double>(q.probes);
      st.mean_cells += static_cast<double>(q.cells.size());
      for (unsigned i = 1; i <= st.depth; ++i) {
        st.mean_intersection[i] += q.per_epoch[i];
        st.mean_attributed += q.per_epoch[i];
      }
    }
  if (st.samples == 0) throw PrecisionError("traces contain no queries");
  const double n = static_cast<double>(st.samples);
  st.t_q /= n;
  st.mean_cells /= n;
  st.mean_attributed /= n;
  for (auto& v : st.mean_intersection) v /= n;
  return st;
}

struct EpochChoice {
  unsigned epoch = 0;
  double intersection = 0;  // empirical E|T ∩ C_i|
  double bound = 0;         // 2 t_q / d
};

/// Lightest epoch in {floor(d/2)+1, ..., d}; ties go to the smaller epoch.
inline EpochChoice select_epoch(const EpochStats& st) {
  const unsigned d = st.depth;
  if (d < 2) throw PreconditionError("epoch selection needs d >= 2");
  EpochChoice best;
  best.bound = 2.0 * st.t_q / d;
  for (unsigned i = d / 2 + 1; i <= d; ++i)
    if (best.epoch == 0 || st.mean_intersection[i] < best.intersection) {
      best.epoch = i;
      best.intersection = st.mean_intersection[i];
    }
  // min over the upper half <= its average <= sum / (d/2) <= 2 t_q / d
  if (best.intersection > best.bound + 1e-9) throw StateError("lightest epoch exceeds 2 t_q / d");
  return best;
}

/// Labelings for every epoch except the designated one.
struct Fixing {
  MultiShape shape;
  unsigned epoch = 0;
  std::map<unsigned, EdgeLabeling> labelings;
  std::uint64_t seed = 0;

  static Fixing sample(const MultiShape& shape, unsigned epoch, std::uint64_t seed) {
    Fixing f{shape, epoch, {}, seed};
    Rng rng = substream(seed, "fixing");
    for (unsigned j = shape.depth; j >= 1; --j)
      if (j != epoch) f.labelings.emplace(j, EdgeLabeling::uniform(shape.graph_params(j), rng));
    return f;
  }

  const EdgeLabeling& at(unsigned j) const {
    const auto it = labelings.find(j);
    if (it == labelings.end()) throw StateError("fixing has no labeling for this epoch");
    return it->second;
  }

  /// Full update sequence d..1 with `input` in the designated epoch.
  std::vector<EdgeLabeling> with_input(const EdgeLabeling& input) const {
    std::vector<EdgeLabeling> out;
    for (unsigned j = shape.depth; j >= 1; --j) out.push_back(j == epoch ? input : at(j));
    return out;
  }
};

/// Is (s, t) blocked by some epoch j != i under the fixing?
inline bool is_blocked(const Fixing& fixing, NodeIndex s, NodeIndex t) {
  for (const auto& [j, labeling] : fixing.labelings) {
    const ButterflyGraph g(fixing.shape.graph_params(j));
    const auto [sj, tj] = project_query(fixing.shape.depth, fixing.shape.degree, j, s, t);
    if (zero_xor_answer(g, labeling, sj, tj)) return true;
  }
  return false;
}

inline double blocked_fraction(const Fixing& fixing) {
  const auto qs = all_queries(fixing.shape.query_width());
  std::size_t blocked = 0;
  for (const auto& q : qs) blocked += is_blocked(fixing, q.s, q.t);
  return static_cast<double>(blocked) / static_cast<double>(qs.size());
}

/// Per-query conditional expectations E[. | U_{!=i} = fixing] estimated by
/// redrawing U_i.
struct ConditionalStats {
  unsigned epoch = 0;
  std::size_t draws = 0;
  std::vector<QueryPair> queries;
  std::vector<double> mean_intersection;  // E|T ∩ C_i|
  std::vector<double> mean_cells;         // E|T|
  std::vector<double> se_intersection;    // standard errors
  std::vector<double> se_cells;
  double overall_intersection = 0;
  double overall_cells = 0;
};

inline ConditionalStats conditional_sweep(const XorSubject& subject, const Fixing& fixing, std::size_t draws, Rng& rng) {
  const MultiShape& shape = subject.shape();
  const unsigned i = fixing.epoch;
  ConditionalStats cs;
  cs.epoch = i;
  cs.draws = draws;
  cs.queries = all_queries(shape.query_width());
  const std::size_t nq = cs.queries.size();
  std::vector<double> s1(nq, 0), s2(nq, 0), c1(nq, 0), c2(nq, 0);

  CellProbeMachine base;
  for (unsigned j = shape.depth; j > i; --j) {
    base.set_phase(static_cast<Phase>(j));
    subject.apply_epoch(base, j, fixing.at(j));
    base.reset_log();
  }
  for (std::size_t draw = 0; draw < draws; ++draw) {
    CellProbeMachine mem = base;
    const auto input = EdgeLabeling::uniform(shape.graph_params(i), rng);
    for (unsigned j = i; j >= 1; --j) {
      mem.set_phase(static_cast<Phase>(j));
      subject.apply_epoch(mem, j, j == i ? input : fixing.at(j));
      mem.reset_log();
    }
    mem.set_phase(0);
    for (std::size_t q = 0; q < nq; ++q) {
      const auto run = probe_query(subject, mem, cs.queries[q]);
      const double x = run.per_epoch[i];
      const double y = static_cast<double>(run.cells.size());
      s1[q] += x;
      s2[q] += x * x;
      c1[q] += y;
      c2[q] += y * y;
    }
  }
  const double n = static_cast<double>(draws);
  auto se = [n](double sum, double sq) {
    if (n < 2) return 0.0;
    const double mean = sum / n;
    return std::sqrt(std::max(0.0, (sq / n - mean * mean) * n / (n - 1)) / n);
  };
  for (std::size_t q = 0; q < nq; ++q) {
    cs.mean_intersection.push_back(s1[q] / n);
    cs.mean_cells.push_back(c1[q] / n);
    cs.se_intersection.push_back(se(s1[q], s2[q]));
    cs.se_cells.push_back(se(c1[q], c2[q]));
    cs.overall_intersection += s1[q] / n;
    cs.overall_cells += c1[q] / n;
  }
  cs.overall_intersection /= static_cast<double>(nq);
  cs.overall_cells /= static_cast<double>(nq);
  return cs;
}

struct ChronogramConfig {
  std::size_t trace_draws = 20;         // update sequences used to pick the epoch
  std::size_t conditional_draws = 200;  // draws of U_i per fixing
  std::size_t min_draws = 8;
  std::size_t max_attempts = 10;
  std::uint64_t seed = 1;
};

/// Validity of query index `q`: unblocked, E|T ∩ C_i| <= 72 t_q / d and
/// E|T| <= 36 t_q, conditioned on the fixing.
inline bool is_valid_query(const ConditionalStats& cs, const Fixing& fixing, std::size_t q, double t_q,
                           std::size_t min_draws = ChronogramConfig{}.min_draws) {
  if (cs.draws < min_draws) throw PrecisionError("too few draws of U_i to estimate conditional expectations");
  const auto& query = cs.queries.at(q);
  if (is_blocked(fixing, query.s, query.t)) return false;
  const double d = fixing.shape.depth;
  return cs.mean_intersection[q] <= 72.0 * t_q / d && cs.mean_cells[q] <= 36.0 * t_q;
}

struct FixingSearch {
  bool found = false;
  std::size_t attempts = 0;
  std::optional<Fixing> fixing;
  std::optional<ConditionalStats> stats;
  double blocked_fraction = 0;
  double blocked_bound = 0;  // 3 d 2^-b
  double intersection = 0;
  double intersection_bound = 0;  // 6 t_q / d
  double cells = 0;
  double cells_bound = 0;  // 3 t_q
  bool premise_b = false;  // b >= lg d + 6
};

inline bool label_width_premise(const MultiShape& shape) {
  return static_cast<double>(shape.bits) >= std::log2(static_cast<double>(shape.depth)) + 6.0;
}

/// Samples fixings U_{!=i} until one meets the three aggregate bounds.
inline FixingSearch find_fixing(const XorSubject& subject, unsigned epoch, double t_q, const ChronogramConfig& cfg) {
  const MultiShape& shape = subject.shape();
  FixingSearch out;
  out.premise_b = label_width_premise(shape);
  const double d = shape.depth;
  out.blocked_bound = 3.0 * d * std::ldexp(1.0, -static_cast<int>(shape.bits));
  out.intersection_bound = 6.0 * t_q / d;
  out.cells_bound = 3.0 * t_q;
  for (std::size_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    ++out.attempts;
    const std::uint64_t seed = splitmix64(cfg.seed ^ splitmix64(0xf1c5 + attempt));
    Fixing fixing = Fixing::sample(shape, epoch, seed);
    Rng rng = substream(seed, "conditional");
    auto cs = conditional_sweep(subject, fixing, cfg.conditional_draws, rng);
    out.blocked_fraction = blocked_fraction(fixing);
    out.intersection = cs.overall_intersection;
    out.cells = cs.overall_cells;
    const bool ok = out.blocked_fraction <= out.blocked_bound && out.intersection <= out.intersection_bound + 1e-12 &&
                    out.cells <= out.cells_bound + 1e-12;
    if (ok) {
      out.found = true;
      out.fixing = std::move(fixing);
      out.stats = std::move(cs);
      return out;
    }
  }
  return out;
}

/// Valid queries and the induced set of source-sink classes on G_i.
struct ValidityReport {
  unsigned epoch = 0;
  std::vector<bool> valid;  // aligned with ConditionalStats::queries
  std::map<QueryPair, QueryPair> representative;  // class (s_i, t_i) -> first valid (s, t)
  std::uint64_t classes_total = 0;  // B^(2i)
  double blocked_fraction = 0;

  double valid_class_fraction() const {
    return classes_total == 0 ? 0.0 : static_cast<double>(representative.size()) / static_cast<double>(classes_total);
  }
};

inline ValidityReport validity_report(const ConditionalStats& cs, const Fixing& fixing, double t_q,
                                      std::size_t min_draws = ChronogramConfig{}.min_draws) {
  const MultiShape& shape = fixing.shape;
  ValidityReport rep;
  rep.epoch = fixing.epoch;
  const std::uint64_t classes = checked_pow(shape.degree, fixing.epoch);
  rep.classes_total = classes * classes;
  std::size_t blocked = 0;
  for (std::size_t q = 0; q < cs.queries.size(); ++q) {
    blocked += is_blocked(fixing, cs.queries[q].s, cs.queries[q].t);
    const bool v = is_valid_query(cs, fixing, q, t_q, min_draws);
    rep.valid.push_back(v);
    if (!v) continue;
    const auto [si, ti] = project_query(shape.depth, shape.degree, fixing.epoch, cs.queries[q].s, cs.queries[q].t);
    // queries are scanned lexicographically, so the first insert wins
    rep.representative.emplace(QueryPair{si, ti}, cs.queries[q]);
  }
  rep.blocked_fraction = static_cast<double>(blocked) / static_cast<double>(cs.queries.size());
  return rep;
}

/// Static 0-XOR in One Butterfly structure on G_i obtained from a dynamic
/// subject: memory pre-initialized with epochs j > i under the fixing, the
/// input applied as epoch i (the updated cells), epochs j < i written to a
/// cache that queries read for free.
class StaticXorStructure {
 public:
  struct Loaded {
    std::map<Address, Word> updated;
    std::map<Address, Word> cache;
  };

  struct QueryRun {
    bool answer = false;
    std::vector<Address> probed;   // distinct non-cache cells, first-probe order
    std::vector<Word> contents;    // content seen at each probed cell
    std::uint64_t probes = 0;      // non-cache probes with multiplicity
    std::uint64_t cache_reads = 0;
  };

  static StaticXorStructure build(std::shared_ptr<const XorSubject> subject, Fixing fixing, const ValidityReport& validity) {
    StaticXorStructure sx;
    sx.subject_ = std::move(subject);
    sx.fixing_ = std::move(fixing);
    sx.representative_ = validity.representative;
    const auto& shape = sx.subject_->shape();
    const unsigned i = sx.fixing_.epoch;
    if (validity.epoch != i) throw PreconditionError("validity report is for a different epoch");

    CellProbeMachine pre;
    for (unsigned j = shape.depth; j > i; --j) {
      pre.set_phase(static_cast<Phase>(j));
      sx.subject_->apply_epoch(pre, j, sx.fixing_.at(j));
      pre.reset_log();
    }
    sx.snapshot_ = std::make_shared<const MemorySnapshot>(pre.snapshot());
    sx.updated_bound_ = sx.subject_->epoch_probe_bound(i);
    for (unsigned j = 1; j < i; ++j) sx.cache_write_bound_ += sx.subject_->epoch_probe_bound(j);

    const auto reference = sx.load_unchecked(EdgeLabeling::zeros(shape.graph_params(i)));
    for (const auto& [a, v] : reference.cache) sx.directory_.push_back(a);
    return sx;
  }

  unsigned epoch() const { return fixing_.epoch; }
  const Fixing& fixing() const { return fixing_; }
  const XorSubject& subject() const { return *subject_; }
  ButterflyParams input_params() const { return subject_->shape().graph_params(fixing_.epoch); }

  /// S: bound on updated cells (worst-case epoch-i probes).
  std::uint64_t updated_bound() const { return updated_bound_; }
  /// S_cac: size of the public cache directory.
  std::uint64_t cache_size() const { return directory_.size(); }
  /// Worst-case probes of epochs j < i, which bounds S_cac.
  std::uint64_t cache_write_bound() const { return cache_write_bound_; }
  const std::vector<Address>& cache_directory() const { return directory_; }

  PreinitRule preinit() const { return snapshot_preinit(snapshot_, zero_preinit()); }

  /// Valid classes (s_i, t_i) this structure answers, lexicographic.
  std::vector<QueryPair> query_set() const {
    std::vector<QueryPair> out;
    for (const auto& [cls, rep] : representative_) out.push_back(cls);
    return out;
  }
  bool answers(QueryPair cls) const { return representative_.count(cls) != 0; }
  QueryPair representative(QueryPair cls) const {
    const auto it = representative_.find(cls);
    if (it == representative_.end()) throw RangeError("query class has no valid representative");
    return it->second;
  }

  Loaded load(const EdgeLabeling& input) const {
    auto out = load_unchecked(input);
    if (out.cache.size() != directory_.size() ||
        !std::equal(directory_.begin(), directory_.end(), out.cache.begin(), [](Address a, const auto& kv) { return a == kv.first; }))
      throw CapacityError("cache contents fall outside the public cache directory");
    return out;
  }

  /// Runs the dynamic query on the class representative against memory
  /// = preinit overlaid with `overlay`, with `cache` readable for free.
  QueryRun query(const std::map<Address, Word>& overlay, const std::map<Address, Word>& cache, QueryPair cls) const {
    const QueryPair q = representative(cls);
    OverlayMemory mem(preinit(), overlay, cache);
    QueryRun run;
    run.answer = subject_->query(mem, q.s, q.t);
    run.probed = std::move(mem.probed);
    run.contents = std::move(mem.contents);
    run.probes = mem.probes;
    run.cache_reads = mem.cache_reads;
    return run;
  }

  QueryRun query(const Loaded& loaded, QueryPair cls) const { return query(loaded.updated, loaded.cache, cls); }

  /// Cache as a map from the directory and contents in directory order.
  std::map<Address, Word> cache_from_contents(const std::vector<Word>& contents) const {
    if (contents.size() != directory_.size()) throw PreconditionError("cache contents do not match the directory");
    std::map<Address, Word> out;
    for (std::size_t k = 0; k < contents.size(); ++k) out.emplace(directory_[k], contents[k]);
    return out;
  }

 private:
  class OverlayMemory final : public CellMemory {
   public:
    OverlayMemory(PreinitRule preinit, const std::map<Address, Word>& overlay, const std::map<Address, Word>& cache)
        : preinit_(std::move(preinit)), overlay_(overlay), cache_(cache) {}

    Word read(Address addr) override {
      if (const auto it = cache_.find(addr); it != cache_.end()) {
        ++cache_reads;
        return it->second;
      }
      ++probes;
      const auto it = overlay_.find(addr);
      const Word value = it != overlay_.end() ? it->second : preinit_(addr);
      if (seen_.insert(addr).second) {
        probed.push_back(addr);
        contents.push_back(value);
      }
      return value;
    }

    void write(Address, Word) override { throw StateError("static structure queries are read-only"); }

    std::vector<Address> probed;
    std::vector<Word> contents;
    std::uint64_t probes = 0;
    std::uint64_t cache_reads = 0;

   private:
    PreinitRule preinit_;
    const std::map<Address, Word>& overlay_;
    const std::map<Address, Word>& cache_;
    std::set<Address> seen_;
  };

  Loaded load_unchecked(const EdgeLabeling& input) const {
    const unsigned i = fixing_.epoch;
    if (!(input.params() == input_params())) throw PreconditionError("input labeling is not for G_i");
    CellProbeMachine mem(64, preinit());
    for (unsigned j = i; j >= 1; --j) {
      mem.set_phase(static_cast<Phase>(j));
      subject_->apply_epoch(mem, j, j == i ? input : fixing_.at(j));
      mem.reset_log();
    }
    const Phase pi = static_cast<Phase>(i);
    Loaded out;
    out.updated = mem.written_where([pi](Phase w) { return w == pi; });
    out.cache = mem.written_where([pi](Phase w) { return w < pi; });
    return out;
  }

  std::shared_ptr<const XorSubject> subject_;
  Fixing fixing_;
  std::map<QueryPair, QueryPair> representative_;
  std::shared_ptr<const MemorySnapshot> snapshot_;
  std::vector<Address> directory_;
  std::uint64_t updated_bound_ = 0;
  std::uint64_t cache_write_bound_ = 0;
};

/// Whole dynamic-to-static pipeline: trace, epoch choice, fixing search,
/// validity and (when a fixing is found) the static structure.
struct ChronogramResult {
  EpochStats stats;
  EpochChoice choice;
  std::vector<std::size_t> cells_per_epoch;  // |C_i| of the first trace, index i
  std::size_t written_cells = 0;
  FixingSearch search;
  std::optional<ValidityReport> validity;
  std::optional<StaticXorStructure> structure;
};

inline ChronogramResult run_chronogram(std::shared_ptr<const XorSubject> subject, const ChronogramConfig& cfg) {
  const MultiShape& shape = subject->shape();
  ChronogramResult res;
  Rng rng = substream(cfg.seed, "chronogram-trace");
  const auto queries = all_queries(shape.query_width());
  std::vector<EpochTrace> traces;
  for (std::size_t k = 0; k < cfg.trace_draws; ++k) traces.push_back(run_epochs(*subject, uniform_updates(shape, rng), queries));
  res.stats = epoch_stats(traces);
  res.cells_per_epoch.assign(shape.depth + 1, 0);
  for (const auto& [phase, cells] : traces.front().cells_by_epoch)
    if (phase >= 1 && phase <= static_cast<Phase>(shape.depth)) res.cells_per_epoch[phase] = cells.size();
  res.written_cells = traces.front().written_cells;
  res.choice = shape.depth >= 2 ? select_epoch(res.stats) : EpochChoice{1, res.stats.mean_intersection[1], 2 * res.stats.t_q};
  res.search = find_fixing(*subject, res.choice.epoch, res.stats.t_q, cfg);
  if (res.search.found) {
    res.validity = validity_report(*res.search.stats, *res.search.fixing, res.stats.t_q, cfg.min_draws);
    res.structure = StaticXorStructure::build(subject, *res.search.fixing, *res.validity);
  }
  return res;
}

}  // namespace xorreach
