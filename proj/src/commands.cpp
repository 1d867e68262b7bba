#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "xorreach/advantage.hpp"
#include "xorreach/chronogram.hpp"
#include "xorreach/meta_queries.hpp"
#include "xorreach/multi_butterfly.hpp"
#include "xorreach/reach_ds.hpp"
#include "xorreach/reachability.hpp"
#include "xorreach/subjects.hpp"
#include "xorreach/verify.hpp"

namespace xorreach::cli {
namespace {

// Bad user input detected after parsing.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A verification found a disagreement; the counterexample is already printed.
struct MismatchFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeArgs {
  unsigned B = 2;
  unsigned d = 2;
  unsigned b = 1;

  MultiShape shape() const {
    const MultiShape s{B, d, b};
    s.validate();
    return s;
  }
};

void add_shape(CLI::App* cmd, ShapeArgs& a) {
  cmd->add_option("--B", a.B, "butterfly degree")->capture_default_str();
  cmd->add_option("--d", a.d, "maximum depth")->capture_default_str();
  cmd->add_option("--b", a.b, "label bits")->capture_default_str();
}

/// Writes to --out when given, else to the command's stdout.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (path.empty()) {
      os_ = &fallback;
      return;
    }
    file_.open(path);
    if (!file_) throw UsageError("cannot open output file: " + path);
    os_ = &file_;
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_ = nullptr;
};

Workload make_workload(MultiShape shape, std::uint64_t seed) {
  Rng rng = substream(seed, "instance");
  const auto inst = MultiButterflyInstance::uniform(shape, rng);
  const auto reach = reduce_instance(inst);
  Workload w{shape, reach.universe().size(), reach.insertion_log(), {}};
  const std::uint64_t width = shape.query_width();
  for (NodeIndex s = 0; s < width; ++s)
    for (NodeIndex t = 0; t < width; ++t) w.queries.push_back({s, t, inst.multi_answer(s, t)});
  return w;
}

void write_workload_file(const std::string& path, const Workload& w) {
  std::ofstream f(path);
  if (!f) throw UsageError("cannot open workload file: " + path);
  write_workload(f, w);
}

// ---- verify-reduction ------------------------------------------------------

struct VerifyArgs {
  ShapeArgs shape;
  bool exhaustive = false;
  std::uint64_t trials = 1000;
  std::uint64_t seed = 1;
  std::string emit_workload;
  std::string instance;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  ReductionCheck check;
  std::string what;
  if (!a.instance.empty()) {
    std::ifstream f(a.instance);
    if (!f) throw UsageError("cannot open instance file: " + a.instance);
    const auto inst = multi_instance_from_json(nlohmann::json::parse(f));
    check_instance(inst, 0, check);
  } else {
    const MultiShape shape = a.shape.shape();
    check = a.exhaustive ? verify_reduction_exhaustive(shape) : verify_reduction_sampled(shape, a.trials, a.seed);
    if (!a.emit_workload.empty()) write_workload_file(a.emit_workload, make_workload(shape, a.seed));
  }
  out << check.instances << " labelings × " << check.queries_per_instance << " queries: " << check.mismatches
      << " mismatches\n";
  if (check.mismatches == 0) return kExitOk;
  const auto& m = *check.first;
  err << "mismatch B=" << a.shape.B << " d=" << a.shape.d << " b=" << a.shape.b << " seed=" << a.seed
      << (a.exhaustive ? " code=" : " trial=") << m.instance << " s=" << m.s << " t=" << m.t << " reachability=" << m.reachable
      << " multi=" << m.multi << '\n';
  return kExitMismatch;
}

// ---- emit-workload ---------------------------------------------------------

struct EmitArgs {
  ShapeArgs shape;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_emit(const EmitArgs& a, std::ostream& out) {
  const auto w = make_workload(a.shape.shape(), a.seed);
  Sink sink(a.out, out);
  write_workload(*sink, w);
  return kExitOk;
}

// ---- run-workload ----------------------------------------------------------

struct RunArgs {
  std::string in;
  std::string layout = "adjacency";
  std::string out;
  std::string trace;
};

template <class Layout>
int replay(const Workload& w, Layout layout, const RunArgs& a, std::ostream& out, std::ostream& err) {
  ReachabilityDS<Layout> ds(std::move(layout), 64, false, !a.trace.empty());
  const NodeUniverse universe(w.shape);
  Sink sink(a.out, out);
  *sink << "op,epoch,from,to,probes,result\n";
  for (const auto& ins : w.insertions) {
    ds.machine().set_phase(static_cast<Phase>(ins.epoch));
    ds.insert_edge(ins.from, ins.to);
    *sink << "insert," << ins.epoch << ',' << ins.from << ',' << ins.to << ',' << ds.last_cost() << ",\n";
  }
  ds.machine().set_phase(0);
  std::uint64_t mismatches = 0;
  const unsigned d = w.shape.depth;
  for (const auto& q : w.queries) {
    const bool r = ds.query_reach(universe.dense(ReachNodeId::tree_s(d, q.s)), universe.dense(ReachNodeId::tree_t(d, q.t)));
    *sink << "query,," << q.s << ',' << q.t << ',' << ds.last_cost() << ',' << (r ? 1 : 0) << '\n';
    if (r != q.expected) {
      if (mismatches == 0) err << "mismatch s=" << q.s << " t=" << q.t << " expected=" << q.expected << " got=" << r << '\n';
      ++mismatches;
    }
  }
  if (!a.trace.empty()) {
    std::ofstream f(a.trace);
    if (!f) throw UsageError("cannot open trace file: " + a.trace);
    ds.machine().dump_trace(f);
  }
  return mismatches == 0 ? kExitOk : kExitMismatch;
}

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  std::ifstream f(a.in);
  if (!f) throw UsageError("cannot open workload file: " + a.in);
  const auto w = read_workload(f);
  w.shape.validate();
  if (w.nodes != NodeUniverse(w.shape).size()) throw UsageError("workload node count does not match its shape");
  if (a.layout == "adjacency") return replay(w, AdjacencyListLayout(w.nodes, std::max(w.shape.degree, 2u)), a, out, err);
  if (a.layout == "closure") return replay(w, ClosureBitmapLayout(w.nodes), a, out, err);
  throw UsageError("unknown layout: " + a.layout);
}

// ---- chronogram ------------------------------------------------------------

struct ChronoArgs {
  ShapeArgs shape;
  bool b_given = false;
  bool small_b = false;
  std::string subject = "direct";
  std::uint64_t seed = 1;
  std::size_t draws = 200;
  std::size_t trace_draws = 20;
  std::size_t attempts = 10;
  std::string out;
};

unsigned premise_bits(unsigned d) {
  return std::max(2u, static_cast<unsigned>(std::ceil(std::log2(static_cast<double>(d)))) + 6);
}

MultiShape chronogram_shape(ShapeArgs s, bool b_given, bool small_b) {
  if (!b_given) s.b = premise_bits(std::max(1u, s.d));
  const MultiShape shape = s.shape();
  if (!label_width_premise(shape) && !small_b)
    throw UsageError("b below lg d + 6; pass --small-b to run anyway");
  return shape;
}

nlohmann::json chronogram_json(const ChronogramResult& r, const XorSubject& subject, std::uint64_t seed) {
  const auto& shape = subject.shape();
  nlohmann::json cells = nlohmann::json::object(), inter = nlohmann::json::object();
  std::size_t cells_sum = 0;
  for (unsigned i = 1; i <= shape.depth; ++i) {
    cells[std::to_string(i)] = r.cells_per_epoch[i];
    inter[std::to_string(i)] = r.stats.mean_intersection[i];
    cells_sum += r.cells_per_epoch[i];
  }
  nlohmann::json j = {{"B", shape.degree},
                      {"d", shape.depth},
                      {"b", shape.bits},
                      {"subject", subject.name()},
                      {"seed", seed},
                      {"premise_b", label_width_premise(shape)},
                      {"cells_per_epoch", cells},
                      {"cells_sum", cells_sum},
                      {"written_cells", r.written_cells},
                      {"t_q", r.stats.t_q},
                      {"mean_cells", r.stats.mean_cells},
                      {"mean_intersection", inter},
                      {"selected_epoch", r.choice.epoch},
                      {"selected_intersection", r.choice.intersection},
                      {"epoch_bound", r.choice.bound}};
  const auto& s = r.search;
  j["fixing"] = {{"found", s.found},
                 {"attempts", s.attempts},
                 {"seed", s.fixing ? nlohmann::json(s.fixing->seed) : nlohmann::json(nullptr)},
                 {"blocked_fraction", s.blocked_fraction},
                 {"blocked_bound", s.blocked_bound},
                 {"intersection", s.intersection},
                 {"intersection_bound", s.intersection_bound},
                 {"cells", s.cells},
                 {"cells_bound", s.cells_bound}};
  if (r.validity && s.fixing) {
    const auto& v = *r.validity;
    std::set<QueryPair> unblocked;
    for (const auto& q : s.stats->queries)
      if (!is_blocked(*s.fixing, q.s, q.t)) {
        const auto [si, ti] = project_query(shape.depth, shape.degree, v.epoch, q.s, q.t);
        unblocked.insert({si, ti});
      }
    j["validity"] = {{"valid_classes", v.representative.size()},
                     {"classes_total", v.classes_total},
                     {"fraction", v.valid_class_fraction()},
                     {"blocked_fraction", v.blocked_fraction},
                     {"unblocked_classes", unblocked.size()},
                     {"fraction_of_unblocked", unblocked.empty() ? 0.0
                                                                 : static_cast<double>(v.representative.size()) /
                                                                       static_cast<double>(unblocked.size())}};
  } else {
    j["validity"] = nullptr;
  }
  if (r.structure)
    j["static"] = {{"S", r.structure->updated_bound()},
                   {"S_cac", r.structure->cache_size()},
                   {"cache_write_bound", r.structure->cache_write_bound()}};
  else
    j["static"] = nullptr;
  return j;
}

ChronogramConfig chrono_config(std::uint64_t seed, std::size_t draws, std::size_t trace_draws, std::size_t attempts) {
  ChronogramConfig cfg;
  cfg.seed = seed;
  cfg.conditional_draws = draws;
  cfg.trace_draws = trace_draws;
  cfg.max_attempts = attempts;
  return cfg;
}

int cmd_chronogram(const ChronoArgs& a, std::ostream& out) {
  const MultiShape shape = chronogram_shape(a.shape, a.b_given, a.small_b);
  std::shared_ptr<const XorSubject> subject = make_subject(a.subject, shape);
  const auto r = run_chronogram(subject, chrono_config(a.seed, a.draws, a.trace_draws, a.attempts));
  Sink sink(a.out, out);
  *sink << chronogram_json(r, *subject, a.seed).dump(2) << '\n';
  return kExitOk;
}

// ---- protocol --------------------------------------------------------------

struct ProtocolArgs {
  ShapeArgs shape{2, 1, 1};
  std::string subject = "direct";
  std::vector<double> ps{0.5};
  std::vector<std::uint64_t> seeds{1};
  std::size_t trials = 1000;
  std::string mode = "monte-carlo";
  std::size_t k = 0;
  std::size_t metas = 64;
  std::size_t draws = 200;
  std::size_t attempts = 10;
  unsigned w = 64;
  std::string out;
};

std::vector<MetaQuery> protocol_metas(const StaticXorStructure& sx, const ProtocolArgs& a, std::uint64_t seed, bool exact) {
  const ButterflyGraph g(sx.input_params());
  const std::size_t k = a.k != 0 ? a.k : default_meta_size(g.width());
  if (exact) {
    auto metas = enumerate_metas(g, sx.query_set(), k);
    if (metas.empty()) throw MismatchFound("no node-disjoint meta-query of size " + std::to_string(k) + " in the valid query set");
    return metas;
  }
  Rng rng = substream(seed, "metas");
  std::vector<MetaQuery> metas;
  const QuerySet in_set = [&](QueryPair q) { return sx.answers(q); };
  for (std::size_t attempt = 0; attempt < 20 * a.metas && metas.size() < a.metas; ++attempt) {
    auto s = sample_meta_query(g, in_set, k, rng);
    if (s.meta) metas.push_back(std::move(*s.meta));
  }
  if (metas.empty()) throw MismatchFound("meta-query sampler never succeeded at k=" + std::to_string(k));
  return metas;
}

int cmd_protocol(const ProtocolArgs& a, std::ostream& out, std::ostream& err) {
  for (double p : a.ps)
    if (!(p > 0 && p < 1)) throw UsageError("p must lie in the open interval (0, 1)");
  if (a.seeds.empty()) throw UsageError("at least one seed is required");
  if (a.mode != "monte-carlo" && a.mode != "exact") throw UsageError("mode must be exact or monte-carlo");
  const bool exact = a.mode == "exact";
  const MultiShape shape = a.shape.shape();
  std::shared_ptr<const XorSubject> subject = make_subject(a.subject, shape);

  struct Prepared {
    StaticXorStructure structure;
    std::vector<MetaQuery> metas;
  };
  std::vector<Prepared> prepared;
  for (auto seed : a.seeds) {
    const auto r = run_chronogram(subject, chrono_config(seed, a.draws, 20, a.attempts));
    if (!r.structure) {
      err << "no fixing found B=" << shape.degree << " d=" << shape.depth << " b=" << shape.bits << " seed=" << seed
          << " epoch=" << r.choice.epoch << '\n';
      return kExitMismatch;
    }
    auto metas = protocol_metas(*r.structure, a, seed, exact);
    prepared.push_back({*r.structure, std::move(metas)});
  }

  Sink sink(a.out, out);
  *sink << kProtocolCsvHeader << '\n' << std::setprecision(10);
  for (double p : a.ps)
    for (std::size_t j = 0; j < a.seeds.size(); ++j) {
      const AdvantageGame game{&prepared[j].structure, prepared[j].metas, a.w};
      const auto rep = exact ? exact_advantage(game, MessageModel::kProtocol, p)
                             : monte_carlo_advantage(game, MessageModel::kProtocol, p, a.trials,
                                                     splitmix64(a.seeds[j]) ^ std::hash<double>{}(p));
      write_protocol_row(*sink, p, rep);
    }
  return kExitOk;
}

// ---- meta-sample -----------------------------------------------------------

struct MetaArgs {
  unsigned B = 2;
  unsigned d = 3;
  std::size_t k = 0;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_meta(const MetaArgs& a, std::ostream& out) {
  const ButterflyGraph g(ButterflyParams{a.B, a.d, 1});
  const std::size_t k = a.k != 0 ? a.k : default_meta_size(g.width());
  Rng rng = substream(a.seed, "meta-sample");
  const auto s = sample_meta_query(g, all_pairs(), k, rng);
  nlohmann::json j = {{"B", a.B}, {"d", a.d}, {"k", k}, {"seed", a.seed}, {"drawn", s.drawn},
                      {"qualifying", s.qualifying}, {"success", s.meta.has_value()}};
  j["meta"] = s.meta ? meta_query_to_json(g, *s.meta) : nlohmann::json(nullptr);
  Sink sink(a.out, out);
  *sink << j.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Butterfly XOR / reachability lower-bound experiment harness"};
  app.require_subcommand(1);
  std::function<int()> action;

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify-reduction", "check reachability answers against multi-butterfly answers");
  add_shape(verify, va.shape);
  verify->add_flag("--exhaustive", va.exhaustive, "enumerate every labeling");
  verify->add_option("--trials", va.trials, "sampled instances")->capture_default_str();
  verify->add_option("--seed", va.seed, "root seed")->capture_default_str();
  verify->add_option("--emit-workload", va.emit_workload, "write a workload file");
  verify->add_option("--instance", va.instance, "verify one JSON multi-butterfly instance");
  verify->callback([&] { action = [&] { return cmd_verify(va, out, err); }; });

  EmitArgs ea;
  auto* emit = app.add_subcommand("emit-workload", "write the insertion/query workload of a seeded instance");
  add_shape(emit, ea.shape);
  emit->add_option("--seed", ea.seed, "root seed")->capture_default_str();
  emit->add_option("--out", ea.out, "output path (stdout if absent)");
  emit->callback([&] { action = [&] { return cmd_emit(ea, out); }; });

  RunArgs ra;
  auto* runw = app.add_subcommand("run-workload", "replay a workload on a cell-probe reachability structure");
  runw->add_option("--in", ra.in, "workload file")->required();
  runw->add_option("--layout", ra.layout, "adjacency or closure")->capture_default_str();
  runw->add_option("--out", ra.out, "per-operation CSV (stdout if absent)");
  runw->add_option("--trace", ra.trace, "probe trace CSV");
  runw->callback([&] { action = [&] { return cmd_run(ra, out, err); }; });

  ChronoArgs ca;
  auto* chrono = app.add_subcommand("chronogram", "epoch attribution, epoch selection, fixing search, validity");
  add_shape(chrono, ca.shape);
  chrono->add_flag("--small-b", ca.small_b, "allow b below lg d + 6");
  chrono->add_option("--subject", ca.subject, "direct, zero-probe, reduction, reduction-closure")->capture_default_str();
  chrono->add_option("--seed", ca.seed, "root seed")->capture_default_str();
  chrono->add_option("--draws", ca.draws, "conditional draws per fixing")->capture_default_str();
  chrono->add_option("--trace-draws", ca.trace_draws, "update sequences for epoch selection")->capture_default_str();
  chrono->add_option("--attempts", ca.attempts, "fixing search attempts")->capture_default_str();
  chrono->add_option("--out", ca.out, "JSON report path (stdout if absent)");
  chrono->callback([&] {
    ca.b_given = chrono->count("--b") > 0;
    action = [&] { return cmd_chronogram(ca, out); };
  });

  ProtocolArgs pa;
  auto* proto = app.add_subcommand("protocol", "advantage of the one-way simulation protocol");
  add_shape(proto, pa.shape);
  proto->add_option("--subject", pa.subject, "dynamic structure to reduce")->capture_default_str();
  proto->add_option("--p", pa.ps, "sampling probabilities in (0, 1)")->capture_default_str();
  proto->add_option("--seed", pa.seeds, "root seeds")->capture_default_str();
  proto->add_option("--trials", pa.trials, "Monte-Carlo trials")->capture_default_str();
  proto->add_option("--mode", pa.mode, "exact or monte-carlo")->capture_default_str();
  proto->add_option("--k", pa.k, "meta-query size (0: floor(n / lg n))")->capture_default_str();
  proto->add_option("--metas", pa.metas, "meta-queries sampled per seed")->capture_default_str();
  proto->add_option("--draws", pa.draws, "conditional draws per fixing")->capture_default_str();
  proto->add_option("--w", pa.w, "word size in bits")->capture_default_str();
  proto->add_option("--out", pa.out, "CSV path (stdout if absent)");
  proto->callback([&] { action = [&] { return cmd_protocol(pa, out, err); }; });

  MetaArgs ma;
  auto* meta = app.add_subcommand("meta-sample", "sample one node-disjoint meta-query");
  meta->add_option("--B", ma.B, "butterfly degree")->capture_default_str();
  meta->add_option("--d", ma.d, "depth")->capture_default_str();
  meta->add_option("--k", ma.k, "meta-query size (0: floor(n / lg n))")->capture_default_str();
  meta->add_option("--seed", ma.seed, "root seed")->capture_default_str();
  meta->add_option("--out", ma.out, "JSON path (stdout if absent)");
  meta->callback([&] { action = [&] { return cmd_meta(ma, out); }; });

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CapacityError& e) {
    err << "capacity error: " << e.what() << '\n';
    return kExitCapacity;
  } catch (const MismatchFound& e) {
    err << "failure: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const RangeError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const PreconditionError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitMismatch;
  }
}

}  // namespace xorreach::cli
