#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xorreach/errors.hpp"

namespace xorreach {

using Address = std::uint64_t;
using Word = std::uint64_t;
using Phase = int;

/// Content of a cell that has never been written. Must be a pure function.
using PreinitRule = std::function<Word(Address)>;

inline PreinitRule zero_preinit() {
  return [](Address) -> Word { return 0; };
}

/// Minimal memory interface the data structures are written against. All
/// of a structure's persistent state must go through it.
class CellMemory {
 public:
  virtual ~CellMemory() = default;
  virtual Word read(Address addr) = 0;
  virtual void write(Address addr, Word value) = 0;
};

enum class ProbeKind : std::uint8_t { kRead, kWrite };

inline const char* to_string(ProbeKind k) { return k == ProbeKind::kRead ? "read" : "write"; }

struct ProbeRecord {
  std::uint64_t seq = 0;
  ProbeKind kind = ProbeKind::kRead;
  Address address = 0;
  Phase phase = 0;
  Word value_after = 0;
  // Last writer of the cell immediately before this probe.
  std::optional<Phase> writer_before;
};

struct ProbeReport {
  std::uint64_t t_tot = 0;
  std::uint64_t t_q_updated = 0;
  std::map<Phase, std::uint64_t> per_phase;
};

/// Sparse w-bit cell memory with lazily evaluated pre-initialized contents,
/// a probe log, and last-writer phase attribution.
class CellProbeMachine : public CellMemory {
 public:
  static constexpr std::size_t kDefaultLogCap = std::size_t{1} << 24;

  explicit CellProbeMachine(unsigned word_bits = 64, PreinitRule preinit = zero_preinit(),
                            std::size_t log_cap = kDefaultLogCap)
      : word_bits_(word_bits), preinit_(std::move(preinit)), log_cap_(log_cap) {
    if (word_bits_ < 1 || word_bits_ > 64) throw RangeError("word size must be in [1, 64]");
    if (!preinit_) throw PreconditionError("pre-initialization rule must be callable");
  }

  unsigned word_bits() const { return word_bits_; }
  Word word_mask() const { return word_bits_ == 64 ? ~Word{0} : (Word{1} << word_bits_) - 1; }

  void set_phase(Phase phase) { phase_ = phase; }
  Phase phase() const { return phase_; }

  Word read(Address addr) override {
    check_address(addr);
    const auto it = cells_.find(addr);
    Word value;
    std::optional<Phase> writer;
    if (it == cells_.end()) {
      value = preinit_(addr) & word_mask();
    } else {
      value = it->second.value;
      writer = it->second.writer;
    }
    append({0, ProbeKind::kRead, addr, phase_, value, writer});
    return value;
  }

  void write(Address addr, Word value) override {
    check_address(addr);
    if ((value & ~word_mask()) != 0) throw RangeError("value exceeds word size");
    auto [it, inserted] = cells_.try_emplace(addr, Cell{value, phase_});
    std::optional<Phase> writer;
    if (!inserted) {
      writer = it->second.writer;
      it->second = Cell{value, phase_};
    }
    append({0, ProbeKind::kWrite, addr, phase_, value, writer});
  }

  /// Reads without recording a probe. For oracles and snapshots only.
  Word peek(Address addr) const {
    const auto it = cells_.find(addr);
    return it == cells_.end() ? (preinit_(addr) & word_mask()) : it->second.value;
  }

  std::optional<Phase> last_writer(Address addr) const {
    const auto it = cells_.find(addr);
    if (it == cells_.end()) return std::nullopt;
    return it->second.writer;
  }

  std::size_t written_count() const { return cells_.size(); }

  /// C_p for every phase p: written addresses partitioned by last writer.
  std::map<Phase, std::set<Address>> cells_by_phase() const {
    std::map<Phase, std::set<Address>> out;
    for (const auto& [addr, cell] : cells_) out[cell.writer].insert(addr);
    return out;
  }

  /// Written cells whose last writer satisfies the predicate, with contents.
  template <class Pred>
  std::map<Address, Word> written_where(Pred&& pred) const {
    std::map<Address, Word> out;
    for (const auto& [addr, cell] : cells_)
      if (pred(cell.writer)) out.emplace(addr, cell.value);
    return out;
  }

  /// Contents of every written cell.
  std::unordered_map<Address, Word> snapshot() const {
    std::unordered_map<Address, Word> out;
    out.reserve(cells_.size());
    for (const auto& [addr, cell] : cells_) out.emplace(addr, cell.value);
    return out;
  }

  const std::vector<ProbeRecord>& log() const { return log_; }
  std::size_t log_position() const { return log_.size(); }
  std::uint64_t total_probes() const { return seq_; }

  void reset_log() { log_.clear(); }

  ProbeReport query_report(std::size_t since, Phase designated) const {
    if (since > log_.size()) throw RangeError("log position past end of probe log");
    ProbeReport report;
    for (std::size_t i = since; i < log_.size(); ++i) {
      const auto& rec = log_[i];
      ++report.t_tot;
      if (!rec.writer_before) continue;
      ++report.per_phase[*rec.writer_before];
      if (*rec.writer_before == designated) ++report.t_q_updated;
    }
    return report;
  }

  /// Distinct addresses probed since a log position, in first-probe order.
  std::vector<Address> probed_since(std::size_t since) const {
    if (since > log_.size()) throw RangeError("log position past end of probe log");
    std::vector<Address> out;
    std::set<Address> seen;
    for (std::size_t i = since; i < log_.size(); ++i)
      if (seen.insert(log_[i].address).second) out.push_back(log_[i].address);
    return out;
  }

  /// CSV trace: seq,kind,address,phase,value_after
  void dump_trace(std::ostream& os) const {
    os << "seq,kind,address,phase,value_after\n";
    for (const auto& rec : log_)
      os << rec.seq << ',' << to_string(rec.kind) << ',' << rec.address << ',' << rec.phase << ','
         << rec.value_after << '\n';
  }

 private:
  struct Cell {
    Word value;
    Phase writer;
  };

  void check_address(Address addr) const {
    if (word_bits_ < 64 && (addr >> word_bits_) != 0) throw RangeError("address exceeds 2^w");
  }

  void append(ProbeRecord rec) {
    if (log_.size() >= log_cap_) throw CapacityError("probe log cap exceeded");
    rec.seq = seq_++;
    log_.push_back(rec);
  }

  unsigned word_bits_;
  PreinitRule preinit_;
  std::size_t log_cap_;
  Phase phase_ = 0;
  std::uint64_t seq_ = 0;
  std::unordered_map<Address, Cell> cells_;
  std::vector<ProbeRecord> log_;
};

using MemorySnapshot = std::unordered_map<Address, Word>;

/// Pre-initialization rule that serves a frozen memory state, falling back
/// to `base` for cells the snapshot never saw written.
inline PreinitRule snapshot_preinit(std::shared_ptr<const MemorySnapshot> snap, PreinitRule base) {
  return [snap = std::move(snap), base = std::move(base)](Address addr) -> Word {
    const auto it = snap->find(addr);
    return it == snap->end() ? base(addr) : it->second;
  };
}

}  // namespace xorreach
