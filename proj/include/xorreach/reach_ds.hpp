#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "xorreach/cell_probe.hpp"
#include "xorreach/errors.hpp"

namespace xorreach {

/// Adjacency lists in cells. Cell `base + u` holds the out-degree of u and
/// cells `base + n + u * max_degree + j` hold its out-neighbours. An
/// insertion costs exactly 3 probes; a query is a BFS over probed lists.
class AdjacencyListLayout {
 public:
  AdjacencyListLayout(std::uint64_t node_capacity, std::uint64_t max_degree, Address base = 0)
      : n_(node_capacity), max_degree_(max_degree), base_(base) {
    if (n_ == 0 || max_degree_ == 0) throw PreconditionError("empty adjacency layout");
  }

  static constexpr const char* kName = "adjacency";

  std::uint64_t node_capacity() const { return n_; }
  std::uint64_t max_degree() const { return max_degree_; }
  /// Worst-case probes per insertion.
  std::uint64_t update_bound() const { return 3; }

  void insert_edge(CellMemory& mem, std::uint64_t u, std::uint64_t v) const {
    check(u);
    check(v);
    const Word deg = mem.read(degree_cell(u));
    if (deg >= max_degree_) throw CapacityError("out-degree capacity exceeded at node " + std::to_string(u));
    mem.write(slot_cell(u, deg), v);
    mem.write(degree_cell(u), deg + 1);
  }

  bool query_reach(CellMemory& mem, std::uint64_t u, std::uint64_t v) const {
    check(u);
    check(v);
    if (u == v) return true;
    std::vector<bool> seen(n_, false);
    std::vector<std::uint64_t> frontier{u};
    seen[u] = true;
    while (!frontier.empty()) {
      std::vector<std::uint64_t> next;
      for (auto x : frontier) {
        const Word deg = mem.read(degree_cell(x));
        for (Word j = 0; j < deg && j < max_degree_; ++j) {
          const Word y = mem.read(slot_cell(x, j));
          if (y == v) return true;
          if (y < n_ && !seen[y]) {
            seen[y] = true;
            next.push_back(y);
          }
        }
      }
      frontier = std::move(next);
    }
    return false;
  }

 private:
  void check(std::uint64_t u) const {
    if (u >= n_) throw CapacityError("node id exceeds node capacity");
  }
  Address degree_cell(std::uint64_t u) const { return base_ + u; }
  Address slot_cell(std::uint64_t u, std::uint64_t j) const { return base_ + n_ + u * max_degree_ + j; }

  std::uint64_t n_;
  std::uint64_t max_degree_;
  Address base_;
};

/// Transitive-closure bitmap in cells: row u holds bit v iff u reaches v
/// (u != v). Queries probe one word; insertions update every ancestor row.
class ClosureBitmapLayout {
 public:
  static constexpr unsigned kBitsPerWord = 64;
  static constexpr const char* kName = "closure";

  explicit ClosureBitmapLayout(std::uint64_t node_capacity, std::uint64_t update_bound = 0, Address base = 0)
      : n_(node_capacity), words_((node_capacity + kBitsPerWord - 1) / kBitsPerWord), base_(base) {
    if (n_ == 0) throw PreconditionError("empty closure layout");
    if (n_ > (std::uint64_t{1} << 16)) throw CapacityError("closure bitmap capped at 2^16 nodes");
    bound_ = update_bound != 0 ? update_bound : natural_bound();
  }

  std::uint64_t node_capacity() const { return n_; }
  std::uint64_t update_bound() const { return bound_; }

  /// n column reads + a row read + read/write of every word of up to n rows.
  std::uint64_t natural_bound() const { return n_ + words_ + 2 * n_ * words_; }

  void insert_edge(CellMemory& mem, std::uint64_t u, std::uint64_t v) const {
    check(u);
    check(v);
    std::uint64_t probes = 0;
    auto rd = [&](Address a) {
      ++probes;
      return mem.read(a);
    };
    auto wr = [&](Address a, Word value) {
      ++probes;
      mem.write(a, value);
    };
    if (u == v || (rd(cell(u, v / kBitsPerWord)) >> (v % kBitsPerWord)) & 1) return enforce(probes);

    std::vector<std::uint64_t> ancestors{u};
    for (std::uint64_t x = 0; x < n_; ++x)
      if (x != u && ((rd(cell(x, u / kBitsPerWord)) >> (u % kBitsPerWord)) & 1)) ancestors.push_back(x);

    std::vector<Word> add(words_);
    for (std::uint64_t k = 0; k < words_; ++k) add[k] = rd(cell(v, k));
    add[v / kBitsPerWord] |= Word{1} << (v % kBitsPerWord);

    for (auto x : ancestors)
      for (std::uint64_t k = 0; k < words_; ++k) {
        const Word old = rd(cell(x, k));
        Word next = old | add[k];
        if (k == x / kBitsPerWord) next &= ~(Word{1} << (x % kBitsPerWord));
        if (next != old) wr(cell(x, k), next);
      }
    enforce(probes);
  }

  bool query_reach(CellMemory& mem, std::uint64_t u, std::uint64_t v) const {
    check(u);
    check(v);
    if (u == v) return true;
    return (mem.read(cell(u, v / kBitsPerWord)) >> (v % kBitsPerWord)) & 1;
  }

 private:
  void check(std::uint64_t u) const {
    if (u >= n_) throw CapacityError("node id exceeds node capacity");
  }
  void enforce(std::uint64_t probes) const {
    if (probes > bound_) throw CapacityError("insertion exceeded the configured update probe bound");
  }
  Address cell(std::uint64_t row, std::uint64_t k) const { return base_ + row * words_ + k; }

  std::uint64_t n_;
  std::uint64_t words_;
  Address base_;
  std::uint64_t bound_ = 0;
};

/// An incremental reachability structure whose whole state lives in its
/// own cell-probe machine. Records the probe cost of every operation.
template <class Layout>
class ReachabilityDS {
 public:
  /// With `keep_log` false the probe log is cleared after every
  /// operation and only the counters survive.
  explicit ReachabilityDS(Layout layout, unsigned word_bits = 64, bool check_acyclic = false, bool keep_log = false)
      : layout_(std::move(layout)), machine_(word_bits), check_acyclic_(check_acyclic), keep_log_(keep_log) {
    if (check_acyclic_) shadow_.resize(layout_.node_capacity());
  }

  const Layout& layout() const { return layout_; }
  CellProbeMachine& machine() { return machine_; }
  const CellProbeMachine& machine() const { return machine_; }

  void insert_edge(std::uint64_t u, std::uint64_t v) {
    if (check_acyclic_) {
      if (u >= shadow_.size() || v >= shadow_.size()) throw CapacityError("node id exceeds node capacity");
      if (shadow_reaches(v, u)) throw PreconditionError("insertion would create a cycle");
    }
    const auto before = machine_.total_probes();
    layout_.insert_edge(machine_, u, v);
    last_cost_ = machine_.total_probes() - before;
    max_update_cost_ = std::max(max_update_cost_, last_cost_);
    if (check_acyclic_) shadow_[u].push_back(v);
    if (!keep_log_) machine_.reset_log();
  }

  bool query_reach(std::uint64_t u, std::uint64_t v) {
    const auto before = machine_.total_probes();
    const bool r = layout_.query_reach(machine_, u, v);
    last_cost_ = machine_.total_probes() - before;
    if (!keep_log_) machine_.reset_log();
    return r;
  }

  std::uint64_t last_cost() const { return last_cost_; }
  std::uint64_t max_update_cost() const { return max_update_cost_; }

 private:
  bool shadow_reaches(std::uint64_t from, std::uint64_t to) const {
    if (from == to) return true;
    std::vector<bool> seen(shadow_.size(), false);
    std::vector<std::uint64_t> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      for (auto y : shadow_[x]) {
        if (y == to) return true;
        if (!seen[y]) {
          seen[y] = true;
          stack.push_back(y);
        }
      }
    }
    return false;
  }

  Layout layout_;
  CellProbeMachine machine_;
  bool check_acyclic_;
  bool keep_log_;
  std::vector<std::vector<std::uint64_t>> shadow_;
  std::uint64_t last_cost_ = 0;
  std::uint64_t max_update_cost_ = 0;
};

}  // namespace xorreach
