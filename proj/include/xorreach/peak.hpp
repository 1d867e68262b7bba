#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "xorreach/cell_probe.hpp"
#include "xorreach/errors.hpp"

namespace xorreach {

/// Sparse f : Sigma^k -> R. Every key has length k; absent strings map to 0.
using PeakFunction = std::map<std::vector<Word>, double>;

/// exp(-sqrt(k * lg(1/epsilon)))
inline double peak_threshold(std::size_t k, double epsilon) {
  return std::exp(-std::sqrt(static_cast<double>(k) * std::log2(1.0 / epsilon)));
}

/// sum over y in Sigma^Y of |sum over z with z|_Y = y of f(z)|.
/// `subset` is a bitmask over the k indices.
inline double marginal_mass(const PeakFunction& f, std::uint32_t subset) {
  std::map<std::vector<Word>, double> marginal;
  for (const auto& [z, v] : f) {
    std::vector<Word> y;
    for (std::size_t j = 0; j < z.size(); ++j)
      if ((subset >> j) & 1) y.push_back(z[j]);
    marginal[y] += v;
  }
  double mass = 0;
  for (const auto& [y, v] : marginal) mass += std::abs(v);
  return mass;
}

struct PeakSubset {
  std::vector<std::size_t> indices;  // Y, ascending
  double achieved = 0;
  double threshold = 0;
  bool met = false;
};

/// Smallest index subset Y (ascending size, then lexicographic) whose
/// marginal mass reaches the threshold; Y = [k] if none does.
inline PeakSubset find_peak_subset(const PeakFunction& f, std::size_t k, double epsilon) {
  if (!(epsilon > 0 && epsilon <= 1)) throw PreconditionError("epsilon must lie in (0, 1]");
  if (k > 20) throw CapacityError("peak search is exhaustive over 2^k subsets; k capped at 20");
  double total = 0, peak = 0;
  for (const auto& [z, v] : f) {
    if (z.size() != k) throw PreconditionError("f has a key of the wrong length");
    total += std::abs(v);
    peak = std::max(peak, std::abs(v));
  }
  constexpr double kSlack = 1e-12;
  if (total > 1 + kSlack) throw PreconditionError("sum of |f| exceeds 1");
  if (peak + kSlack < epsilon) throw PreconditionError("max |f| below epsilon");

  PeakSubset out;
  out.threshold = peak_threshold(k, epsilon);
  const std::uint32_t full = k == 0 ? 0 : (std::uint32_t{1} << k) - 1;
  for (int size = 0; size <= static_cast<int>(k); ++size) {
    // masks of one popcount visited in increasing order = colex order;
    // collect and sort for lexicographic order of the index lists
    std::vector<std::vector<std::size_t>> candidates;
    for (std::uint32_t mask = 0; mask <= full; ++mask) {
      if (std::popcount(mask) != size) continue;
      std::vector<std::size_t> idx;
      for (std::size_t j = 0; j < k; ++j)
        if ((mask >> j) & 1) idx.push_back(j);
      candidates.push_back(std::move(idx));
      if (mask == full) break;
    }
    std::sort(candidates.begin(), candidates.end());
    for (auto& idx : candidates) {
      std::uint32_t mask = 0;
      for (auto j : idx) mask |= std::uint32_t{1} << j;
      const double mass = marginal_mass(f, mask);
      if (mass + kSlack >= out.threshold) {
        out.indices = std::move(idx);
        out.achieved = mass;
        out.met = true;
        return out;
      }
    }
  }
  for (std::size_t j = 0; j < k; ++j) out.indices.push_back(j);
  out.achieved = marginal_mass(f, full);
  return out;
}

}  // namespace xorreach
