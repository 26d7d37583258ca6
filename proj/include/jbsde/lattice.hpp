#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "jbsde/measure.hpp"

namespace jbsde {

// Jump-count multi-indices (n_1..n_m) with sum n_i <= M. States are ordered by
// total count, then lexicographically, so the states reachable at step k form
// the prefix [0, size_upto(k)).
class JumpLattice {
 public:
  JumpLattice(std::size_t m, std::size_t max_total, double state_cap = 5e6);

  // C(M + m, m) as a floating value (no overflow for huge cases).
  static double state_count(std::size_t max_total, std::size_t m);

  std::size_t marks() const { return m_; }
  std::size_t max_total() const { return max_total_; }
  std::size_t size() const { return size_upto(max_total_); }
  std::size_t size_upto(std::size_t k) const { return offsets_[k + 1]; }

  std::span<const std::uint16_t> counts(std::size_t idx) const {
    return {counts_.data() + idx * m_, m_};
  }
  std::size_t total(std::size_t idx) const;
  std::size_t index(std::span<const std::uint16_t> counts) const;
  // Index of the state reached from idx by one jump of mark i.
  std::size_t neighbor(std::size_t idx, std::size_t i) const { return neighbors_[idx * m_ + i]; }

  bool operator==(const JumpLattice& o) const { return m_ == o.m_ && max_total_ == o.max_total_; }

 private:
  std::uint64_t binom(std::size_t n, std::size_t k) const;

  std::size_t m_;
  std::size_t max_total_;
  std::vector<std::uint64_t> binom_;    // (max_total + m + 1) x (m + 1)
  std::vector<std::size_t> offsets_;    // offsets_[t] = #states with total < t
  std::vector<std::uint16_t> counts_;
  std::vector<std::uint32_t> neighbors_;  // only for states with total < max_total
};

// Probability of each lattice state at every step under the thinned jump
// dynamics: P[k][s] for s < size_upto(k).
std::vector<std::vector<double>> lattice_state_probabilities(const JumpLattice& lattice,
                                                             const TimeGrid& grid,
                                                             const MarkMeasure& mm,
                                                             const ZetaDensity& zeta);

}  // namespace jbsde
