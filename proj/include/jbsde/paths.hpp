#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "jbsde/measure.hpp"

namespace jbsde {

// Simulated Brownian increments and thinned jump marks on a time grid.
// Layout is path-major: step k of path p lives at p * M + k.
struct PathBundle {
  TimeGrid grid;
  std::size_t d = 0;
  std::size_t m = 0;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  std::vector<double> dB;          // [(p * M + k) * d + j]
  std::vector<std::int16_t> jump;  // [p * M + k], mark index or -1

  std::size_t steps() const { return grid.steps(); }
  double increment(std::size_t p, std::size_t k, std::size_t j) const {
    return dB[(p * grid.steps() + k) * d + j];
  }
  int jump_at(std::size_t p, std::size_t k) const { return jump[p * grid.steps() + k]; }

  // Jump counts accumulated over steps [0, k).
  std::vector<std::uint16_t> counts_at(std::size_t p, std::size_t k) const;
  // B at t_k.
  std::vector<double> brownian_at(std::size_t p, std::size_t k) const;

  // Header (T, M, d, m, seed, n_paths) then row-major per-path records of
  // (dB_k in R^d, jump_k) for k = 0..M-1. Native little-endian binary.
  std::string serialize() const;
  static PathBundle deserialize(std::string_view bytes);

  bool operator==(const PathBundle&) const = default;
};

// Counter-based per-path seed: splitmix64(master ^ splitmix64(path + 1)).
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_path_seed(std::uint64_t master_seed, std::uint64_t path_index);

// Brownian increments iid N(0, dt I_d); mark i jumps in step k with
// probability w_i zeta(t_k, e_i) dt, at most one jump per step.
PathBundle simulate_paths(const TimeGrid& grid, const MarkMeasure& mm, const ZetaDensity& zeta, int d,
                          std::size_t n_paths, std::uint64_t seed);

}  // namespace jbsde
