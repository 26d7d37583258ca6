#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "jbsde/measure.hpp"
#include "jbsde/paths.hpp"

namespace jbsde {

// U-component along a simulated path: (step, path) -> one value per mark.
using PathMarkField = std::function<std::vector<double>(std::size_t k, std::size_t p)>;

// Compares U * mu~ with its expansion over the orthonormal basis
// u^n = w_n^{-1/2} 1_{e_n} of L^2(lambda), i.e. sum_n <U, u^n> (u^n * mu~),
// pathwise at every step. Returns the max absolute discrepancy.
// Requires zeta identically 1.
double onb_expansion_check(const MarkMeasure& mm, const ZetaDensity& zeta, const PathMarkField& U,
                           const PathBundle& pb);

// Integrand of M = Z . B + U * mu~ as a function of lattice state.
struct IntegrandValue {
  std::vector<double> z;  // may be empty
  std::vector<double> u;  // one per mark, may be empty (zero)
};
using StateIntegrandField =
    std::function<IntegrandValue(std::size_t k, std::span<const std::uint16_t> counts)>;

enum class BmoBackend { kLattice, kPaths };

struct BmoResult {
  double value = 0.0;      // max_k sup_state E[<M>_T - <M>_{t_k} | state]
  double std_error = 0.0;  // zero on the lattice backend
  std::vector<double> per_step;
  std::vector<double> per_step_se;
};

struct BmoOptions {
  std::size_t n_paths = 20000;
  std::uint64_t seed = 42;
  std::size_t min_group = 50;  // paths backend: smallest state group that counts
  double state_cap = 5e6;
};

BmoResult bmo_statistic(const StateIntegrandField& field, const MarkMeasure& mm, const ZetaDensity& zeta,
                        const TimeGrid& grid, BmoBackend backend, const BmoOptions& opt = {});

}  // namespace jbsde
