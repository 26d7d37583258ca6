#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jbsde/report.hpp"
#include "jbsde/solvers.hpp"

namespace jbsde::harness {

// Shared state across one suite run. Every lattice solution produced by any
// criterion passes through record(), which feeds the bounded-representative
// check.
class SuiteContext {
 public:
  explicit SuiteContext(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  // Independent stream per criterion.
  std::uint64_t stream(int id) const;

  void record(const BsdeSolution& sol);
  double worst_u_excess() const { return worst_u_excess_; }
  std::size_t recorded() const { return recorded_; }

 private:
  std::uint64_t seed_;
  double worst_u_excess_ = -1e300;  // max |U| - 2 max |Y|
  std::size_t recorded_ = 0;
};

struct Criterion {
  int id;
  std::string property;
  std::string theorem_tag;
  PropertyReport (*run)(SuiteContext&);
};

// The twelve acceptance criteria in order. Criterion 4 reads what the others
// recorded, so run_acceptance evaluates it last and reports it in place.
const std::vector<Criterion>& acceptance_criteria();
std::vector<PropertyReport> run_acceptance(std::uint64_t seed);

// Spec invariants that are cheap enough for every suite run.
std::vector<PropertyReport> run_properties(std::uint64_t seed);

// Deterministic JSON: seed, criteria, properties, passed. No timings.
std::string verify_suite(std::uint64_t seed, bool* all_passed = nullptr);

PropertyReport criterion_entropic(SuiteContext& ctx);
PropertyReport criterion_apriori(SuiteContext& ctx);
PropertyReport criterion_comparison(SuiteContext& ctx);
PropertyReport criterion_bounded_u(SuiteContext& ctx);
PropertyReport criterion_monotone(SuiteContext& ctx);
PropertyReport criterion_adjoint(SuiteContext& ctx);
PropertyReport criterion_power(SuiteContext& ctx);
PropertyReport criterion_gooddeal_inner(SuiteContext& ctx);
PropertyReport criterion_gooddeal_bsde(SuiteContext& ctx);
PropertyReport criterion_martingale_optimality(SuiteContext& ctx);
PropertyReport criterion_zero_z(SuiteContext& ctx);
PropertyReport criterion_demos(SuiteContext& ctx);

// Oracles for the good-deal inner problem.
struct KktInstance {
  std::vector<double> p;  // Pi_perp z
  std::vector<double> u;
  std::vector<double> q;
  double r2 = 0.0;
};
// min over a log-spaced multiplier grid (plus mu = 0) of the dual function.
double inner_max_dual_grid(const KktInstance& inst, std::size_t points = 1000000);
// max over clip sets S of the closed-form value with gamma_S = -1.
double inner_max_active_set(const KktInstance& inst);

}  // namespace jbsde::harness
