#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jbsde/generator.hpp"
#include "jbsde/lattice.hpp"
#include "jbsde/measure.hpp"
#include "jbsde/paths.hpp"
#include "jbsde/report.hpp"

namespace jbsde {

enum class Scheme { kExplicit, kPicardImplicit };
const char* to_string(Scheme s);
Scheme parse_scheme(const std::string& s);

struct SolveConfig {
  double picard_tol = 1e-12;
  int picard_max = 50;
  Scheme scheme = Scheme::kPicardImplicit;
  int basis_degree = 3;
  std::size_t n_paths = 20000;
  double state_cap = 5e6;

  void validate() const;
};

// Terminal condition xi. The state form is a function of the terminal jump
// counts and works on both backends; the path form sees the whole path and
// needs the regression backend.
struct TerminalCondition {
  using StateFn = std::function<double(std::span<const std::uint16_t> counts)>;
  using PathFn = std::function<double(const PathBundle& pb, std::size_t p)>;

  StateFn on_state;
  PathFn on_path;
  std::string description;

  static TerminalCondition from_state(StateFn fn, std::string description = "state");
  static TerminalCondition from_path(PathFn fn, std::string description = "path");

  bool has_state_form() const { return static_cast<bool>(on_state); }
  double operator()(const PathBundle& pb, std::size_t p) const;
};

struct SolveMeta {
  std::size_t picard_iterations_max = 0;  // worst (state, step)
  std::size_t picard_iterations_total = 0;
  double dt = 0.0;
  std::string scheme;
  std::size_t basis_size = 0;
  std::size_t rank_deficient_steps = 0;
  double max_condition = 0.0;
  std::size_t clamped_values = 0;  // regression fits pulled back into range
};

// Discrete (Y, Z, U). Lattice backend: y[k][s] for s < lattice->size_upto(k),
// u[k][s * m + i] for k < M, z empty (Z == 0). Regression backend: y[k][p],
// z[k][p * d + j], u[k][p * m + i] per path, fitted values.
struct BsdeSolution {
  std::string backend;
  TimeGrid grid;
  std::size_t d = 0;
  std::size_t m = 0;
  std::shared_ptr<const JumpLattice> lattice;
  std::vector<std::vector<double>> prob;  // lattice state probabilities
  std::vector<std::vector<double>> y, z, u;
  double y0 = 0.0;
  double se_y0 = 0.0;
  std::vector<std::vector<double>> z_mean, z_se;  // regression backend, per step and component
  SolveMeta meta;

  std::size_t n_states(std::size_t k) const;  // states (lattice) or paths at step k
  double max_abs_y() const;
  double max_abs_u() const;
  double y_at(std::size_t k, std::span<const std::uint16_t> counts) const;  // lattice only

  // t, Y_mean, Y_min, Y_max, Z_1..Z_d, U_1..U_m, se_Y. Means are probability
  // weighted on the lattice and sample means on paths.
  CsvTable to_table() const;
};

BsdeSolution solve_lattice(const GeneratorSpec& gs, const TerminalCondition& xi, const TimeGrid& grid,
                           const MarkMeasure& mm, const ZetaDensity& zeta, const SolveConfig& cfg = {});

BsdeSolution solve_lsmc(const GeneratorSpec& gs, const TerminalCondition& xi, const TimeGrid& grid,
                        const MarkMeasure& mm, const ZetaDensity& zeta, int d, const SolveConfig& cfg,
                        std::uint64_t seed);

// Regression solve on given paths; xi_values[p] is the terminal value of path p.
BsdeSolution solve_lsmc_on_paths(const GeneratorSpec& gs, const std::vector<double>& xi_values,
                                 const PathBundle& pb, const MarkMeasure& mm, const ZetaDensity& zeta,
                                 const SolveConfig& cfg);

// Monomials of total degree <= p in (jump counts, B / sqrt(T)).
class MonomialBasis {
 public:
  MonomialBasis(std::size_t n_features, int degree);
  std::size_t size() const { return exponents_.size(); }
  void evaluate(std::span<const double> x, std::span<double> out) const;
  const std::vector<std::vector<int>>& exponents() const { return exponents_; }

 private:
  std::size_t n_features_;
  std::vector<std::vector<int>> exponents_;
};

// Convergence of the approximating sequence f^n.
struct MonotoneResult {
  std::vector<int> n_list;
  std::vector<BsdeSolution> solutions;
  std::vector<double> y0;
  std::vector<double> delta_y;  // max_{k,s} |Y^n - Y^N|
  std::vector<double> delta_u;  // (sum_k dt E|U^n - U^N|_t^2)^{1/2}
  int sign = 0;                 // +1 for g >= 0, -1 for g <= 0
  bool monotone = false;
  CsvTable table;               // n, Y0, delta_Y, delta_U
};

MonotoneResult monotone_driver(const GeneratorSpec& gs_full, const NestedSelectorFamily& family,
                               const std::vector<int>& n_list, const TerminalCondition& xi,
                               const TimeGrid& grid, const MarkMeasure& mm, const ZetaDensity& zeta,
                               const SolveConfig& cfg = {});

// Pass iff Y1 <= Y2 + 1e-10 everywhere. Throws on mismatched discretizations.
PropertyReport compare_solutions(const BsdeSolution& s1, const BsdeSolution& s2);

enum class AdjointScheme {
  kGridConsistent,  // per-step densities matching the implicit lattice recursion
  kContinuous       // exp(int alpha) E(beta.B + gamma * mu~) sampled on the grid
};

struct AdjointEstimate {
  double y0 = 0.0;
  double std_error = 0.0;
};

AdjointEstimate adjoint_representation(const GeneratorSpec& linear_gs, const TerminalCondition& xi,
                                       const PathBundle& pb, const MarkMeasure& mm, const ZetaDensity& zeta,
                                       AdjointScheme scheme = AdjointScheme::kGridConsistent);

// Girsanov kernel fields on the lattice, (k, counts) -> vector.
using StateVectorField = std::function<std::vector<double>(std::size_t k, std::span<const std::uint16_t>)>;

struct MartingaleDiagnostic {
  PropertyReport report;
  double min_gamma = 0.0;
  double sup_bracket = 0.0;  // sup_{k,s} |beta|^2 + sum_i gamma_i^2 zeta w_i
  double bmo = 0.0;
  std::string certified_by;  // "bounded-bracket", "bmo-delta" or empty
};

MartingaleDiagnostic martingale_diagnostic(const StateVectorField& beta, const StateVectorField& gamma,
                                           const MarkMeasure& mm, const ZetaDensity& zeta, const TimeGrid& grid,
                                           double margin = kDefaultMargin, double state_cap = 5e6);

// Solves with d_extra Brownian drivers appended and checks
// max_{k,j} |mean Z| / SE <= 3, the SE taken across independent batches
// that split cfg.n_paths.
PropertyReport zero_z_check(const GeneratorSpec& gs, const TerminalCondition& xi, int d_extra,
                            const TimeGrid& grid, const MarkMeasure& mm, const ZetaDensity& zeta,
                            const SolveConfig& cfg, std::uint64_t seed, int batches = 50);

}  // namespace jbsde
