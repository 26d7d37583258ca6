#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jbsde/finance.hpp"
#include "jbsde/generator.hpp"
#include "jbsde/measure.hpp"
#include "jbsde/solvers.hpp"

namespace jbsde::harness {

struct ZetaConfig {
  std::string kind = "constant";  // constant | linear
  double value = 1.0;             // constant
  double a = 1.0, b = 0.0;        // linear: a + b t
  bool operator==(const ZetaConfig&) const = default;
};

struct ModelConfig {
  double T = 1.0;
  std::size_t steps = 100;
  int d = 0;
  std::vector<double> marks;
  std::vector<double> weights;
  ZetaConfig zeta;
  std::uint64_t seed = 42;
  bool operator==(const ModelConfig&) const = default;
};

struct GeneratorConfig {
  std::string kind;
  std::map<std::string, double> scalars;
  std::map<std::string, std::vector<double>> vectors;
  bool operator==(const GeneratorConfig&) const = default;
};

// Terminal condition. Kinds and their parameters:
//   constant        value
//   jump_count      scale (1), offset (0), cap (none)
//   position        lo, hi        clamp(sum_i e_i N_i, lo, hi)
//   count_pattern   values        values[total count mod len]
//   brownian_square               B_T^2 (first component)
//   brownian_clamp  lo, hi        clamp(B_T, lo, hi)
//   call_spread     k1, k2        (S_T - k1)^+ - (S_T - k2)^+ in the market
// `lower` is an optional known lower bound (needed by power utility).
struct TerminalConfig {
  std::string kind = "constant";
  std::map<std::string, double> params;
  std::vector<double> values;
  std::optional<double> lower;
  bool operator==(const TerminalConfig&) const = default;
};

struct MarketConfig {
  bool present = false;
  std::vector<std::vector<double>> sigma;
  std::vector<double> phi;
  std::optional<double> beta;
  std::optional<double> psi;
  double s0 = 1.0;
  bool operator==(const MarketConfig&) const = default;
};

struct SolverBlock {
  std::string backend = "lattice";  // lattice | lsmc
  std::string scheme = "picard-implicit";
  std::size_t n_paths = 20000;
  int basis_degree = 3;
  double picard_tol = 1e-12;
  int picard_max = 50;
  double state_cap = 5e6;
  bool operator==(const SolverBlock&) const = default;
};

struct OutputBlock {
  std::string dir = "out";
  std::vector<std::string> formats{"csv", "json"};
  bool operator==(const OutputBlock&) const = default;
};

struct ScenarioConfig {
  std::string name = "scenario";
  ModelConfig model;
  GeneratorConfig generator;
  TerminalConfig terminal;
  MarketConfig market;
  SolverBlock solver;
  OutputBlock output;
  bool operator==(const ScenarioConfig&) const = default;
};

// Parse and validate. Throws ConfigError with the offending line.
ScenarioConfig parse_config(const std::string& text, const std::string& source = "<config>");
ScenarioConfig load_config(const std::string& path);

// Canonical YAML form: fixed key order, every field written.
std::string serialize_config(const ScenarioConfig& cfg);

// Builders from a validated configuration.
MarkMeasure make_measure(const ScenarioConfig& cfg);
ZetaDensity make_zeta(const ScenarioConfig& cfg);
TimeGrid make_grid(const ScenarioConfig& cfg);
SolveConfig make_solve_config(const ScenarioConfig& cfg);
std::optional<finance::MarketSpec> make_market(const ScenarioConfig& cfg);
TerminalCondition make_terminal(const ScenarioConfig& cfg);
GeneratorParams make_params(const ScenarioConfig& cfg);
GeneratorSpec make_generator(const ScenarioConfig& cfg);

}  // namespace jbsde::harness
