#include "jbsde/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "jbsde/errors.hpp"
#include "jbsde/finance.hpp"
#include "jbsde/solvers.hpp"

namespace jbsde::harness {

namespace {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::kSolve: return "solve";
    case Mode::kUtility: return "utility";
    case Mode::kGoodDeal: return "gooddeal";
  }
  return "?";
}

PropertyReport bounded_u_report(const BsdeSolution& sol) {
  return make_upper_report("bounded-representative", "bounded-jump-integrand",
                           sol.max_abs_u() - 2.0 * sol.max_abs_y(), 1e-8, "max|U| - 2 max|Y|");
}

// probability weighted mean of a per-state quantity
double lattice_mean(const BsdeSolution& sol, std::size_t k, const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += sol.prob[k][i] * v[i];
  return s;
}

struct Solved {
  BsdeSolution main;
  CsvTable table;
  std::vector<PropertyReport> reports;
};

Solved solve_mode(const ScenarioConfig& cfg) {
  const GeneratorSpec gs = make_generator(cfg);
  const TerminalCondition xi = make_terminal(cfg);
  const TimeGrid grid = make_grid(cfg);
  const MarkMeasure mm = make_measure(cfg);
  const ZetaDensity zeta = make_zeta(cfg);
  const SolveConfig sc = make_solve_config(cfg);
  Solved out;
  if (cfg.solver.backend == "lattice") {
    out.main = solve_lattice(gs, xi, grid, mm, zeta, sc);
    out.reports.push_back(bounded_u_report(out.main));
  } else {
    out.main = solve_lsmc(gs, xi, grid, mm, zeta, cfg.model.d, sc, cfg.model.seed);
  }
  out.table = out.main.to_table();
  return out;
}

Solved utility_mode(const ScenarioConfig& cfg) {
  auto market = make_market(cfg);
  const GeneratorConfig& g = cfg.generator;
  if (!market && g.kind == "exp_utility_purejump" && g.scalars.count("beta") && g.scalars.count("psi")) {
    const double psi = g.scalars.at("psi");
    market = finance::MarketSpec::pure_jump(g.scalars.at("beta"), [psi](double) { return psi; });
  }
  if (!market) throw ConfigError("utility mode needs a market block");
  const TerminalCondition xi = make_terminal(cfg);
  const TimeGrid grid = make_grid(cfg);
  const MarkMeasure mm = make_measure(cfg);
  const ZetaDensity zeta = make_zeta(cfg);
  const SolveConfig sc = make_solve_config(cfg);
  Solved out;
  if (g.kind == "exp_utility") {
    const auto res = finance::exp_utility_solve(*market, g.scalars.at("alpha"), xi, grid, mm, zeta, sc,
                                                cfg.model.seed);
    out.main = res.solution;
    out.table = res.to_table();
  } else if (g.kind == "power_transformed") {
    if (!cfg.terminal.lower) throw ConfigError("power utility needs terminal.lower > 0");
    const auto res = finance::power_utility_solve(*market, g.scalars.at("gamma"), xi, *cfg.terminal.lower, grid,
                                                  mm, zeta, sc, cfg.model.seed);
    out.main = res.original;
    out.table = res.to_table();
    out.reports.push_back(make_upper_report("power-bounds", "power-utility-bijection", -res.discrete_bound_slack,
                                            1e-10, "negated min slack of the transformed value inside its band (" +
                                                       format_double(-res.bound_slack) + " against the continuous band)"));
  } else if (g.kind == "exp_utility_purejump") {
    finance::ConstraintSet C;
    if (g.vectors.count("C")) C = finance::ConstraintSet::finite(g.vectors.at("C"));
    else if (g.scalars.count("C_lo") && g.scalars.count("C_hi"))
      C = finance::ConstraintSet::interval(g.scalars.at("C_lo"), g.scalars.at("C_hi"));
    const auto res = finance::exp_utility_purejump_solve(*market, g.scalars.at("alpha"), C, xi, grid, mm, zeta, sc);
    out.main = res.solution;
    out.table = CsvTable({"t", "Y", "theta_star"});
    const std::size_t M = grid.steps();
    for (std::size_t k = 0; k <= M; ++k) {
      const double th = k < M ? lattice_mean(out.main, k, res.theta_star[k]) : std::nan("");
      out.table.add_row({grid.t(k), lattice_mean(out.main, k, out.main.y[k]), th});
    }
  } else {
    throw ConfigError("utility mode needs generator kind exp_utility, exp_utility_purejump or power_transformed, got '" +
                      g.kind + "'");
  }
  if (out.main.backend == "lattice") out.reports.push_back(bounded_u_report(out.main));
  return out;
}

Solved gooddeal_mode(const ScenarioConfig& cfg) {
  if (cfg.generator.kind != "gooddeal") {
    throw ConfigError("gooddeal mode needs generator kind gooddeal, got '" + cfg.generator.kind + "'");
  }
  const auto market = make_market(cfg);
  if (!market || !market->has_continuous()) throw ConfigError("gooddeal mode needs market.sigma and market.phi");
  const auto gd = finance::GoodDealSpec::constant(cfg.generator.scalars.at("K"), *market);
  const auto res = finance::gooddeal_bounds(gd, make_terminal(cfg), make_grid(cfg), make_measure(cfg),
                                            make_zeta(cfg), make_solve_config(cfg), cfg.model.seed);
  Solved out;
  out.main = res.upper;
  out.table = res.to_table();
  double worst = -1e300;
  for (std::size_t r = 0; r < out.table.rows(); ++r) {
    worst = std::max(worst, out.table.at(r, "pi_lower") - out.table.at(r, "pi_upper"));
  }
  out.reports.push_back(make_upper_report("gooddeal-ordering", "gooddeal-bsde", worst, 1e-10,
                                          "max over t of pi_lower - pi_upper (means)"));
  return out;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg, Mode mode, const std::string& out_dir, bool write) {
  Solved s;
  switch (mode) {
    case Mode::kSolve: s = solve_mode(cfg); break;
    case Mode::kUtility: s = utility_mode(cfg); break;
    case Mode::kGoodDeal: s = gooddeal_mode(cfg); break;
  }
  ScenarioResult res;
  res.name = cfg.name;
  res.mode = mode;
  res.y0 = s.main.y0;
  res.se_y0 = s.main.se_y0;
  res.table = std::move(s.table);
  res.reports = std::move(s.reports);

  using nlohmann::ordered_json;
  ordered_json doc;
  doc["name"] = cfg.name;
  doc["mode"] = mode_name(mode);
  doc["generator"] = cfg.generator.kind;
  doc["backend"] = s.main.backend;
  doc["scheme"] = s.main.meta.scheme;
  doc["T"] = cfg.model.T;
  doc["steps"] = cfg.model.steps;
  doc["seed"] = cfg.model.seed;
  doc["y0"] = res.y0;
  doc["se"] = res.se_y0;
  if (mode == Mode::kGoodDeal) doc["pi_lower0"] = res.table.at(0, "pi_lower");
  ordered_json meta;
  meta["picard_iterations_max"] = s.main.meta.picard_iterations_max;
  meta["rank_deficient_steps"] = s.main.meta.rank_deficient_steps;
  meta["clamped_values"] = s.main.meta.clamped_values;
  doc["meta"] = meta;
  ordered_json reps = ordered_json::array();
  for (const auto& r : res.reports) {
    ordered_json j;
    j["property"] = r.property;
    j["theorem_tag"] = r.theorem_tag;
    j["status"] = to_string(r.status);
    j["statistic"] = std::isfinite(r.statistic) ? ordered_json(r.statistic) : ordered_json(nullptr);
    j["tolerance"] = r.tolerance;
    j["note"] = r.note;
    reps.push_back(j);
  }
  doc["reports"] = reps;
  res.json = doc.dump(2) + "\n";

  if (!write) return res;
  const std::filesystem::path dir = out_dir.empty() ? cfg.output.dir : out_dir;
  std::filesystem::create_directories(dir);
  for (const auto& fmt : cfg.output.formats) {
    const auto file = dir / (cfg.name + "." + fmt);
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot write " + file.string());
    if (fmt == "csv") res.table.write(os);
    else os << res.json;
    res.written.push_back(file.string());
  }
  return res;
}

ScenarioResult run_scenario(const std::string& path, Mode mode, const std::string& out_dir) {
  return run_scenario(load_config(path), mode, out_dir, true);
}

}  // namespace jbsde::harness
