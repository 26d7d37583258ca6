// jbsde: scenario runner, counterexample demos and the verification suite.
#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>

#include "jbsde/criteria.hpp"
#include "jbsde/demos.hpp"
#include "jbsde/errors.hpp"
#include "jbsde/scenario.hpp"

namespace {

using namespace jbsde;
using namespace jbsde::harness;

constexpr int kOk = 0;
constexpr int kSolverFailure = 1;
constexpr int kConfigError = 2;
constexpr int kSuiteFailure = 3;

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out);
  os << text;
}

int run_mode(const std::string& config, Mode mode, const std::string& out_dir) {
  const ScenarioResult r = run_scenario(config, mode, out_dir);
  std::cout << r.name << ": y0 = " << format_double(r.y0);
  if (r.se_y0 > 0.0) std::cout << " (se " << format_double(r.se_y0) << ")";
  std::cout << "\n";
  for (const auto& rep : r.reports) {
    std::cout << "  " << rep.property << " " << to_string(rep.status) << " " << format_double(rep.statistic) << "\n";
  }
  for (const auto& f : r.written) std::cout << "  wrote " << f << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Jump BSDE solvers, utility and good-deal applications"};
  app.require_subcommand(1);

  std::string config, out_dir;
  auto* solve = app.add_subcommand("solve", "solve the BSDE of a scenario");
  auto* utility = app.add_subcommand("utility", "utility maximization scenario");
  auto* gooddeal = app.add_subcommand("gooddeal", "good-deal bounds scenario");
  for (auto* sub : {solve, utility, gooddeal}) {
    sub->add_option("config", config, "scenario YAML")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
  }

  auto* demo = app.add_subcommand("demo", "counterexample demonstrations (CSV on stdout)");
  demo->require_subcommand(1);
  std::string demo_out;
  demo->add_option("--out", demo_out, "write the table to a file");

  std::vector<int> royer_n{2, 4, 8, 16, 32, 64};
  auto* royer = demo->add_subcommand("royer", "entropic counterexample integrals");
  royer->add_option("--n", royer_n, "list of n >= 2")->delimiter(',');

  std::vector<double> growth_psi{0.0}, growth_umax{10.0};
  double growth_step = 1e-3;
  auto* growth = demo->add_subcommand("growth", "quadratic growth counterexample");
  growth->add_option("--psi", growth_psi, "psi values")->delimiter(',');
  growth->add_option("--u-max", growth_umax, "range endpoints")->delimiter(',');
  growth->add_option("--step", growth_step, "u-grid spacing");

  std::vector<double> nc_C{0.0, 1.0};
  double nc_psi = 1.0, nc_beta = 0.0, nc_alpha = 1.0, nc_lo = 0.0, nc_hi = 2.0, nc_du = 0.5;
  auto* nonconvex = demo->add_subcommand("nonconvex", "non-convex constrained generator");
  nonconvex->add_option("--C", nc_C, "constraint set")->delimiter(',');
  nonconvex->add_option("--psi", nc_psi, "jump size psi");
  nonconvex->add_option("--beta", nc_beta, "drift beta");
  nonconvex->add_option("--alpha", nc_alpha, "risk aversion");
  nonconvex->add_option("--u-min", nc_lo, "u-grid start");
  nonconvex->add_option("--u-max", nc_hi, "u-grid end");
  nonconvex->add_option("--du", nc_du, "u-grid spacing");

  std::uint64_t seed = 42;
  std::string verify_out;
  auto* verify = app.add_subcommand("verify", "run the acceptance criteria and property checks");
  verify->add_option("--seed", seed, "master seed");
  verify->add_option("--out", verify_out, "write the JSON report to a file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (solve->parsed()) return run_mode(config, Mode::kSolve, out_dir);
    if (utility->parsed()) return run_mode(config, Mode::kUtility, out_dir);
    if (gooddeal->parsed()) return run_mode(config, Mode::kGoodDeal, out_dir);
    if (royer->parsed()) {
      for (int n : royer_n) {
        if (n < 2) throw std::invalid_argument("royer: n must be >= 2");
      }
      emit(demo_royer(royer_n).to_string(), demo_out);
      return kOk;
    }
    if (growth->parsed()) {
      emit(demo_growth(growth_psi, growth_umax, growth_step).to_string(), demo_out);
      return kOk;
    }
    if (nonconvex->parsed()) {
      if (!(nc_du > 0.0) || nc_hi < nc_lo) throw std::invalid_argument("nonconvex: bad u-grid");
      std::vector<double> grid;
      const auto n = static_cast<std::size_t>(std::floor((nc_hi - nc_lo) / nc_du + 1e-9));
      for (std::size_t i = 0; i <= n; ++i) grid.push_back(nc_lo + static_cast<double>(i) * nc_du);
      const NonconvexDemo d = demo_nonconvex(nc_C, nc_psi, nc_beta, nc_alpha, grid);
      emit(d.table.to_string(), demo_out);
      if (d.certificate) {
        std::cerr << "certificate: u0=" << format_double(d.certificate->u0) << " u1=" << format_double(d.certificate->u1)
                  << " f_mid=" << format_double(d.certificate->f_mid)
                  << " f_chord=" << format_double(d.certificate->f_chord) << "\n";
      } else {
        std::cerr << "certificate: none\n";
      }
      return kOk;
    }
    if (verify->parsed()) {
      bool passed = false;
      emit(verify_suite(seed, &passed), verify_out);
      return passed ? kOk : kSuiteFailure;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kConfigError;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverFailure;
  }
  return kOk;
}
