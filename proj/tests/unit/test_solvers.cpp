#include <gtest/gtest.h>

#include <cmath>

#include "jbsde/errors.hpp"
#include "jbsde/generator.hpp"
#include "jbsde/named_generators.hpp"
#include "jbsde/solvers.hpp"

using namespace jbsde;

namespace {

const ZetaDensity kZeta;

TerminalCondition jump_count() {
  return TerminalCondition::from_state(
      [](std::span<const std::uint16_t> c) {
        double n = 0.0;
        for (auto v : c) n += v;
        return n;
      },
      "count");
}

TerminalCondition constant(double v) {
  return TerminalCondition::from_state([v](std::span<const std::uint16_t>) { return v; }, "const");
}

GeneratorSpec zero_generator() {
  GeneratorParams p;
  return build_named_generator("linear", p);
}

GeneratorSpec linear(double a0, double a, double gamma) {
  GeneratorParams p;
  p.scalars["alpha0"] = a0;
  p.scalars["alpha"] = a;
  p.scalars["gamma"] = gamma;
  return build_named_generator("linear", p);
}

}  // namespace

TEST(SolveLattice, ConstantSolution) {
  const MarkMeasure mm = build_mark_measure({0.5, 1.0}, {1.0, 1.0});
  const auto sol = solve_lattice(zero_generator(), constant(0.7), TimeGrid(1.0, 20), mm, kZeta);
  for (const auto& row : sol.y)
    for (double v : row) EXPECT_NEAR(v, 0.7, 1e-15);
  EXPECT_EQ(sol.max_abs_u(), 0.0);
}

TEST(SolveLattice, EntropicClosedForm) {
  const auto sol = solve_lattice(entropic_generator(1.0), jump_count(), TimeGrid(1.0, 1000),
                                 build_mark_measure({1.0}, {1.0}), kZeta);
  EXPECT_LE(std::abs(sol.y0 - (std::exp(1.0) - 1.0)) / (std::exp(1.0) - 1.0), 1e-2);
}

TEST(SolveLattice, TerminalAndBounds) {
  const MarkMeasure mm = build_mark_measure({0.5, 1.5}, {0.7, 0.4});
  const TimeGrid grid(1.0, 40);
  const GeneratorSpec gs = linear(0.2, 0.5, 0.3);
  const auto xi = TerminalCondition::from_state(
      [](std::span<const std::uint16_t> c) { return std::sin(1.0 + c[0] - 0.5 * c[1]); }, "sin");
  const auto sol = solve_lattice(gs, xi, grid, mm, kZeta);
  const auto& lat = *sol.lattice;
  for (std::size_t s = 0; s < sol.y[40].size(); ++s) EXPECT_EQ(sol.y[40][s], xi.on_state(lat.counts(s)));
  for (std::size_t k = 0; k <= 40; ++k) {
    const double bound = apriori_bound(gs.k_yz, 1.0, 0.2, 1.0, grid.t(k));
    for (double v : sol.y[k]) EXPECT_LE(std::abs(v), bound + 1e-8);
  }
  EXPECT_LE(sol.max_abs_u(), 2.0 * sol.max_abs_y() + 1e-8);
}

TEST(SolveLattice, PicardIterationCount) {
  const double K = 2.0, tol = 1e-12;
  const TimeGrid grid(1.0, 50);  // K dt = 0.04
  SolveConfig cfg;
  cfg.picard_tol = tol;
  const auto sol = solve_lattice(linear(0.1, K, 0.0), jump_count(), grid, build_mark_measure({1.0}, {1.0}), kZeta, cfg);
  const double bound = std::ceil(std::log(tol) / std::log(K * grid.dt())) + 1.0;
  EXPECT_LE(double(sol.meta.picard_iterations_max), bound);
}

TEST(SolveLattice, SizeGuard) {
  SolveConfig cfg;
  cfg.state_cap = 1000;
  const MarkMeasure mm = build_mark_measure({0.5, 1.0, 1.5}, {0.1, 0.1, 0.1});
  EXPECT_THROW(solve_lattice(zero_generator(), constant(0.0), TimeGrid(1.0, 100), mm, kZeta, cfg), SolverError);
}

TEST(SolveLattice, ExplicitAndImplicitConverge) {
  const MarkMeasure mm = build_mark_measure({1.0}, {1.0});
  SolveConfig ex;
  ex.scheme = Scheme::kExplicit;
  const auto a = solve_lattice(entropic_generator(1.0), jump_count(), TimeGrid(1.0, 400), mm, kZeta, ex);
  const auto b = solve_lattice(entropic_generator(1.0), jump_count(), TimeGrid(1.0, 400), mm, kZeta);
  EXPECT_NEAR(a.y0, b.y0, 1e-2);
}

TEST(SolveLsmc, BrownianSquare) {
  const auto xi = TerminalCondition::from_path(
      [](const PathBundle& pb, std::size_t p) {
        const double b = pb.brownian_at(p, pb.steps())[0];
        return b * b;
      },
      "B^2");
  SolveConfig cfg;
  cfg.n_paths = 20000;
  const auto sol = solve_lsmc(zero_generator(), xi, TimeGrid(1.0, 10), MarkMeasure(), kZeta, 1, cfg, 3);
  EXPECT_LE(std::abs(sol.y0 - 1.0), 3.0 * sol.se_y0);
}

TEST(SolveLsmc, LinearOde) {
  // f(y) = y, xi = min(N, 2). In the simulated model N ~ Binomial(M, dt), and
  // the implicit step integrates e^T as (1 - dt)^{-M}.
  const auto xi = TerminalCondition::from_state([](std::span<const std::uint16_t> c) { return std::min(2.0, double(c[0])); });
  SolveConfig cfg;
  cfg.n_paths = 20000;
  const MarkMeasure mm = build_mark_measure({1.0}, {1.0});
  const std::size_t M = 50;
  const TimeGrid grid(1.0, M);
  const auto sol = solve_lsmc(linear(0.0, 1.0, 0.0), xi, grid, mm, kZeta, 0, cfg, 4);
  const double dt = grid.dt();
  const double p0 = std::pow(1.0 - dt, double(M)), p1 = double(M) * dt * std::pow(1.0 - dt, double(M - 1));
  const double e_xi = p1 + 2.0 * (1.0 - p0 - p1);
  EXPECT_LE(std::abs(sol.y0 - std::pow(1.0 - dt, -double(M)) * e_xi), 3.0 * sol.se_y0);
  // and e^T E[xi] under Poisson(1) up to the O(dt) discretization
  const double e_poisson = std::exp(-1.0) + 2.0 * (1.0 - 2.0 * std::exp(-1.0));
  EXPECT_LE(std::abs(sol.y0 - std::exp(1.0) * e_poisson), 3.0 * sol.se_y0 + 2.0 * dt);
}

TEST(SolveLsmc, Deterministic) {
  const MarkMeasure mm = build_mark_measure({1.0}, {1.0});
  SolveConfig cfg;
  cfg.n_paths = 2000;
  const auto a = solve_lsmc(entropic_generator(0.5), jump_count(), TimeGrid(1.0, 10), mm, kZeta, 1, cfg, 8);
  const auto b = solve_lsmc(entropic_generator(0.5), jump_count(), TimeGrid(1.0, 10), mm, kZeta, 1, cfg, 8);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.u, b.u);
}

TEST(SolveLsmc, AgreesWithLattice) {
  const MarkMeasure mm = build_mark_measure({0.5, 1.0}, {0.8, 0.6});
  const TimeGrid grid(1.0, 20);
  const auto xi = TerminalCondition::from_state(
      [](std::span<const std::uint16_t> c) { return std::min(1.0, 0.5 * c[0] + c[1]); }, "capped");
  const auto lat = solve_lattice(entropic_generator(1.0), xi, grid, mm, kZeta);
  SolveConfig cfg;
  cfg.n_paths = 40000;
  const auto mc = solve_lsmc(entropic_generator(1.0), xi, grid, mm, kZeta, 0, cfg, 5);
  EXPECT_LE(std::abs(mc.y0 - lat.y0), 3.0 * mc.se_y0);
}

TEST(MonotoneDriver, ConstantFamily) {
  const MarkMeasure mm = build_mark_measure({0.5, 1.0}, {1.0, 1.0});
  const auto all = [](int) -> MarkPredicate { return [](double) { return true; }; };
  const auto res = monotone_driver(entropic_generator(1.0), all, {1, 2, 4}, jump_count(), TimeGrid(0.5, 10), mm, kZeta);
  for (double d : res.delta_y) EXPECT_EQ(d, 0.0);
}

TEST(MonotoneDriver, EntropicNondecreasing) {
  std::vector<double> marks, weights;
  for (int k = 1; k <= 10; ++k) {
    marks.push_back(1.0 / k);
    weights.push_back(0.2 * k);
  }
  const MarkMeasure mm = build_mark_measure(marks, weights);
  const auto xi = TerminalCondition::from_state(
      [&mm](std::span<const std::uint16_t> c) {
        double x = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) x += mm.mark(i) * c[i];
        return std::min(x, 1.0);
      },
      "position");
  const auto res = monotone_driver(entropic_generator(1.0), inverse_n_family(), {2, 4, 8, 10}, xi,
                                   TimeGrid(0.5, 10), mm, kZeta);
  EXPECT_TRUE(res.monotone);
  EXPECT_EQ(res.sign, 1);
  for (std::size_t i = 1; i < res.y0.size(); ++i) EXPECT_GE(res.y0[i], res.y0[i - 1] - 1e-12);
  EXPECT_GT(res.delta_y[0], res.delta_y[1]);
  EXPECT_GT(res.delta_y[1], res.delta_y[2]);
}

TEST(CompareSolutions, Examples) {
  const MarkMeasure mm = build_mark_measure({1.0}, {1.0});
  const TimeGrid grid(1.0, 20);
  const auto a = solve_lattice(entropic_generator(1.0), jump_count(), grid, mm, kZeta);
  const auto r = compare_solutions(a, a);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.statistic, 0.0);
  const auto xi2 = TerminalCondition::from_state([](std::span<const std::uint16_t> c) { return c[0] + 0.3; });
  EXPECT_TRUE(compare_solutions(a, solve_lattice(entropic_generator(1.0), xi2, grid, mm, kZeta)).passed());
  const auto lower = solve_lattice(entropic_generator(1.0, -0.1), jump_count(), grid, mm, kZeta);
  EXPECT_TRUE(compare_solutions(lower, a).passed());
  EXPECT_FALSE(compare_solutions(a, lower).passed());
  EXPECT_THROW(compare_solutions(a, solve_lattice(entropic_generator(1.0), jump_count(), TimeGrid(1.0, 10), mm, kZeta)),
               std::invalid_argument);
}

TEST(Adjoint, Examples) {
  const MarkMeasure mm = build_mark_measure({1.0}, {1.0});
  const TimeGrid grid(1.0, 20);
  const auto pb = simulate_paths(grid, mm, kZeta, 1, 20000, 6);
  const auto xi = TerminalCondition::from_state([](std::span<const std::uint16_t> c) { return std::min(3.0, double(c[0])); });
  const auto zero = adjoint_representation(zero_generator(), xi, pb, mm, kZeta);
  double mean = 0.0;
  for (std::size_t p = 0; p < pb.n_paths; ++p) mean += xi(pb, p);
  EXPECT_NEAR(zero.y0, mean / pb.n_paths, 1e-12);

  const auto grow = adjoint_representation(linear(0.0, 0.5, 0.0), constant(1.0), pb, mm, kZeta,
                                           AdjointScheme::kContinuous);
  EXPECT_LE(std::abs(grow.y0 - std::exp(0.5)), 3.0 * grow.std_error + 1e-12);

  const GeneratorSpec gs = linear(0.1, -0.4, 0.6);
  const auto lat = solve_lattice(gs, xi, grid, mm, kZeta);
  const auto est = adjoint_representation(gs, xi, pb, mm, kZeta);
  EXPECT_LE(std::abs(est.y0 - lat.y0), 3.0 * est.std_error);
}

TEST(MartingaleDiagnostic, Examples) {
  const MarkMeasure mm = build_mark_measure({0.5, 1.0}, {1.0, 1.0});
  const TimeGrid grid(1.0, 10);
  const auto zero = [](std::size_t, std::span<const std::uint16_t>) { return std::vector<double>{0.0, 0.0}; };
  const auto none = [](std::size_t, std::span<const std::uint16_t>) { return std::vector<double>{}; };
  const auto ok = martingale_diagnostic(none, zero, mm, kZeta, grid);
  EXPECT_TRUE(ok.report.passed());
  const auto edge = [](std::size_t, std::span<const std::uint16_t>) { return std::vector<double>{-1.0, 0.2}; };
  EXPECT_FALSE(martingale_diagnostic(none, edge, mm, kZeta, grid).report.passed());
  const auto bounded = [](std::size_t k, std::span<const std::uint16_t>) {
    return std::vector<double>{-0.5, 0.1 * double(k)};
  };
  const auto b = martingale_diagnostic(none, bounded, mm, kZeta, grid);
  EXPECT_TRUE(b.report.passed());
  EXPECT_EQ(b.certified_by, "bounded-bracket");
}

TEST(ZeroZ, Examples) {
  const MarkMeasure mm = build_mark_measure({1.0}, {1.0});
  const TimeGrid grid(1.0, 5);
  SolveConfig cfg;
  cfg.n_paths = 50000;
  const auto xi = TerminalCondition::from_state([](std::span<const std::uint16_t> c) { return std::min(3.0, double(c[0])); });
  EXPECT_TRUE(zero_z_check(entropic_generator(1.0), xi, 1, grid, mm, kZeta, cfg, 21).passed());
  const auto vac = zero_z_check(entropic_generator(1.0), xi, 0, grid, mm, kZeta, cfg, 21);
  EXPECT_TRUE(vac.passed());
  // control case: xi = B_T has Z = 1
  const auto bt = TerminalCondition::from_path([](const PathBundle& pb, std::size_t p) { return pb.brownian_at(p, pb.steps())[0]; });
  EXPECT_FALSE(zero_z_check(zero_generator(), bt, 1, grid, mm, kZeta, cfg, 22).passed());
}

TEST(MonomialBasis, Size) {
  EXPECT_EQ(MonomialBasis(2, 3).size(), 10u);
  EXPECT_EQ(MonomialBasis(3, 2).size(), 10u);
  std::vector<double> out(10);
  MonomialBasis(2, 3).evaluate(std::vector<double>{2.0, 3.0}, out);
  EXPECT_EQ(out[0], 1.0);
}
