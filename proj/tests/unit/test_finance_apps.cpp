#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "jbsde/criteria.hpp"
#include "jbsde/errors.hpp"
#include "jbsde/finance.hpp"
#include "jbsde/named_generators.hpp"

using namespace jbsde;
using namespace jbsde::finance;

namespace {

const ZetaDensity kZeta;

MarketSpec bs(double sigma, double phi) {
  return MarketSpec::constant(Eigen::MatrixXd::Constant(1, 1, sigma), Eigen::VectorXd::Constant(1, phi));
}

TerminalCondition constant(double v) {
  return TerminalCondition::from_state([v](std::span<const std::uint16_t>) { return v; }, "const");
}

TerminalCondition capped(double cap) {
  return TerminalCondition::from_state(
      [cap](std::span<const std::uint16_t> c) {
        double n = 0.0;
        for (auto v : c) n += v;
        return std::min(n, cap);
      },
      "capped");
}

}  // namespace

TEST(ExpUtility, DeterministicNoJumps) {
  const double alpha = 2.0, phi = 0.3;
  const TimeGrid grid(1.0, 50);
  const auto res = exp_utility_solve(bs(0.2, phi), alpha, constant(0.0), grid, MarkMeasure(), kZeta, {});
  for (std::size_t k = 0; k <= 50; ++k) {
    EXPECT_NEAR(res.solution.y[k][0], -phi * phi * (1.0 - grid.t(k)) / (2.0 * alpha), 1e-12);
  }
  EXPECT_NEAR(res.theta_star[0][0], phi / alpha, 1e-15);
  EXPECT_NEAR(res.value(1.0, 0.0), -std::exp(-2.0), 1e-15);
}

TEST(ExpUtility, CashInvariance) {
  const MarkMeasure mm = build_mark_measure({0.5, 1.0}, {0.7, 0.5});
  const TimeGrid grid(1.0, 40);
  const auto a = exp_utility_solve(bs(0.2, 0.3), 1.5, capped(3.0), grid, mm, kZeta, {});
  const auto shifted = TerminalCondition::from_state(
      [](std::span<const std::uint16_t> c) { return std::min(double(c[0] + c[1]), 3.0) + 0.75; });
  const auto b = exp_utility_solve(bs(0.2, 0.3), 1.5, shifted, grid, mm, kZeta, {});
  for (std::size_t k = 0; k <= 40; ++k)
    for (std::size_t s = 0; s < a.solution.y[k].size(); ++s)
      EXPECT_NEAR(b.solution.y[k][s], a.solution.y[k][s] + 0.75, 1e-8);
}

TEST(PureJumpUtility, NoTradingIsEntropic) {
  const MarkMeasure mm = build_mark_measure({1.0}, {1.0});
  const TimeGrid grid(1.0, 40);
  const auto market = MarketSpec::pure_jump(0.2, [](double) { return 0.5; });
  const auto res = exp_utility_purejump_solve(market, 1.0, ConstraintSet::finite({0.0}), capped(3.0), grid, mm, kZeta);
  const auto ent = solve_lattice(entropic_generator(1.0), capped(3.0), grid, mm, kZeta);
  for (std::size_t k = 0; k <= 40; ++k)
    for (std::size_t s = 0; s < ent.y[k].size(); ++s) EXPECT_NEAR(res.solution.y[k][s], ent.y[k][s], 1e-12);
}

TEST(PureJumpUtility, ThetaDropsOutWithoutMarket) {
  const std::vector<double> u{0.3, -0.7}, psi{0.0, 0.0}, q{0.5, 1.2};
  const auto r = purejump_inner_inf(u, psi, q, 0.0, 1.0, ConstraintSet::finite({-1.0, 0.0, 2.0}));
  EXPECT_NEAR(r.value, g_alpha(1.0, 0.3) * 0.5 + g_alpha(1.0, -0.7) * 1.2, 1e-15);
}

TEST(PureJumpUtility, FiniteArgminMatchesEnumeration) {
  const std::vector<double> C{0.0, 0.5, 1.0};
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  for (int i = 0; i < 10000; ++i) {
    const std::vector<double> u{U(g), U(g)}, psi{0.5 + 0.25 * U(g), -0.3}, q{0.6, 0.9};
    const double beta = 0.5 * U(g), alpha = 1.0 + 0.25 * U(g);
    const auto r = purejump_inner_inf(u, psi, q, beta, alpha, ConstraintSet::finite(C));
    double best = 1e300, arg = 0.0;
    for (double th : C) {
      double v = -th * beta;
      for (int j = 0; j < 2; ++j) v += g_alpha(alpha, u[j] - th * psi[j]) * q[j];
      if (v < best) {
        best = v;
        arg = th;
      }
    }
    EXPECT_EQ(r.theta, arg);
    EXPECT_EQ(r.value, best);
  }
}

TEST(PureJumpUtility, IntervalMatchesGrid) {
  std::mt19937_64 g(8);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> u{U(g)}, psi{0.8}, q{1.0};
    const double beta = 0.3 * U(g);
    const auto r = purejump_inner_inf(u, psi, q, beta, 1.0, ConstraintSet::interval(-1.0, 1.0));
    double best = 1e300;
    for (int j = 0; j <= 20000; ++j) {
      const double th = -1.0 + 2.0 * j / 20000.0;
      best = std::min(best, -th * beta + g_alpha(1.0, u[0] - th * psi[0]) * q[0]);
    }
    EXPECT_LE(r.value, best + 1e-9);
  }
}

TEST(PowerTransform, Examples) {
  const std::vector<double> z{0.3}, u{0.5};
  const auto f = power_transform(1.5, z, u, 0.5, Direction::kForward);
  EXPECT_NEAR(f.y, 2.25, 1e-15);
  EXPECT_NEAR(f.u[0], 4.0 - 2.25, 1e-15);
  const auto b = power_transform(f.y, f.z, f.u, 0.5, Direction::kInverse);
  EXPECT_NEAR(b.y, 1.5, 1e-15);
  EXPECT_NEAR(b.z[0], 0.3, 1e-15);
  EXPECT_NEAR(b.u[0], 0.5, 1e-15);
  EXPECT_THROW(power_transform(-1.0, z, u, 0.5, Direction::kForward), DomainError);
  EXPECT_THROW(power_transform(1.0, z, std::vector<double>{-2.0}, 0.5, Direction::kForward), DomainError);
}

TEST(PowerTransform, RoundTripOnRandomTriples) {
  std::mt19937_64 g(9);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 5000; ++i) {
    // y + u stays a fixed fraction of y: (y + u)^{1/(1-gamma)} loses all digits
    // when y + u << y and gamma is close to 1
    const double gamma = 0.1 + 0.8 * U(g), y = 0.05 + 5.0 * U(g);
    const std::vector<double> z{4.0 * U(g) - 2.0, U(g)}, u{-0.5 * y * U(g), 3.0 * U(g)};
    const auto f = power_transform(y, z, u, gamma, Direction::kForward);
    const auto b = power_transform(f.y, f.z, f.u, gamma, Direction::kInverse);
    EXPECT_NEAR(b.y, y, 1e-12 * y);
    for (int j = 0; j < 2; ++j) {
      EXPECT_NEAR(b.z[j], z[j], 1e-12 * (1.0 + std::abs(z[j])));
      EXPECT_NEAR(b.u[j], u[j], 1e-12 * (1.0 + y));
    }
  }
}

TEST(PowerUtility, NoRiskPremium) {
  const auto res = power_utility_solve(bs(1.0, 0.0), 0.5, constant(1.0), 1.0, TimeGrid(1.0, 20), MarkMeasure(), kZeta);
  for (const auto& row : res.original.y)
    for (double v : row) EXPECT_NEAR(v, 1.0, 1e-15);
  EXPECT_EQ(res.theta_star[0][0], 0.0);
}

TEST(PowerUtility, DeterministicInstance) {
  const auto res = power_utility_solve(bs(1.0, 0.2), 0.5, constant(1.0), 1.0, TimeGrid(1.0, 1000), MarkMeasure(), kZeta);
  EXPECT_NEAR(res.transformed.y0, std::exp(0.04), 1e-4);
  EXPECT_NEAR(res.theta_star[0][0], 0.4, 1e-4);
}

TEST(PowerUtility, BandsAndRecursionResidual) {
  const MarkMeasure mm = build_mark_measure({0.5, 1.0}, {0.6, 0.8});
  const auto xi = TerminalCondition::from_state(
      [](std::span<const std::uint16_t> c) { return 0.5 + 0.4 * ((c[0] + 2 * c[1]) % 3); });
  const auto market = bs(1.0, 0.35);
  const auto res = power_utility_solve(market, 0.4, xi, 0.5, TimeGrid(1.0, 40), mm, kZeta);
  EXPECT_GE(res.bound_slack, -1e-10);
  // The one-step residual of the original recursion is O(dt^2): the power of
  // a one-step expectation is not the expectation of the power, and
  // (1 - K dt)^{-r} differs from (1 - r K dt)^{-1} at second order.
  const double r40 = power_recursion_residual(res, market, mm, kZeta);
  const auto fine = power_utility_solve(market, 0.4, xi, 0.5, TimeGrid(1.0, 160), mm, kZeta);
  const double r160 = power_recursion_residual(fine, market, mm, kZeta);
  EXPECT_LT(r160, r40 / 12.0);
}

TEST(Projection, Examples) {
  Eigen::MatrixXd s(1, 2);
  s << 1.0, 0.0;
  const Eigen::Vector2d z(0.7, -1.3);
  const auto p = project_ker_im(s, z);
  EXPECT_NEAR(p.pi(0), 0.7, 1e-15);
  EXPECT_NEAR(p.pi(1), 0.0, 1e-15);
  EXPECT_NEAR(p.pi_perp(1), -1.3, 1e-15);
  Eigen::Matrix2d sq;
  sq << 1.0, 0.5, -0.2, 2.0;
  const auto q = project_ker_im(sq, z);
  EXPECT_LT((q.pi - z).norm(), 1e-14);
  EXPECT_LT(q.pi_perp.norm(), 1e-14);
}

TEST(Projection, IdempotentAndOrthogonal) {
  std::mt19937_64 g(10);
  std::normal_distribution<double> N;
  for (int i = 0; i < 200; ++i) {
    Eigen::MatrixXd s(2, 4);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 4; ++c) s(r, c) = N(g);
    Eigen::VectorXd z(4);
    for (int c = 0; c < 4; ++c) z(c) = N(g);
    const auto p = project_ker_im(s, z);
    EXPECT_LT((project_ker_im(s, p.pi).pi - p.pi).norm(), 1e-12);
    EXPECT_LT(std::abs(p.pi.dot(p.pi_perp)), 1e-12);
  }
}

TEST(InnerMax, CauchySchwarzCases) {
  const double r2 = 4.0;
  const Eigen::Vector2d p(0.6, -0.8);
  const auto a = inner_max_kkt(p, std::vector<double>{0.0}, std::vector<double>{1.0}, r2);
  EXPECT_NEAR(a.value, 2.0, 1e-10);
  EXPECT_NEAR(a.eta(0), 1.2, 1e-8);
  const std::vector<double> u{0.5, 1.0}, q{1.0, 2.0};
  const auto b = inner_max_kkt(Eigen::VectorXd::Zero(1), u, q, r2);
  const double nu = std::sqrt(0.25 * 1.0 + 1.0 * 2.0);
  EXPECT_NEAR(b.value, 2.0 * nu, 1e-10);
  EXPECT_NEAR(b.gamma[0], 2.0 * 0.5 / nu, 1e-8);
  const auto c = inner_max_kkt(Eigen::VectorXd::Zero(0), std::vector<double>{-10.0}, std::vector<double>{1.0}, r2);
  EXPECT_EQ(c.gamma[0], -1.0);
  EXPECT_NEAR(c.value, 10.0, 1e-12);
  EXPECT_EQ(c.mu, 0.0);
  EXPECT_THROW(inner_max_kkt(p, u, q, 0.0), std::invalid_argument);
}

TEST(InnerMax, MatchesOraclesAndConstraints) {
  using harness::KktInstance;
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  for (int i = 0; i < 30; ++i) {
    KktInstance inst;
    const int m = 1 + i % 3;
    inst.p = {U(g), 0.5 * U(g)};
    for (int j = 0; j < m; ++j) {
      inst.u.push_back(U(g));
      inst.q.push_back(0.2 + 0.5 * (U(g) + 2.0));
    }
    inst.r2 = 0.1 + (U(g) + 2.0);
    const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(inst.p.data(), 2);
    const auto r = inner_max_kkt(p, inst.u, inst.q, inst.r2);
    double norm = r.eta.squaredNorm();
    for (int j = 0; j < m; ++j) {
      EXPECT_GE(r.gamma[j], -1.0);
      norm += inst.q[j] * r.gamma[j] * r.gamma[j];
    }
    EXPECT_LE(norm, inst.r2 + 1e-10);
    if (r.mu > 0.0) EXPECT_NEAR(norm, inst.r2, 1e-8);
    const double exact = harness::inner_max_active_set(inst);
    EXPECT_NEAR(r.value, exact, 1e-6 * std::max(1.0, std::abs(exact)));
    EXPECT_NEAR(harness::inner_max_dual_grid(inst, 100000), exact, 1e-4 * std::max(1.0, std::abs(exact)));
  }
}

TEST(GoodDeal, OrderingAndMonotoneInK) {
  const MarkMeasure mm = build_mark_measure({1.0}, {1.0});
  const TimeGrid grid(1.0, 40);
  const auto market = bs(0.2, 0.3);
  double prev0 = -1e300;
  std::vector<std::vector<double>> prev;
  for (double K : {0.4, 0.6, 0.8}) {
    const auto res = gooddeal_bounds(GoodDealSpec::constant(K, market), capped(2.0), grid, mm, kZeta);
    for (std::size_t k = 0; k <= 40; ++k)
      for (std::size_t s = 0; s < res.upper.y[k].size(); ++s) {
        EXPECT_LE(res.lower.y[k][s], res.upper.y[k][s] + 1e-10);
        if (!prev.empty()) {
          EXPECT_LE(prev[k][s], res.upper.y[k][s] + 1e-8);
        }
      }
    EXPECT_GE(res.upper.y0, prev0);
    prev0 = res.upper.y0;
    prev = res.upper.y;
  }
  EXPECT_THROW(GoodDealSpec::constant(0.2, market).validate(grid), std::invalid_argument);
}

TEST(MartingaleOptimality, ExponentialDeterministic) {
  // xi = 0, no jumps: theta* = phi / alpha; perturbations are supermartingales
  const double alpha = 1.0, phi = 0.4;
  const TimeGrid grid(1.0, 20);
  const auto res = exp_utility_solve(bs(1.0, phi), alpha, constant(0.0), grid, MarkMeasure(), kZeta, {});
  const auto pb = simulate_paths(grid, MarkMeasure(), kZeta, 1, 100000, 12);
  OptimalityCase app;
  app.alpha = alpha;
  app.phi = phi;
  app.y0 = res.solution.y0;
  app.theta_star = [&](std::size_t, std::size_t) { return phi / alpha; };
  app.xi = [](std::size_t) { return 0.0; };
  const auto rep = martingale_optimality_check(app, {0.5, -0.5, -phi / alpha}, pb);
  EXPECT_TRUE(rep.report.passed());
  ASSERT_EQ(rep.drifts.size(), 4u);
  EXPECT_LT(rep.drifts[1].drift, -3.0 * rep.drifts[1].std_error);
}
