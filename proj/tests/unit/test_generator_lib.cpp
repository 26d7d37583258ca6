#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "jbsde/errors.hpp"
#include "jbsde/finance.hpp"
#include "jbsde/generator.hpp"
#include "jbsde/named_generators.hpp"

using namespace jbsde;

namespace {

const MarkMeasure kOne = build_mark_measure({1.0}, {1.0});
const ZetaDensity kZeta;

double eval1(const GeneratorSpec& gs, double y, double z, double u) {
  const std::vector<double> zv = gs.z_dim ? std::vector<double>(gs.z_dim, z) : std::vector<double>{};
  return eval_generator(gs, 0.0, y, zv, std::vector<double>{u}, kOne, kZeta);
}

GeneratorSpec point(std::function<double(double)> g) {
  return make_separable(
      "test", nullptr, [g](double, double, std::span<const double>, double u, double) { return g(u); }, nullptr, 0.0,
      false, false);
}

}  // namespace

TEST(EvalGenerator, Entropic) {
  const GeneratorSpec gs = entropic_generator(1.0);
  EXPECT_EQ(eval1(gs, 0.3, 0.0, 0.0), 0.0);
  EXPECT_NEAR(eval1(gs, 0.0, 0.0, 1.0), std::exp(1.0) - 2.0, 1e-15);
  EXPECT_NEAR(eval1(entropic_generator(1.0, 0.25), 0.0, 0.0, 0.0), 0.25, 1e-15);
}

TEST(EvalGenerator, ExpUtilityFhat) {
  GeneratorParams p;
  p.scalars["alpha"] = 2.0;
  p.scalars["phi"] = 0.2;
  const GeneratorSpec gs = build_named_generator("exp_utility", p);
  EXPECT_NEAR(eval1(gs, 0.0, 0.0, 0.0), -0.01, 1e-15);
}

TEST(EvalGenerator, NonfiniteRaises) {
  const GeneratorSpec gs = entropic_generator(1.0);
  EXPECT_THROW(eval1(gs, 0.0, 0.0, 800.0), DomainError);
}

TEST(CheckAfin, Examples) {
  const ProbeBox box = default_probe_box(1.0, kOne);
  EXPECT_TRUE(check_afin(entropic_generator(1.0), box).pass);
  const auto lin = check_afin(point([](double u) { return -2.0 * u; }), box);
  EXPECT_FALSE(lin.pass);
  ASSERT_TRUE(lin.violation);
  EXPECT_NEAR(lin.violation->slope, -2.0, 1e-6);
  ProbeBox unit = box;
  unit.u_lo = -1.0;
  unit.u_hi = 1.0;
  const auto sq = check_afin(point([](double u) { return u * u; }), unit);
  EXPECT_FALSE(sq.pass);
  ASSERT_TRUE(sq.violation);
  EXPECT_LT(sq.violation->u, -0.5 + 1e-9);
}

TEST(CheckAinfi, Examples) {
  const auto r = check_ainfi(entropic_generator(1.0), 1.0);
  EXPECT_NEAR(r.k_c, std::exp(1.0) - 1.0, 1e-3);
  EXPECT_NEAR(r.delta_c, std::exp(-1.0), 1e-3);
  const auto super = check_ainfi(point([](double u) {
                                   const double p = std::max(u, 0.0);
                                   return std::exp(p * p) - 1.0;
                                 }),
                                 1.0);
  EXPECT_TRUE(super.pass);
  EXPECT_TRUE(std::isfinite(super.k_c));
  const auto zero = check_ainfi(point([](double) { return 0.0; }), 1.0);
  EXPECT_EQ(zero.k_c, 0.0);
  EXPECT_EQ(zero.delta_c, 1.0);
}

TEST(TruncateGenerator, ClampsIntoBand) {
  // y-dependent generator so the clamp is visible
  const GeneratorSpec gs = make_separable(
      "y", [](double, double y, std::span<const double>) { return 3.0 * y; }, nullptr, nullptr, 3.0, true, false);
  TruncationBand band{[](double) { return -1.0; }, [](double) { return 1.0; }};
  const GeneratorSpec tr = truncate_generator(gs, band);
  EXPECT_EQ(eval1(tr, 0.5, 0.0, 0.2), eval1(gs, 0.5, 0.0, 0.2));
  EXPECT_EQ(eval1(tr, 2.0, 0.0, 0.0), 3.0);
}

TEST(TruncateGenerator, ContractionInY) {
  GeneratorParams p;
  p.scalars["alpha"] = 0.7;
  p.scalars["alpha0"] = 0.1;
  p.scalars["gamma"] = 0.4;
  const GeneratorSpec gs = build_named_generator("linear", p);
  const GeneratorSpec tr =
      truncate_generator(gs, TruncationBand{[](double) { return -0.5; }, [](double) { return 0.8; }});
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  double worst_gs = 0.0, worst_tr = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double y = U(g), y2 = U(g), u = U(g);
    if (y == y2) continue;
    worst_tr = std::max(worst_tr, std::abs(eval1(tr, y, 0, u) - eval1(tr, y2, 0, u)) / std::abs(y - y2));
    worst_gs = std::max(worst_gs, std::abs(eval1(gs, y, 0, u) - eval1(gs, y2, 0, u)) / std::abs(y - y2));
  }
  EXPECT_LE(worst_tr, tr.k_yz + 1e-8);
  EXPECT_LE(worst_tr, worst_gs + 1e-8);
}

TEST(EvalGenerator, LipschitzInYZWithinDeclaredConstant) {
  GeneratorParams p;
  p.scalars["alpha"] = -0.6;
  p.vectors["beta"] = {0.3, -0.4};
  p.scalars["gamma"] = 0.2;
  const GeneratorSpec gs = build_named_generator("linear", p);
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> z1{U(g), U(g)}, z2{U(g), U(g)}, u{U(g)};
    const double y1 = U(g), y2 = U(g);
    const double d = std::abs(y1 - y2) + std::hypot(z1[0] - z2[0], z1[1] - z2[1]);
    const double f1 = eval_generator(gs, 0.0, y1, z1, u, kOne, kZeta);
    const double f2 = eval_generator(gs, 0.0, y2, z2, u, kOne, kZeta);
    EXPECT_LE(std::abs(f1 - f2), gs.k_yz * d + 1e-8 * (1.0 + d));
  }
}

TEST(ApproxSequence, Examples) {
  const MarkMeasure mm = build_mark_measure({0.25, 0.5, 1.0}, {1.0, 1.0, 1.0});
  const GeneratorSpec gs = entropic_generator(1.0, 0.1);
  const auto fam = inverse_n_family();
  const std::vector<double> u{0.4, -0.3, 0.9};
  const double full = eval_generator(gs, 0.0, 0.0, {}, u, mm, kZeta);
  EXPECT_EQ(eval_generator(approx_sequence(gs, fam, 4), 0.0, 0.0, {}, u, mm, kZeta), full);
  const auto none = [](int) -> MarkPredicate { return [](double) { return false; }; };
  EXPECT_NEAR(eval_generator(approx_sequence(gs, none, 1), 0.0, 0.0, {}, u, mm, kZeta), 0.1, 1e-15);
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> v{U(g), U(g), U(g)};
    double prev = -1e300;
    for (int n = 1; n <= 4; ++n) {
      const double f = eval_generator(approx_sequence(gs, fam, n), 0.0, 0.0, {}, v, mm, kZeta);
      EXPECT_GE(f, prev);
      prev = f;
    }
  }
}

TEST(GammaSlope, Examples) {
  const GeneratorSpec gs = entropic_generator(1.0);
  EXPECT_NEAR(gamma_slope(gs, 0.0, 0.0, {}, 1.0, 0.0, 1.0), std::exp(1.0) - 2.0, 1e-12);
  EXPECT_EQ(gamma_slope(gs, 0.0, 0.0, {}, 0.7, 0.7, 1.0), 0.0);
  const GeneratorSpec sel = approx_sequence(gs, inverse_n_family(), 1);  // |e| >= 1
  EXPECT_EQ(gamma_slope(sel, 0.0, 0.0, {}, 1.0, 0.0, 0.5), 0.0);
}

TEST(GammaSlope, ExactDifferenceIdentity) {
  const MarkMeasure mm = build_mark_measure({0.5, 1.0, 1.5}, {0.4, 1.0, 0.6});
  const ZetaDensity zeta = ZetaDensity::constant(0.8);
  const GeneratorSpec gs = entropic_generator(0.7, 0.2);
  std::mt19937_64 g(6);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> u(3), v(3);
    for (int j = 0; j < 3; ++j) {
      u[j] = U(g);
      v[j] = U(g);
    }
    double rhs = 0.0;
    for (std::size_t j = 0; j < 3; ++j)
      rhs += gamma_slope(gs, 0.0, 0.0, {}, u[j], v[j], mm.mark(j)) * (u[j] - v[j]) * 0.8 * mm.weight(j);
    const double lhs = eval_generator(gs, 0.0, 0.0, {}, u, mm, zeta) - eval_generator(gs, 0.0, 0.0, {}, v, mm, zeta);
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Slopes, AnalyticMatchesFiniteDifference) {
  for (double alpha : {0.3, 1.0, 2.5}) {
    const GeneratorSpec gs = entropic_generator(alpha);
    GeneratorSpec fd = gs;
    fd.slope = nullptr;
    for (double u = -2.0; u <= 2.0; u += 0.05) {
      const double a = gs.slope_at(0.0, 0.0, {}, u, 1.0), b = fd.slope_at(0.0, 0.0, {}, u, 1.0);
      EXPECT_LE(std::abs(a - b), 1e-4 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST(DriftAdjust, Examples) {
  const TimeGrid grid(1.0, 10);
  GeneratorSpec gs = entropic_generator(1.0, 0.05);
  gs.z_dim = 1;
  const GeneratorSpec same = drift_adjust(gs, grid, [](double) { return std::vector<double>{0.0}; });
  EXPECT_EQ(eval1(same, 0.0, 0.7, 0.3), eval1(gs, 0.0, 0.7, 0.3));
  const GeneratorSpec adj = drift_adjust(gs, grid, [](double) { return std::vector<double>{-0.3}; });
  EXPECT_NEAR(eval1(adj, 0.0, 0.7, 0.0), 0.05 - 0.3 * 0.7, 1e-15);
  EXPECT_NEAR(adj.k_yz, gs.k_yz + 0.3, 1e-15);
}

TEST(AprioriBound, Examples) {
  EXPECT_EQ(apriori_bound(0.0, 1.0, 0.0, 1.0, 0.3), 1.0);
  EXPECT_NEAR(apriori_bound(1.0, 1.0, 0.0, 1.0, 0.0), std::exp(1.0), 1e-15);
  EXPECT_EQ(apriori_bound(2.0, 1.5, 0.7, 1.0, 1.0), 1.5);
}

TEST(OdeBounds, Examples) {
  OdeBoundParams p;
  p.xi_sup = 1.0;
  p.k1 = 2.0;
  p.k2 = 0.0;
  p.T = 1.0;
  const auto two = ode_bounds(OdeBoundKind::kTwoSidedK1K2, p);
  EXPECT_NEAR(two.b(0.0), 3.0, 1e-15);
  EXPECT_NEAR(two.b(1.0), 1.0, 1e-15);
  OdeBoundParams q;
  q.c = 1.0;
  q.k = 1.0;
  q.xi_sup = 2.0;
  q.T = 1.0;
  const auto pos = ode_bounds(OdeBoundKind::kPositiveK, q);
  EXPECT_NEAR(pos.a(0.0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(pos.a(1.0), 1.0, 1e-15);
  EXPECT_NEAR(pos.b(1.0), 2.0, 1e-15);
}

TEST(NamedGenerators, Examples) {
  GeneratorParams e;
  e.scalars["alpha"] = 1.0;
  const GeneratorSpec ent = build_named_generator("entropic", e);
  EXPECT_EQ(eval1(ent, 0.0, 0.0, 0.0), 0.0);
  EXPECT_NEAR(ent.slope_at(0.0, 0.0, {}, 0.0, 1.0), 0.0, 1e-15);

  GeneratorParams gd;
  gd.scalars["K"] = 0.1;
  gd.scalars["phi"] = 0.2;
  EXPECT_THROW(build_named_generator("gooddeal", gd), std::invalid_argument);

  GeneratorParams pw;
  pw.scalars["gamma"] = 0.5;
  const GeneratorSpec p = build_named_generator("power_transformed", pw);
  for (double y : {0.5, 1.0, 3.0}) EXPECT_NEAR(eval1(p, y, 0.0, 0.0), 0.0, 1e-15);

  EXPECT_THROW(build_named_generator("unknown", {}), std::invalid_argument);
  EXPECT_THROW(build_named_generator("entropic", {}), std::invalid_argument);
}
