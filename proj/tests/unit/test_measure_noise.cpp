#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "jbsde/lattice.hpp"
#include "jbsde/measure.hpp"
#include "jbsde/noise_stats.hpp"
#include "jbsde/paths.hpp"

using namespace jbsde;

TEST(MarkMeasure, StandardPoisson) {
  const MarkMeasure mm = build_mark_measure({1.0}, {1.0});
  ASSERT_EQ(mm.size(), 1u);
  EXPECT_EQ(mm.mark(0), 1.0);
  EXPECT_EQ(mm.total_intensity(), 1.0);
}

TEST(MarkMeasure, EmptyIsAnError) { EXPECT_THROW(build_mark_measure({}, {}), std::invalid_argument); }

TEST(MarkMeasure, TotalIntensityIsTheSum) {
  const MarkMeasure mm = build_mark_measure({0.5, -0.5}, {2.0, 2.0});
  EXPECT_EQ(mm.total_intensity(), 4.0);
  EXPECT_EQ(mm.mark(0), -0.5);  // sorted
}

TEST(MarkMeasure, RejectsBadInput) {
  EXPECT_THROW(build_mark_measure({1.0, 1.0}, {1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(build_mark_measure({0.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(build_mark_measure({1.0}, {-1.0}), std::invalid_argument);
  EXPECT_THROW(build_mark_measure({1.0, 2.0}, {1.0}), std::invalid_argument);
}

TEST(TruncateMeasure, Filters) {
  const MarkMeasure mm = build_mark_measure({0.05, 0.5, 2.0}, {1.0, 1.0, 1.0});
  const MarkMeasure a = truncate_measure(mm, abs_at_least(0.25));
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a.mark(0), 0.5);
  EXPECT_EQ(a.mark(1), 2.0);
  EXPECT_EQ(truncate_measure(mm, [](double) { return true; }), mm);
  const MarkMeasure b = truncate_measure(mm, abs_at_least(1.0));
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b.mark(0), 2.0);
}

TEST(TruncateMeasure, IntensityNondecreasingAlongNestedFamily) {
  std::vector<double> marks, weights;
  for (int k = 1; k <= 10; ++k) {
    marks.push_back(1.0 / k);
    weights.push_back(0.2 * k);
  }
  const MarkMeasure mm = build_mark_measure(marks, weights);
  const auto fam = inverse_n_family();
  double prev = -1.0;
  for (int n = 1; n <= 12; ++n) {
    const double total = truncate_measure(mm, fam(n)).total_intensity();
    EXPECT_GE(total, prev);
    prev = total;
  }
}

TEST(UtNorm, Examples) {
  const MarkMeasure mm = build_mark_measure({1.0, 2.0}, {1.0, 1.0});
  const ZetaDensity one;
  EXPECT_NEAR(ut_norm(std::vector<double>{1.0, 1.0}, one, 0.0, mm), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(ut_norm(std::vector<double>{3.0, 4.0}, one, 0.0, mm), 5.0, 1e-15);
  EXPECT_EQ(ut_norm(std::vector<double>{3.0, 4.0}, ZetaDensity::constant(0.0), 0.0, mm), 0.0);
}

TEST(UtNorm, HomogeneousAndTriangle) {
  const MarkMeasure mm = build_mark_measure({0.5, 1.0, 2.0}, {0.3, 1.0, 0.7});
  const ZetaDensity zeta = ZetaDensity::linear_in_time(1.0, 0.5, 1.0);
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> a(3), b(3), s(3), c(3);
    const double lam = U(g), t = (U(g) + 3.0) / 6.0;
    for (int j = 0; j < 3; ++j) {
      a[j] = U(g);
      b[j] = U(g);
      s[j] = a[j] + b[j];
      c[j] = lam * a[j];
    }
    const double na = ut_norm(a, zeta, t, mm), nb = ut_norm(b, zeta, t, mm);
    EXPECT_NEAR(ut_norm(c, zeta, t, mm), std::abs(lam) * na, 1e-12 * (1.0 + na));
    EXPECT_LE(ut_norm(s, zeta, t, mm), na + nb + 1e-12);
  }
}

TEST(ZetaDensity, RejectsValuesOutsideBound) {
  const ZetaDensity z([](double t, double) { return 2.0 * t; }, 1.0);
  EXPECT_NO_THROW(z(0.25, 1.0));
  EXPECT_THROW(z(0.75, 1.0), std::invalid_argument);
}

TEST(JumpProbabilities, CoarseGridRejected) {
  const MarkMeasure mm = build_mark_measure({1.0}, {3.0});
  EXPECT_THROW(jump_probabilities(TimeGrid(1.0, 2), 0, mm, ZetaDensity()), std::invalid_argument);
  const auto p = jump_probabilities(TimeGrid(1.0, 10), 0, mm, ZetaDensity());
  EXPECT_NEAR(p[0], 0.3, 1e-15);
}

TEST(SimulatePaths, SameSeedSameBundle) {
  const MarkMeasure mm = build_mark_measure({0.5, 1.0}, {1.0, 0.5});
  const auto a = simulate_paths(TimeGrid(1.0, 20), mm, ZetaDensity(), 2, 500, 11);
  const auto b = simulate_paths(TimeGrid(1.0, 20), mm, ZetaDensity(), 2, 500, 11);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.serialize(), b.serialize());
  EXPECT_EQ(PathBundle::deserialize(a.serialize()), a);
  const auto c = simulate_paths(TimeGrid(1.0, 20), mm, ZetaDensity(), 2, 500, 12);
  EXPECT_NE(a.serialize(), c.serialize());
}

TEST(SimulatePaths, PathSeedsArePrefixStable) {
  // path p depends on (master, p) only
  const MarkMeasure mm = build_mark_measure({1.0}, {1.0});
  const auto small = simulate_paths(TimeGrid(1.0, 10), mm, ZetaDensity(), 1, 10, 5);
  const auto large = simulate_paths(TimeGrid(1.0, 10), mm, ZetaDensity(), 1, 100, 5);
  for (std::size_t p = 0; p < 10; ++p)
    for (std::size_t k = 0; k < 10; ++k) {
      EXPECT_EQ(small.increment(p, k, 0), large.increment(p, k, 0));
      EXPECT_EQ(small.jump_at(p, k), large.jump_at(p, k));
    }
}

TEST(SimulatePaths, BrownianQuadraticVariation) {
  const double T = 1.5;
  const std::size_t n = 10000;
  const auto pb = simulate_paths(TimeGrid(T, 50), MarkMeasure(), ZetaDensity(), 1, n, 1);
  double s = 0.0, s2 = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    double qv = 0.0;
    for (std::size_t k = 0; k < 50; ++k) qv += pb.increment(p, k, 0) * pb.increment(p, k, 0);
    s += qv;
    s2 += qv * qv;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_LE(std::abs(mean - T), 3.0 * se);
}

TEST(SimulatePaths, PoissonMeanCount) {
  const std::size_t n = 100000;
  const auto pb = simulate_paths(TimeGrid(1.0, 1000), build_mark_measure({1.0}, {1.0}), ZetaDensity(), 0, n, 2);
  double s = 0.0;
  for (std::size_t p = 0; p < n; ++p) s += pb.counts_at(p, 1000)[0];
  EXPECT_LE(std::abs(s / n - 1.0), 3.0 / std::sqrt(double(n)));
}

TEST(SimulatePaths, ThinningFrequencyPerStep) {
  const MarkMeasure mm = build_mark_measure({0.5, 1.0, 2.0}, {2.0, 1.0, 0.5});
  const ZetaDensity zeta = ZetaDensity::linear_in_time(0.5, 1.0, 1.0);
  const TimeGrid grid(1.0, 20);
  const std::size_t n = 40000;
  const auto pb = simulate_paths(grid, mm, zeta, 0, n, 9);
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const auto p = jump_probabilities(grid, k, mm, zeta);
    for (std::size_t i = 0; i < mm.size(); ++i) {
      std::size_t hits = 0;
      for (std::size_t q = 0; q < n; ++q) hits += pb.jump_at(q, k) == static_cast<int>(i);
      EXPECT_LE(std::abs(double(hits) / n - p[i]), 4.0 * std::sqrt(p[i] * (1.0 - p[i]) / n)) << k << " " << i;
    }
  }
}

TEST(OnbExpansion, ExactIdentity) {
  const ZetaDensity one;
  const MarkMeasure m1 = build_mark_measure({1.0}, {0.7});
  const auto pb1 = simulate_paths(TimeGrid(1.0, 10), m1, one, 0, 100, 3);
  // exact up to the rounding of w^{-1/2} w^{1/2}
  EXPECT_LT(onb_expansion_check(
                m1, one, [](std::size_t k, std::size_t p) { return std::vector<double>{double(k) - double(p % 3)}; }, pb1),
            1e-14);

  const MarkMeasure m3 = build_mark_measure({0.5, 1.0, 2.0}, {0.3, 1.2, 0.5});
  const auto pb3 = simulate_paths(TimeGrid(1.0, 10), m3, one, 0, 100, 4);
  EXPECT_EQ(onb_expansion_check(m3, one, [](std::size_t, std::size_t) { return std::vector<double>(3, 0.0); }, pb3), 0.0);
  std::mt19937_64 g(5);
  std::vector<double> vals(10 * 100 * 3);
  for (auto& v : vals) v = std::normal_distribution<double>(0.0, 2.0)(g);
  const double r = onb_expansion_check(
      m3, one,
      [&vals](std::size_t k, std::size_t p) {
        return std::vector<double>(vals.begin() + (p * 10 + k) * 3, vals.begin() + (p * 10 + k) * 3 + 3);
      },
      pb3);
  EXPECT_LT(r, 1e-12);
}

TEST(Bmo, ZeroAndConstantIntegrand) {
  const MarkMeasure mm = build_mark_measure({1.0}, {0.8});
  const TimeGrid grid(2.0, 20);
  const auto zero = [](std::size_t, std::span<const std::uint16_t>) { return IntegrandValue{}; };
  EXPECT_EQ(bmo_statistic(zero, mm, ZetaDensity(), grid, BmoBackend::kLattice).value, 0.0);
  const auto c = [](std::size_t, std::span<const std::uint16_t>) { return IntegrandValue{{}, {1.5}}; };
  // c^2 w T
  EXPECT_NEAR(bmo_statistic(c, mm, ZetaDensity(), grid, BmoBackend::kLattice).value, 1.5 * 1.5 * 0.8 * 2.0, 1e-12);
}

TEST(Bmo, LatticeAndPathsAgree) {
  const MarkMeasure mm = build_mark_measure({0.5, 1.0}, {0.6, 0.9});
  const TimeGrid grid(1.0, 10);
  const auto field = [](std::size_t k, std::span<const std::uint16_t> c) {
    return IntegrandValue{{0.3 + 0.05 * double(k)}, {0.5 + 0.2 * c[0], 1.0 - 0.1 * c[1]}};
  };
  const auto lat = bmo_statistic(field, mm, ZetaDensity(), grid, BmoBackend::kLattice);
  BmoOptions opt;
  opt.n_paths = 40000;
  const auto mc = bmo_statistic(field, mm, ZetaDensity(), grid, BmoBackend::kPaths, opt);
  ASSERT_GT(mc.std_error, 0.0);
  // the state-level sup on paths is taken over groups large enough to estimate
  EXPECT_LE(mc.value, lat.value + 3.0 * mc.std_error);
  EXPECT_LE(std::abs(mc.per_step[0] - lat.per_step[0]), 3.0 * mc.per_step_se[0] + 1e-12);
}

TEST(JumpLattice, RankRoundTrip) {
  for (std::size_t m : {1u, 2u, 3u, 5u}) {
    const JumpLattice lat(m, 6);
    EXPECT_EQ(lat.size(), static_cast<std::size_t>(std::llround(JumpLattice::state_count(6, m))));
    for (std::size_t s = 0; s < lat.size(); ++s) {
      EXPECT_EQ(lat.index(lat.counts(s)), s);
      if (lat.total(s) < 6)
        for (std::size_t i = 0; i < m; ++i) {
          std::vector<std::uint16_t> c(lat.counts(s).begin(), lat.counts(s).end());
          ++c[i];
          EXPECT_EQ(lat.neighbor(s, i), lat.index(c));
        }
    }
  }
}

TEST(JumpLattice, SizeGuard) { EXPECT_THROW(JumpLattice(10, 1000, 5e6), std::exception); }

TEST(JumpLattice, StateProbabilitiesSumToOne) {
  const MarkMeasure mm = build_mark_measure({0.5, 1.0}, {1.0, 2.0});
  const TimeGrid grid(1.0, 30);
  const JumpLattice lat(2, 30);
  const auto P = lattice_state_probabilities(lat, grid, mm, ZetaDensity());
  for (std::size_t k = 0; k <= 30; ++k) {
    double s = 0.0;
    for (double v : P[k]) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}
