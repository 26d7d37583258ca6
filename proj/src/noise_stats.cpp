#include "jbsde/noise_stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "jbsde/lattice.hpp"

namespace jbsde {

double onb_expansion_check(const MarkMeasure& mm, const ZetaDensity& zeta, const PathMarkField& U,
                           const PathBundle& pb) {
  const std::size_t m = mm.size();
  const std::size_t M = pb.steps();
  const double dt = pb.grid.dt();
  for (std::size_t k = 0; k < M; ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      if (zeta(pb.grid.t(k), mm.mark(i)) != 1.0) {
        throw std::invalid_argument("onb_expansion_check: zeta is not identically 1");
      }
    }
  }
  std::vector<double> inv_sqrt_w(m);
  std::vector<double> sqrt_w(m);
  for (std::size_t i = 0; i < m; ++i) {
    sqrt_w[i] = std::sqrt(mm.weight(i));
    inv_sqrt_w[i] = 1.0 / sqrt_w[i];
  }

  double worst = 0.0;
  for (std::size_t p = 0; p < pb.n_paths; ++p) {
    double lhs = 0.0;
    double rhs = 0.0;
    for (std::size_t k = 0; k < M; ++k) {
      const auto u = U(k, p);
      if (u.size() != m) throw std::invalid_argument("onb_expansion_check: U dimension mismatch");
      const int J = pb.jump_at(p, k);
      // U * mu~ increment
      double d_lhs = (J >= 0) ? u[static_cast<std::size_t>(J)] : 0.0;
      for (std::size_t i = 0; i < m; ++i) d_lhs -= u[i] * mm.weight(i) * dt;
      // sum_n alpha^n dL^n
      double d_rhs = 0.0;
      for (std::size_t n = 0; n < m; ++n) {
        const double alpha = u[n] * sqrt_w[n];
        const double dL = inv_sqrt_w[n] * ((J == static_cast<int>(n) ? 1.0 : 0.0) - mm.weight(n) * dt);
        d_rhs += alpha * dL;
      }
      lhs += d_lhs;
      rhs += d_rhs;
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  }
  return worst;
}

namespace {

double bracket_density(const IntegrandValue& v, const MarkMeasure& mm, const ZetaDensity& zeta, double t) {
  double q = 0.0;
  for (double z : v.z) q += z * z;
  if (!v.u.empty()) {
    if (v.u.size() != mm.size()) throw std::invalid_argument("bmo_statistic: U dimension mismatch");
    for (std::size_t i = 0; i < v.u.size(); ++i) q += v.u[i] * v.u[i] * zeta(t, mm.mark(i)) * mm.weight(i);
  }
  return q;
}

BmoResult bmo_lattice(const StateIntegrandField& field, const MarkMeasure& mm, const ZetaDensity& zeta,
                      const TimeGrid& grid, const BmoOptions& opt) {
  const std::size_t M = grid.steps();
  const std::size_t m = mm.size();
  JumpLattice lattice(m, M, opt.state_cap);
  BmoResult out;
  out.per_step.assign(M + 1, 0.0);
  out.per_step_se.assign(M + 1, 0.0);
  std::vector<double> next(lattice.size_upto(M), 0.0);
  for (std::size_t kk = M; kk-- > 0;) {
    const auto p = jump_probabilities(grid, kk, mm, zeta);
    double ptot = 0.0;
    for (double v : p) ptot += v;
    std::vector<double> cur(lattice.size_upto(kk));
    double worst = 0.0;
    for (std::size_t s = 0; s < cur.size(); ++s) {
      double c = (1.0 - ptot) * next[s];
      for (std::size_t i = 0; i < m; ++i) c += p[i] * next[lattice.neighbor(s, i)];
      cur[s] = c + bracket_density(field(kk, lattice.counts(s)), mm, zeta, grid.t(kk)) * grid.dt();
      worst = std::max(worst, cur[s]);
    }
    out.per_step[kk] = worst;
    next.swap(cur);
  }
  out.value = *std::max_element(out.per_step.begin(), out.per_step.end());
  return out;
}

BmoResult bmo_paths(const StateIntegrandField& field, const MarkMeasure& mm, const ZetaDensity& zeta,
                    const TimeGrid& grid, const BmoOptions& opt) {
  const std::size_t M = grid.steps();
  const std::size_t m = mm.size();
  const auto pb = simulate_paths(grid, mm, zeta, 0, opt.n_paths, opt.seed);

  struct Acc {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;
  };
  std::vector<std::map<std::vector<std::uint16_t>, Acc>> groups(M + 1);
  std::vector<double> remaining(M + 1);
  std::vector<std::vector<std::uint16_t>> states(M + 1, std::vector<std::uint16_t>(m, 0));
  for (std::size_t p = 0; p < pb.n_paths; ++p) {
    std::vector<std::uint16_t> c(m, 0);
    std::vector<double> q(M);
    for (std::size_t k = 0; k < M; ++k) {
      states[k] = c;
      q[k] = bracket_density(field(k, c), mm, zeta, grid.t(k)) * grid.dt();
      const int J = pb.jump_at(p, k);
      if (J >= 0) ++c[static_cast<std::size_t>(J)];
    }
    states[M] = c;
    remaining[M] = 0.0;
    for (std::size_t k = M; k-- > 0;) remaining[k] = remaining[k + 1] + q[k];
    for (std::size_t k = 0; k <= M; ++k) {
      auto& a = groups[k][states[k]];
      a.sum += remaining[k];
      a.sum_sq += remaining[k] * remaining[k];
      ++a.n;
    }
  }

  BmoResult out;
  out.per_step.assign(M + 1, 0.0);
  out.per_step_se.assign(M + 1, 0.0);
  for (std::size_t k = 0; k <= M; ++k) {
    for (const auto& [state, a] : groups[k]) {
      if (a.n < opt.min_group && k > 0) continue;
      const double mean = a.sum / static_cast<double>(a.n);
      const double var = std::max(0.0, a.sum_sq / static_cast<double>(a.n) - mean * mean);
      const double se = std::sqrt(var / static_cast<double>(a.n));
      if (mean > out.per_step[k]) {
        out.per_step[k] = mean;
        out.per_step_se[k] = se;
      }
    }
  }
  const auto it = std::max_element(out.per_step.begin(), out.per_step.end());
  out.value = *it;
  out.std_error = out.per_step_se[static_cast<std::size_t>(it - out.per_step.begin())];
  return out;
}

}  // namespace

BmoResult bmo_statistic(const StateIntegrandField& field, const MarkMeasure& mm, const ZetaDensity& zeta,
                        const TimeGrid& grid, BmoBackend backend, const BmoOptions& opt) {
  return backend == BmoBackend::kLattice ? bmo_lattice(field, mm, zeta, grid, opt)
                                         : bmo_paths(field, mm, zeta, grid, opt);
}

}  // namespace jbsde
