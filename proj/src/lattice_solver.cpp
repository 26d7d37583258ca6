#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "jbsde/errors.hpp"
#include "jbsde/noise_stats.hpp"
#include "jbsde/solvers.hpp"

namespace jbsde {

const char* to_string(Scheme s) { return s == Scheme::kExplicit ? "explicit" : "picard-implicit"; }

Scheme parse_scheme(const std::string& s) {
  if (s == "explicit") return Scheme::kExplicit;
  if (s == "picard-implicit") return Scheme::kPicardImplicit;
  throw std::invalid_argument("unknown scheme '" + s + "'");
}

void SolveConfig::validate() const {
  if (!(picard_tol > 0.0)) throw std::invalid_argument("picard_tol must be > 0");
  if (picard_max < 1) throw std::invalid_argument("picard_max must be >= 1");
  if (basis_degree < 1) throw std::invalid_argument("basis_degree must be >= 1");
  if (!(state_cap > 0.0)) throw std::invalid_argument("state_cap must be > 0");
}

TerminalCondition TerminalCondition::from_state(StateFn fn, std::string description) {
  TerminalCondition xi;
  xi.on_state = std::move(fn);
  xi.description = std::move(description);
  return xi;
}

TerminalCondition TerminalCondition::from_path(PathFn fn, std::string description) {
  TerminalCondition xi;
  xi.on_path = std::move(fn);
  xi.description = std::move(description);
  return xi;
}

double TerminalCondition::operator()(const PathBundle& pb, std::size_t p) const {
  if (on_path) return on_path(pb, p);
  const auto c = pb.counts_at(p, pb.steps());
  return on_state(c);
}

std::size_t BsdeSolution::n_states(std::size_t k) const { return y[k].size(); }

double BsdeSolution::max_abs_y() const {
  double v = 0.0;
  for (const auto& row : y)
    for (double x : row) v = std::max(v, std::abs(x));
  return v;
}

double BsdeSolution::max_abs_u() const {
  double v = 0.0;
  for (const auto& row : u)
    for (double x : row) v = std::max(v, std::abs(x));
  return v;
}

double BsdeSolution::y_at(std::size_t k, std::span<const std::uint16_t> counts) const {
  if (!lattice) throw std::invalid_argument("y_at: not a lattice solution");
  return y[k][lattice->index(counts)];
}

CsvTable BsdeSolution::to_table() const {
  std::vector<std::string> cols{"t", "Y_mean", "Y_min", "Y_max"};
  for (std::size_t j = 0; j < d; ++j) cols.push_back("Z_" + std::to_string(j + 1));
  for (std::size_t i = 0; i < m; ++i) cols.push_back("U_" + std::to_string(i + 1));
  cols.push_back("se_Y");
  CsvTable table(cols);
  const std::size_t M = grid.steps();
  for (std::size_t k = 0; k <= M; ++k) {
    const std::size_t n = y[k].size();
    std::vector<double> row{grid.t(k)};
    double mean = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo, sq = 0.0;
    std::vector<double> zm(d, 0.0), um(m, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      const double w = lattice ? prob[k][s] : 1.0 / static_cast<double>(n);
      mean += w * y[k][s];
      sq += w * y[k][s] * y[k][s];
      if (!lattice || prob[k][s] > 0.0) {
        lo = std::min(lo, y[k][s]);
        hi = std::max(hi, y[k][s]);
      }
      if (k < M) {
        for (std::size_t j = 0; j < d && !z.empty(); ++j) zm[j] += w * z[k][s * d + j];
        for (std::size_t i = 0; i < m; ++i) um[i] += w * u[k][s * m + i];
      }
    }
    row.push_back(mean);
    row.push_back(lo);
    row.push_back(hi);
    row.insert(row.end(), zm.begin(), zm.end());
    row.insert(row.end(), um.begin(), um.end());
    double se = 0.0;
    if (!lattice) {
      se = (k == 0) ? se_y0 : std::sqrt(std::max(0.0, sq - mean * mean) / static_cast<double>(n));
    }
    row.push_back(se);
    table.add_row(row);
  }
  return table;
}

namespace {

void check_grid(const TimeGrid& grid, const MarkMeasure& mm, const ZetaDensity& zeta) {
  for (std::size_t k = 0; k < grid.steps(); ++k) jump_probabilities(grid, k, mm, zeta);
}

}  // namespace

BsdeSolution solve_lattice(const GeneratorSpec& gs, const TerminalCondition& xi, const TimeGrid& grid,
                           const MarkMeasure& mm, const ZetaDensity& zeta, const SolveConfig& cfg) {
  cfg.validate();
  if (!xi.has_state_form()) throw std::invalid_argument("solve_lattice: terminal condition has no state form");
  const std::size_t M = grid.steps();
  const std::size_t m = mm.size();
  const double dt = grid.dt();
  const bool implicit = cfg.scheme == Scheme::kPicardImplicit && gs.depends_on_y;
  if (implicit && gs.k_yz * dt >= 1.0) {
    throw SolverError("Picard map does not contract: K_yz * dt = " + std::to_string(gs.k_yz * dt) + " >= 1");
  }
  check_grid(grid, mm, zeta);

  BsdeSolution sol;
  sol.backend = "lattice";
  sol.grid = grid;
  sol.m = m;
  sol.lattice = std::make_shared<const JumpLattice>(m, M, cfg.state_cap);
  const JumpLattice& lat = *sol.lattice;
  sol.meta.dt = dt;
  sol.meta.scheme = to_string(cfg.scheme);
  sol.y.resize(M + 1);
  sol.u.resize(M + 1);

  auto& yT = sol.y[M];
  yT.resize(lat.size_upto(M));
  for (std::size_t s = 0; s < yT.size(); ++s) {
    yT[s] = xi.on_state(lat.counts(s));
    if (!std::isfinite(yT[s])) throw DomainError("terminal condition is not finite");
  }

  const std::vector<double> z(gs.z_dim, 0.0);
  std::vector<double> uv(m);
  for (std::size_t kk = M; kk-- > 0;) {
    const double t = grid.t(kk);
    const auto p = jump_probabilities(grid, kk, mm, zeta);
    double P = 0.0;
    for (double v : p) P += v;
    const JumpContext ctx(mm, zeta, gs.selector, t);
    const JumpView jv = ctx.view();
    const auto& next = sol.y[kk + 1];
    const std::size_t n = lat.size_upto(kk);
    auto& cur = sol.y[kk];
    auto& uk = sol.u[kk];
    cur.resize(n);
    uk.resize(n * m);
    for (std::size_t s = 0; s < n; ++s) {
      const double yn = next[s];
      double c = (1.0 - P) * yn;
      for (std::size_t i = 0; i < m; ++i) {
        const double yi = next[lat.neighbor(s, i)];
        uv[i] = yi - yn;
        c += p[i] * yi;
      }
      std::copy(uv.begin(), uv.end(), uk.begin() + static_cast<std::ptrdiff_t>(s * m));

      double yv = c + gs.evaluate(t, c, z, uv, jv) * dt;
      std::size_t iters = 1;
      if (implicit) {
        for (;;) {
          const double next_y = c + gs.evaluate(t, yv, z, uv, jv) * dt;
          ++iters;
          const double delta = std::abs(next_y - yv);
          yv = next_y;
          if (delta <= cfg.picard_tol * std::max(1.0, std::abs(yv))) break;
          if (static_cast<int>(iters) >= cfg.picard_max) {
            throw SolverError("Picard iteration did not converge at t=" + std::to_string(t));
          }
        }
      }
      cur[s] = yv;
      sol.meta.picard_iterations_max = std::max(sol.meta.picard_iterations_max, iters);
      sol.meta.picard_iterations_total += iters;
    }
  }
  sol.y0 = sol.y[0][0];
  sol.prob = lattice_state_probabilities(lat, grid, mm, zeta);
  return sol;
}

namespace {

int generator_sign(const GeneratorSpec& gs, const MarkMeasure& mm) {
  if (!gs.separable()) throw std::invalid_argument("monotone_driver: generator must be separable");
  bool pos = false, neg = false;
  const std::vector<double> z(gs.z_dim, 0.0);
  for (std::size_t i = 0; i < mm.size(); ++i) {
    for (int j = -40; j <= 40; ++j) {
      const double v = gs.g(0.0, 0.0, z, 0.05 * j, mm.mark(i));
      if (v > 0) pos = true;
      if (v < 0) neg = true;
    }
  }
  if (pos && neg) throw std::invalid_argument("monotone_driver: g changes sign");
  return neg ? -1 : 1;
}

}  // namespace

MonotoneResult monotone_driver(const GeneratorSpec& gs_full, const NestedSelectorFamily& family,
                               const std::vector<int>& n_list, const TerminalCondition& xi,
                               const TimeGrid& grid, const MarkMeasure& mm, const ZetaDensity& zeta,
                               const SolveConfig& cfg) {
  if (n_list.empty()) throw std::invalid_argument("monotone_driver: empty n list");
  if (!std::is_sorted(n_list.begin(), n_list.end())) {
    throw std::invalid_argument("monotone_driver: n list must be increasing");
  }
  MonotoneResult res;
  res.n_list = n_list;
  res.sign = generator_sign(gs_full, mm);
  for (int n : n_list) {
    res.solutions.push_back(solve_lattice(approx_sequence(gs_full, family, n), xi, grid, mm, zeta, cfg));
    res.y0.push_back(res.solutions.back().y0);
  }
  const BsdeSolution& ref = res.solutions.back();
  const std::size_t M = grid.steps();
  const std::size_t m = mm.size();
  const double dt = grid.dt();
  res.table = CsvTable({"n", "Y0", "delta_Y", "delta_U"});
  for (std::size_t j = 0; j < n_list.size(); ++j) {
    const BsdeSolution& s = res.solutions[j];
    double dy = 0.0, du2 = 0.0;
    for (std::size_t k = 0; k <= M; ++k) {
      for (std::size_t q = 0; q < s.y[k].size(); ++q) dy = std::max(dy, std::abs(s.y[k][q] - ref.y[k][q]));
      if (k == M) continue;
      const double t = grid.t(k);
      for (std::size_t q = 0; q < s.y[k].size(); ++q) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double e = s.u[k][q * m + i] - ref.u[k][q * m + i];
          acc += e * e * zeta(t, mm.mark(i)) * mm.weight(i);
        }
        du2 += s.prob[k][q] * acc * dt;
      }
    }
    res.delta_y.push_back(dy);
    res.delta_u.push_back(std::sqrt(du2));
    res.table.add_row({static_cast<double>(n_list[j]), s.y0, dy, std::sqrt(du2)});
  }
  res.monotone = true;
  for (std::size_t j = 1; j < res.y0.size(); ++j) {
    if (res.sign * (res.y0[j] - res.y0[j - 1]) < -1e-12) res.monotone = false;
  }
  return res;
}

PropertyReport compare_solutions(const BsdeSolution& s1, const BsdeSolution& s2) {
  if (s1.backend != s2.backend || !(s1.grid == s2.grid) || s1.y.size() != s2.y.size()) {
    throw std::invalid_argument("compare_solutions: mismatched discretizations");
  }
  double gap = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < s1.y.size(); ++k) {
    if (s1.y[k].size() != s2.y[k].size()) throw std::invalid_argument("compare_solutions: mismatched state spaces");
    for (std::size_t q = 0; q < s1.y[k].size(); ++q) gap = std::max(gap, s1.y[k][q] - s2.y[k][q]);
  }
  return make_upper_report("comparison", "comparison", gap, 1e-10, "max (Y1 - Y2) over all states and steps");
}

MartingaleDiagnostic martingale_diagnostic(const StateVectorField& beta, const StateVectorField& gamma,
                                           const MarkMeasure& mm, const ZetaDensity& zeta, const TimeGrid& grid,
                                           double margin, double state_cap) {
  const std::size_t M = grid.steps();
  const std::size_t m = mm.size();
  JumpLattice lat(m, M, state_cap);
  MartingaleDiagnostic out;
  double min_gamma = std::numeric_limits<double>::infinity();
  double sup_bracket = 0.0;
  for (std::size_t k = 0; k < M; ++k) {
    const double t = grid.t(k);
    for (std::size_t s = 0; s < lat.size_upto(k); ++s) {
      const auto c = lat.counts(s);
      const auto b = beta ? beta(k, c) : std::vector<double>{};
      const auto g = gamma ? gamma(k, c) : std::vector<double>{};
      double br = 0.0;
      for (double v : b) br += v * v;
      for (std::size_t i = 0; i < g.size() && i < m; ++i) {
        min_gamma = std::min(min_gamma, g[i]);
        br += g[i] * g[i] * zeta(t, mm.mark(i)) * mm.weight(i);
      }
      if (!std::isfinite(br)) sup_bracket = br;
      else if (std::isfinite(sup_bracket)) sup_bracket = std::max(sup_bracket, br);
    }
  }
  if (!std::isfinite(min_gamma) && min_gamma > 0) min_gamma = 0.0;  // no jump kernel at all
  out.min_gamma = min_gamma;
  out.sup_bracket = sup_bracket;

  const StateIntegrandField field = [&](std::size_t k, std::span<const std::uint16_t> c) {
    IntegrandValue v;
    if (beta) v.z = beta(k, c);
    if (gamma) v.u = gamma(k, c);
    return v;
  };
  BmoOptions opt;
  opt.state_cap = state_cap;
  out.bmo = bmo_statistic(field, mm, zeta, grid, BmoBackend::kLattice, opt).value;

  const bool jumps_ok = std::isfinite(min_gamma) && min_gamma > -1.0 + margin;
  if (jumps_ok && std::isfinite(sup_bracket)) {
    out.certified_by = "bounded-bracket";
  } else if (std::isfinite(min_gamma) && 1.0 + min_gamma > 0.0 && std::isfinite(out.bmo)) {
    out.certified_by = "bmo-delta";
  }
  PropertyReport& r = out.report;
  r.property = "stochastic-exponential-martingale";
  r.theorem_tag = "martingale-sufficient-conditions";
  r.statistic = min_gamma;
  r.tolerance = -1.0 + margin;
  r.status = out.certified_by.empty() ? Status::kFail : Status::kPass;
  r.note = out.certified_by.empty()
               ? "no sufficient condition holds: min jump kernel " + format_double(min_gamma)
               : "certified by " + out.certified_by + "; sup bracket " + format_double(sup_bracket) +
                     ", bmo " + format_double(out.bmo);
  return out;
}

}  // namespace jbsde
