#include "jbsde/finance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "jbsde/errors.hpp"
#include "jbsde/named_generators.hpp"

namespace jbsde::finance {

MarketSpec MarketSpec::constant(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& phi, double s0) {
  if (sigma.cols() != phi.size()) throw std::invalid_argument("market: sigma has " + std::to_string(sigma.cols()) +
                                                               " columns but phi has " + std::to_string(phi.size()));
  MarketSpec m;
  m.d = static_cast<std::size_t>(sigma.cols());
  m.k = static_cast<std::size_t>(sigma.rows());
  m.sigma = [sigma](double) { return sigma; };
  m.phi = [phi](double) { return phi; };
  m.s0 = s0;
  return m;
}

MarketSpec MarketSpec::pure_jump(double beta, std::function<double(double)> psi, double s0) {
  MarketSpec m;
  m.d = 0;
  m.k = 0;
  m.beta = [beta](double) { return beta; };
  m.psi = [psi = std::move(psi)](double, double e) { return psi(e); };
  m.s0 = s0;
  return m;
}

Eigen::VectorXd MarketSpec::phi_at(double t) const {
  return has_continuous() ? phi(t) : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
}

double MarketSpec::phi_sup(const TimeGrid& grid) const {
  if (!has_continuous()) return 0.0;
  double s = 0.0;
  for (std::size_t k = 0; k <= grid.steps(); ++k) s = std::max(s, phi(grid.t(k)).norm());
  return s;
}

void MarketSpec::validate(const TimeGrid& grid, const MarkMeasure* mm) const {
  for (std::size_t q = 0; q <= grid.steps(); ++q) {
    const double t = grid.t(q);
    if (has_continuous()) {
      const Eigen::MatrixXd s = sigma(t);
      const Eigen::VectorXd p = phi(t);
      if (static_cast<std::size_t>(s.rows()) != k || static_cast<std::size_t>(s.cols()) != d ||
          static_cast<std::size_t>(p.size()) != d) {
        throw std::invalid_argument("market: sigma must be k x d and phi of length d");
      }
      if (!p.allFinite()) throw std::invalid_argument("market: phi is not bounded");
      const Projection pr = project_ker_im(s, p);
      if (pr.pi_perp.norm() > 1e-10 * (1.0 + p.norm())) {
        throw std::invalid_argument("market: phi is not in the image of sigma^T");
      }
    }
    if (has_pure_jump() && mm) {
      double l2 = 0.0;
      for (std::size_t i = 0; i < mm->size(); ++i) {
        const double v = psi(t, mm->mark(i));
        if (!(v > -1.0)) throw std::invalid_argument("market: jump size psi <= -1");
        l2 += v * v * mm->weight(i);
      }
      if (!std::isfinite(l2) || !std::isfinite(beta(t))) throw std::invalid_argument("market: psi or beta unbounded");
    }
  }
}

ConstraintSet ConstraintSet::finite(std::vector<double> elements) {
  if (elements.empty()) throw std::invalid_argument("constraint set is empty");
  bool zero = false;
  for (double v : elements) {
    if (!std::isfinite(v)) throw std::invalid_argument("constraint set is not compact");
    if (v == 0.0) zero = true;
  }
  if (!zero) throw std::invalid_argument("constraint set must contain 0");
  ConstraintSet c;
  c.kind = Kind::kFinite;
  c.elements = std::move(elements);
  return c;
}

ConstraintSet ConstraintSet::interval(double lo, double hi) {
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo <= 0.0 && 0.0 <= hi)) {
    throw std::invalid_argument("constraint interval must be finite and contain 0");
  }
  ConstraintSet c;
  c.kind = Kind::kInterval;
  c.elements.clear();
  c.lo = lo;
  c.hi = hi;
  return c;
}

GoodDealSpec GoodDealSpec::constant(double K, MarketSpec market) {
  GoodDealSpec g;
  g.K = [K](double) { return K; };
  g.market = std::move(market);
  return g;
}

void GoodDealSpec::validate(const TimeGrid& grid) const {
  for (std::size_t q = 0; q <= grid.steps(); ++q) {
    const double t = grid.t(q);
    const double phi = market.phi_at(t).norm();
    if (!(K(t) > phi + epsilon)) {
      throw std::invalid_argument("good-deal bound infeasible: K = " + format_double(K(t)) +
                                  " must exceed |phi| + eps = " + format_double(phi + epsilon));
    }
  }
}

Projection project_ker_im(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& z) {
  if (sigma.cols() != z.size()) throw std::invalid_argument("project_ker_im: dimension mismatch");
  Projection out;
  if (sigma.rows() == 0) {
    out.pi = Eigen::VectorXd::Zero(z.size());
    out.pi_perp = z;
    return out;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sigma);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (sigma.rows() > sigma.cols() || !(smin > 0.0) || sv(0) / smin > 1e12) {
    throw std::invalid_argument("project_ker_im: sigma is rank deficient");
  }
  const Eigen::MatrixXd sst = sigma * sigma.transpose();
  out.pi = sigma.transpose() * sst.ldlt().solve(sigma * z);
  out.pi_perp = z - out.pi;
  return out;
}

InnerMaxResult inner_max_kkt(const Eigen::VectorXd& p, std::span<const double> u, std::span<const double> q,
                             double r2) {
  if (!(r2 > 0.0)) throw std::invalid_argument("good-deal inner problem: infeasible budget r^2 <= 0");
  if (u.size() != q.size()) throw std::invalid_argument("good-deal inner problem: dimension mismatch");
  const std::size_t m = u.size();
  InnerMaxResult res;
  res.gamma.assign(m, 0.0);
  res.eta = Eigen::VectorXd::Zero(p.size());
  const double p2 = p.squaredNorm();
  bool any_pos = false, any_neg = false;
  double clip_norm = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (q[i] <= 0.0 || u[i] == 0.0) continue;
    if (u[i] > 0.0) any_pos = true;
    if (u[i] < 0.0) {
      any_neg = true;
      clip_norm += q[i];
    }
  }
  if (p2 == 0.0 && !any_pos) {
    if (!any_neg) return res;  // zero objective
    if (clip_norm <= r2) {
      // every negative mark clipped at -1 and still inside the ball
      for (std::size_t i = 0; i < m; ++i) {
        if (q[i] > 0.0 && u[i] < 0.0) {
          res.gamma[i] = -1.0;
          res.value -= q[i] * u[i];
        }
      }
      return res;
    }
  }

  auto norm_at = [&](double mu) {
    double n = p2 / (4.0 * mu * mu);
    for (std::size_t i = 0; i < m; ++i) {
      if (q[i] <= 0.0) continue;
      const double g = std::max(u[i] / (2.0 * mu), -1.0);
      n += q[i] * g * g;
    }
    return n;
  };
  double lo = 1e-12, hi = 1e12;
  while (norm_at(lo) < r2) {
    lo *= 1e-3;
    if (lo < 1e-300) throw SolverError("good-deal inner problem: cannot bracket multiplier");
  }
  while (norm_at(hi) > r2) {
    hi *= 1e3;
    if (hi > 1e300) throw SolverError("good-deal inner problem: cannot bracket multiplier");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (mid <= lo || mid >= hi) break;
    if (norm_at(mid) > r2) lo = mid;
    else hi = mid;
    res.bisection_steps = it + 1;
  }
  const double mu = hi;  // feasible side of the bracket
  res.mu = mu;
  res.eta = p / (2.0 * mu);
  res.value = p.dot(res.eta);
  for (std::size_t i = 0; i < m; ++i) {
    if (q[i] <= 0.0) continue;
    res.gamma[i] = std::max(u[i] / (2.0 * mu), -1.0);
    res.value += q[i] * u[i] * res.gamma[i];
  }
  return res;
}

InnerMaxResult gooddeal_inner_max(std::span<const double> z, std::span<const double> u, double K_t,
                                  const Eigen::VectorXd& phi_t, const Eigen::MatrixXd& sigma_t,
                                  const MarkMeasure& mm, const ZetaDensity& zeta, double t) {
  if (u.size() != mm.size()) throw std::invalid_argument("gooddeal_inner_max: u has wrong dimension");
  const Eigen::VectorXd zv = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  const Eigen::VectorXd p = project_ker_im(sigma_t, zv).pi_perp;
  std::vector<double> q(mm.size());
  for (std::size_t i = 0; i < mm.size(); ++i) q[i] = zeta(t, mm.mark(i)) * mm.weight(i);
  return inner_max_kkt(p, u, q, K_t * K_t - phi_t.squaredNorm());
}

// ---------------------------------------------------------------- exponential

double ExpUtilityResult::value(double x, double y) const { return -std::exp(-alpha * (x - y)); }

namespace {

CsvTable theta_table(const BsdeSolution& sol, const std::vector<std::vector<double>>& theta, std::size_t d,
                     bool per_path, const char* ycol) {
  CsvTable t({"t", ycol, "theta_star"});
  const std::size_t M = sol.grid.steps();
  const CsvTable base = sol.to_table();
  for (std::size_t k = 0; k <= M; ++k) {
    double th = std::numeric_limits<double>::quiet_NaN();
    if (k < M && d > 0) {
      if (per_path) {
        const std::size_t n = theta[k].size() / d;
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p) s += theta[k][p * d];
        th = s / static_cast<double>(n);
      } else {
        th = theta[k][0];
      }
    } else if (k < M && !theta[k].empty()) {
      th = theta[k][0];
    }
    t.add_row({sol.grid.t(k), base.at(k, "Y_mean"), th});
  }
  return t;
}

}  // namespace

CsvTable ExpUtilityResult::to_table() const {
  return theta_table(solution, theta_star, solution.d, solution.backend == "lsmc", "Y");
}

ExpUtilityResult exp_utility_solve(const MarketSpec& market, double alpha, const TerminalCondition& xi,
                                   const TimeGrid& grid, const MarkMeasure& mm, const ZetaDensity& zeta,
                                   const SolveConfig& cfg, std::uint64_t seed) {
  if (!(alpha > 0.0)) throw std::invalid_argument("exp_utility_solve: alpha must be > 0");
  if (!market.has_continuous()) throw std::invalid_argument("exp_utility_solve: market has no sigma/phi");
  if (market.k != market.d) throw std::invalid_argument("exp_utility_solve: requires k = d");
  market.validate(grid, &mm);
  GeneratorParams params;
  params.scalars["alpha"] = alpha;
  GeneratorSpec gs = build_named_generator("exp_utility", params, &market);
  gs = drift_adjust(gs, grid, [&market](double t) {
    const Eigen::VectorXd p = -market.phi(t);
    return std::vector<double>(p.data(), p.data() + p.size());
  });

  ExpUtilityResult res;
  res.alpha = alpha;
  const std::size_t M = grid.steps();
  const std::size_t d = market.d;
  res.theta_star.resize(M);
  if (xi.has_state_form()) {
    res.solution = solve_lattice(gs, xi, grid, mm, zeta, cfg);
    res.solution.d = d;
    for (std::size_t k = 0; k < M; ++k) {
      const Eigen::VectorXd p = market.phi(grid.t(k)) / alpha;
      res.theta_star[k].assign(p.data(), p.data() + p.size());
    }
  } else {
    res.solution = solve_lsmc(gs, xi, grid, mm, zeta, static_cast<int>(d), cfg, seed);
    for (std::size_t k = 0; k < M; ++k) {
      const Eigen::VectorXd p = market.phi(grid.t(k)) / alpha;
      const std::size_t n = res.solution.y[k].size();
      res.theta_star[k].resize(n * d);
      for (std::size_t q = 0; q < n; ++q)
        for (std::size_t j = 0; j < d; ++j)
          res.theta_star[k][q * d + j] = res.solution.z[k][q * d + j] + p(static_cast<Eigen::Index>(j));
    }
  }
  return res;
}

InnerInf purejump_inner_inf(std::span<const double> u, std::span<const double> psi, std::span<const double> q,
                            double beta, double alpha, const ConstraintSet& C) {
  auto h = [&](double th) {
    double v = -th * beta;
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (q[i] > 0.0) v += g_alpha(alpha, u[i] - th * psi[i]) * q[i];
    }
    return v;
  };
  InnerInf best{0.0, std::numeric_limits<double>::infinity()};
  if (C.kind == ConstraintSet::Kind::kFinite) {
    for (double th : C.elements) {
      const double v = h(th);
      if (v < best.value) best = {th, v};
    }
    return best;
  }
  const double lo = C.lo, hi = C.hi;
  if (lo == hi) return {lo, h(lo)};
  // convexity guard on probes before trusting golden section
  constexpr int kProbes = 21;
  std::vector<double> hv(kProbes);
  for (int j = 0; j < kProbes; ++j) hv[j] = h(lo + (hi - lo) * j / (kProbes - 1));
  bool convex = true;
  for (int j = 1; j + 1 < kProbes; ++j) {
    const double scale = 1e-10 * (1.0 + std::abs(hv[j]));
    if (hv[j - 1] + hv[j + 1] - 2.0 * hv[j] < -scale) convex = false;
  }
  if (!convex) {
    for (int j = 0; j <= 1000; ++j) {
      const double th = lo + (hi - lo) * j / 1000.0;
      const double v = h(th);
      if (v < best.value) best = {th, v};
    }
    return best;
  }
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = h(c), fd = h(d);
  int it = 0;
  while (b - a > 1e-12 * (1.0 + hi - lo)) {
    if (++it > 500) throw SolverError("purejump inner infimum: golden section did not converge");
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = h(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = h(d);
    }
  }
  const double th = 0.5 * (a + b);
  best = {th, h(th)};
  for (double end : {lo, hi}) {
    const double v = h(end);
    if (v < best.value) best = {end, v};
  }
  return best;
}

PureJumpResult exp_utility_purejump_solve(const MarketSpec& market, double alpha, const ConstraintSet& C,
                                          const TerminalCondition& xi, const TimeGrid& grid,
                                          const MarkMeasure& mm, const ZetaDensity& zeta,
                                          const SolveConfig& cfg) {
  if (!market.has_pure_jump()) throw std::invalid_argument("exp_utility_purejump_solve: market has no beta/psi");
  if (!xi.has_state_form()) throw std::invalid_argument("exp_utility_purejump_solve: xi must depend on jumps only");
  market.validate(grid, &mm);
  const GeneratorSpec gs = purejump_utility_generator(alpha, market, C);
  PureJumpResult res;
  res.solution = solve_lattice(gs, xi, grid, mm, zeta, cfg);
  const std::size_t M = grid.steps();
  const std::size_t m = mm.size();
  res.theta_star.resize(M);
  std::vector<double> psi(m), q(m);
  for (std::size_t k = 0; k < M; ++k) {
    const double t = grid.t(k);
    for (std::size_t i = 0; i < m; ++i) {
      psi[i] = market.psi(t, mm.mark(i));
      q[i] = zeta(t, mm.mark(i)) * mm.weight(i);
    }
    const std::size_t n = res.solution.y[k].size();
    res.theta_star[k].resize(n);
    for (std::size_t s = 0; s < n; ++s) {
      std::span<const double> us(res.solution.u[k].data() + s * m, m);
      res.theta_star[k][s] = purejump_inner_inf(us, psi, q, market.beta(t), alpha, C).theta;
    }
  }
  return res;
}

// ---------------------------------------------------------------- power

PowerTriple power_transform(double y, std::span<const double> z, std::span<const double> u, double gamma,
                            Direction dir) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("power_transform: gamma must lie in (0, 1)");
  if (!(y > 0.0)) throw DomainError("power_transform: y must be positive");
  for (double v : u) {
    if (!(y + v > 0.0)) throw DomainError("power_transform: y + u must be positive");
  }
  PowerTriple out;
  out.z.resize(z.size());
  out.u.resize(u.size());
  const double r = 1.0 - gamma;
  if (dir == Direction::kForward) {
    out.y = std::pow(y, 1.0 / r);
    const double zf = std::pow(y, gamma / r) / r;
    for (std::size_t j = 0; j < z.size(); ++j) out.z[j] = zf * z[j];
    for (std::size_t i = 0; i < u.size(); ++i) out.u[i] = std::pow(y + u[i], 1.0 / r) - out.y;
  } else {
    out.y = std::pow(y, r);
    const double zf = r * std::pow(y, -gamma);
    for (std::size_t j = 0; j < z.size(); ++j) out.z[j] = zf * z[j];
    for (std::size_t i = 0; i < u.size(); ++i) out.u[i] = std::pow(y + u[i], r) - out.y;
  }
  return out;
}

double PowerUtilityResult::value(double x, double y) const { return std::pow(x, gamma) * y / gamma; }

CsvTable PowerUtilityResult::to_table() const {
  return theta_table(original, theta_star, original.d, original.backend == "lsmc", "Y");
}

PowerUtilityResult power_utility_solve(const MarketSpec& market, double gamma, const TerminalCondition& xi,
                                       double xi_lower, const TimeGrid& grid, const MarkMeasure& mm,
                                       const ZetaDensity& zeta, const SolveConfig& cfg, std::uint64_t seed) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("power_utility_solve: gamma must lie in (0, 1)");
  if (!(xi_lower > 0.0)) throw std::invalid_argument("power_utility_solve: xi must be bounded below by c > 0");
  if (market.has_continuous()) {
    if (market.k != market.d) throw std::invalid_argument("power_utility_solve: requires k = d");
    market.validate(grid, &mm);
  }
  const double r = 1.0 - gamma;
  const std::size_t d = market.has_continuous() ? market.d : 0;
  const std::size_t M = grid.steps();
  const std::size_t m = mm.size();
  const double phi_sup = market.phi_sup(grid);

  TerminalCondition xt;
  if (xi.has_state_form()) {
    xt = TerminalCondition::from_state(
        [xi, xi_lower, r](std::span<const std::uint16_t> c) {
          const double v = xi.on_state(c);
          if (!(v >= xi_lower)) throw std::invalid_argument("power_utility_solve: xi below its lower bound c");
          return std::pow(v, 1.0 / r);
        },
        "transformed " + xi.description);
  } else {
    xt = TerminalCondition::from_path(
        [xi, xi_lower, r](const PathBundle& pb, std::size_t p) {
          const double v = xi(pb, p);
          if (!(v >= xi_lower)) throw std::invalid_argument("power_utility_solve: xi below its lower bound c");
          return std::pow(v, 1.0 / r);
        },
        "transformed " + xi.description);
  }

  GeneratorSpec gs = power_transformed_generator(gamma, market.has_continuous() ? market.phi : nullptr, phi_sup, d);
  // On the grid Y~_k + U~ mixes two time levels and can leave (0, inf);
  // truncating at the lower a-priori bound keeps the jump term defined.
  {
    const double c = std::pow(xi_lower, 1.0 / r);
    const double kk = gamma * phi_sup * phi_sup / (2.0 * r * r);
    const double T = grid.horizon();
    TruncationBand lower;
    lower.a = [c, kk, T](double t) { return c * std::exp(-kk * (T - t)); };
    lower.b = [](double) { return std::numeric_limits<double>::infinity(); };
    const double k_yz = gs.k_yz;
    gs = truncate_generator(gs, lower);
    gs.kind = "power_transformed";
    gs.k_yz = k_yz;
  }
  if (d > 0) {
    gs = drift_adjust(gs, grid, [&market, gamma, r](double t) {
      const Eigen::VectorXd p = -gamma / r * market.phi(t);
      return std::vector<double>(p.data(), p.data() + p.size());
    });
  }

  PowerUtilityResult res;
  res.gamma = gamma;
  res.transformed = xi.has_state_form() ? solve_lattice(gs, xt, grid, mm, zeta, cfg)
                                        : solve_lsmc(gs, xt, grid, mm, zeta, static_cast<int>(d), cfg, seed);
  const BsdeSolution& tr = res.transformed;
  if (tr.backend == "lattice") res.transformed.d = d;

  // inverse transform
  BsdeSolution& orig = res.original;
  orig = tr;
  orig.d = d;
  for (std::size_t k = 0; k <= M; ++k) {
    const std::size_t n = tr.y[k].size();
    for (std::size_t s = 0; s < n; ++s) {
      const double yt = tr.y[k][s];
      if (!(yt > 0.0)) throw SolverError("power_utility_solve: transformed solution is not positive");
      orig.y[k][s] = std::pow(yt, r);
      if (k == M) continue;
      // U and Z refer to the pre-jump value, which on the lattice is Y~_{k+1}(s)
      const double ypre = (tr.backend == "lattice") ? tr.y[k + 1][s] : yt;
      const double ypre_o = std::pow(ypre, r);
      for (std::size_t i = 0; i < m; ++i) {
        orig.u[k][s * m + i] = std::pow(ypre + tr.u[k][s * m + i], r) - ypre_o;
      }
      if (tr.backend == "lsmc") {
        for (std::size_t j = 0; j < d; ++j) orig.z[k][s * d + j] = r * std::pow(yt, -gamma) * tr.z[k][s * d + j];
      }
    }
  }
  orig.y0 = orig.y[0][0];
  orig.se_y0 = r * std::pow(tr.y0, -gamma) * tr.se_y0;  // delta method

  res.theta_star.resize(M);
  for (std::size_t k = 0; k < M; ++k) {
    const Eigen::VectorXd p = market.phi_at(grid.t(k));
    if (tr.backend == "lattice") {
      res.theta_star[k].resize(d);
      for (std::size_t j = 0; j < d; ++j) res.theta_star[k][j] = p(static_cast<Eigen::Index>(j)) / r;
    } else {
      const std::size_t n = tr.y[k].size();
      res.theta_star[k].resize(n * d);
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t j = 0; j < d; ++j)
          res.theta_star[k][s * d + j] =
              (p(static_cast<Eigen::Index>(j)) + r * tr.z[k][s * d + j] / tr.y[k][s]) / r;
    }
  }

  // a(t) <= Y~ <= b(t) with K = gamma |phi|^2 / (2 (1 - gamma)^2)
  double xi_sup = 0.0;
  for (double v : tr.y[M]) xi_sup = std::max(xi_sup, v);
  OdeBoundParams bp;
  bp.c = std::pow(xi_lower, 1.0 / r);
  bp.xi_sup = xi_sup;
  bp.k = gamma * phi_sup * phi_sup / (2.0 * r * r);
  bp.T = grid.horizon();
  res.bounds = ode_bounds(OdeBoundKind::kPositiveK, bp);
  res.bound_slack = std::numeric_limits<double>::infinity();
  res.discrete_bound_slack = res.bound_slack;
  const double kdt = bp.k * grid.dt();
  for (std::size_t k = 0; k <= M; ++k) {
    const double t = grid.t(k);
    const double a = res.bounds.a(t), b = res.bounds.b(t);
    // The implicit step grows by (1 - K dt)^{-1} per step instead of e^{K dt}.
    const double b_disc = xi_sup * std::pow(1.0 - kdt, -static_cast<double>(M - k));
    for (double v : tr.y[k]) {
      res.bound_slack = std::min({res.bound_slack, v - a, b - v});
      res.discrete_bound_slack = std::min({res.discrete_bound_slack, v - a, std::max(b, b_disc) - v});
      if (tr.backend == "lattice" && (v < a - 1e-10 * (1.0 + a) || v > std::max(b, b_disc) + 1e-10 * (1.0 + b))) {
        throw SolverError("power_utility_solve: transformed solution leaves its a-priori band at t=" +
                          std::to_string(t));
      }
    }
  }
  return res;
}

double power_recursion_residual(const PowerUtilityResult& res, const MarketSpec& market, const MarkMeasure& mm,
                                const ZetaDensity& zeta) {
  const BsdeSolution& o = res.original;
  if (o.backend != "lattice") throw std::invalid_argument("power_recursion_residual: lattice solutions only");
  const TimeGrid& grid = o.grid;
  const std::size_t M = grid.steps();
  const std::size_t m = mm.size();
  const double dt = grid.dt();
  const double coef = res.gamma / (2.0 * (1.0 - res.gamma));
  const JumpLattice& lat = *o.lattice;
  double worst = 0.0;
  for (std::size_t k = 0; k < M; ++k) {
    const double t = grid.t(k);
    const auto p = jump_probabilities(grid, k, mm, zeta);
    double P = 0.0;
    for (double v : p) P += v;
    const double phi2 = market.phi_at(t).squaredNorm();
    for (std::size_t s = 0; s < lat.size_upto(k); ++s) {
      double c = (1.0 - P) * o.y[k + 1][s];
      for (std::size_t i = 0; i < m; ++i) c += p[i] * o.y[k + 1][lat.neighbor(s, i)];
      const double yk = o.y[k][s];
      worst = std::max(worst, std::abs(yk - c - coef * phi2 * yk * dt));
    }
  }
  return worst;
}

// ---------------------------------------------------------------- good deal

GeneratorSpec gooddeal_generator(const GoodDealSpec& gd) {
  const MarketSpec& mk = gd.market;
  const Eigen::VectorXd phi0 = mk.phi_at(0.0);
  if (!(gd.K(0.0) > phi0.norm() + gd.epsilon)) {
    throw std::invalid_argument("good-deal bound infeasible: K = " + format_double(gd.K(0.0)) +
                                " must exceed |phi| + eps = " + format_double(phi0.norm() + gd.epsilon));
  }
  const std::size_t d = mk.has_continuous() ? mk.d : 0;
  GeneratorSpec gs;
  gs.kind = "gooddeal";
  gs.z_dim = d;
  gs.fhat = [mk, d](double t, double, std::span<const double> z) {
    if (d == 0 || z.empty()) return 0.0;
    const Eigen::VectorXd p = mk.phi(t);
    double v = 0.0;
    for (std::size_t j = 0; j < d; ++j) v -= p(static_cast<Eigen::Index>(j)) * z[j];
    return v;
  };
  gs.jump = [gd, d](double t, double, std::span<const double> z, std::span<const double> u, const JumpView& jv) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    double phi2 = 0.0;
    if (d > 0) {
      Eigen::VectorXd zv = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
      if (!z.empty()) zv = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(d));
      p = project_ker_im(gd.market.sigma(t), zv).pi_perp;
      phi2 = gd.market.phi(t).squaredNorm();
    }
    std::vector<double> q(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) q[i] = jv.active[i] ? jv.intensity[i] : 0.0;
    const double Kt = gd.K(t);
    return inner_max_kkt(p, u, q, Kt * Kt - phi2).value;
  };
  gs.k_yz = phi0.norm() + gd.K(0.0);
  gs.depends_on_z = d > 0;
  return gs;
}

namespace {

void negate(BsdeSolution& s) {
  for (auto* field : {&s.y, &s.z, &s.u})
    for (auto& row : *field)
      for (double& v : row) v = -v;
  for (auto& row : s.z_mean)
    for (double& v : row) v = -v;
  s.y0 = -s.y0;
}

}  // namespace

BsdeSolution gooddeal_bound(const GoodDealSpec& gd, const TerminalCondition& X, Side side, const TimeGrid& grid,
                            const MarkMeasure& mm, const ZetaDensity& zeta, const SolveConfig& cfg,
                            std::uint64_t seed) {
  gd.validate(grid);
  if (gd.market.has_continuous()) gd.market.validate(grid, &mm);
  const GeneratorSpec gs = gooddeal_generator(gd);
  TerminalCondition claim = X;
  if (side == Side::kLower) {
    if (X.has_state_form()) {
      claim = TerminalCondition::from_state([X](std::span<const std::uint16_t> c) { return -X.on_state(c); },
                                            "-" + X.description);
    } else {
      claim = TerminalCondition::from_path([X](const PathBundle& pb, std::size_t p) { return -X(pb, p); },
                                           "-" + X.description);
    }
  }
  const int d = gd.market.has_continuous() ? static_cast<int>(gd.market.d) : 0;
  BsdeSolution sol = claim.has_state_form() ? solve_lattice(gs, claim, grid, mm, zeta, cfg)
                                            : solve_lsmc(gs, claim, grid, mm, zeta, d, cfg, seed);
  if (side == Side::kLower) negate(sol);
  return sol;
}

GoodDealResult gooddeal_bounds(const GoodDealSpec& gd, const TerminalCondition& X, const TimeGrid& grid,
                               const MarkMeasure& mm, const ZetaDensity& zeta, const SolveConfig& cfg,
                               std::uint64_t seed) {
  GoodDealResult r;
  r.upper = gooddeal_bound(gd, X, Side::kUpper, grid, mm, zeta, cfg, seed);
  r.lower = gooddeal_bound(gd, X, Side::kLower, grid, mm, zeta, cfg, seed);
  return r;
}

CsvTable GoodDealResult::to_table() const {
  CsvTable t({"t", "pi_upper", "pi_lower"});
  const CsvTable a = upper.to_table(), b = lower.to_table();
  for (std::size_t k = 0; k < a.rows(); ++k) t.add_row({a.at(k, "t"), a.at(k, "Y_mean"), b.at(k, "Y_mean")});
  return t;
}

// ---------------------------------------------------------------- optimality

OptimalityReport martingale_optimality_check(const OptimalityCase& app, const std::vector<double>& deltas,
                                             const PathBundle& pb) {
  if (pb.d != 1) throw std::invalid_argument("martingale_optimality_check: one Brownian driver expected");
  if (!app.theta_star || !app.xi) throw std::invalid_argument("martingale_optimality_check: incomplete case");
  const std::size_t M = pb.steps();
  const std::size_t n = pb.n_paths;
  const double dt = pb.grid.dt();
  const bool expo = app.kind == OptimalityCase::Kind::kExponential;
  const double v0 = expo ? -std::exp(-app.alpha * (app.x0 - app.y0))
                         : std::pow(app.x0, app.gamma) * app.y0 / app.gamma;

  std::vector<double> all{0.0};
  all.insert(all.end(), deltas.begin(), deltas.end());
  OptimalityReport out;
  std::vector<double> xi(n);
  for (std::size_t p = 0; p < n; ++p) xi[p] = app.xi(p);
  for (double delta : all) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      double x = expo ? app.x0 : std::log(app.x0);
      for (std::size_t k = 0; k < M; ++k) {
        const double th = app.theta_star(k, p) + delta;
        const double db = pb.increment(p, k, 0);
        if (expo) x += th * (db + app.phi * dt);
        else x += th * (db + app.phi * dt) - 0.5 * th * th * dt;
      }
      const double vT = expo ? -std::exp(-app.alpha * (x - xi[p]))
                             : std::exp(app.gamma * x) * xi[p] / app.gamma;
      const double v = vT - v0;
      s1 += v;
      s2 += v * v;
    }
    const double mean = s1 / static_cast<double>(n);
    const double se = std::sqrt(std::max(0.0, s2 / static_cast<double>(n) - mean * mean) / static_cast<double>(n - 1));
    out.drifts.push_back({delta, mean, se});
  }

  // statistic: worst of |drift*| / SE and drift(theta) / SE over candidates
  double worst = std::abs(out.drifts[0].drift) / out.drifts[0].std_error;
  for (std::size_t j = 1; j < out.drifts.size(); ++j) {
    worst = std::max(worst, out.drifts[j].drift / out.drifts[j].std_error);
  }
  out.report = make_upper_report(expo ? "martingale-optimality-exponential" : "martingale-optimality-power",
                                 "martingale-optimality", worst, 3.0,
                                 "V^theta* martingale and V^theta supermartingale, in standard errors");
  return out;
}

}  // namespace jbsde::finance
