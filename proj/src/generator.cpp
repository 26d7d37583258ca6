#include "jbsde/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "jbsde/errors.hpp"

namespace jbsde {

JumpContext::JumpContext(const MarkMeasure& mm, const ZetaDensity& zeta, const MarkPredicate& selector,
                         double t)
    : marks_(mm.marks().begin(), mm.marks().end()), intensity_(mm.size()), active_(mm.size()) {
  for (std::size_t i = 0; i < mm.size(); ++i) {
    intensity_[i] = zeta(t, mm.mark(i)) * mm.weight(i);
    active_[i] = (!selector || selector(mm.mark(i))) ? 1 : 0;
  }
}

double GeneratorSpec::evaluate(double t, double y, std::span<const double> z, std::span<const double> u,
                               const JumpView& jv) const {
  if (u.size() != jv.marks.size()) {
    throw std::invalid_argument("generator: u has " + std::to_string(u.size()) + " entries for " +
                                std::to_string(jv.marks.size()) + " marks");
  }
  double v = fhat ? fhat(t, y, z) : 0.0;
  if (jump) {
    v += jump(t, y, z, u, jv);
  } else if (g) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (!jv.active[i] || jv.intensity[i] == 0.0) continue;
      v += g(t, y, z, u[i], jv.marks[i]) * jv.intensity[i];
    }
  }
  if (!std::isfinite(v)) {
    throw DomainError("generator '" + kind + "' leaves its finite domain at t=" + std::to_string(t) +
                      ", y=" + std::to_string(y));
  }
  return v;
}

double GeneratorSpec::slope_at(double t, double y, std::span<const double> z, double u, double e) const {
  if (slope) return slope(t, y, z, u, e);
  if (!g) throw std::invalid_argument("generator '" + kind + "' has no scalar jump integrand");
  const double h = kFiniteDifferenceStep;
  return (g(t, y, z, u + h, e) - g(t, y, z, u - h, e)) / (2.0 * h);
}

double eval_generator(const GeneratorSpec& gs, double t, double y, std::span<const double> z,
                      std::span<const double> u, const MarkMeasure& mm, const ZetaDensity& zeta) {
  JumpContext ctx(mm, zeta, gs.selector, t);
  return gs.evaluate(t, y, z, u, ctx.view());
}

GeneratorSpec make_separable(std::string kind, GeneratorSpec::Fhat fhat, GeneratorSpec::PointJump g,
                             GeneratorSpec::PointJump slope, double k_yz, bool depends_on_y,
                             bool depends_on_z, std::size_t z_dim) {
  GeneratorSpec gs;
  gs.kind = std::move(kind);
  gs.fhat = std::move(fhat);
  gs.g = std::move(g);
  gs.slope = std::move(slope);
  gs.k_yz = k_yz;
  gs.depends_on_y = depends_on_y;
  gs.depends_on_z = depends_on_z;
  gs.z_dim = z_dim;
  return gs;
}

ProbeBox default_probe_box(double bound, const MarkMeasure& mm, const std::vector<double>& times) {
  ProbeBox box;
  box.y_lo = -2.0 * bound;
  box.y_hi = 2.0 * bound;
  box.u_lo = -2.0 * bound;
  box.u_hi = 2.0 * bound;
  box.times = times;
  box.marks.assign(mm.marks().begin(), mm.marks().end());
  return box;
}

namespace {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = 0.5 * (lo + hi);
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

// Partial slope of a non-separable jump term in u_i at u = x e_i, per unit intensity.
double vector_partial(const GeneratorSpec& gs, double t, double y, std::span<const double> z, double x,
                      std::size_t i, const JumpView& jv) {
  std::vector<double> up(jv.marks.size(), 0.0);
  std::vector<double> dn(jv.marks.size(), 0.0);
  const double h = kFiniteDifferenceStep;
  up[i] = x + h;
  dn[i] = x - h;
  const double d = (gs.jump(t, y, z, up, jv) - gs.jump(t, y, z, dn, jv)) / (2.0 * h);
  return jv.intensity[i] > 0 ? d / jv.intensity[i] : 0.0;
}

}  // namespace

ConditionReport check_afin(const GeneratorSpec& gs, const ProbeBox& box, double margin) {
  ConditionReport rep;
  rep.condition = "A_fin";
  rep.worst_slope = std::numeric_limits<double>::infinity();
  Probe worst;
  bool nonfinite = false;
  const auto ys = linspace(box.y_lo, box.y_hi, box.y_points);
  const auto zs = (gs.z_dim == 0) ? std::vector<double>{0.0} : linspace(-box.z_abs, box.z_abs, box.z_points);
  const auto us = linspace(box.u_lo, box.u_hi, box.u_points);

  std::vector<double> ones(box.marks.size(), 1.0);
  std::vector<unsigned char> active(box.marks.size());
  for (std::size_t i = 0; i < box.marks.size(); ++i) active[i] = gs.selects(box.marks[i]) ? 1 : 0;
  const JumpView jv{box.marks, ones, active};

  for (double t : box.times) {
    for (std::size_t i = 0; i < box.marks.size(); ++i) {
      if (!active[i]) continue;
      const double e = box.marks[i];
      for (double y : ys) {
        for (double zv : zs) {
          std::vector<double> z(gs.z_dim, zv);
          for (double u : us) {
            double s;
            try {
              s = gs.separable() || gs.slope ? gs.slope_at(t, y, z, u, e) : vector_partial(gs, t, y, z, u, i, jv);
            } catch (const DomainError&) {
              continue;  // outside the finite domain; nothing to check
            }
            if (!std::isfinite(s)) {
              if (std::isnan(s)) continue;
              nonfinite = true;
              worst = {t, y, zv, u, e, s};
              continue;
            }
            if (s < rep.worst_slope) {
              rep.worst_slope = s;
              if (!nonfinite) worst = {t, y, zv, u, e, s};
            }
          }
        }
      }
    }
  }
  if (!std::isfinite(rep.worst_slope)) rep.worst_slope = 0.0;  // nothing probed
  rep.delta_c = 1.0 + rep.worst_slope;
  rep.pass = !nonfinite && rep.worst_slope > -1.0 + margin;
  if (!rep.pass) rep.violation = worst;
  return rep;
}

ConditionReport check_ainfi(const GeneratorSpec& gs, double c, std::size_t points,
                            const std::vector<double>& marks, double t) {
  if (!(c > 0.0)) throw std::invalid_argument("check_ainfi: c must be > 0");
  ConditionReport rep;
  rep.condition = "A_infi";
  const auto xs = linspace(-c, c, std::max<std::size_t>(points, 2));
  std::vector<double> probes;
  probes.reserve(xs.size() + 2);
  for (double x : xs) {
    if (x != 0.0) probes.push_back(x);
  }
  probes.push_back(1e-7 * c);
  probes.push_back(-1e-7 * c);

  std::vector<double> ones(marks.size(), 1.0);
  std::vector<unsigned char> active(marks.size());
  for (std::size_t i = 0; i < marks.size(); ++i) active[i] = gs.selects(marks[i]) ? 1 : 0;
  const JumpView jv{marks, ones, active};
  const std::vector<double> z(gs.z_dim, 0.0);

  double k = 0.0;
  double inf_slope = std::numeric_limits<double>::infinity();
  Probe worst;
  for (std::size_t i = 0; i < marks.size(); ++i) {
    if (!active[i]) continue;
    for (double x : probes) {
      const double s = gs.separable() || gs.slope ? gs.slope_at(t, 0.0, z, x, marks[i])
                                                   : vector_partial(gs, t, 0.0, z, x, i, jv);
      const double ratio = std::abs(s) / std::abs(x);
      if (!(ratio <= k)) k = ratio;  // NaN propagates into k
      if (s < inf_slope) {
        inf_slope = s;
        worst = {t, 0.0, 0.0, x, marks[i], s};
      }
    }
  }
  if (!std::isfinite(inf_slope)) inf_slope = 0.0;
  rep.k_c = k;
  rep.delta_c = 1.0 + inf_slope;
  rep.worst_slope = inf_slope;
  rep.pass = std::isfinite(k) && rep.delta_c > 0.0;
  if (!rep.pass) rep.violation = worst;
  return rep;
}

double TruncationBand::clamp(double t, double y) const { return std::min(std::max(a(t), y), b(t)); }

bool TruncationBand::valid_on(const TimeGrid& grid) const {
  for (std::size_t k = 0; k <= grid.steps(); ++k) {
    if (a(grid.t(k)) > b(grid.t(k))) return false;
  }
  return true;
}

GeneratorSpec truncate_generator(const GeneratorSpec& gs, const TruncationBand& band) {
  GeneratorSpec out = gs;
  out.kind = gs.kind + "+truncated";
  out.linear.reset();
  if (gs.fhat) {
    out.fhat = [f = gs.fhat, band](double t, double y, std::span<const double> z) {
      return f(t, band.clamp(t, y), z);
    };
  }
  if (gs.jump) {
    out.jump = [j = gs.jump, band](double t, double y, std::span<const double> z, std::span<const double> u,
                                   const JumpView& jv) {
      const double ky = band.clamp(t, y);
      std::vector<double> v(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) v[i] = band.clamp(t, y + u[i]) - ky;
      return j(t, ky, z, v, jv);
    };
  } else if (gs.g) {
    out.g = [g = gs.g, band](double t, double y, std::span<const double> z, double u, double e) {
      const double ky = band.clamp(t, y);
      return g(t, ky, z, band.clamp(t, y + u) - ky, e);
    };
    out.slope = [base = gs, band](double t, double y, std::span<const double> z, double u, double e) {
      const double yu = y + u;
      if (yu < band.a(t) || yu > band.b(t)) return 0.0;
      const double ky = band.clamp(t, y);
      return base.slope_at(t, ky, z, band.clamp(t, yu) - ky, e);
    };
  }
  out.depends_on_y = gs.depends_on_y || gs.g || gs.jump;
  return out;
}

GeneratorSpec approx_sequence(const GeneratorSpec& gs, const NestedSelectorFamily& family, int n) {
  GeneratorSpec out = gs;
  out.selector = family(n);
  return out;
}

double gamma_slope(const GeneratorSpec& gs, double t, double y, std::span<const double> z, double u,
                   double u_prime, double e) {
  if (!gs.separable()) throw std::invalid_argument("gamma_slope: generator is not separable");
  if (!gs.selects(e) || u == u_prime) return 0.0;
  return (gs.g(t, y, z, u, e) - gs.g(t, y, z, u_prime, e)) / (u - u_prime);
}

GeneratorSpec drift_adjust(const GeneratorSpec& gs, const TimeGrid& grid,
                           std::function<std::vector<double>(double)> b) {
  const std::size_t M = grid.steps();
  std::vector<std::vector<double>> nodes(M + 1);
  double sup = 0.0;
  for (std::size_t k = 0; k <= M; ++k) {
    nodes[k] = b(grid.t(k));
    double n2 = 0.0;
    for (double v : nodes[k]) {
      if (!std::isfinite(v)) throw std::invalid_argument("drift_adjust: b not bounded on grid");
      n2 += v * v;
    }
    sup = std::max(sup, std::sqrt(n2));
  }
  const std::size_t dim = nodes[0].size();
  if (gs.z_dim != 0 && dim != gs.z_dim) {
    throw std::invalid_argument("drift_adjust: b has dimension " + std::to_string(dim) +
                                ", generator has z-dimension " + std::to_string(gs.z_dim));
  }
  if (sup == 0.0) return gs;

  GeneratorSpec out = gs;
  out.z_dim = dim;
  out.k_yz = gs.k_yz + sup;
  out.depends_on_z = true;
  out.linear.reset();
  const double dt = grid.dt();
  const double T = grid.horizon();
  out.fhat = [f = gs.fhat, nodes, b, dt, T](double t, double y, std::span<const double> z) {
    const double base = f ? f(t, y, z) : 0.0;
    const double kf = t / dt;
    const auto k = static_cast<std::size_t>(std::llround(kf));
    std::vector<double> fallback;
    const std::vector<double>* bt;
    if (k < nodes.size() && std::abs(kf - static_cast<double>(k)) < 1e-9 * std::max(1.0, T / dt)) {
      bt = &nodes[k];
    } else {
      fallback = b(t);
      bt = &fallback;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < bt->size() && j < z.size(); ++j) s += (*bt)[j] * z[j];
    return base + s;
  };
  return out;
}

double apriori_bound(double k_yz, double xi_sup, double f0_sup, double T, double t) {
  if (k_yz < 0 || xi_sup < 0 || f0_sup < 0 || T < 0 || t < 0) {
    throw std::invalid_argument("apriori_bound: arguments must be nonnegative");
  }
  if (t > T) throw std::invalid_argument("apriori_bound: t > T");
  const double tau = T - t;
  return std::exp(k_yz * tau) * (xi_sup + tau * f0_sup);
}

OdeBoundKind parse_ode_bound_kind(const std::string& s) {
  if (s == "two-sided-K1K2") return OdeBoundKind::kTwoSidedK1K2;
  if (s == "positive-K") return OdeBoundKind::kPositiveK;
  throw std::invalid_argument("ode_bounds: invalid kind '" + s + "'");
}

TruncationBand ode_bounds(OdeBoundKind kind, const OdeBoundParams& p) {
  if (p.xi_sup < 0 || p.k1 < 0 || p.k2 < 0 || p.k < 0 || p.c < 0 || !(p.T > 0)) {
    throw std::invalid_argument("ode_bounds: parameters must be nonnegative");
  }
  TruncationBand band;
  if (kind == OdeBoundKind::kTwoSidedK1K2) {
    const double xi = p.xi_sup, k1 = p.k1, k2 = p.k2, T = p.T;
    band.b = [=](double t) {
      const double tau = T - t;
      if (k2 == 0.0) return xi + k1 * tau;
      return (xi + k1 / k2) * std::exp(k2 * tau) - k1 / k2;
    };
    band.a = [b = band.b](double t) { return -b(t); };
  } else {
    if (!(p.c > 0.0)) throw std::invalid_argument("ode_bounds: positive-K requires C > 0");
    const double c = p.c, k = p.k, xi = p.xi_sup, T = p.T;
    band.a = [=](double t) { return c * std::exp(-k * (T - t)); };
    band.b = [=](double t) { return xi * std::exp(k * (T - t)); };
  }
  return band;
}

double GeneratorParams::get(const std::string& key) const {
  auto it = scalars.find(key);
  if (it == scalars.end()) throw std::invalid_argument("missing generator parameter '" + key + "'");
  return it->second;
}

double GeneratorParams::get_or(const std::string& key, double fallback) const {
  auto it = scalars.find(key);
  return it == scalars.end() ? fallback : it->second;
}

const std::vector<double>& GeneratorParams::vec(const std::string& key) const {
  auto it = vectors.find(key);
  if (it == vectors.end()) throw std::invalid_argument("missing generator parameter '" + key + "'");
  return it->second;
}

double g_alpha(double alpha, double u) {
  // expm1 keeps the small-u cancellation in check
  return (std::expm1(alpha * u) - alpha * u) / alpha;
}

double g_alpha_slope(double alpha, double u) { return std::expm1(alpha * u); }

GeneratorSpec build_linear_generator(LinearCoefficients coeffs, double horizon) {
  if (!coeffs.alpha0) coeffs.alpha0 = [](double) { return 0.0; };
  if (!coeffs.alpha) coeffs.alpha = [](double) { return 0.0; };
  if (!coeffs.beta) coeffs.beta = [](double) { return std::vector<double>{}; };
  if (!coeffs.gamma) coeffs.gamma = [](double, double) { return 0.0; };

  double sup_a = 0.0, sup_b = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double t = horizon * i / 100.0;
    sup_a = std::max(sup_a, std::abs(coeffs.alpha(t)));
    double n2 = 0.0;
    for (double v : coeffs.beta(t)) n2 += v * v;
    sup_b = std::max(sup_b, std::sqrt(n2));
  }
  const std::size_t z_dim = coeffs.beta(0.0).size();
  auto shared = std::make_shared<const LinearCoefficients>(coeffs);

  GeneratorSpec gs;
  gs.kind = "linear";
  gs.z_dim = z_dim;
  gs.fhat = [c = shared](double t, double y, std::span<const double> z) {
    double v = c->alpha0(t) + c->alpha(t) * y;
    if (!z.empty()) {
      const auto b = c->beta(t);
      for (std::size_t j = 0; j < b.size() && j < z.size(); ++j) v += b[j] * z[j];
    }
    return v;
  };
  gs.g = [c = shared](double t, double, std::span<const double>, double u, double e) {
    return c->gamma(t, e) * u;
  };
  gs.slope = [c = shared](double t, double, std::span<const double>, double, double e) {
    return c->gamma(t, e);
  };
  gs.k_yz = sup_a + sup_b;
  gs.depends_on_y = sup_a > 0.0;
  gs.depends_on_z = sup_b > 0.0;
  gs.linear = shared;
  return gs;
}

}  // namespace jbsde
