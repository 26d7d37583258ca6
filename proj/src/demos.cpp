#include "jbsde/demos.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "jbsde/errors.hpp"
#include "jbsde/generator.hpp"

namespace jbsde::harness {

namespace {

constexpr double kQuadRelTol = 1e-10;

// Bisect until |K15 - G7| is small relative to the piece. Boost's own error
// estimate is far too pessimistic on integrands near 1e100 and stalls.
template <class F>
double adaptive_gk(const F& f, double lo, double hi, int depth) {
  using boost::math::quadrature::gauss;
  using boost::math::quadrature::gauss_kronrod;
  const double v = gauss_kronrod<double, 15>::integrate(f, lo, hi, 0, 0.0);
  const double err = std::abs(v - gauss<double, 7>::integrate(f, lo, hi));
  if (!std::isfinite(v)) throw SolverError("quadrature produced a nonfinite value");
  if (err <= kQuadRelTol * std::abs(v) + 1e-300) return v;
  if (depth >= 40) {
    throw SolverError("quadrature did not converge on [" + format_double(lo) + ", " + format_double(hi) + "]");
  }
  const double mid = 0.5 * (lo + hi);
  return adaptive_gk(f, lo, mid, depth + 1) + adaptive_gk(f, mid, hi, depth + 1);
}

// The integrands below blow up like exp(x^{-3/2}) near a; geometric pieces
// keep the exponent change per piece small.
template <class F>
double integrate_geometric(F f, double a, double b) {
  const int pieces = std::max(1, static_cast<int>(std::ceil(std::log(b / a) / std::log(1.02))));
  const double ratio = std::pow(b / a, 1.0 / pieces);
  double total = 0.0, lo = a;
  for (int i = 0; i < pieces; ++i) {
    const double hi = (i + 1 == pieces) ? b : lo * ratio;
    total += adaptive_gk(f, lo, hi, 0);
    lo = hi;
  }
  return total;
}

}  // namespace

CsvTable demo_royer(const std::vector<int>& n_list) {
  CsvTable t({"n", "I1", "I2", "lower_bound"});
  for (int n : n_list) {
    if (n < 2) throw std::invalid_argument("demo_royer: n must be >= 2");
    const double nn = n;
    const double a = 1.0 / nn;
    auto i1 = [nn](double x) {
      const double s = std::pow(x, -1.5);
      const double up = 0.5 * (s + nn * x), um = 0.5 * (-s + nn * x);
      return std::exp(up) - std::exp(um) - up + um;
    };
    // (u+ - u-)(1 ^ x) = x^{-1/2} on the support
    auto i2 = [](double x) { return std::pow(x, -1.5) * std::min(1.0, x); };
    t.add_row({nn, integrate_geometric(i1, a, 1.0), integrate_geometric(i2, a, 1.0),
               nn * (2.0 - 2.0 / std::sqrt(nn))});
  }
  return t;
}

CsvTable demo_growth(const std::vector<double>& psi_grid, const std::vector<double>& u_max_list, double step) {
  if (!(step > 0)) throw std::invalid_argument("demo_growth: step must be > 0");
  CsvTable t({"psi", "u_max", "sup_ratio", "argmax_u"});
  for (double psi : psi_grid) {
    for (double u_max : u_max_list) {
      if (!(u_max > 0)) throw std::invalid_argument("demo_growth: u_max must be > 0");
      const auto n = static_cast<long>(std::llround(u_max / step));
      double best = -1.0, arg = 0.0;
      for (long i = -n; i <= n; ++i) {
        if (i == 0) continue;
        const double u = (i == n) ? u_max : (i == -n ? -u_max : i * step);
        const double r = std::abs(std::expm1(u) - u - psi * u) / (u * u);
        if (r > best) {
          best = r;
          arg = u;
        }
      }
      t.add_row({psi, u_max, best, arg});
    }
  }
  return t;
}

double nonconvex_value(const std::vector<double>& C, double psi, double beta, double alpha, double u) {
  double best = std::numeric_limits<double>::infinity();
  for (double th : C) best = std::min(best, -th * beta + g_alpha(alpha, u - th * psi));
  return best;
}

NonconvexDemo demo_nonconvex(const std::vector<double>& C, double psi, double beta, double alpha,
                             const std::vector<double>& u_grid) {
  if (C.empty()) throw std::invalid_argument("demo_nonconvex: C must be nonempty");
  NonconvexDemo out{CsvTable({"u", "f", "argmin_theta"}), std::nullopt};
  std::vector<double> f(u_grid.size());
  for (std::size_t i = 0; i < u_grid.size(); ++i) {
    const double u = u_grid[i];
    f[i] = nonconvex_value(C, psi, beta, alpha, u);
    double arg = C[0], best = std::numeric_limits<double>::infinity();
    for (double th : C) {
      const double v = -th * beta + g_alpha(alpha, u - th * psi);
      if (v < best) {
        best = v;
        arg = th;
      }
    }
    out.table.add_row({u, f[i], arg});
  }
  for (std::size_t i = 0; i < u_grid.size() && !out.certificate; ++i) {
    for (std::size_t j = i + 1; j < u_grid.size(); ++j) {
      const double mid = nonconvex_value(C, psi, beta, alpha, 0.5 * (u_grid[i] + u_grid[j]));
      const double chord = 0.5 * (f[i] + f[j]);
      if (mid > chord + 1e-10) {
        out.certificate = ConvexityViolation{u_grid[i], u_grid[j], mid, chord};
        break;
      }
    }
  }
  return out;
}

}  // namespace jbsde::harness
