#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jbsde/measure.hpp"

namespace jbsde {

// Per-time view of the jump structure handed to jump terms: marks, the
// intensities zeta(t, e_i) w_i and the selector mask.
struct JumpView {
  std::span<const double> marks;
  std::span<const double> intensity;
  std::span<const unsigned char> active;
};

// Owns the buffers behind a JumpView for one time t.
class JumpContext {
 public:
  JumpContext(const MarkMeasure& mm, const ZetaDensity& zeta, const MarkPredicate& selector, double t);
  JumpView view() const { return {marks_, intensity_, active_}; }

 private:
  std::vector<double> marks_;
  std::vector<double> intensity_;
  std::vector<unsigned char> active_;
};

// Coefficients of f = a0(t) + a(t) y + b(t).z + sum_i c(t, e_i) u_i zeta w_i.
struct LinearCoefficients {
  std::function<double(double)> alpha0;
  std::function<double(double)> alpha;
  std::function<std::vector<double>(double)> beta;  // empty vector means no z-term
  std::function<double(double, double)> gamma;      // (t, e)
};

// Generator f = fhat(t,y,z) + jump term. The jump term is either separable,
// sum over active marks of g(t,y,z,u_i,e_i) zeta w_i, or a general function
// of the whole mark vector (inner optimisations in the finance generators).
struct GeneratorSpec {
  using Fhat = std::function<double(double t, double y, std::span<const double> z)>;
  using PointJump = std::function<double(double t, double y, std::span<const double> z, double u, double e)>;
  using VectorJump = std::function<double(double t, double y, std::span<const double> z,
                                          std::span<const double> u, const JumpView& jv)>;

  std::string kind = "custom";
  std::size_t z_dim = 0;
  Fhat fhat;
  PointJump g;
  PointJump slope;  // analytic dg/du; finite differences when empty
  VectorJump jump;  // overrides g when set
  MarkPredicate selector;  // empty means every mark
  double k_yz = 0.0;
  bool depends_on_y = false;
  bool depends_on_z = false;
  std::shared_ptr<const LinearCoefficients> linear;

  bool separable() const { return static_cast<bool>(g) && !jump; }
  bool selects(double e) const { return !selector || selector(e); }

  // Throws DomainError on a nonfinite value.
  double evaluate(double t, double y, std::span<const double> z, std::span<const double> u,
                  const JumpView& jv) const;
  double slope_at(double t, double y, std::span<const double> z, double u, double e) const;
};

inline constexpr double kFiniteDifferenceStep = 1e-6;
inline constexpr double kDefaultMargin = 1e-9;

double eval_generator(const GeneratorSpec& gs, double t, double y, std::span<const double> z,
                      std::span<const double> u, const MarkMeasure& mm, const ZetaDensity& zeta);

// Builds a separable generator from scalar pieces.
GeneratorSpec make_separable(std::string kind, GeneratorSpec::Fhat fhat, GeneratorSpec::PointJump g,
                             GeneratorSpec::PointJump slope, double k_yz, bool depends_on_y,
                             bool depends_on_z, std::size_t z_dim = 0);

struct ProbeBox {
  double y_lo = -1.0, y_hi = 1.0;
  double z_abs = 10.0;
  double u_lo = -1.0, u_hi = 1.0;
  std::size_t y_points = 5;
  std::size_t z_points = 3;
  std::size_t u_points = 401;
  std::vector<double> times{0.0};
  std::vector<double> marks{1.0};
};

// Default box: |y|, |u| <= 2 * bound, |z| <= 10, marks of mm.
ProbeBox default_probe_box(double bound, const MarkMeasure& mm, const std::vector<double>& times = {0.0});

struct Probe {
  double t = 0, y = 0, z = 0, u = 0, e = 0;
  double slope = 0;
};

struct ConditionReport {
  std::string condition;
  bool pass = false;
  double k_c = 0.0;
  double delta_c = 0.0;
  double worst_slope = 0.0;
  std::optional<Probe> violation;
};

// (A_fin): g' > -1 + margin and g' finite on every probe.
ConditionReport check_afin(const GeneratorSpec& gs, const ProbeBox& box, double margin = kDefaultMargin);

// (A_infi) at level c: K(c) = sup |g'(x)|/|x|, delta(c) = 1 + inf g'(x) over
// a grid of |x| <= c (x = 0 replaced by limit probes).
ConditionReport check_ainfi(const GeneratorSpec& gs, double c, std::size_t points = 10000,
                            const std::vector<double>& marks = {1.0}, double t = 0.0);

struct TruncationBand {
  std::function<double(double)> a;
  std::function<double(double)> b;

  double clamp(double t, double y) const;
  // a(t) <= b(t) at every node of the grid.
  bool valid_on(const TimeGrid& grid) const;
};

// f~(y, z, u) = f(kappa(y), z, kappa(y + u) - kappa(y)).
GeneratorSpec truncate_generator(const GeneratorSpec& gs, const TruncationBand& band);

// Same generator with jump selector A_n.
GeneratorSpec approx_sequence(const GeneratorSpec& gs, const NestedSelectorFamily& family, int n);

// (g(u) - g(u')) / (u - u') on selected marks with u != u', else 0.
double gamma_slope(const GeneratorSpec& gs, double t, double y, std::span<const double> z, double u,
                   double u_prime, double e);

// fhat += b(t).z, K_yz += sup_k |b(t_k)|.
GeneratorSpec drift_adjust(const GeneratorSpec& gs, const TimeGrid& grid,
                           std::function<std::vector<double>(double)> b);

// exp(K (T - t)) (xi_sup + (T - t) f0_sup)
double apriori_bound(double k_yz, double xi_sup, double f0_sup, double T, double t);

enum class OdeBoundKind { kTwoSidedK1K2, kPositiveK };
OdeBoundKind parse_ode_bound_kind(const std::string& s);

struct OdeBoundParams {
  double xi_sup = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
  double c = 0.0;  // positive kind: lower terminal level
  double k = 0.0;  // positive kind: growth constant
  double T = 1.0;
};

TruncationBand ode_bounds(OdeBoundKind kind, const OdeBoundParams& params);

// Named-generator parameters addressable from configuration files.
struct GeneratorParams {
  std::map<std::string, double> scalars;
  std::map<std::string, std::vector<double>> vectors;

  double get(const std::string& key) const;
  double get_or(const std::string& key, double fallback) const;
  const std::vector<double>& vec(const std::string& key) const;
  bool has(const std::string& key) const { return scalars.count(key) || vectors.count(key); }
};

// g_alpha(u) = (e^{alpha u} - alpha u - 1) / alpha and its derivative.
double g_alpha(double alpha, double u);
double g_alpha_slope(double alpha, double u);

GeneratorSpec build_linear_generator(LinearCoefficients coeffs, double horizon = 1.0);

}  // namespace jbsde
