#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jbsde/generator.hpp"
#include "jbsde/measure.hpp"
#include "jbsde/report.hpp"
#include "jbsde/solvers.hpp"

namespace jbsde::finance {

// dS = diag(S) sigma (phi dt + dB) for the continuous market; the pure-jump
// market has dS = S_- (beta dt + int psi(e) mu~(dt, de)).
struct MarketSpec {
  std::size_t d = 1;
  std::size_t k = 1;
  std::function<Eigen::MatrixXd(double)> sigma;  // k x d
  std::function<Eigen::VectorXd(double)> phi;    // R^d
  std::function<double(double)> beta;
  std::function<double(double, double)> psi;     // (t, e)
  double s0 = 1.0;

  static MarketSpec constant(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& phi, double s0 = 1.0);
  static MarketSpec pure_jump(double beta, std::function<double(double e)> psi, double s0 = 1.0);

  bool has_continuous() const { return static_cast<bool>(sigma) && static_cast<bool>(phi); }
  bool has_pure_jump() const { return static_cast<bool>(beta) && static_cast<bool>(psi); }
  Eigen::VectorXd phi_at(double t) const;
  double phi_sup(const TimeGrid& grid) const;

  // Full rank sigma, phi in Im sigma^T, psi > -1 with bounded L^2(lambda) norm.
  void validate(const TimeGrid& grid, const MarkMeasure* mm = nullptr) const;
};

struct ConstraintSet {
  enum class Kind { kFinite, kInterval };
  Kind kind = Kind::kFinite;
  std::vector<double> elements{0.0};
  double lo = 0.0, hi = 0.0;

  static ConstraintSet finite(std::vector<double> elements);
  static ConstraintSet interval(double lo, double hi);
};

struct GoodDealSpec {
  std::function<double(double)> K;
  MarketSpec market;
  double epsilon = 1e-6;

  static GoodDealSpec constant(double K, MarketSpec market);
  // K_t >= |phi_t| + epsilon on every node.
  void validate(const TimeGrid& grid) const;
};

// Pi z = sigma^T (sigma sigma^T)^{-1} sigma z and Pi_perp z = z - Pi z.
struct Projection {
  Eigen::VectorXd pi;
  Eigen::VectorXd pi_perp;
};
Projection project_ker_im(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& z);

struct InnerMaxResult {
  std::vector<double> gamma;
  Eigen::VectorXd eta;
  double value = 0.0;
  double mu = 0.0;  // 0 on the clipped interior branch
  int bisection_steps = 0;
};

// max p.eta + sum_i q_i u_i gamma_i over |eta|^2 + sum_i q_i gamma_i^2 <= r2,
// gamma >= -1, where p = Pi_perp z and q_i = zeta(t, e_i) w_i.
InnerMaxResult inner_max_kkt(const Eigen::VectorXd& p, std::span<const double> u, std::span<const double> q,
                             double r2);

InnerMaxResult gooddeal_inner_max(std::span<const double> z, std::span<const double> u, double K_t,
                                  const Eigen::VectorXd& phi_t, const Eigen::MatrixXd& sigma_t,
                                  const MarkMeasure& mm, const ZetaDensity& zeta, double t);

// Entropic family. v_t(x) = -exp(-alpha (x - Y_t)).
struct ExpUtilityResult {
  BsdeSolution solution;
  double alpha = 1.0;
  // theta*[k][p * d + j] on paths, theta*[k][j] on the lattice (Z = 0)
  std::vector<std::vector<double>> theta_star;
  double value(double x, double y) const;
  double value0(double x) const { return value(x, solution.y0); }
  CsvTable to_table() const;  // t, Y, theta_star (first component, mean)
};

ExpUtilityResult exp_utility_solve(const MarketSpec& market, double alpha, const TerminalCondition& xi,
                                   const TimeGrid& grid, const MarkMeasure& mm, const ZetaDensity& zeta,
                                   const SolveConfig& cfg, std::uint64_t seed = 42);

struct InnerInf {
  double theta = 0.0;
  double value = 0.0;
};

// inf_{theta in C} (-theta beta + sum_i g_alpha(u_i - theta psi_i) q_i)
InnerInf purejump_inner_inf(std::span<const double> u, std::span<const double> psi, std::span<const double> q,
                            double beta, double alpha, const ConstraintSet& C);

struct PureJumpResult {
  BsdeSolution solution;
  std::vector<std::vector<double>> theta_star;  // [k][state]
};

PureJumpResult exp_utility_purejump_solve(const MarketSpec& market, double alpha, const ConstraintSet& C,
                                          const TerminalCondition& xi, const TimeGrid& grid,
                                          const MarkMeasure& mm, const ZetaDensity& zeta,
                                          const SolveConfig& cfg = {});

enum class Direction { kForward, kInverse };

struct PowerTriple {
  double y = 0.0;
  std::vector<double> z;
  std::vector<double> u;
};

PowerTriple power_transform(double y, std::span<const double> z, std::span<const double> u, double gamma,
                            Direction dir);

// Power utility u(x) = x^gamma / gamma, v_t(x) = x^gamma Y_t / gamma.
struct PowerUtilityResult {
  BsdeSolution transformed;  // (Y~, Z~, U~)
  BsdeSolution original;     // (Y, Z, U) after the inverse transform
  double gamma = 0.5;
  std::vector<std::vector<double>> theta_star;  // same layout as ExpUtilityResult
  TruncationBand bounds;     // positive-K band for Y~
  double bound_slack = 0.0;  // min over states of (Y~ - a, b - Y~)
  // same with b replaced by max(b, b_disc), b_disc = sup xi~ (1 - K dt)^{-(M-k)}
  // the growth of the implicit step
  double discrete_bound_slack = 0.0;
  double value(double x, double y) const;
  CsvTable to_table() const;
};

PowerUtilityResult power_utility_solve(const MarketSpec& market, double gamma, const TerminalCondition& xi,
                                       double xi_lower, const TimeGrid& grid, const MarkMeasure& mm,
                                       const ZetaDensity& zeta, const SolveConfig& cfg = {},
                                       std::uint64_t seed = 42);

// Residual of the original one-step recursion Y_k = E[Y_{k+1}] + f(Y_k) dt
// for the back-transformed lattice solution of a power-utility problem.
double power_recursion_residual(const PowerUtilityResult& res, const MarketSpec& market, const MarkMeasure& mm,
                                const ZetaDensity& zeta);

enum class Side { kUpper, kLower };

struct GoodDealResult {
  BsdeSolution upper;
  BsdeSolution lower;  // -pi^u(-X)
  CsvTable to_table() const;  // t, pi_upper, pi_lower
};

GeneratorSpec gooddeal_generator(const GoodDealSpec& gd);

BsdeSolution gooddeal_bound(const GoodDealSpec& gd, const TerminalCondition& X, Side side, const TimeGrid& grid,
                            const MarkMeasure& mm, const ZetaDensity& zeta, const SolveConfig& cfg = {},
                            std::uint64_t seed = 42);

GoodDealResult gooddeal_bounds(const GoodDealSpec& gd, const TerminalCondition& X, const TimeGrid& grid,
                               const MarkMeasure& mm, const ZetaDensity& zeta, const SolveConfig& cfg = {},
                               std::uint64_t seed = 42);

// Drift of V^theta = u(X^theta - Y) (exponential) or u(X^theta) Y (power)
// over [0, T] for constant shifts theta* + delta.
struct OptimalityCase {
  enum class Kind { kExponential, kPower };
  Kind kind = Kind::kExponential;
  double alpha = 1.0;   // exponential
  double gamma = 0.5;   // power
  double x0 = 1.0;
  double y0 = 0.0;      // Y_0 of the solution
  double phi = 0.0;     // scalar market price of risk (d = 1)
  // theta*(k, p) from the solution; candidates are theta* + delta
  std::function<double(std::size_t k, std::size_t p)> theta_star;
  std::function<double(std::size_t p)> xi;
};

struct DriftEstimate {
  double delta = 0.0;
  double drift = 0.0;
  double std_error = 0.0;
};

struct OptimalityReport {
  PropertyReport report;
  std::vector<DriftEstimate> drifts;  // first entry is theta*
};

OptimalityReport martingale_optimality_check(const OptimalityCase& app, const std::vector<double>& deltas,
                                             const PathBundle& pb);

}  // namespace jbsde::finance
