#include "jbsde/named_generators.hpp"

#include <cmath>
#include <stdexcept>

namespace jbsde {

using finance::ConstraintSet;
using finance::MarketSpec;

const std::vector<std::string>& named_generator_kinds() {
  static const std::vector<std::string> kinds{"entropic", "exp_utility", "exp_utility_purejump",
                                              "power_transformed", "linear", "gooddeal"};
  return kinds;
}

ParamSchema named_generator_schema(const std::string& kind) {
  if (kind == "entropic") return {{"alpha"}, {"f0"}};
  if (kind == "exp_utility") return {{"alpha"}, {"phi"}};
  if (kind == "exp_utility_purejump") return {{"alpha"}, {"beta", "psi", "C", "C_lo", "C_hi"}};
  if (kind == "power_transformed") return {{"gamma"}, {"phi"}};
  if (kind == "linear") return {{}, {"alpha0", "alpha", "beta", "gamma", "gamma_slope"}};
  if (kind == "gooddeal") return {{"K"}, {"phi", "sigma"}};
  throw std::invalid_argument("unknown generator kind '" + kind + "'");
}

GeneratorSpec entropic_generator(double alpha, double fhat_constant) {
  if (!(alpha > 0.0)) throw std::invalid_argument("entropic: alpha must be > 0");
  GeneratorSpec::Fhat fhat;
  if (fhat_constant != 0.0) fhat = [fhat_constant](double, double, std::span<const double>) { return fhat_constant; };
  return make_separable(
      "entropic", fhat,
      [alpha](double, double, std::span<const double>, double u, double) { return g_alpha(alpha, u); },
      [alpha](double, double, std::span<const double>, double u, double) { return g_alpha_slope(alpha, u); }, 0.0,
      false, false);
}

GeneratorSpec power_transformed_generator(double gamma, std::function<Eigen::VectorXd(double)> phi, double phi_sup,
                                          std::size_t d) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("power_transformed: gamma must lie in (0, 1)");
  const double a = gamma / (2.0 * (1.0 - gamma) * (1.0 - gamma));
  const double b = gamma / (1.0 - gamma);
  GeneratorSpec gs;
  gs.kind = "power_transformed";
  gs.z_dim = d;
  gs.fhat = [a, b, phi](double t, double y, std::span<const double> z) {
    if (!phi) return 0.0;
    const Eigen::VectorXd p = phi(t);
    double v = a * p.squaredNorm() * y;
    for (std::size_t j = 0; j < z.size() && j < static_cast<std::size_t>(p.size()); ++j) {
      v += b * p(static_cast<Eigen::Index>(j)) * z[j];
    }
    return v;
  };
  gs.g = [gamma](double, double y, std::span<const double>, double u, double) {
    return (std::pow(u + y, 1.0 - gamma) * std::pow(y, gamma) - y) / (1.0 - gamma) - u;
  };
  gs.slope = [gamma](double, double y, std::span<const double>, double u, double) {
    return std::pow(y / (u + y), gamma) - 1.0;
  };
  gs.k_yz = a * phi_sup * phi_sup + b * phi_sup;
  gs.depends_on_y = true;
  gs.depends_on_z = d > 0 && phi_sup > 0.0;
  return gs;
}

GeneratorSpec purejump_utility_generator(double alpha, const MarketSpec& market, const ConstraintSet& C) {
  if (!(alpha > 0.0)) throw std::invalid_argument("exp_utility_purejump: alpha must be > 0");
  if (!market.has_pure_jump()) throw std::invalid_argument("exp_utility_purejump: market has no beta/psi");
  GeneratorSpec gs;
  gs.kind = "exp_utility_purejump";
  gs.jump = [alpha, market, C](double t, double, std::span<const double>, std::span<const double> u,
                               const JumpView& jv) {
    std::vector<double> psi(u.size()), q(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      psi[i] = market.psi(t, jv.marks[i]);
      q[i] = jv.active[i] ? jv.intensity[i] : 0.0;
    }
    return finance::purejump_inner_inf(u, psi, q, market.beta(t), alpha, C).value;
  };
  return gs;
}

namespace {

Eigen::VectorXd vector_param(const GeneratorParams& params, const std::string& key) {
  if (params.vectors.count(key)) {
    const auto& v = params.vec(key);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  if (params.scalars.count(key)) return Eigen::VectorXd::Constant(1, params.get(key));
  return Eigen::VectorXd();
}

MarketSpec market_from_params(const GeneratorParams& params, const MarketSpec* market) {
  if (market) return *market;
  MarketSpec m;
  const Eigen::VectorXd phi = vector_param(params, "phi");
  if (phi.size() > 0) {
    const Eigen::VectorXd sig = vector_param(params, "sigma");
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(phi.size(), phi.size());
    if (sig.size() == phi.size()) sigma = sig.asDiagonal();
    m = MarketSpec::constant(sigma, phi);
  } else {
    m.d = 0;
    m.k = 0;
  }
  if (params.has("beta") || params.has("psi")) {
    const double beta = params.get_or("beta", 0.0);
    const double psi = params.get_or("psi", 0.0);
    m.beta = [beta](double) { return beta; };
    m.psi = [psi](double, double) { return psi; };
  }
  return m;
}

}  // namespace

GeneratorSpec build_named_generator(const std::string& kind, const GeneratorParams& params,
                                    const MarketSpec* market) {
  const ParamSchema schema = named_generator_schema(kind);
  for (const auto& key : schema.required) {
    if (!params.has(key)) throw std::invalid_argument(kind + ": missing parameter '" + key + "'");
  }

  if (kind == "entropic") return entropic_generator(params.get("alpha"), params.get_or("f0", 0.0));

  if (kind == "exp_utility") {
    const double alpha = params.get("alpha");
    const MarketSpec m = market_from_params(params, market);
    GeneratorSpec gs = entropic_generator(alpha);
    gs.kind = "exp_utility";
    if (m.has_continuous()) {
      gs.fhat = [alpha, phi = m.phi](double t, double, std::span<const double>) {
        return -phi(t).squaredNorm() / (2.0 * alpha);
      };
    }
    return gs;
  }

  if (kind == "exp_utility_purejump") {
    MarketSpec m = market_from_params(params, market);
    if (!m.has_pure_jump()) {
      m.beta = [](double) { return 0.0; };
      m.psi = [](double, double) { return 0.0; };
    }
    ConstraintSet C;
    if (params.vectors.count("C")) {
      C = ConstraintSet::finite(params.vec("C"));
    } else if (params.has("C_lo") || params.has("C_hi")) {
      C = ConstraintSet::interval(params.get("C_lo"), params.get("C_hi"));
    }
    return purejump_utility_generator(params.get("alpha"), m, C);
  }

  if (kind == "power_transformed") {
    const MarketSpec m = market_from_params(params, market);
    if (!m.has_continuous()) return power_transformed_generator(params.get("gamma"), nullptr, 0.0, 0);
    const double sup = m.phi(0.0).norm();
    return power_transformed_generator(params.get("gamma"), m.phi, sup, m.d);
  }

  if (kind == "linear") {
    LinearCoefficients c;
    const double a0 = params.get_or("alpha0", 0.0);
    const double a = params.get_or("alpha", 0.0);
    const Eigen::VectorXd b = vector_param(params, "beta");
    const std::vector<double> bv(b.data(), b.data() + b.size());
    const double g0 = params.get_or("gamma", 0.0);
    const double g1 = params.get_or("gamma_slope", 0.0);
    c.alpha0 = [a0](double) { return a0; };
    c.alpha = [a](double) { return a; };
    c.beta = [bv](double) { return bv; };
    c.gamma = [g0, g1](double, double e) { return g0 + g1 * e; };
    return build_linear_generator(c);
  }

  if (kind == "gooddeal") {
    MarketSpec m = market_from_params(params, market);
    return finance::gooddeal_generator(finance::GoodDealSpec::constant(params.get("K"), m));
  }

  throw std::invalid_argument("unknown generator kind '" + kind + "'");
}

}  // namespace jbsde
