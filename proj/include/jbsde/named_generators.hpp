#pragma once

#include <string>
#include <vector>

#include "jbsde/finance.hpp"
#include "jbsde/generator.hpp"

namespace jbsde {

// Kinds: entropic, exp_utility, exp_utility_purejump, power_transformed,
// linear, gooddeal. Market data come from `market` when given, else from
// scalar parameters (phi, beta, psi, sigma).
GeneratorSpec build_named_generator(const std::string& kind, const GeneratorParams& params,
                                    const finance::MarketSpec* market = nullptr);

const std::vector<std::string>& named_generator_kinds();

// Required and optional parameter names per kind, for config validation.
struct ParamSchema {
  std::vector<std::string> required;
  std::vector<std::string> optional;
};
ParamSchema named_generator_schema(const std::string& kind);

// Building blocks shared with the finance solvers.
GeneratorSpec entropic_generator(double alpha, double fhat_constant = 0.0);
GeneratorSpec power_transformed_generator(double gamma, std::function<Eigen::VectorXd(double)> phi, double phi_sup,
                                          std::size_t d);
GeneratorSpec purejump_utility_generator(double alpha, const finance::MarketSpec& market,
                                         const finance::ConstraintSet& C);

}  // namespace jbsde
