#pragma once

#include <optional>
#include <vector>

#include "jbsde/report.hpp"

namespace jbsde::harness {

// Entropic counterexample on (0, 1] with Lebesgue intensity:
// u+ - u- = x^{-3/2} on (1/n, 1]. Columns n, I1, I2, lower_bound.
CsvTable demo_royer(const std::vector<int>& n_list);

// sup over a symmetric u-grid of |g(u) - psi u| / u^2 for g(u) = e^u - u - 1.
// Columns psi, u_max, sup_ratio, argmax_u.
CsvTable demo_growth(const std::vector<double>& psi_grid, const std::vector<double>& u_max_list,
                     double step = 1e-3);

struct ConvexityViolation {
  double u0, u1;
  double f_mid;    // f((u0 + u1) / 2)
  double f_chord;  // (f(u0) + f(u1)) / 2
};

struct NonconvexDemo {
  CsvTable table;  // u, f, argmin_theta
  std::optional<ConvexityViolation> certificate;
};

// f(u) = min over theta in C of -theta beta + g_alpha(u - theta psi).
// Pairs u_i < u_j are scanned in lexicographic order of (i, j).
NonconvexDemo demo_nonconvex(const std::vector<double>& C, double psi, double beta, double alpha,
                             const std::vector<double>& u_grid);

double nonconvex_value(const std::vector<double>& C, double psi, double beta, double alpha, double u);

}  // namespace jbsde::harness
