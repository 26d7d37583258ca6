#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace jbsde {

using MarkPredicate = std::function<bool(double)>;

// Finitely supported intensity measure lambda = sum_i w_i delta_{e_i}.
// Marks are kept sorted ascending; the index of a mark in that order is the
// index used for U-components everywhere else.
class MarkMeasure {
 public:
  static constexpr std::size_t kMaxMarks = 64;

  MarkMeasure() = default;  // trivial measure, no marks

  static MarkMeasure build(std::vector<double> marks, std::vector<double> weights,
                           std::string tail_tag = {});

  std::size_t size() const { return marks_.size(); }
  bool empty() const { return marks_.empty(); }
  std::span<const double> marks() const { return marks_; }
  std::span<const double> weights() const { return weights_; }
  double mark(std::size_t i) const { return marks_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  double total_intensity() const { return total_; }
  const std::string& tail_tag() const { return tail_tag_; }

  // sum_i w_i min(1, e_i^2)
  double small_jump_mass() const;

  bool operator==(const MarkMeasure&) const = default;

 private:
  std::vector<double> marks_;
  std::vector<double> weights_;
  double total_ = 0.0;
  std::string tail_tag_;
};

MarkMeasure build_mark_measure(std::vector<double> marks, std::vector<double> weights);

// Keeps exactly the marks passing the selector, weights unchanged.
MarkMeasure truncate_measure(const MarkMeasure& mm, const MarkPredicate& selector);

// Nested family A_n = { |e| >= 1/n }.
MarkPredicate abs_at_least(double threshold);
using NestedSelectorFamily = std::function<MarkPredicate(int n)>;
NestedSelectorFamily inverse_n_family();

// Deterministic compensator density zeta(t, e) with 0 <= zeta <= c_nu.
class ZetaDensity {
 public:
  using Fn = std::function<double(double t, double e)>;

  ZetaDensity();  // zeta == 1
  ZetaDensity(Fn fn, double bound, std::string description = "custom");

  static ZetaDensity constant(double c);
  // zeta(t, e) = a + b t, valid on [0, horizon]
  static ZetaDensity linear_in_time(double a, double b, double horizon);

  // Throws std::invalid_argument when the value leaves [0, c_nu].
  double operator()(double t, double e) const;
  double bound() const { return bound_; }
  const std::string& description() const { return description_; }

  // True when constructed as a constant equal to c.
  bool is_constant(double c) const { return constant_ && constant_value_ == c; }

 private:
  Fn fn_;
  double bound_ = 1.0;
  std::string description_;
  bool constant_ = false;
  double constant_value_ = 0.0;
};

class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(double horizon, std::size_t steps);

  double horizon() const { return horizon_; }
  std::size_t steps() const { return steps_; }
  double dt() const { return horizon_ / static_cast<double>(steps_); }
  double t(std::size_t k) const;
  std::vector<double> nodes() const;

  bool operator==(const TimeGrid&) const = default;

 private:
  double horizon_ = 1.0;
  std::size_t steps_ = 1;
};

// p_i = w_i zeta(t_k, e_i) dt for step k. Throws std::invalid_argument when
// sum_i p_i >= 1, i.e. the grid is too coarse for at-most-one-jump thinning.
std::vector<double> jump_probabilities(const TimeGrid& grid, std::size_t k, const MarkMeasure& mm,
                                       const ZetaDensity& zeta);

// |u|_t = (sum_i u_i^2 zeta(t, e_i) w_i)^{1/2}
double ut_norm(std::span<const double> u, const ZetaDensity& zeta, double t,
               const MarkMeasure& mm);

}  // namespace jbsde
