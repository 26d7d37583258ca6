#include "jbsde/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace jbsde {

MarkMeasure MarkMeasure::build(std::vector<double> marks, std::vector<double> weights,
                               std::string tail_tag) {
  if (marks.size() != weights.size()) {
    throw std::invalid_argument("mark measure: marks and weights differ in length");
  }
  if (marks.empty()) throw std::invalid_argument("mark measure: empty mark list");
  if (marks.size() > kMaxMarks) {
    throw std::invalid_argument("mark measure: more than 64 marks");
  }
  std::vector<std::size_t> order(marks.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return marks[a] < marks[b]; });

  MarkMeasure mm;
  mm.tail_tag_ = std::move(tail_tag);
  for (auto i : order) {
    const double e = marks[i];
    const double w = weights[i];
    if (!std::isfinite(e) || e == 0.0) throw std::invalid_argument("mark measure: zero or nonfinite mark");
    if (!std::isfinite(w) || !(w > 0.0)) throw std::invalid_argument("mark measure: nonpositive weight");
    if (!mm.marks_.empty() && mm.marks_.back() == e) {
      throw std::invalid_argument("mark measure: duplicate mark");
    }
    mm.marks_.push_back(e);
    mm.weights_.push_back(w);
    mm.total_ += w;
  }
  if (!std::isfinite(mm.small_jump_mass())) {
    throw std::invalid_argument("mark measure: infinite small-jump mass");
  }
  return mm;
}

double MarkMeasure::small_jump_mass() const {
  double s = 0.0;
  for (std::size_t i = 0; i < marks_.size(); ++i) s += weights_[i] * std::min(1.0, marks_[i] * marks_[i]);
  return s;
}

MarkMeasure build_mark_measure(std::vector<double> marks, std::vector<double> weights) {
  return MarkMeasure::build(std::move(marks), std::move(weights));
}

MarkMeasure truncate_measure(const MarkMeasure& mm, const MarkPredicate& selector) {
  std::vector<double> marks;
  std::vector<double> weights;
  for (std::size_t i = 0; i < mm.size(); ++i) {
    if (selector(mm.mark(i))) {
      marks.push_back(mm.mark(i));
      weights.push_back(mm.weight(i));
    }
  }
  if (marks.empty()) return MarkMeasure{};
  return MarkMeasure::build(std::move(marks), std::move(weights), mm.tail_tag());
}

MarkPredicate abs_at_least(double threshold) {
  return [threshold](double e) { return std::abs(e) >= threshold; };
}

NestedSelectorFamily inverse_n_family() {
  // 1/n computed once per member; the tiny slack keeps marks 1/k exactly on
  // the boundary inside A_k despite rounding.
  return [](int n) { return abs_at_least(1.0 / static_cast<double>(n) * (1.0 - 1e-12)); };
}

ZetaDensity::ZetaDensity() : ZetaDensity(constant(1.0)) {}

ZetaDensity::ZetaDensity(Fn fn, double bound, std::string description)
    : fn_(std::move(fn)), bound_(bound), description_(std::move(description)) {
  if (!(bound > 0.0) || !std::isfinite(bound)) {
    throw std::invalid_argument("zeta: bound must be positive and finite");
  }
}

ZetaDensity ZetaDensity::constant(double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("zeta: constant must be >= 0");
  ZetaDensity z([c](double, double) { return c; }, std::max(c, 1e-300), "constant");
  z.constant_ = true;
  z.constant_value_ = c;
  return z;
}

ZetaDensity ZetaDensity::linear_in_time(double a, double b, double horizon) {
  const double lo = std::min(a, a + b * horizon);
  const double hi = std::max(a, a + b * horizon);
  if (lo < 0.0) throw std::invalid_argument("zeta: a + b t negative on [0, T]");
  return ZetaDensity([a, b](double t, double) { return a + b * t; }, std::max(hi, 1e-300),
                     "linear_time");
}

double ZetaDensity::operator()(double t, double e) const {
  const double v = fn_(t, e);
  if (!(v >= 0.0) || v > bound_ * (1.0 + 1e-12)) {
    throw std::invalid_argument("zeta: value outside [0, c_nu] at t=" + std::to_string(t) +
                                ", e=" + std::to_string(e));
  }
  return v;
}

TimeGrid::TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("grid: T must be > 0");
  if (steps == 0) throw std::invalid_argument("grid: steps must be >= 1");
}

double TimeGrid::t(std::size_t k) const {
  if (k == steps_) return horizon_;
  return horizon_ * static_cast<double>(k) / static_cast<double>(steps_);
}

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> out(steps_ + 1);
  for (std::size_t k = 0; k <= steps_; ++k) out[k] = t(k);
  return out;
}

std::vector<double> jump_probabilities(const TimeGrid& grid, std::size_t k, const MarkMeasure& mm,
                                       const ZetaDensity& zeta) {
  std::vector<double> p(mm.size());
  const double t = grid.t(k);
  double total = 0.0;
  for (std::size_t i = 0; i < mm.size(); ++i) {
    p[i] = mm.weight(i) * zeta(t, mm.mark(i)) * grid.dt();
    total += p[i];
  }
  if (total >= 1.0) {
    throw std::invalid_argument("time grid too coarse: jump probability " + std::to_string(total) +
                                " >= 1 at step " + std::to_string(k));
  }
  return p;
}

double ut_norm(std::span<const double> u, const ZetaDensity& zeta, double t, const MarkMeasure& mm) {
  if (u.size() != mm.size()) {
    throw std::invalid_argument("ut_norm: u has " + std::to_string(u.size()) + " entries for " +
                                std::to_string(mm.size()) + " marks");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * u[i] * zeta(t, mm.mark(i)) * mm.weight(i);
  return std::sqrt(s);
}

}  // namespace jbsde
