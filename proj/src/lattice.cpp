#include "jbsde/lattice.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "jbsde/errors.hpp"

namespace jbsde {

double JumpLattice::state_count(std::size_t max_total, std::size_t m) {
  // C(M + m, m) via lgamma-free product, saturating naturally in double.
  double c = 1.0;
  for (std::size_t j = 1; j <= m; ++j) {
    c *= static_cast<double>(max_total + j) / static_cast<double>(j);
  }
  return c;
}

JumpLattice::JumpLattice(std::size_t m, std::size_t max_total, double state_cap)
    : m_(m), max_total_(max_total) {
  const double n_states = state_count(max_total, m);
  if (n_states > state_cap) {
    throw SolverError("lattice too large: C(M+m, m) = " + std::to_string(n_states) +
                      " exceeds state cap " + std::to_string(state_cap));
  }
  if (max_total > std::numeric_limits<std::uint16_t>::max()) {
    throw std::invalid_argument("lattice: more than 65535 steps");
  }
  const std::size_t rows = max_total + m + 1;
  binom_.assign(rows * (m + 1), 0);
  for (std::size_t n = 0; n < rows; ++n) {
    binom_[n * (m + 1)] = 1;
    for (std::size_t k = 1; k <= std::min(n, m); ++k) {
      const std::uint64_t a = binom_[(n - 1) * (m + 1) + k - 1];
      const std::uint64_t b = (k <= n - 1) ? binom_[(n - 1) * (m + 1) + k] : 0;
      binom_[n * (m + 1) + k] = (a > std::numeric_limits<std::uint64_t>::max() - b)
                                    ? std::numeric_limits<std::uint64_t>::max()
                                    : a + b;
    }
  }

  offsets_.assign(max_total + 2, 0);
  for (std::size_t t = 0; t <= max_total; ++t) {
    // compositions of t into m parts
    const std::size_t block = (m == 0) ? (t == 0 ? 1 : 0) : binom(t + m - 1, m - 1);
    offsets_[t + 1] = offsets_[t] + block;
  }
  const std::size_t n = offsets_[max_total + 1];

  counts_.assign(n * m, 0);
  if (m > 0) {
    std::vector<std::uint16_t> c(m, 0);
    std::size_t idx = 0;
    for (std::size_t t = 0; t <= max_total; ++t) {
      // lexicographic enumeration of compositions of t: start at (0,..,0,t)
      std::fill(c.begin(), c.end(), 0);
      c[m - 1] = static_cast<std::uint16_t>(t);
      while (true) {
        std::copy(c.begin(), c.end(), counts_.begin() + static_cast<std::ptrdiff_t>(idx * m));
        ++idx;
        // next composition in lex order: find rightmost position j < m-1
        // whose suffix (j+1..m-1) holds a positive amount.
        if (m == 1) break;
        std::ptrdiff_t j = static_cast<std::ptrdiff_t>(m) - 2;
        std::size_t suffix = c[m - 1];
        while (j >= 0 && suffix == 0) {
          suffix += c[static_cast<std::size_t>(j)];
          --j;
        }
        if (j < 0) break;
        // c[j] can grow only if the part after it has mass
        ++c[static_cast<std::size_t>(j)];
        const std::size_t rest = suffix - 1;
        for (std::size_t q = static_cast<std::size_t>(j) + 1; q < m; ++q) c[q] = 0;
        c[m - 1] = static_cast<std::uint16_t>(rest);
      }
    }
  }

  const std::size_t interior = max_total > 0 ? offsets_[max_total] : 0;
  neighbors_.assign(interior * m, 0);
  std::vector<std::uint16_t> c(m);
  for (std::size_t s = 0; s < interior; ++s) {
    auto cs = counts(s);
    for (std::size_t i = 0; i < m; ++i) {
      std::copy(cs.begin(), cs.end(), c.begin());
      ++c[i];
      neighbors_[s * m + i] = static_cast<std::uint32_t>(index(c));
    }
  }
}

std::uint64_t JumpLattice::binom(std::size_t n, std::size_t k) const {
  if (k > n || k > m_) return 0;
  return binom_[n * (m_ + 1) + k];
}

std::size_t JumpLattice::total(std::size_t idx) const {
  std::size_t t = 0;
  for (auto v : counts(idx)) t += v;
  return t;
}

std::size_t JumpLattice::index(std::span<const std::uint16_t> c) const {
  if (c.size() != m_) throw std::invalid_argument("lattice: counts dimension mismatch");
  std::size_t t = 0;
  for (auto v : c) t += v;
  if (t > max_total_) throw std::out_of_range("lattice: counts beyond horizon");
  if (m_ == 0) return 0;
  // Rank within compositions of t: for position j with remaining mass rem
  // and r = m - j - 1 parts after it, the compositions with a smaller value
  // at j number C(rem + r, r) - C(rem - c_j + r, r).
  std::size_t rank = 0;
  std::size_t rem = t;
  for (std::size_t j = 0; j + 1 < m_; ++j) {
    const std::size_t r = m_ - j - 1;
    rank += binom(rem + r, r) - binom(rem - c[j] + r, r);
    rem -= c[j];
  }
  return offsets_[t] + rank;
}

std::vector<std::vector<double>> lattice_state_probabilities(const JumpLattice& lattice,
                                                             const TimeGrid& grid,
                                                             const MarkMeasure& mm,
                                                             const ZetaDensity& zeta) {
  const std::size_t M = grid.steps();
  const std::size_t m = mm.size();
  if (lattice.marks() != m || lattice.max_total() < M) {
    throw std::invalid_argument("state probabilities: lattice does not match grid/measure");
  }
  std::vector<std::vector<double>> P(M + 1);
  P[0].assign(1, 1.0);
  for (std::size_t k = 0; k < M; ++k) {
    const auto p = jump_probabilities(grid, k, mm, zeta);
    double ptot = 0.0;
    for (double v : p) ptot += v;
    P[k + 1].assign(lattice.size_upto(k + 1), 0.0);
    for (std::size_t s = 0; s < lattice.size_upto(k); ++s) {
      const double w = P[k][s];
      P[k + 1][s] += w * (1.0 - ptot);
      for (std::size_t i = 0; i < m; ++i) P[k + 1][lattice.neighbor(s, i)] += w * p[i];
    }
  }
  return P;
}

}  // namespace jbsde
