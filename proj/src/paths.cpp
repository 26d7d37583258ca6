#include "jbsde/paths.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

namespace jbsde {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_path_seed(std::uint64_t master_seed, std::uint64_t path_index) {
  return splitmix64(master_seed ^ splitmix64(path_index + 1));
}

std::vector<std::uint16_t> PathBundle::counts_at(std::size_t p, std::size_t k) const {
  std::vector<std::uint16_t> c(m, 0);
  for (std::size_t s = 0; s < k; ++s) {
    const int j = jump_at(p, s);
    if (j >= 0) ++c[static_cast<std::size_t>(j)];
  }
  return c;
}

std::vector<double> PathBundle::brownian_at(std::size_t p, std::size_t k) const {
  std::vector<double> b(d, 0.0);
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t j = 0; j < d; ++j) b[j] += increment(p, s, j);
  }
  return b;
}

PathBundle simulate_paths(const TimeGrid& grid, const MarkMeasure& mm, const ZetaDensity& zeta, int d,
                          std::size_t n_paths, std::uint64_t seed) {
  if (d < 0) throw std::invalid_argument("simulate_paths: d < 0");
  const std::size_t M = grid.steps();
  const std::size_t m = mm.size();
  // Cumulative jump thresholds per step; validates the thinning condition.
  std::vector<double> cum(M * m);
  for (std::size_t k = 0; k < M; ++k) {
    const auto p = jump_probabilities(grid, k, mm, zeta);
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      acc += p[i];
      cum[k * m + i] = acc;
    }
  }

  PathBundle pb;
  pb.grid = grid;
  pb.d = static_cast<std::size_t>(d);
  pb.m = m;
  pb.n_paths = n_paths;
  pb.seed = seed;
  pb.dB.assign(n_paths * M * pb.d, 0.0);
  pb.jump.assign(n_paths * M, -1);
  const double sd = std::sqrt(grid.dt());

  for (std::size_t p = 0; p < n_paths; ++p) {
    std::mt19937_64 rng(derive_path_seed(seed, p));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t k = 0; k < M; ++k) {
      double* inc = pb.dB.data() + (p * M + k) * pb.d;
      for (std::size_t j = 0; j < pb.d; ++j) inc[j] = sd * normal(rng);
      if (m == 0) continue;
      const double v = unif(rng);
      for (std::size_t i = 0; i < m; ++i) {
        if (v < cum[k * m + i]) {
          pb.jump[p * M + k] = static_cast<std::int16_t>(i);
          break;
        }
      }
    }
  }
  return pb;
}

namespace {

template <class T>
void put(std::string& out, const T& v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T take(std::string_view& in) {
  if (in.size() < sizeof(T)) throw std::invalid_argument("path bundle: truncated input");
  T v;
  std::memcpy(&v, in.data(), sizeof(T));
  in.remove_prefix(sizeof(T));
  return v;
}

constexpr std::uint64_t kMagic = 0x3142505345444A42ULL;  // "BJDESPB1"

}  // namespace

std::string PathBundle::serialize() const {
  std::string out;
  const std::size_t M = grid.steps();
  out.reserve(64 + n_paths * M * (d * sizeof(double) + sizeof(std::int16_t)));
  put(out, kMagic);
  put(out, grid.horizon());
  put(out, static_cast<std::uint64_t>(M));
  put(out, static_cast<std::uint64_t>(d));
  put(out, static_cast<std::uint64_t>(m));
  put(out, seed);
  put(out, static_cast<std::uint64_t>(n_paths));
  for (std::size_t p = 0; p < n_paths; ++p) {
    for (std::size_t k = 0; k < M; ++k) {
      for (std::size_t j = 0; j < d; ++j) put(out, increment(p, k, j));
      put(out, jump[p * M + k]);
    }
  }
  return out;
}

PathBundle PathBundle::deserialize(std::string_view in) {
  if (take<std::uint64_t>(in) != kMagic) throw std::invalid_argument("path bundle: bad magic");
  PathBundle pb;
  const double T = take<double>(in);
  const auto M = take<std::uint64_t>(in);
  pb.grid = TimeGrid(T, M);
  pb.d = take<std::uint64_t>(in);
  pb.m = take<std::uint64_t>(in);
  pb.seed = take<std::uint64_t>(in);
  pb.n_paths = take<std::uint64_t>(in);
  pb.dB.resize(pb.n_paths * M * pb.d);
  pb.jump.resize(pb.n_paths * M);
  for (std::size_t p = 0; p < pb.n_paths; ++p) {
    for (std::size_t k = 0; k < M; ++k) {
      for (std::size_t j = 0; j < pb.d; ++j) pb.dB[(p * M + k) * pb.d + j] = take<double>(in);
      pb.jump[p * M + k] = take<std::int16_t>(in);
    }
  }
  if (!in.empty()) throw std::invalid_argument("path bundle: trailing bytes");
  return pb;
}

}  // namespace jbsde
