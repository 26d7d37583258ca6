// One line per acceptance criterion; exit status 1 when any fails.
#include <chrono>
#include <cstdio>

#include "jbsde/criteria.hpp"

int main() {
  using namespace jbsde::harness;
  const auto t0 = std::chrono::steady_clock::now();
  const auto reports = run_acceptance(42);
  const auto& criteria = acceptance_criteria();
  int failed = 0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    std::printf("criterion %2d %-24s %s  statistic=%-12.6g tolerance=%-8.3g %s\n", criteria[i].id, r.property.c_str(),
                r.passed() ? "PASS" : "FAIL", r.statistic, r.tolerance, r.note.c_str());
    failed += !r.passed();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%zu criteria, %d failed, %.1f s\n", reports.size(), failed, secs);
  return failed == 0 ? 0 : 1;
}
