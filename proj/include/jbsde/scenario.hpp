#pragma once

#include <string>
#include <vector>

#include "jbsde/config.hpp"
#include "jbsde/report.hpp"

namespace jbsde::harness {

enum class Mode { kSolve, kUtility, kGoodDeal };

struct ScenarioResult {
  std::string name;
  Mode mode = Mode::kSolve;
  double y0 = 0.0;
  double se_y0 = 0.0;
  CsvTable table;
  std::vector<PropertyReport> reports;
  std::string json;                 // the report document
  std::vector<std::string> written;  // files, in the order written
};

// Runs a parsed scenario. `out_dir` overrides output.dir when non-empty;
// nothing is written when `write` is false.
ScenarioResult run_scenario(const ScenarioConfig& cfg, Mode mode, const std::string& out_dir = {},
                            bool write = true);
ScenarioResult run_scenario(const std::string& path, Mode mode, const std::string& out_dir = {});

}  // namespace jbsde::harness
