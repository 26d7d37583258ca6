#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "jbsde/config.hpp"
#include "jbsde/criteria.hpp"
#include "jbsde/demos.hpp"
#include "jbsde/errors.hpp"
#include "jbsde/scenario.hpp"

using namespace jbsde;
using namespace jbsde::harness;

namespace {

const std::string kData = JBSDE_TEST_DATA;
const std::string kConfigs = JBSDE_CONFIG_DIR;

const char* kEntropic = R"(name: ent
model:
  T: 1.0
  steps: 50
  marks: [1.0]
  weights: [1.0]
generator:
  kind: entropic
  params: {alpha: 1.0}
terminal:
  kind: jump_count
)";

int error_line(const std::string& text) {
  try {
    parse_config(text, "t.yaml");
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("jbsde_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, RoundTripIsCanonical) {
  for (const char* f : {"entropic", "linear_lsmc", "exp_utility", "power_utility", "purejump_utility", "gooddeal"}) {
    const ScenarioConfig cfg = load_config(kConfigs + "/" + f + ".yaml");
    const std::string canon = serialize_config(cfg);
    const ScenarioConfig again = parse_config(canon);
    EXPECT_EQ(again, cfg) << f;
    EXPECT_EQ(serialize_config(again), canon) << f;
  }
  const ScenarioConfig g = load_config(kData + "/golden.yaml");
  EXPECT_EQ(parse_config(serialize_config(g)), g);
}

TEST(Config, UnknownKeysRejectedWithLine) {
  EXPECT_EQ(error_line(std::string(kEntropic) + "extra: 1\n"), 12);
  std::string bad = kEntropic;
  bad.replace(bad.find("steps: 50"), 9, "stepz: 50");
  EXPECT_EQ(error_line(bad), 4);
  bad = kEntropic;
  bad.replace(bad.find("alpha: 1.0"), 10, "beta: 1.0");
  EXPECT_GT(error_line(bad), 0);
}

TEST(Config, ValidationErrors) {
  std::string bad = kEntropic;
  bad.replace(bad.find("kind: entropic"), 14, "kind: unknown");
  EXPECT_EQ(error_line(bad), 8);
  EXPECT_GT(error_line("model: {T: 1, steps: 10}\n"), 0);  // no generator
  const std::string gooddeal = R"(model: {T: 1, steps: 10, d: 1, marks: [1], weights: [1]}
generator: {kind: gooddeal, params: {K: 0.1}}
terminal: {kind: jump_count}
market: {sigma: [[0.2]], phi: [0.2]}
)";
  EXPECT_EQ(error_line(gooddeal), 2);
  const std::string path_on_lattice = R"(model: {T: 1, steps: 10, d: 1}
generator: {kind: entropic, params: {alpha: 1}}
terminal: {kind: brownian_square}
)";
  EXPECT_GT(error_line(path_on_lattice), 0);
  EXPECT_GT(error_line("model: [1, 2\n"), 0);
}

TEST(Scenario, EntropicWritesTables) {
  const auto dir = scratch("ent");
  const ScenarioResult r = run_scenario(parse_config(kEntropic), Mode::kSolve, dir.string());
  ASSERT_EQ(r.written.size(), 2u);
  const std::string csv = slurp(dir / "ent.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,Y_mean,Y_min,Y_max,U_1,se_Y");
  const auto doc = nlohmann::json::parse(slurp(dir / "ent.json"));
  EXPECT_EQ(doc["y0"].get<double>(), r.y0);
  EXPECT_EQ(doc["reports"][0]["status"], "pass");
  std::filesystem::remove_all(dir);
}

TEST(Scenario, ModeMismatchIsAConfigError) {
  EXPECT_THROW(run_scenario(parse_config(kEntropic), Mode::kUtility, {}, false), ConfigError);
  EXPECT_THROW(run_scenario(parse_config(kEntropic), Mode::kGoodDeal, {}, false), ConfigError);
}

TEST(Scenario, ApplicationTables) {
  const auto u = run_scenario(load_config(kConfigs + "/power_utility.yaml"), Mode::kUtility, {}, false);
  EXPECT_EQ(u.table.columns(), (std::vector<std::string>{"t", "Y", "theta_star"}));
  EXPECT_NEAR(u.table.at(0, "theta_star"), 0.4, 1e-12);
  for (const auto& rep : u.reports) EXPECT_TRUE(rep.passed()) << rep.property;
  const auto g = run_scenario(load_config(kConfigs + "/gooddeal.yaml"), Mode::kGoodDeal, {}, false);
  EXPECT_EQ(g.table.columns(), (std::vector<std::string>{"t", "pi_upper", "pi_lower"}));
  for (const auto& rep : g.reports) EXPECT_TRUE(rep.passed()) << rep.property;
  const auto p = run_scenario(load_config(kConfigs + "/purejump_utility.yaml"), Mode::kUtility, {}, false);
  EXPECT_EQ(p.table.columns(), (std::vector<std::string>{"t", "Y", "theta_star"}));
}

TEST(Scenario, GoldenY0) {
  double recorded = 0.0;
  std::ifstream(kData + "/golden_y0.txt") >> recorded;
  const auto r = run_scenario(load_config(kData + "/golden.yaml"), Mode::kSolve, {}, false);
  EXPECT_NEAR(r.y0, recorded, 1e-12);
}

TEST(Demos, Royer) {
  const CsvTable t = demo_royer({2, 4, 16, 64});
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const double n = t.at(r, "n");
    EXPECT_LE(t.at(r, "I2"), 2.0 + 1e-6);
    EXPECT_NEAR(t.at(r, "I2"), 2.0 - 2.0 / std::sqrt(n), 1e-9);
    EXPECT_EQ(t.at(r, "lower_bound"), n * (2.0 - 2.0 / std::sqrt(n)));
    if (n >= 4) EXPECT_GE(t.at(r, "I1"), t.at(r, "lower_bound") - 1e-6);
  }
  EXPECT_GT(t.at(3, "I1"), t.at(2, "I1"));
  EXPECT_GT(t.at(2, "I1"), t.at(1, "I1"));
  EXPECT_EQ(demo_royer({2, 4, 16, 64}).to_string(), t.to_string());
}

TEST(Demos, Growth) {
  const CsvTable t = demo_growth({0.0, 0.5, 1.0}, {0.5, 2.0, 10.0});
  EXPECT_GT(t.at(2, "sup_ratio"), 200.0);
  EXPECT_NEAR(t.at(2, "sup_ratio"), (std::exp(10.0) - 11.0) / 100.0, 1e-9);
  for (std::size_t psi = 0; psi < 3; ++psi) {
    EXPECT_LE(t.at(psi * 3, "sup_ratio"), t.at(psi * 3 + 1, "sup_ratio"));
    EXPECT_LE(t.at(psi * 3 + 1, "sup_ratio"), t.at(psi * 3 + 2, "sup_ratio"));
  }
  const CsvTable small = demo_growth({0.0}, {1e-2}, 1e-4);
  EXPECT_NEAR(small.at(0, "sup_ratio"), 0.5, 2e-3);
}

TEST(Demos, Nonconvex) {
  const std::vector<double> grid{0.0, 0.5, 1.0, 1.5, 2.0};
  const NonconvexDemo d = demo_nonconvex({0.0, 1.0}, 1.0, 0.0, 1.0, grid);
  ASSERT_TRUE(d.certificate);
  EXPECT_EQ(d.certificate->u0, 0.0);
  EXPECT_EQ(d.certificate->u1, 1.0);
  EXPECT_NEAR(d.certificate->f_mid, std::min(std::exp(0.5) - 1.5, std::exp(-0.5) - 0.5), 1e-15);
  EXPECT_EQ(d.table.at(0, "f"), 0.0);
  EXPECT_NEAR(d.table.at(2, "f"), 0.0, 1e-15);
  EXPECT_FALSE(demo_nonconvex({0.0, 1.0}, 0.0, 0.0, 1.0, grid).certificate);
  EXPECT_FALSE(demo_nonconvex({0.0}, 1.0, 0.0, 1.0, grid).certificate);
}

TEST(Verify, SchemaAndDeterminism) {
  bool ok = false;
  const std::string a = verify_suite(42, &ok);
  EXPECT_TRUE(ok);
  EXPECT_EQ(verify_suite(42), a);
  const auto doc = nlohmann::json::parse(a);
  ASSERT_EQ(doc["criteria"].size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    const auto& c = doc["criteria"][i];
    EXPECT_EQ(c["criterion"].get<int>(), int(i) + 1);
    for (const char* key : {"property", "theorem_tag", "status", "statistic", "tolerance"}) EXPECT_TRUE(c.contains(key));
  }
  EXPECT_FALSE(doc["properties"].empty());
}
