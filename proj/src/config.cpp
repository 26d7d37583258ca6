#include "jbsde/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "jbsde/errors.hpp"
#include "jbsde/named_generators.hpp"

namespace jbsde::harness {

namespace {

struct Ctx {
  std::string source;

  [[noreturn]] void fail(const YAML::Node& n, const std::string& what) const {
    const int line = n.IsDefined() ? n.Mark().line + 1 : 0;
    throw ConfigError(source, line, what);
  }

  void check_keys(const YAML::Node& n, const std::set<std::string>& allowed, const std::string& block) const {
    if (!n.IsMap()) fail(n, "block '" + block + "' must be a mapping");
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in block '" + block + "'");
    }
  }

  template <class T>
  T get(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, what + " has the wrong type");
    }
  }

  double num(const YAML::Node& n, const std::string& what) const {
    const double v = get<double>(n, what);
    if (!std::isfinite(v)) fail(n, what + " must be finite");
    return v;
  }

  std::vector<double> vec(const YAML::Node& n, const std::string& what) const {
    if (!n.IsSequence()) fail(n, what + " must be a list");
    std::vector<double> out;
    for (const auto& e : n) out.push_back(num(e, what));
    return out;
  }
};

void parse_model(const Ctx& c, const YAML::Node& n, ModelConfig& m) {
  c.check_keys(n, {"T", "steps", "d", "marks", "weights", "zeta", "seed"}, "model");
  if (!n["T"]) c.fail(n, "model.T is required");
  if (!n["steps"]) c.fail(n, "model.steps is required");
  m.T = c.num(n["T"], "model.T");
  if (!(m.T > 0)) c.fail(n["T"], "model.T must be > 0");
  const long steps = c.get<long>(n["steps"], "model.steps");
  if (steps < 1) c.fail(n["steps"], "model.steps must be >= 1");
  m.steps = static_cast<std::size_t>(steps);
  if (n["d"]) {
    m.d = c.get<int>(n["d"], "model.d");
    if (m.d < 0) c.fail(n["d"], "model.d must be >= 0");
  }
  if (n["marks"]) m.marks = c.vec(n["marks"], "model.marks");
  if (n["weights"]) m.weights = c.vec(n["weights"], "model.weights");
  if (m.marks.size() != m.weights.size()) c.fail(n, "model.marks and model.weights differ in length");
  if (!m.marks.empty()) {
    try {
      build_mark_measure(m.marks, m.weights);
    } catch (const std::invalid_argument& e) {
      c.fail(n["marks"], e.what());
    }
  }
  if (n["zeta"]) {
    const auto z = n["zeta"];
    c.check_keys(z, {"kind", "value", "a", "b"}, "model.zeta");
    if (z["kind"]) m.zeta.kind = c.get<std::string>(z["kind"], "model.zeta.kind");
    if (m.zeta.kind == "constant") {
      if (z["a"] || z["b"]) c.fail(z, "constant zeta takes only 'value'");
      if (z["value"]) m.zeta.value = c.num(z["value"], "model.zeta.value");
      if (m.zeta.value < 0) c.fail(z, "zeta must be nonnegative");
    } else if (m.zeta.kind == "linear") {
      if (z["value"]) c.fail(z, "linear zeta takes 'a' and 'b'");
      if (z["a"]) m.zeta.a = c.num(z["a"], "model.zeta.a");
      if (z["b"]) m.zeta.b = c.num(z["b"], "model.zeta.b");
      if (m.zeta.a < 0 || m.zeta.a + m.zeta.b * m.T < 0) c.fail(z, "zeta must be nonnegative on [0, T]");
    } else {
      c.fail(z["kind"], "unknown zeta kind '" + m.zeta.kind + "'");
    }
  }
  if (n["seed"]) m.seed = c.get<std::uint64_t>(n["seed"], "model.seed");
}

void parse_generator(const Ctx& c, const YAML::Node& n, GeneratorConfig& g) {
  c.check_keys(n, {"kind", "params"}, "generator");
  if (!n["kind"]) c.fail(n, "generator.kind is required");
  g.kind = c.get<std::string>(n["kind"], "generator.kind");
  const auto& kinds = named_generator_kinds();
  if (std::find(kinds.begin(), kinds.end(), g.kind) == kinds.end()) {
    c.fail(n["kind"], "unknown generator kind '" + g.kind + "'");
  }
  const ParamSchema schema = named_generator_schema(g.kind);
  std::set<std::string> allowed(schema.required.begin(), schema.required.end());
  allowed.insert(schema.optional.begin(), schema.optional.end());
  if (n["params"]) {
    const auto p = n["params"];
    c.check_keys(p, allowed, "generator.params");
    for (const auto& kv : p) {
      const auto key = kv.first.as<std::string>();
      if (kv.second.IsSequence()) g.vectors[key] = c.vec(kv.second, "generator.params." + key);
      else g.scalars[key] = c.num(kv.second, "generator.params." + key);
    }
  }
  for (const auto& key : schema.required) {
    if (!g.scalars.count(key) && !g.vectors.count(key)) c.fail(n, g.kind + ": missing parameter '" + key + "'");
  }
}

const std::map<std::string, std::set<std::string>>& terminal_kinds() {
  static const std::map<std::string, std::set<std::string>> k{
      {"constant", {"value"}},
      {"jump_count", {"scale", "offset", "cap"}},
      {"position", {"lo", "hi"}},
      {"count_pattern", {}},
      {"brownian_square", {}},
      {"brownian_clamp", {"lo", "hi"}},
      {"call_spread", {"k1", "k2"}},
  };
  return k;
}

void parse_terminal(const Ctx& c, const YAML::Node& n, TerminalConfig& t) {
  if (!n.IsMap()) c.fail(n, "block 'terminal' must be a mapping");
  if (!n["kind"]) c.fail(n, "terminal.kind is required");
  t.kind = c.get<std::string>(n["kind"], "terminal.kind");
  const auto it = terminal_kinds().find(t.kind);
  if (it == terminal_kinds().end()) c.fail(n["kind"], "unknown terminal kind '" + t.kind + "'");
  std::set<std::string> allowed = it->second;
  allowed.insert({"kind", "lower"});
  if (t.kind == "count_pattern") allowed.insert("values");
  c.check_keys(n, allowed, "terminal");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (key == "kind") continue;
    if (key == "values") t.values = c.vec(kv.second, "terminal.values");
    else if (key == "lower") t.lower = c.num(kv.second, "terminal.lower");
    else t.params[key] = c.num(kv.second, "terminal." + key);
  }
  auto need = [&](const char* key) {
    if (!t.params.count(key)) c.fail(n, "terminal kind '" + t.kind + "' requires '" + key + "'");
  };
  if (t.kind == "constant") need("value");
  if (t.kind == "position" || t.kind == "brownian_clamp") {
    need("lo");
    need("hi");
    if (t.params["lo"] > t.params["hi"]) c.fail(n, "terminal: lo > hi");
  }
  if (t.kind == "call_spread") {
    need("k1");
    need("k2");
  }
  if (t.kind == "count_pattern" && t.values.empty()) c.fail(n, "count_pattern requires a nonempty 'values' list");
}

void parse_market(const Ctx& c, const YAML::Node& n, MarketConfig& m) {
  c.check_keys(n, {"sigma", "phi", "beta", "psi", "s0"}, "market");
  m.present = true;
  if (n["sigma"]) {
    if (!n["sigma"].IsSequence()) c.fail(n["sigma"], "market.sigma must be a list of rows");
    for (const auto& row : n["sigma"]) m.sigma.push_back(c.vec(row, "market.sigma row"));
    for (const auto& row : m.sigma) {
      if (row.size() != m.sigma[0].size()) c.fail(n["sigma"], "market.sigma rows differ in length");
    }
  }
  if (n["phi"]) m.phi = c.vec(n["phi"], "market.phi");
  if (!m.sigma.empty() && m.phi.size() != m.sigma[0].size()) c.fail(n, "market.phi must have one entry per column of sigma");
  if (m.sigma.empty() != m.phi.empty()) c.fail(n, "market.sigma and market.phi go together");
  if (n["beta"]) m.beta = c.num(n["beta"], "market.beta");
  if (n["psi"]) {
    m.psi = c.num(n["psi"], "market.psi");
    if (!(*m.psi > -1.0)) c.fail(n["psi"], "market.psi must exceed -1");
  }
  if (n["s0"]) m.s0 = c.num(n["s0"], "market.s0");
}

void parse_solver(const Ctx& c, const YAML::Node& n, SolverBlock& s) {
  c.check_keys(n, {"backend", "scheme", "n_paths", "basis_degree", "picard_tol", "picard_max", "state_cap"}, "solver");
  if (n["backend"]) s.backend = c.get<std::string>(n["backend"], "solver.backend");
  if (s.backend != "lattice" && s.backend != "lsmc") c.fail(n["backend"], "unknown backend '" + s.backend + "'");
  if (n["scheme"]) {
    s.scheme = c.get<std::string>(n["scheme"], "solver.scheme");
    try {
      parse_scheme(s.scheme);
    } catch (const std::invalid_argument& e) {
      c.fail(n["scheme"], e.what());
    }
  }
  if (n["n_paths"]) {
    const long v = c.get<long>(n["n_paths"], "solver.n_paths");
    if (v < 1) c.fail(n["n_paths"], "solver.n_paths must be >= 1");
    s.n_paths = static_cast<std::size_t>(v);
  }
  if (n["basis_degree"]) {
    s.basis_degree = c.get<int>(n["basis_degree"], "solver.basis_degree");
    if (s.basis_degree < 1) c.fail(n["basis_degree"], "solver.basis_degree must be >= 1");
  }
  if (n["picard_tol"]) {
    s.picard_tol = c.num(n["picard_tol"], "solver.picard_tol");
    if (!(s.picard_tol > 0)) c.fail(n["picard_tol"], "solver.picard_tol must be > 0");
  }
  if (n["picard_max"]) {
    s.picard_max = c.get<int>(n["picard_max"], "solver.picard_max");
    if (s.picard_max < 1) c.fail(n["picard_max"], "solver.picard_max must be >= 1");
  }
  if (n["state_cap"]) {
    s.state_cap = c.num(n["state_cap"], "solver.state_cap");
    if (!(s.state_cap > 0)) c.fail(n["state_cap"], "solver.state_cap must be > 0");
  }
}

void parse_output(const Ctx& c, const YAML::Node& n, OutputBlock& o) {
  c.check_keys(n, {"dir", "formats"}, "output");
  if (n["dir"]) o.dir = c.get<std::string>(n["dir"], "output.dir");
  if (n["formats"]) {
    if (!n["formats"].IsSequence()) c.fail(n["formats"], "output.formats must be a list");
    o.formats.clear();
    for (const auto& f : n["formats"]) {
      const auto s = c.get<std::string>(f, "output.formats");
      if (s != "csv" && s != "json") c.fail(f, "unknown output format '" + s + "'");
      o.formats.push_back(s);
    }
  }
}

bool terminal_is_state(const std::string& kind) {
  return kind == "constant" || kind == "jump_count" || kind == "position" || kind == "count_pattern";
}

}  // namespace

ScenarioConfig parse_config(const std::string& text, const std::string& source) {
  const Ctx c{source};
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source, e.mark.line + 1, e.msg);
  }
  if (!root.IsMap()) throw ConfigError(source, 1, "configuration must be a mapping");
  c.check_keys(root, {"name", "model", "generator", "terminal", "market", "solver", "output"}, "<root>");
  ScenarioConfig cfg;
  if (root["name"]) cfg.name = c.get<std::string>(root["name"], "name");
  if (!root["model"]) throw ConfigError(source, 1, "block 'model' is required");
  if (!root["generator"]) throw ConfigError(source, 1, "block 'generator' is required");
  parse_model(c, root["model"], cfg.model);
  parse_generator(c, root["generator"], cfg.generator);
  if (root["terminal"]) {
    parse_terminal(c, root["terminal"], cfg.terminal);
  } else {
    cfg.terminal.params["value"] = 0.0;
  }
  if (root["market"]) parse_market(c, root["market"], cfg.market);
  if (root["solver"]) parse_solver(c, root["solver"], cfg.solver);
  if (root["output"]) parse_output(c, root["output"], cfg.output);

  // cross-field checks
  const YAML::Node solver = root["solver"] ? root["solver"] : root;
  if (cfg.solver.backend == "lattice" && !terminal_is_state(cfg.terminal.kind)) {
    c.fail(solver, "lattice backend needs a terminal condition of the jump state");
  }
  if (!terminal_is_state(cfg.terminal.kind) && cfg.model.d < 1) {
    c.fail(root["terminal"], "terminal kind '" + cfg.terminal.kind + "' needs d >= 1");
  }
  if (cfg.terminal.kind == "call_spread" && cfg.market.sigma.empty()) {
    c.fail(root["terminal"], "call_spread needs market.sigma and market.phi");
  }
  if (cfg.market.present && !cfg.market.sigma.empty() &&
      static_cast<int>(cfg.market.sigma[0].size()) != cfg.model.d) {
    c.fail(root["market"], "market.sigma must have d columns");
  }
  if (cfg.generator.kind == "gooddeal") {
    double phi2 = 0.0;
    if (cfg.market.present) {
      for (double v : cfg.market.phi) phi2 += v * v;
    } else if (cfg.generator.vectors.count("phi")) {
      for (double v : cfg.generator.vectors.at("phi")) phi2 += v * v;
    } else if (cfg.generator.scalars.count("phi")) {
      phi2 = cfg.generator.scalars.at("phi") * cfg.generator.scalars.at("phi");
    }
    const double K = cfg.generator.scalars.count("K") ? cfg.generator.scalars.at("K") : 0.0;
    if (!(K > std::sqrt(phi2) + 1e-6)) {
      c.fail(root["generator"], "good-deal bound infeasible: K must exceed |phi| + eps");
    }
  }
  try {
    make_generator(cfg);
    make_solve_config(cfg).validate();
  } catch (const std::invalid_argument& e) {
    c.fail(root["generator"], e.what());
  }
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open configuration file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

namespace {

void emit_vec(YAML::Emitter& out, const std::vector<double>& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (double x : v) out << format_double(x);
  out << YAML::EndSeq;
}

}  // namespace

std::string serialize_config(const ScenarioConfig& cfg) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << cfg.name;

  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "T" << YAML::Value << format_double(cfg.model.T);
  out << YAML::Key << "steps" << YAML::Value << cfg.model.steps;
  out << YAML::Key << "d" << YAML::Value << cfg.model.d;
  out << YAML::Key << "marks" << YAML::Value;
  emit_vec(out, cfg.model.marks);
  out << YAML::Key << "weights" << YAML::Value;
  emit_vec(out, cfg.model.weights);
  out << YAML::Key << "zeta" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << cfg.model.zeta.kind;
  if (cfg.model.zeta.kind == "constant") {
    out << YAML::Key << "value" << YAML::Value << format_double(cfg.model.zeta.value);
  } else {
    out << YAML::Key << "a" << YAML::Value << format_double(cfg.model.zeta.a);
    out << YAML::Key << "b" << YAML::Value << format_double(cfg.model.zeta.b);
  }
  out << YAML::EndMap;
  out << YAML::Key << "seed" << YAML::Value << cfg.model.seed;
  out << YAML::EndMap;

  out << YAML::Key << "generator" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << cfg.generator.kind;
  out << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
  std::set<std::string> keys;
  for (const auto& kv : cfg.generator.scalars) keys.insert(kv.first);
  for (const auto& kv : cfg.generator.vectors) keys.insert(kv.first);
  for (const auto& key : keys) {
    out << YAML::Key << key << YAML::Value;
    if (cfg.generator.vectors.count(key)) emit_vec(out, cfg.generator.vectors.at(key));
    else out << format_double(cfg.generator.scalars.at(key));
  }
  out << YAML::EndMap << YAML::EndMap;

  out << YAML::Key << "terminal" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << cfg.terminal.kind;
  for (const auto& kv : cfg.terminal.params) out << YAML::Key << kv.first << YAML::Value << format_double(kv.second);
  if (!cfg.terminal.values.empty()) {
    out << YAML::Key << "values" << YAML::Value;
    emit_vec(out, cfg.terminal.values);
  }
  if (cfg.terminal.lower) out << YAML::Key << "lower" << YAML::Value << format_double(*cfg.terminal.lower);
  out << YAML::EndMap;

  if (cfg.market.present) {
    out << YAML::Key << "market" << YAML::Value << YAML::BeginMap;
    if (!cfg.market.sigma.empty()) {
      out << YAML::Key << "sigma" << YAML::Value << YAML::Flow << YAML::BeginSeq;
      for (const auto& row : cfg.market.sigma) emit_vec(out, row);
      out << YAML::EndSeq;
      out << YAML::Key << "phi" << YAML::Value;
      emit_vec(out, cfg.market.phi);
    }
    if (cfg.market.beta) out << YAML::Key << "beta" << YAML::Value << format_double(*cfg.market.beta);
    if (cfg.market.psi) out << YAML::Key << "psi" << YAML::Value << format_double(*cfg.market.psi);
    out << YAML::Key << "s0" << YAML::Value << format_double(cfg.market.s0);
    out << YAML::EndMap;
  }

  const SolverBlock& s = cfg.solver;
  out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "backend" << YAML::Value << s.backend;
  out << YAML::Key << "scheme" << YAML::Value << s.scheme;
  out << YAML::Key << "n_paths" << YAML::Value << s.n_paths;
  out << YAML::Key << "basis_degree" << YAML::Value << s.basis_degree;
  out << YAML::Key << "picard_tol" << YAML::Value << format_double(s.picard_tol);
  out << YAML::Key << "picard_max" << YAML::Value << s.picard_max;
  out << YAML::Key << "state_cap" << YAML::Value << format_double(s.state_cap);
  out << YAML::EndMap;

  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dir" << YAML::Value << cfg.output.dir;
  out << YAML::Key << "formats" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& f : cfg.output.formats) out << f;
  out << YAML::EndSeq << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

MarkMeasure make_measure(const ScenarioConfig& cfg) {
  if (cfg.model.marks.empty()) return MarkMeasure();
  return build_mark_measure(cfg.model.marks, cfg.model.weights);
}

ZetaDensity make_zeta(const ScenarioConfig& cfg) {
  const ZetaConfig& z = cfg.model.zeta;
  if (z.kind == "constant") return ZetaDensity::constant(z.value);
  return ZetaDensity::linear_in_time(z.a, z.b, cfg.model.T);
}

TimeGrid make_grid(const ScenarioConfig& cfg) { return TimeGrid(cfg.model.T, cfg.model.steps); }

SolveConfig make_solve_config(const ScenarioConfig& cfg) {
  SolveConfig s;
  s.picard_tol = cfg.solver.picard_tol;
  s.picard_max = cfg.solver.picard_max;
  s.scheme = parse_scheme(cfg.solver.scheme);
  s.basis_degree = cfg.solver.basis_degree;
  s.n_paths = cfg.solver.n_paths;
  s.state_cap = cfg.solver.state_cap;
  return s;
}

std::optional<finance::MarketSpec> make_market(const ScenarioConfig& cfg) {
  if (!cfg.market.present) return std::nullopt;
  finance::MarketSpec m;
  if (!cfg.market.sigma.empty()) {
    const auto rows = static_cast<Eigen::Index>(cfg.market.sigma.size());
    const auto cols = static_cast<Eigen::Index>(cfg.market.sigma[0].size());
    Eigen::MatrixXd s(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j)
        s(i, j) = cfg.market.sigma[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    const Eigen::VectorXd phi = Eigen::Map<const Eigen::VectorXd>(cfg.market.phi.data(), cols);
    m = finance::MarketSpec::constant(s, phi, cfg.market.s0);
  } else {
    m.d = 0;
    m.k = 0;
    m.s0 = cfg.market.s0;
  }
  if (cfg.market.beta || cfg.market.psi) {
    const double beta = cfg.market.beta.value_or(0.0);
    const double psi = cfg.market.psi.value_or(0.0);
    m.beta = [beta](double) { return beta; };
    m.psi = [psi](double, double) { return psi; };
  }
  return m;
}

TerminalCondition make_terminal(const ScenarioConfig& cfg) {
  const TerminalConfig& t = cfg.terminal;
  auto par = [&t](const char* key, double fallback) {
    auto it = t.params.find(key);
    return it == t.params.end() ? fallback : it->second;
  };
  if (t.kind == "constant") {
    const double v = par("value", 0.0);
    return TerminalCondition::from_state([v](std::span<const std::uint16_t>) { return v; }, "constant");
  }
  if (t.kind == "jump_count") {
    const double scale = par("scale", 1.0), offset = par("offset", 0.0);
    const double cap = par("cap", std::numeric_limits<double>::infinity());
    return TerminalCondition::from_state(
        [scale, offset, cap](std::span<const std::uint16_t> c) {
          double n = 0.0;
          for (auto v : c) n += v;
          return offset + scale * std::min(n, cap);
        },
        "jump_count");
  }
  if (t.kind == "position") {
    const double lo = par("lo", 0.0), hi = par("hi", 0.0);
    const std::vector<double> marks = cfg.model.marks.empty() ? std::vector<double>{} : [&] {
      const MarkMeasure mm = make_measure(cfg);
      return std::vector<double>(mm.marks().begin(), mm.marks().end());
    }();
    return TerminalCondition::from_state(
        [lo, hi, marks](std::span<const std::uint16_t> c) {
          double x = 0.0;
          for (std::size_t i = 0; i < c.size(); ++i) x += marks[i] * c[i];
          return std::clamp(x, lo, hi);
        },
        "position");
  }
  if (t.kind == "count_pattern") {
    const std::vector<double> values = t.values;
    return TerminalCondition::from_state(
        [values](std::span<const std::uint16_t> c) {
          std::size_t n = 0;
          for (auto v : c) n += v;
          return values[n % values.size()];
        },
        "count_pattern");
  }
  if (t.kind == "brownian_square") {
    return TerminalCondition::from_path(
        [](const PathBundle& pb, std::size_t p) {
          const double b = pb.brownian_at(p, pb.steps())[0];
          return b * b;
        },
        "brownian_square");
  }
  if (t.kind == "brownian_clamp") {
    const double lo = par("lo", 0.0), hi = par("hi", 0.0);
    return TerminalCondition::from_path(
        [lo, hi](const PathBundle& pb, std::size_t p) { return std::clamp(pb.brownian_at(p, pb.steps())[0], lo, hi); },
        "brownian_clamp");
  }
  if (t.kind == "call_spread") {
    const double k1 = par("k1", 0.0), k2 = par("k2", 0.0);
    const double sigma = cfg.market.sigma.at(0).at(0), phi = cfg.market.phi.at(0), s0 = cfg.market.s0;
    return TerminalCondition::from_path(
        [k1, k2, sigma, phi, s0](const PathBundle& pb, std::size_t p) {
          const double T = pb.grid.horizon();
          const double b = pb.brownian_at(p, pb.steps())[0];
          const double s = s0 * std::exp(sigma * (b + phi * T) - 0.5 * sigma * sigma * T);
          return std::max(s - k1, 0.0) - std::max(s - k2, 0.0);
        },
        "call_spread");
  }
  throw ConfigError("unknown terminal kind '" + t.kind + "'");
}

GeneratorParams make_params(const ScenarioConfig& cfg) {
  GeneratorParams p;
  p.scalars = cfg.generator.scalars;
  p.vectors = cfg.generator.vectors;
  return p;
}

GeneratorSpec make_generator(const ScenarioConfig& cfg) {
  const auto market = make_market(cfg);
  return build_named_generator(cfg.generator.kind, make_params(cfg), market ? &*market : nullptr);
}

}  // namespace jbsde::harness
