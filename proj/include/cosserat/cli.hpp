#pragma once

// Batch front end: subcommand dispatch over a flat configuration, CSV and
// JSON report emission. Exit codes: 0 pass, 1 failed check, 2 bad
// configuration or input.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cosserat/analysis.hpp"
#include "cosserat/config.hpp"
#include "cosserat/energy.hpp"
#include "cosserat/optimize.hpp"
#include "cosserat/state_io.hpp"

namespace cosserat::cli {

using Json = nlohmann::json;
using Entries = std::map<std::string, Json>;

enum ExitCode : int { kPass = 0, kFail = 1, kConfig = 2 };

inline const Entries& section_defaults(const std::string& section) {
  static const std::map<std::string, Entries> table{
      {"grid", {{"grid.n", 17}, {"grid.extent", 1.0}, {"grid.shape", "cube"}, {"grid.puncture_radius", 0.0}}},
      {"material",
       {{"material.mu_e", 1.0},
        {"material.mu_c", 1.0},
        {"material.mu_0", 1.0},
        {"material.p", 2.0},
        {"material.convention", "trace_free"}}},
      {"loads", {{"loads.force", Json::array({0.0, 0.0, 0.0})}, {"loads.moment", Json(std::vector<double>(9, 0.0))}}},
      {"optimizer",
       {{"optimizer.max_iters", 5000},
        {"optimizer.grad_tol", 1e-8},
        {"optimizer.step0", 1.0},
        {"optimizer.armijo_c", 1e-4},
        {"optimizer.backtrack", 0.5},
        {"optimizer.max_backtracks", 40}}},
      {"verify",
       {{"verify.sizes", Json::array({17, 33})},
        {"verify.shell_inner", 0.55},
        {"verify.shell_outer", 0.8},
        {"verify.puncture_factor", 3.0},
        {"verify.orthogonality_samples", 1000}}},
      {"check", {{"check.states", 10}, {"check.step", 1e-5}, {"check.noise", 0.2}}},
      {"minimize", {{"minimize.start", "perturbed"}, {"minimize.amplitude", 0.05}, {"minimize.state", ""}}},
      {"scan", {{"scan.p_min", 2.0}, {"scan.p_max", 2.5}, {"scan.step", 1e-3}}},
      {"monotonicity",
       {{"monotonicity.field", "equator"},
        {"monotonicity.density", "discrete"},
        {"monotonicity.center", Json::array({0.0, 0.0, 0.0})},
        {"monotonicity.radii", Json::array({0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9})},
        {"monotonicity.state", ""}}},
      {"equator", {{"equator.p", Json::array({2.0, 2.5})}, {"equator.n", 65}, {"equator.puncture_factor", 6.0}}},
  };
  const auto it = table.find(section);
  if (it == table.end()) throw ConfigError("unknown config section '" + section + "'");
  return it->second;
}

struct CommandSpec {
  std::string name;
  std::vector<std::string> sections;
  Entries overrides;  ///< command-specific defaults
};

inline const std::vector<CommandSpec>& commands() {
  static const std::vector<CommandSpec> list{
      {"verify-singular", {"material", "verify"}, {{"material.convention", "full_trace"}}},
      {"check-gradient", {"grid", "material", "loads", "check"}, {{"grid.n", 9}}},
      {"minimize", {"grid", "material", "loads", "optimizer", "minimize"}, {}},
      {"scan-kato", {"scan"}, {}},
      {"monotonicity",
       {"grid", "material", "monotonicity"},
       {{"grid.n", 33},
        {"grid.shape", "ball"},
        {"grid.puncture_radius", 0.1875},
        {"material.convention", "full_trace"}}},
      {"equator-energy", {"equator"}, {}},
  };
  return list;
}

inline const CommandSpec& command(const std::string& name) {
  for (const auto& c : commands())
    if (c.name == name) return c;
  throw ConfigError("unknown command '" + name + "'");
}

inline std::set<std::string> known_keys() {
  std::set<std::string> keys{"seed"};
  for (const auto& c : commands())
    for (const auto& s : c.sections)
      for (const auto& [k, v] : section_defaults(s)) keys.insert(k);
  return keys;
}

inline Config default_config(const CommandSpec& spec) {
  Entries values{{"seed", 1}};
  for (const auto& s : spec.sections)
    for (const auto& [k, v] : section_defaults(s)) values[k] = v;
  for (const auto& [k, v] : spec.overrides) values[k] = v;
  return Config(values);
}

// ---------------------------------------------------------------------------
// Typed views of the configuration

inline GridSpec grid_spec(const Config& cfg) {
  GridSpec s;
  s.n = cfg.integer("grid.n");
  s.extent = cfg.number("grid.extent");
  s.shape = parse_shape(cfg.string("grid.shape"));
  s.puncture_radius = cfg.number("grid.puncture_radius");
  s.validate();
  return s;
}

inline MaterialParams material(const Config& cfg) {
  MaterialParams c;
  c.mu_e = cfg.number("material.mu_e");
  c.mu_c = cfg.number("material.mu_c");
  c.mu_0 = cfg.number("material.mu_0");
  c.p = cfg.number("material.p");
  const std::string conv = cfg.string("material.convention");
  if (conv == "trace_free") {
    c.convention = DeviatorConvention::trace_free;
  } else if (conv == "full_trace") {
    c.convention = DeviatorConvention::full_trace;
  } else {
    throw ConfigError("material.convention must be trace_free or full_trace");
  }
  c.validate();
  return c;
}

inline OptimizerParams optimizer(const Config& cfg) {
  OptimizerParams op;
  op.max_iters = cfg.integer("optimizer.max_iters");
  op.grad_tol = cfg.number("optimizer.grad_tol");
  op.step0 = cfg.number("optimizer.step0");
  op.armijo_c = cfg.number("optimizer.armijo_c");
  op.backtrack = cfg.number("optimizer.backtrack");
  op.max_backtracks = cfg.integer("optimizer.max_backtracks");
  op.validate();
  return op;
}

inline LoadSpec loads(const Config& cfg, const Grid& g) {
  const auto f = cfg.numbers("loads.force");
  const auto m = cfg.numbers("loads.moment");
  if (f.size() != 3) throw ConfigError("loads.force must have 3 entries");
  if (m.size() != 9) throw ConfigError("loads.moment must have 9 entries (row major)");
  const Vec3 f0(f[0], f[1], f[2]);
  Mat3 m0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m0(i, j) = m[3 * i + j];
  if (f0.isZero(0.0) && m0.isZero(0.0)) return {};
  LoadSpec l = LoadSpec::constant(g, f0, m0);
  if (f0.isZero(0.0)) l.f.clear();
  if (m0.isZero(0.0)) l.m.clear();
  return l;
}

inline Vec3 vec3(const Config& cfg, const std::string& key) {
  const auto v = cfg.numbers(key);
  if (v.size() != 3) throw ConfigError("config: '" + key + "' must have 3 entries");
  return Vec3(v[0], v[1], v[2]);
}

// ---------------------------------------------------------------------------
// Output

inline std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

class Report {
 public:
  Report(std::string command, const Config& cfg, std::filesystem::path out)
      : command_(std::move(command)), cfg_(cfg), out_(std::move(out)) {
    std::filesystem::create_directories(out_);
  }

  /// CSV with the resolved configuration as leading comment lines.
  void csv(const std::string& name, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) {
    std::ofstream f(out_ / name);
    if (!f) throw ConfigError("cannot write '" + (out_ / name).string() + "'");
    f << "# command = " << command_ << '\n';
    for (const auto& [k, v] : cfg_.values()) f << "# " << k << " = " << v.dump() << '\n';
    for (std::size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
    f << '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << row[i];
      f << '\n';
    }
    outputs_.push_back(name);
  }

  void state(const std::string& name, const Grid& g, const GridState& s) {
    write_state(g, s, (out_ / name).string());
    outputs_.push_back(name);
  }

  Json& results() { return results_; }

  void finish(int code) {
    Json manifest{{"command", command_},
                  {"config", cfg_.to_json()},
                  {"results", results_},
                  {"outputs", outputs_},
                  {"status", code == kPass ? "pass" : "fail"},
                  {"exit_code", code}};
    std::ofstream f(out_ / "run.json");
    if (!f) throw ConfigError("cannot write run.json in '" + out_.string() + "'");
    f << manifest.dump(2) << '\n';
  }

 private:
  std::string command_;
  const Config& cfg_;
  std::filesystem::path out_;
  std::vector<std::string> outputs_;
  Json results_ = Json::object();
};

// ---------------------------------------------------------------------------
// Subcommands

inline UnitQuat draw_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return UnitQuat::normalized(Vec4(n(rng), n(rng), n(rng), n(rng)));
}

inline int run_verify_singular(const Config& cfg, Report& rep) {
  const MaterialParams c = material(cfg);
  VerifyOptions opt;
  opt.shell_inner = cfg.number("verify.shell_inner");
  opt.shell_outer = cfg.number("verify.shell_outer");
  opt.puncture_factor = cfg.number("verify.puncture_factor");
  const int samples = cfg.integer("verify.orthogonality_samples");
  if (samples < 1) throw ConfigError("verify.orthogonality_samples must be >= 1");
  if (!(opt.shell_inner >= 0.0 && opt.shell_inner < opt.shell_outer && opt.shell_outer <= 1.0)) {
    throw ConfigError("verify: need 0 <= shell_inner < shell_outer <= 1");
  }
  opt.orthogonality_samples = static_cast<std::size_t>(samples);
  opt.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  const auto v = verify_singular(cfg.integers("verify.sizes"), c, opt);

  std::vector<std::vector<std::string>> rows;
  for (const auto& l : v.levels) {
    rows.push_back({std::to_string(l.n), num(l.h), std::to_string(l.nodes), std::to_string(l.skipped),
                    num(l.max_phi), num(l.l2_phi), num(l.max_rot), num(l.l2_rot)});
  }
  rep.csv("residuals.csv", {"n", "h", "nodes", "skipped", "max_phi", "l2_phi", "max_rot", "l2_rot"}, rows);
  auto& r = rep.results();
  r["order_max_phi"] = v.order_max_phi;
  r["order_l2_phi"] = v.order_l2_phi;
  r["order_max_rot"] = v.order_max_rot;
  r["order_l2_rot"] = v.order_l2_rot;
  r["min_order"] = v.min_order();
  r["orthogonality_max"] = v.orthogonality_max;
  const bool ok = v.min_order() >= 1.0 && v.orthogonality_max <= 1e-12;
  std::cout << "verify-singular: min observed order " << num(v.min_order()) << ", orthogonality "
            << num(v.orthogonality_max) << (ok ? " [pass]" : " [fail]") << '\n';
  return ok ? kPass : kFail;
}

inline int run_check_gradient(const Config& cfg, Report& rep) {
  const Grid g(grid_spec(cfg));
  g.require_derivable();
  const MaterialParams c = material(cfg);
  const LoadSpec l = loads(cfg, g);
  const int states = cfg.integer("check.states");
  const double step = cfg.number("check.step");
  const double noise = cfg.number("check.noise");
  if (states < 1) throw ConfigError("check.states must be >= 1");
  if (!(step > 0.0)) throw ConfigError("check.step must be > 0");
  if (!(noise >= 0.0)) throw ConfigError("check.noise must be >= 0");
  std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.integer("seed")));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<std::string>> rows;
  double worst = 0.0;
  for (int i = 0; i < states; ++i) {
    GridState s = GridState::identity(g);
    for (std::size_t id : g.active_nodes()) {
      s.phi[id] = g.x(id) + noise * Vec3(normal(rng), normal(rng), normal(rng));
      s.rot[id] = draw_quat(rng);
    }
    const GradientCheck chk = gradient_check(g, s, c, l, step);
    worst = std::max(worst, chk.rel_error);
    rows.push_back({std::to_string(i), num(chk.rel_error), num(chk.fd_norm), std::to_string(chk.coordinates)});
  }
  rep.csv("gradient.csv", {"state", "rel_error", "fd_norm", "coordinates"}, rows);
  rep.results()["max_rel_error"] = worst;
  const bool ok = worst < 1e-6;
  std::cout << "check-gradient: max relative error " << num(worst) << (ok ? " [pass]" : " [fail]") << '\n';
  return ok ? kPass : kFail;
}

inline int run_minimize(const Config& cfg, Report& rep) {
  const std::string start = cfg.string("minimize.start");
  const MaterialParams c = material(cfg);
  const OptimizerParams op = optimizer(cfg);
  GridSpec spec = grid_spec(cfg);
  GridState s0;
  if (start == "state") {
    s0 = read_state(cfg.string("minimize.state"));
    spec = s0.spec;
  }
  const Grid g(spec);
  g.require_derivable();
  if (start == "perturbed") {
    const double amp = cfg.number("minimize.amplitude");
    const double L = spec.extent;
    s0 = GridState::identity(g);
    for (std::size_t id : g.active_nodes()) {
      if (s0.dirichlet[id]) continue;
      const Vec3& x = g.x(id);
      const double bump = std::cos(0.5 * M_PI * x[0] / L) * std::cos(0.5 * M_PI * x[1] / L) *
                          std::cos(0.5 * M_PI * x[2] / L);
      s0.phi[id] = x + amp * bump * Vec3(1.0, -0.5, 0.25);
    }
  } else if (start == "singular") {
    s0 = sample_singular_pair(g);
  } else if (start == "initial_guess") {
    s0 = initial_guess(g, sample_singular_pair(g));
  } else if (start != "state") {
    throw ConfigError("minimize.start must be perturbed, singular, initial_guess or state");
  }
  const LoadSpec l = loads(cfg, g);
  const double e0 = total_energy(g, s0, c, l).total;
  const MinimizeResult res = minimize(g, s0, c, l, op);

  std::vector<std::vector<std::string>> rows;
  for (const auto& t : res.trace) {
    rows.push_back({std::to_string(t.iter), num(t.energy), num(t.grad_norm), num(t.step)});
  }
  rep.csv("trace.csv", {"iter", "energy", "grad_norm", "step"}, rows);
  rep.state("state.json", g, res.state);
  const auto e = total_energy(g, res.state, c, l);
  auto& r = rep.results();
  r["status"] = to_string(res.status);
  r["iterations"] = res.iterations;
  r["initial_energy"] = e0;
  r["final_energy"] = e.total;
  r["final_breakdown"] = {{"translational", e.translational},
                          {"curvature", e.curvature},
                          {"force", e.force},
                          {"moment", e.moment}};
  r["final_grad_norm"] = res.trace.back().grad_norm;
  const bool ok = res.status == MinimizeStatus::converged;
  std::cout << "minimize: " << to_string(res.status) << " after " << res.iterations << " iterations, energy "
            << num(e0) << " -> " << num(e.total) << (ok ? " [pass]" : " [fail]") << '\n';
  return ok ? kPass : kFail;
}

inline int run_scan_kato(const Config& cfg, Report& rep) {
  const auto scan = scan_nonexistence(cfg.number("scan.p_min"), cfg.number("scan.p_max"), cfg.number("scan.step"));
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : scan.rows) {
    rows.push_back({num(row.p), num(row.eps), num(row.kappa), num(row.a), num(row.b), row.admissible ? "1" : "0"});
  }
  rep.csv("scan.csv", {"p", "eps", "kappa", "a", "b", "admissible"}, rows);
  constexpr double target = 32.0 / 15.0;
  const bool ok = scan.threshold && *scan.threshold >= target - 1e-9;
  rep.results()["threshold"] = scan.threshold ? Json(*scan.threshold) : Json(nullptr);
  rep.results()["target"] = target;
  std::cout << "scan-kato: admissible prefix reaches p = " << (scan.threshold ? num(*scan.threshold) : "none")
            << (ok ? " [pass]" : " [fail]") << '\n';
  return ok ? kPass : kFail;
}

inline int run_monotonicity(const Config& cfg, Report& rep) {
  const MaterialParams c = material(cfg);
  const std::string field = cfg.string("monotonicity.field");
  const std::string density = cfg.string("monotonicity.density");
  GridSpec spec = grid_spec(cfg);
  GridState s;
  if (field == "state") {
    s = read_state(cfg.string("monotonicity.state"));
    spec = s.spec;
  }
  const Grid g(spec);
  g.require_derivable();
  if (field == "equator") {
    s = GridState::identity(g);
    sample(FieldTag::zero_phi, g, s);
    sample(FieldTag::equator_quat, g, s);
  } else if (field == "singular") {
    s = sample_singular_pair(g);
  } else if (field == "random") {
    std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.integer("seed")));
    std::normal_distribution<double> normal(0.0, 1.0);
    s = GridState::identity(g);
    for (std::size_t id : g.active_nodes()) {
      s.phi[id] = g.x(id) + 0.3 * Vec3(normal(rng), normal(rng), normal(rng));
      s.rot[id] = draw_quat(rng);
    }
  } else if (field != "state") {
    throw ConfigError("monotonicity.field must be equator, singular, random or state");
  }
  const Vec3 center = vec3(cfg, "monotonicity.center");
  MonotonicityDensities d;
  if (density == "discrete") {
    d = monotonicity_densities(g, s, center, c);
  } else if (density == "analytic") {
    if (field != "equator" || center.norm() != 0.0) {
      throw ConfigError("monotonicity.density = analytic needs field = equator and a centered profile");
    }
    if (!(c.p >= 2.0 && c.p <= 3.0)) throw ConfigError("monotonicity: p must lie in [2, 3)");
    d = equator_densities(g, c.p);
  } else {
    throw ConfigError("monotonicity.density must be discrete or analytic");
  }
  MonotonicityReport mr;
  try {
    mr = monotonicity_from_densities(g, d, center, cfg.numbers("monotonicity.radii"), c.p);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < mr.radii.size(); ++i) {
    rows.push_back({num(mr.radii[i]), num(mr.ball_energy[i]), num(mr.phi_profile[i]), num(mr.deficit[i])});
  }
  rep.csv("monotonicity.csv", {"r", "ball_energy", "phi_profile", "deficit"}, rows);
  const auto [lo, hi] = std::minmax_element(mr.phi_profile.begin(), mr.phi_profile.end());
  auto& r = rep.results();
  r["q_min"] = mr.q_min;
  r["core_energy"] = mr.core_energy;
  r["core_radius"] = mr.core_radius;
  r["profile_variation"] = *lo > 0.0 ? (*hi - *lo) / *lo : 0.0;
  const bool ok = mr.q_min >= -1e-10;
  std::cout << "monotonicity: q_min " << num(mr.q_min) << ", profile variation "
            << num(r["profile_variation"].get<double>()) << (ok ? " [pass]" : " [fail]") << '\n';
  return ok ? kPass : kFail;
}

inline int run_equator_energy(const Config& cfg, Report& rep) {
  const int n = cfg.integer("equator.n");
  const double factor = cfg.number("equator.puncture_factor");
  if (!(factor > 0.0)) throw ConfigError("equator.puncture_factor must be > 0");
  std::vector<std::vector<std::string>> rows;
  bool ok = true;
  Json list = Json::array();
  for (double p : cfg.numbers("equator.p")) {
    if (!(p >= 2.0 && p < 3.0)) throw ConfigError("equator.p entries must lie in [2, 3)");
    const EquatorEnergy e = equator_energy(p, n, factor);
    ok = ok && e.rel_error() <= 0.01;
    rows.push_back({num(p), std::to_string(n), num(e.numeric), num(e.closed_form), num(e.closed_form_full),
                    num(e.puncture_radius), num(e.rel_error())});
    list.push_back({{"p", p}, {"rel_error", e.rel_error()}});
    std::cout << "equator-energy: p = " << num(p) << " numeric " << num(e.numeric) << " closed form "
              << num(e.closed_form) << " relative error " << num(e.rel_error()) << '\n';
  }
  rep.csv("equator.csv", {"p", "n", "numeric", "closed_form", "closed_form_full", "puncture_radius", "rel_error"},
          rows);
  rep.results()["runs"] = list;
  return ok ? kPass : kFail;
}

inline int dispatch(const std::string& name, const Config& cfg, Report& rep) {
  if (name == "verify-singular") return run_verify_singular(cfg, rep);
  if (name == "check-gradient") return run_check_gradient(cfg, rep);
  if (name == "minimize") return run_minimize(cfg, rep);
  if (name == "scan-kato") return run_scan_kato(cfg, rep);
  if (name == "monotonicity") return run_monotonicity(cfg, rep);
  if (name == "equator-energy") return run_equator_energy(cfg, rep);
  throw ConfigError("unknown command '" + name + "'");
}

inline int run(int argc, char** argv) {
  CLI::App app{"Cosserat micropolar energy laboratory"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = "out";
  long long seed = -1;
  for (const auto& spec : commands()) {
    CLI::App* sub = app.add_subcommand(spec.name);
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--set", overrides, "KEY=VALUE override (repeatable)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "random seed");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfig;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const CommandSpec& spec = command(name);
    Config cfg = default_config(spec);
    const auto known = known_keys();
    if (!config_path.empty()) cfg.merge_file(config_path, known);
    Entries sets;
    for (const auto& o : overrides) {
      auto [key, value] = Config::parse_assignment(o);
      sets.insert_or_assign(key, value);
    }
    cfg.merge(sets, known);
    if (seed >= 0) cfg.merge({{"seed", seed}}, known);
    if (cfg.integer("seed") < 0) throw ConfigError("seed must be >= 0");
    Report rep(name, cfg, out_dir);
    int code;
    try {
      code = dispatch(name, cfg, rep);
    } catch (const DomainError& e) {
      std::cerr << "error: " << e.what() << '\n';
      rep.results()["error"] = e.what();
      rep.finish(kConfig);
      return kConfig;
    }
    rep.finish(code);
    return code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
}

}  // namespace cosserat::cli
