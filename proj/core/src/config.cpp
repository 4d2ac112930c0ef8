#include "otdp/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "otdp/error.hpp"

namespace otdp {

namespace {

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(const std::string& where, const std::string& msg) const {
    throw ConfigError(origin_ + ": " + (where.empty() ? "" : where + ": ") + msg);
  }

  void only_keys(const toml::table& t, const std::string& where, std::set<std::string> allowed) const {
    for (auto&& [k, v] : t) {
      (void)v;
      if (!allowed.count(std::string(k.str())))
        fail(where, "unknown key '" + std::string(k.str()) + "'");
    }
  }

  const toml::node& require(const toml::table& t, const std::string& where, const char* key) const {
    const toml::node* n = t.get(key);
    if (!n) fail(where, std::string("missing required key '") + key + "'");
    return *n;
  }

  const toml::table* table(const toml::table& t, const std::string& where, const char* key,
                           bool required) const {
    const toml::node* n = t.get(key);
    if (!n) {
      if (required) fail(where, std::string("missing required table [") + key + "]");
      return nullptr;
    }
    if (!n->is_table()) fail(where, std::string("'") + key + "' must be a table");
    return n->as_table();
  }

  double number(const toml::node& n, const std::string& where) const {
    if (auto v = n.as_floating_point()) return v->get();
    if (auto v = n.as_integer()) return static_cast<double>(v->get());
    fail(where, "expected a number");
  }

  long integer(const toml::node& n, const std::string& where) const {
    if (auto v = n.as_integer()) return static_cast<long>(v->get());
    fail(where, "expected an integer");
  }

  bool boolean(const toml::node& n, const std::string& where) const {
    if (auto v = n.as_boolean()) return v->get();
    fail(where, "expected true or false");
  }

  std::string string(const toml::node& n, const std::string& where) const {
    if (auto v = n.as_string()) return v->get();
    fail(where, "expected a string");
  }

  const toml::array& array(const toml::node& n, const std::string& where) const {
    if (auto a = n.as_array()) return *a;
    fail(where, "expected an array");
  }

  std::vector<double> numbers(const toml::node& n, const std::string& where) const {
    std::vector<double> out;
    const auto& a = array(n, where);
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(number(*a.get(i), where + "[" + std::to_string(i) + "]"));
    return out;
  }

  Expr expr(const toml::node& n, const std::string& where, VariableSet vars) const {
    const std::string src = string(n, where);
    try {
      return parse_expr(src, vars);
    } catch (const SyntaxError& e) {
      fail(where, std::string(e.what()) + " in \"" + src + "\"");
    } catch (const UnknownIdentifier& e) {
      fail(where, std::string(e.what()) + " in \"" + src + "\"");
    }
  }

  std::vector<std::vector<Expr>> expr_matrix(const toml::node& n, const std::string& where,
                                             VariableSet vars) const {
    std::vector<std::vector<Expr>> out;
    const auto& rows = array(n, where);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string w = where + "[" + std::to_string(i) + "]";
      std::vector<Expr> row;
      const auto& cols = array(*rows.get(i), w);
      for (std::size_t j = 0; j < cols.size(); ++j)
        row.push_back(expr(*cols.get(j), w + "[" + std::to_string(j) + "]", vars));
      out.push_back(std::move(row));
    }
    return out;
  }

  Box box(const toml::table& t, const std::string& where, std::size_t dim) const {
    only_keys(t, where, {"lower", "upper"});
    auto lo = numbers(require(t, where, "lower"), where + ".lower");
    auto hi = numbers(require(t, where, "upper"), where + ".upper");
    if (lo.size() != dim || hi.size() != dim)
      fail(where, "lower and upper must have " + std::to_string(dim) + " entries");
    Box b;
    for (std::size_t i = 0; i < dim; ++i) b.push_back({lo[i], hi[i]});
    return b;
  }

 private:
  std::string origin_;
};

}  // namespace

RunConfig parse_config(std::string_view text, std::string_view origin) {
  const Reader rd{std::string(origin)};
  toml::table root;
  try {
    root = toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " (line " << e.source().begin.line << ", column " << e.source().begin.column << ")";
    rd.fail("", msg.str());
  }

  rd.only_keys(root, "", {"name", "epsilon", "drift", "input_map", "lyapunov_Q", "be_weight_P", "dimensions",
                          "domain", "controls", "cost", "solver", "simulation", "verify"});

  RunConfig cfg;
  ProblemSpec& p = cfg.problem;
  if (const auto* n = root.get("name")) p.name = rd.string(*n, "name");

  const auto* dims = rd.table(root, "", "dimensions", true);
  rd.only_keys(*dims, "dimensions", {"nx", "nu"});
  p.nx = static_cast<int>(rd.integer(rd.require(*dims, "dimensions", "nx"), "dimensions.nx"));
  p.nu = static_cast<int>(rd.integer(rd.require(*dims, "dimensions", "nu"), "dimensions.nu"));
  if (p.nx < 1 || p.nx > 8) rd.fail("dimensions.nx", "must lie in 1..8");
  if (p.nu < 0 || p.nu > 16) rd.fail("dimensions.nu", "must lie in 0..16");
  const VariableSet vars = p.vars();
  const auto nx = static_cast<std::size_t>(p.nx);
  const auto nu = static_cast<std::size_t>(p.nu);

  p.Omega = rd.box(*rd.table(root, "", "domain", true), "domain", nx);
  if (nu > 0)
    p.U = rd.box(*rd.table(root, "", "controls", true), "controls", nu);
  else if (const auto* c = rd.table(root, "", "controls", false))
    p.U = rd.box(*c, "controls", 0);

  p.epsilon = rd.number(rd.require(root, "", "epsilon"), "epsilon");

  const auto& drift = rd.array(rd.require(root, "", "drift"), "drift");
  if (drift.size() != nx) rd.fail("drift", "must have nx = " + std::to_string(nx) + " entries");
  for (std::size_t i = 0; i < nx; ++i)
    p.f.push_back(rd.expr(*drift.get(i), "drift[" + std::to_string(i) + "]", vars));

  if (const auto* g = root.get("input_map")) {
    p.G = rd.expr_matrix(*g, "input_map", vars);
  } else if (nu == 0) {
    p.G.assign(nx, {});
  } else {
    rd.fail("", "missing required key 'input_map'");
  }
  if (p.G.size() != nx) rd.fail("input_map", "must have nx = " + std::to_string(nx) + " rows");
  for (const auto& row : p.G)
    if (row.size() != nu) rd.fail("input_map", "rows must have nu = " + std::to_string(nu) + " entries");

  const auto* cost = rd.table(root, "", "cost", true);
  rd.only_keys(*cost, "cost", {"q", "R"});
  p.q = rd.expr(rd.require(*cost, "cost", "q"), "cost.q", vars);
  if (nu > 0) {
    p.R = rd.numbers(rd.require(*cost, "cost", "R"), "cost.R");
    if (p.R.size() != nu) rd.fail("cost.R", "must have nu = " + std::to_string(nu) + " entries");
  }

  if (const auto* q = root.get("lyapunov_Q")) p.Q = rd.expr(*q, "lyapunov_Q", vars);
  if (const auto* P = root.get("be_weight_P")) {
    p.P = rd.expr_matrix(*P, "be_weight_P", vars);
    if (p.P->size() != nx) rd.fail("be_weight_P", "must be nx-by-nx");
    for (const auto& row : *p.P)
      if (row.size() != nx) rd.fail("be_weight_P", "must be nx-by-nx");
  }

  const ValidationReport rep = validate_spec(p);
  if (!rep.ok()) {
    std::string msg = "invalid problem:";
    for (const auto& v : rep.violations) msg += "\n  - " + v;
    rd.fail("", msg);
  }

  // [solver]
  SolverSettings& s = cfg.solver;
  s.grid.assign(nx, nx == 1 ? 201 : 50);
  if (const auto* t = rd.table(root, "", "solver", false)) {
    rd.only_keys(*t, "solver", {"grid", "h", "tol", "offset_tol", "max_iter", "mode", "horizon", "drift_flux",
                                "control_flux", "enforce_positivity", "anchor", "threads"});
    if (const auto* g = t->get("grid")) {
      if (g->is_integer()) {
        s.grid.assign(nx, static_cast<int>(rd.integer(*g, "solver.grid")));
      } else {
        s.grid.clear();
        for (double v : rd.numbers(*g, "solver.grid")) s.grid.push_back(static_cast<int>(v));
        if (s.grid.size() != nx) rd.fail("solver.grid", "must be an integer or have nx entries");
      }
    }
    if (const auto* v = t->get("h")) s.h = rd.number(*v, "solver.h");
    if (const auto* v = t->get("tol")) s.tol = rd.number(*v, "solver.tol");
    if (const auto* v = t->get("offset_tol")) s.offset_tol = rd.number(*v, "solver.offset_tol");
    if (const auto* v = t->get("max_iter")) s.max_iter = rd.integer(*v, "solver.max_iter");
    if (const auto* v = t->get("mode")) {
      const std::string m = rd.string(*v, "solver.mode");
      if (m == "ergodic") s.mode = SolveMode::Ergodic;
      else if (m == "finite") s.mode = SolveMode::Finite;
      else rd.fail("solver.mode", "must be \"ergodic\" or \"finite\"");
    }
    if (const auto* v = t->get("horizon")) s.horizon = rd.integer(*v, "solver.horizon");
    try {
      if (const auto* v = t->get("drift_flux")) s.flux.drift = parse_drift_flux(rd.string(*v, "solver.drift_flux"));
      if (const auto* v = t->get("control_flux"))
        s.flux.control = parse_control_flux(rd.string(*v, "solver.control_flux"));
    } catch (const ConfigError& e) {
      rd.fail("solver", e.what());
    }
    if (const auto* v = t->get("enforce_positivity")) s.enforce_positivity = rd.boolean(*v, "solver.enforce_positivity");
    if (const auto* v = t->get("anchor")) s.anchor = rd.integer(*v, "solver.anchor");
    if (const auto* v = t->get("threads")) s.threads = static_cast<int>(rd.integer(*v, "solver.threads"));
  }
  for (int c : s.grid)
    if (c < 3) rd.fail("solver.grid", "needs at least 3 nodes per axis");
  if (!(s.h > 0.0)) rd.fail("solver.h", "must be positive");
  if (!(s.tol > 0.0)) rd.fail("solver.tol", "must be positive");
  if (s.max_iter < 1) rd.fail("solver.max_iter", "must be positive");
  if (s.horizon < 1) rd.fail("solver.horizon", "must be positive");

  // [simulation]
  SimulationSettings& sim = cfg.simulation;
  if (const auto* t = rd.table(root, "", "simulation", false)) {
    rd.only_keys(*t, "simulation", {"trajectories", "T", "dt", "seed", "burn_in", "x0", "path_stride",
                                    "initial_points", "deterministic_T", "deterministic_dt"});
    if (const auto* v = t->get("trajectories")) sim.sim.trajectories = static_cast<int>(rd.integer(*v, "simulation.trajectories"));
    if (const auto* v = t->get("T")) sim.sim.T = rd.number(*v, "simulation.T");
    if (const auto* v = t->get("dt")) sim.sim.dt = rd.number(*v, "simulation.dt");
    if (const auto* v = t->get("seed")) sim.sim.seed = static_cast<std::uint64_t>(rd.integer(*v, "simulation.seed"));
    if (const auto* v = t->get("burn_in")) sim.sim.burn_in = rd.number(*v, "simulation.burn_in");
    if (const auto* v = t->get("x0")) {
      sim.sim.x0 = rd.numbers(*v, "simulation.x0");
      if (sim.sim.x0->size() != nx) rd.fail("simulation.x0", "must have nx entries");
    }
    if (const auto* v = t->get("path_stride")) sim.sim.path_stride = rd.number(*v, "simulation.path_stride");
    if (const auto* v = t->get("initial_points")) {
      const auto& pts = rd.array(*v, "simulation.initial_points");
      for (std::size_t i = 0; i < pts.size(); ++i) {
        auto x = rd.numbers(*pts.get(i), "simulation.initial_points[" + std::to_string(i) + "]");
        if (x.size() != nx) rd.fail("simulation.initial_points", "points must have nx entries");
        sim.initial_points.push_back(std::move(x));
      }
    }
    if (const auto* v = t->get("deterministic_T")) sim.deterministic_T = rd.number(*v, "simulation.deterministic_T");
    if (const auto* v = t->get("deterministic_dt")) sim.deterministic_dt = rd.number(*v, "simulation.deterministic_dt");
  }
  if (!(sim.sim.dt > 0.0)) rd.fail("simulation.dt", "must be positive");
  if (!(sim.sim.T > 0.0)) rd.fail("simulation.T", "must be positive");
  if (!(sim.sim.burn_in >= 0.0 && sim.sim.burn_in < 1.0)) rd.fail("simulation.burn_in", "must lie in [0, 1)");
  if (sim.sim.trajectories < 1) rd.fail("simulation.trajectories", "must be positive");

  // [verify]
  VerifySettings& ver = cfg.verify;
  if (const auto* t = rd.table(root, "", "verify", false)) {
    rd.only_keys(*t, "verify", {"hasminskii", "bakry_emery", "conservation"});
    if (const auto* h = rd.table(*t, "verify", "hasminskii", false)) {
      rd.only_keys(*h, "verify.hasminskii", {"gamma1", "gamma2", "gamma3", "gamma4"});
      if (const auto* v = h->get("gamma1")) ver.hasminskii.gamma1 = rd.number(*v, "verify.hasminskii.gamma1");
      if (const auto* v = h->get("gamma2")) ver.hasminskii.gamma2 = rd.number(*v, "verify.hasminskii.gamma2");
      if (const auto* v = h->get("gamma3")) ver.hasminskii.gamma3 = rd.number(*v, "verify.hasminskii.gamma3");
      if (const auto* v = h->get("gamma4")) ver.hasminskii.gamma4 = rd.number(*v, "verify.hasminskii.gamma4");
    }
    if (const auto* b = rd.table(*t, "verify", "bakry_emery", false)) {
      rd.only_keys(*b, "verify.bakry_emery", {"lambda", "lambda_lower", "lambda_upper", "tolerance"});
      if (const auto* v = b->get("lambda")) ver.bakry_emery.lambda = rd.number(*v, "verify.bakry_emery.lambda");
      if (const auto* v = b->get("lambda_lower")) ver.bakry_emery.lambda_lower = rd.number(*v, "verify.bakry_emery.lambda_lower");
      if (const auto* v = b->get("lambda_upper")) ver.bakry_emery.lambda_upper = rd.number(*v, "verify.bakry_emery.lambda_upper");
      if (const auto* v = b->get("tolerance")) ver.bakry_emery.tolerance = rd.number(*v, "verify.bakry_emery.tolerance");
    }
    if (const auto* c = rd.table(*t, "verify", "conservation", false)) {
      rd.only_keys(*c, "verify.conservation", {"samples"});
      if (const auto* v = c->get("samples")) ver.conservation_samples = rd.integer(*v, "verify.conservation.samples");
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open configuration file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

}  // namespace otdp
