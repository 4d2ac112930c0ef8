#include "otdp_cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "otdp/analysis.hpp"
#include "otdp/error.hpp"
#include "otdp/grid_field.hpp"
#include "otdp/sde.hpp"
#include "otdp_cli/pipeline.hpp"

namespace otdp::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

fs::path resolve_config(const fs::path& path) {
  if (fs::exists(path)) return path;
  fs::path with = path;
  with += ".toml";
  if (fs::exists(with)) return with;
  return path;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Maps library exceptions onto the exit-code contract.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const MissingData& e) {
    err << "missing data: " << e.what() << '\n';
    return kConfigError;
  } catch (const InvalidGrid& e) {
    err << "invalid grid: " << e.what() << '\n';
    return kConfigError;
  } catch (const StepTooLarge& e) {
    err << "solver error: " << e.what() << '\n';
    return kSolverError;
  } catch (const NoConvergence& e) {
    err << "solver error: " << e.what() << '\n';
    return kSolverError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kSolverError;
  }
}

RunConfig load_with_overrides(const fs::path& config, const std::vector<int>& grid) {
  const fs::path path = resolve_config(config);
  if (!fs::exists(path)) throw ConfigError(config.string() + ": no such file");
  RunConfig cfg = load_config(path);
  if (!grid.empty()) {
    if (grid.size() == 1)
      cfg.solver.grid.assign(static_cast<std::size_t>(cfg.problem.nx), grid[0]);
    else if (grid.size() == static_cast<std::size_t>(cfg.problem.nx))
      cfg.solver.grid = grid;
    else
      throw ConfigError("--grid needs one value or one per state dimension");
    for (int c : cfg.solver.grid)
      if (c < 3) throw ConfigError("--grid needs at least 3 nodes per axis");
  }
  return cfg;
}

json box_json(const Box& b) {
  json lo = json::array(), hi = json::array();
  for (const auto& iv : b) {
    lo.push_back(iv.lo);
    hi.push_back(iv.hi);
  }
  return {{"lower", lo}, {"upper", hi}};
}

json file_entry(const fs::path& dir, const std::string& name) {
  const fs::path p = dir / name;
  return {{"file", name}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p)}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::vector<std::string> input_columns(int nu, const char* prefix) {
  std::vector<std::string> c;
  for (int j = 0; j < nu; ++j) c.push_back(std::string(prefix) + std::to_string(j + 1));
  return c;
}

void write_convergence(const fs::path& path, const std::vector<ConvergenceRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "iteration,residual,ell\n";
  for (const auto& r : trace)
    out << r.iteration << ',' << (std::isnan(r.residual) ? std::string("nan") : num(r.residual)) << ','
        << num(r.ell) << '\n';
}

void write_energy(const fs::path& path, const EnergyTrace& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "t,E\n";
  for (const auto& s : trace) out << num(s.t) << ',' << num(s.E) << '\n';
}

json settings_json(const Pipeline& pl, const fs::path& config) {
  const auto& s = pl.cfg.solver;
  const Grid& g = *pl.grid;
  json counts = json::array();
  json spacing = json::array();
  for (int a = 0; a < g.dim(); ++a) {
    counts.push_back(g.count(a));
    spacing.push_back(g.spacing(a));
  }
  return {
      {"config", config.string()},
      {"config_sha256", sha256_file(config)},
      {"problem", pl.cfg.problem.name},
      {"representation", pl.sys().representation},
      {"grid", {{"counts", counts}, {"nodes", g.size()}, {"spacing", spacing}, {"domain", box_json(g.box())}}},
      {"solver",
       {{"mode", s.mode == SolveMode::Ergodic ? "ergodic" : "finite"},
        {"h", s.h},
        {"h_effective", pl.sys().h},
        {"substeps", pl.stepped.substeps},
        {"h_max_positive", pl.stepped.h_max},
        {"drift_flux", std::string(to_string(s.flux.drift))},
        {"control_flux", std::string(to_string(s.flux.control))},
        {"enforce_positivity", s.enforce_positivity},
        {"tol", s.tol},
        {"offset_tol", s.offset_tol},
        {"max_iter", s.max_iter},
        {"horizon", s.horizon},
        {"anchor", s.anchor >= 0 ? static_cast<Index>(s.anchor) : g.center_node()},
        {"anchor_x", g.node(s.anchor >= 0 ? static_cast<Index>(s.anchor) : g.center_node())},
        {"threads", s.threads}}},
      {"simulation_defaults",
       {{"burn_in", pl.cfg.simulation.sim.burn_in},
        {"trajectories", pl.cfg.simulation.sim.trajectories},
        {"dt", pl.cfg.simulation.sim.dt},
        {"T", pl.cfg.simulation.sim.T},
        {"seed", pl.cfg.simulation.sim.seed}}},
  };
}

void say(bool quiet, std::ostream& out, const std::string& line) {
  if (!quiet) out << line << std::flush;
}

// Energy trace from the closed-loop steady state perturbed along the slowest
// symmetrized mode, scaled to keep the masses positive.
EnergyTrace energy_trace(const Pipeline& pl, const Eigen::MatrixXd& fb, const Vector& p_inf, double T,
                         double* uniform_gamma) {
  const UniformRate ur = uniform_decay_rate(pl.sys(), fb, p_inf);
  if (uniform_gamma) *uniform_gamma = ur.gamma;
  double c = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < p_inf.size(); ++i)
    if (ur.direction[i] != 0.0) c = std::min(c, p_inf[i] / std::abs(ur.direction[i]));
  DensityState p0{p_inf + 0.5 * c * ur.direction, 0.0};
  p0.p /= p0.p.sum();
  const long steps = std::max<long>(1, std::lround(T / pl.sys().h));
  return propagate(pl.sys(), fb, p0, p_inf, steps).trace;
}

}  // namespace

int cmd_solve(const SolveOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const auto t_total = Clock::now();
    auto t0 = Clock::now();
    RunConfig cfg = load_with_overrides(opt.config, opt.grid);
    if (opt.h) cfg.solver.h = *opt.h;
    if (opt.tol) cfg.solver.tol = *opt.tol;
    if (opt.max_iter) cfg.solver.max_iter = *opt.max_iter;
    if (opt.horizon) cfg.solver.horizon = *opt.horizon;
    if (opt.mode) {
      if (*opt.mode == "ergodic") cfg.solver.mode = SolveMode::Ergodic;
      else if (*opt.mode == "finite") cfg.solver.mode = SolveMode::Finite;
      else throw ConfigError("--mode must be 'ergodic' or 'finite'");
    }
    if (opt.drift_flux) cfg.solver.flux.drift = parse_drift_flux(*opt.drift_flux);
    if (opt.control_flux) cfg.solver.flux.control = parse_control_flux(*opt.control_flux);
    cfg.solver.threads = opt.threads;
    if (!(cfg.solver.h > 0.0) || !(cfg.solver.tol > 0.0) || cfg.solver.max_iter < 1 || cfg.solver.horizon < 1)
      throw ConfigError("h, tol, max-iter and horizon must be positive");
    const double t_config = seconds_since(t0);
    const fs::path config_path = resolve_config(opt.config);

    const Pipeline pl = build_pipeline(cfg);
    const Grid& g = *pl.grid;
    const int nu = cfg.problem.nu;
    fs::create_directories(opt.out);

    json manifest = settings_json(pl, config_path);
    json timings = {{"config", t_config}, {"assemble", pl.assemble_seconds}, {"discretize", pl.discretize_seconds}};
    json results;
    std::vector<std::string> files;

    {
      std::ostringstream s;
      s << "problem " << cfg.problem.name << ", " << g.size() << " nodes, h = " << cfg.solver.h << " ("
        << pl.stepped.substeps << " substeps of " << pl.sys().h << ")\n";
      say(opt.quiet, out, s.str());
    }

    if (cfg.solver.mode == SolveMode::Ergodic) {
      const ErgodicRun run = run_ergodic(pl, ergodic_options(pl));
      const auto& sol = run.sol;
      const Vector& p = run.steady.p;
      t0 = Clock::now();
      const double primal = primal_cost(g, *pl.dual, sol.mu_inf, p);
      const DualityReport dr = duality_report(sol.ell_inf, primal);
      const double t_check = seconds_since(t0);

      t0 = Clock::now();
      write_grid_field(opt.out / "mu_inf.csv", "mu_inf", g, input_columns(nu, "u"), sol.mu_inf);
      Eigen::MatrixXd v(g.size(), 2);
      v.col(0) = sol.V_inf;
      v.col(1) = centered_value(sol, p);
      write_grid_field(opt.out / "v_inf.csv", "v_inf", g, {"V", "V_centered"}, v);
      Eigen::MatrixXd rho(g.size(), 2);
      rho.col(0) = p.cwiseQuotient(g.weights());
      rho.col(1) = p;
      write_grid_field(opt.out / "rho_inf.csv", "rho_inf", g, {"density", "mass"}, rho);
      write_convergence(opt.out / "convergence.csv", sol.trace);
      files = {"mu_inf.csv", "v_inf.csv", "rho_inf.csv", "convergence.csv"};
      double t_energy = 0.0;
      if (opt.energy_T > 0.0) {
        const auto te = Clock::now();
        double gamma_u = 0.0;
        const EnergyTrace tr = energy_trace(pl, sol.mu_inf, p, opt.energy_T, &gamma_u);
        write_energy(opt.out / "energy.csv", tr);
        files.push_back("energy.csv");
        results["uniform_decay_rate"] = gamma_u;
        results["envelope_decay_rate"] = envelope_decay_rate(tr);
        t_energy = seconds_since(te);
      }
      const double t_write = seconds_since(t0) - t_energy;

      results["ell_inf"] = sol.ell_inf;
      results["iterations"] = sol.iterations;
      results["residual"] = sol.residual;
      results["primal_cost"] = primal;
      results["relative_duality_gap"] = dr.relative_gap;
      timings["solve"] = run.solve_seconds;
      timings["steady_state"] = run.steady_seconds;
      timings["checks"] = t_check;
      if (opt.energy_T > 0.0) timings["energy"] = t_energy;
      timings["write"] = t_write;

      std::ostringstream s;
      s << std::setprecision(6) << "ell_inf = " << sol.ell_inf << " (" << sol.iterations
        << " iterations, feedback change " << sol.residual << ")\n"
        << "primal cost = " << primal << " (relative gap " << dr.relative_gap << ")\n";
      if (opt.energy_T > 0.0)
        s << "uniform decay rate = " << results["uniform_decay_rate"].get<double>() << ", envelope rate = "
          << results["envelope_decay_rate"].get<double>() << '\n';
      say(opt.quiet, out, s.str());
    } else {
      t0 = Clock::now();
      const FiniteHorizonSolution fh = solve_finite_horizon(pl.sys(), *pl.dual, cfg.solver.horizon, false);
      const double t_solve = seconds_since(t0);
      t0 = Clock::now();
      write_grid_field(opt.out / "mu_0.csv", "mu_0", g, input_columns(nu, "u"), fh.feedback.front());
      write_grid_field(opt.out / "v_0.csv", "v_0", g, {"y"}, fh.y0);
      files = {"mu_0.csv", "v_0.csv"};
      const double t_write = seconds_since(t0);
      // Cost of the uniform initial density over the horizon.
      const Vector p0 = g.weights() / g.weights().sum();
      const Vector Ep0 = pl.sys().E * p0;
      const double J = fh.y0.dot(Ep0);
      const double T = static_cast<double>(cfg.solver.horizon) * cfg.solver.h;
      results["horizon_time"] = T;
      results["cost_uniform_start"] = J;
      results["cost_per_time"] = J / T;
      timings["solve"] = t_solve;
      timings["write"] = t_write;
      std::ostringstream s;
      s << std::setprecision(6) << "J(T = " << T << ", uniform) = " << J << " (per unit time " << J / T << ")\n";
      say(opt.quiet, out, s.str());
    }

    timings["total"] = seconds_since(t_total);
    manifest["results"] = results;
    manifest["timings_seconds"] = timings;
    json outputs = json::array();
    for (const auto& f : files) outputs.push_back(file_entry(opt.out, f));
    manifest["outputs"] = outputs;
    write_json(opt.out / "manifest.json", manifest);

    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << "timings [s]:";
    for (auto it = timings.begin(); it != timings.end(); ++it) s << ' ' << it.key() << ' ' << it.value().get<double>();
    s << '\n' << "wrote " << (opt.out / "manifest.json").string() << '\n';
    say(opt.quiet, out, s.str());
    return kOk;
  });
}

namespace {

// Header comparison between a feedback file and the configured grid.
std::optional<std::string> grid_mismatch(const GridFieldFile& f, const RunConfig& cfg) {
  const auto& P = cfg.problem;
  if (f.box.size() != static_cast<std::size_t>(P.nx)) return "dimension differs from the problem";
  for (std::size_t a = 0; a < f.box.size(); ++a) {
    const double tol = 1e-9 * std::max(1.0, P.Omega[a].width());
    if (std::abs(f.box[a].lo - P.Omega[a].lo) > tol || std::abs(f.box[a].hi - P.Omega[a].hi) > tol)
      return "domain bounds differ on axis " + std::to_string(a + 1);
  }
  if (f.counts != cfg.solver.grid) return "node counts differ from the configured grid";
  if (f.columns.size() != static_cast<std::size_t>(P.nu)) return "number of feedback columns differs from nu";
  return std::nullopt;
}

GridFieldFile load_feedback(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError(path.string() + ": no such file");
  return read_grid_field(path);
}

}  // namespace

int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    RunConfig cfg = load_with_overrides(opt.config, opt.grid);
    const GridFieldFile fb = load_feedback(opt.feedback);
    if (auto why = grid_mismatch(fb, cfg)) {
      err << "incompatible feedback file " << opt.feedback.string() << ": " << *why << '\n';
      return kIncompatible;
    }
    const Grid g = fb.grid();
    SimConfig sc = cfg.simulation.sim;
    if (opt.trajectories) sc.trajectories = *opt.trajectories;
    if (opt.T) sc.T = *opt.T;
    if (opt.dt) sc.dt = *opt.dt;
    if (opt.seed) sc.seed = static_cast<std::uint64_t>(*opt.seed);
    if (opt.burn_in) sc.burn_in = *opt.burn_in;
    if (opt.path_stride) sc.path_stride = *opt.path_stride;
    sc.threads = std::max(1, opt.threads);
    if (!(sc.dt > 0.0) || !(sc.T > 0.0) || sc.trajectories < 1 || !(sc.burn_in >= 0.0 && sc.burn_in < 1.0))
      throw ConfigError("simulation needs dt > 0, T > 0, trajectories >= 1 and burn-in in [0, 1)");
    fs::create_directories(opt.out);
    const int nx = cfg.problem.nx;
    auto coord_header = [&] {
      std::string h;
      for (int a = 0; a < nx; ++a) h += ",x" + std::to_string(a + 1);
      return h;
    };

    if (opt.deterministic) {
      const auto& pts = cfg.simulation.initial_points.empty() ? default_initial_points(cfg.problem.Omega)
                                                              : cfg.simulation.initial_points;
      const double T = opt.T ? *opt.T : cfg.simulation.deterministic_T;
      const double dt = opt.dt ? *opt.dt : cfg.simulation.deterministic_dt;
      const auto paths = simulate_deterministic(cfg.problem, g, fb.values, pts, T, dt, sc.path_stride);
      std::ofstream f(opt.out / "paths_deterministic.csv");
      f << "path,t" << coord_header() << '\n';
      for (std::size_t k = 0; k < paths.size(); ++k)
        for (std::size_t s = 0; s < paths[k].t.size(); ++s) {
          f << k << ',' << num(paths[k].t[s]);
          for (double v : paths[k].x[s]) f << ',' << num(v);
          f << '\n';
        }
      f.close();
      say(opt.quiet, out,
          std::to_string(paths.size()) + " noiseless paths written to " +
              (opt.out / "paths_deterministic.csv").string() + '\n');
      return kOk;
    }

    const auto t0 = Clock::now();
    const SimResult res = simulate(cfg.problem, g, fb.values, sc);
    const double elapsed = seconds_since(t0);
    {
      std::ofstream f(opt.out / "paths.csv");
      f << "trajectory,t" << coord_header() << '\n';
      for (const auto& s : res.paths) {
        f << s.trajectory << ',' << num(s.t);
        for (double v : s.x) f << ',' << num(v);
        f << '\n';
      }
    }
    json x0 = json::array();
    if (sc.x0) {
      for (double v : *sc.x0) x0.push_back(v);
    } else {
      for (const auto& iv : cfg.problem.Omega) x0.push_back(0.5 * (iv.lo + iv.hi));
    }
    json summary = {
        {"problem", cfg.problem.name},
        {"feedback", opt.feedback.string()},
        {"feedback_sha256", sha256_file(opt.feedback)},
        {"trajectories", sc.trajectories},
        {"T", sc.T},
        {"dt", sc.dt},
        {"seed", sc.seed},
        {"burn_in", sc.burn_in},
        {"x0", x0},
        {"mean_cost", res.mean},
        {"standard_error", res.standard_error},
        {"trajectory_means", res.trajectory_mean},
    };
    write_json(opt.out / "sim_summary.json", summary);
    std::ostringstream s;
    s << std::setprecision(6) << "time-average cost = " << res.mean << " +/- " << res.standard_error << " (SE, "
      << sc.trajectories << " trajectories, " << std::setprecision(3) << elapsed << " s)\n";
    say(opt.quiet, out, s.str());
    return kOk;
  });
}

int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    RunConfig cfg = load_with_overrides(opt.config, opt.grid);
    const std::string& check = opt.check;
    if (check != "hasminskii" && check != "bakry-emery" && check != "duality" && check != "conservation")
      throw ConfigError("unknown check '" + check + "'");
    if (check == "hasminskii" && !cfg.problem.Q) throw MissingData("the problem defines no Lyapunov function Q");
    if (check == "bakry-emery" && !cfg.problem.P) throw MissingData("the problem defines no weight P");

    const Pipeline pl = build_pipeline(cfg);
    const Grid& g = *pl.grid;
    fs::create_directories(opt.out);
    json report = {{"problem", cfg.problem.name}, {"check", check}};
    bool passed = false;
    std::ostringstream msg;
    msg << std::setprecision(6);

    if (check == "conservation") {
      const ConservationCheck c = check_conservation(pl.sys(), cfg.verify.conservation_samples);
      passed = c.passed;
      report["samples"] = c.samples;
      report["max_identity_residual"] = c.max_identity_residual;
      report["max_mass_drift"] = c.max_mass_drift;
      report["min_component"] = c.min_component;
      msg << "conservation: identity residual " << c.max_identity_residual << ", mass drift " << c.max_mass_drift
          << ", min component " << c.min_component << '\n';
    } else {
      Eigen::MatrixXd table;
      std::optional<ErgodicRun> run;
      if (opt.feedback) {
        const GridFieldFile fb = load_feedback(*opt.feedback);
        if (auto why = grid_mismatch(fb, cfg)) {
          err << "incompatible feedback file " << opt.feedback->string() << ": " << *why << '\n';
          return kIncompatible;
        }
        table = fb.values;
        report["feedback"] = opt.feedback->string();
      }
      if (check == "duality" || !opt.feedback) {
        run = run_ergodic(pl, ergodic_options(pl));
        if (!opt.feedback) table = run->sol.mu_inf;
      }
      const FeedbackFn mu = table_feedback(pl.grid, table);

      if (check == "hasminskii") {
        const LyapunovCheck c = check_hasminskii(cfg.problem, mu, g, cfg.verify.hasminskii);
        passed = c.passed;
        report["gamma"] = {c.gamma1, c.gamma2, c.gamma3, c.gamma4};
        report["min_hessian_eigenvalue"] = c.min_hessian_eigenvalue;
        report["max_hessian_eigenvalue"] = c.max_hessian_eigenvalue;
        report["min_boundary_flux"] = c.min_boundary_flux;
        report["margin"] = c.margin;
        report["margin_x"] = g.node(c.margin_node);
        report["hessian_violations"] = c.hessian_violations.size();
        report["boundary_violations"] = c.boundary_violations.size();
        report["drift_violations"] = c.drift_violations.size();
        msg << "hasminskii: gammas (" << c.gamma1 << ", " << c.gamma2 << ", " << c.gamma3 << ", " << c.gamma4
            << "), margin " << c.margin << ", boundary flux " << c.min_boundary_flux << '\n';
      } else if (check == "bakry-emery") {
        const BakryEmeryCheck c = check_bakry_emery(cfg.problem, mu, *cfg.problem.P, g, cfg.verify.bakry_emery);
        passed = c.passed;
        report["lambda"] = c.lambda;
        report["lambda_lower"] = c.lambda_lower;
        report["lambda_upper"] = c.lambda_upper;
        report["grid_lambda_lower"] = c.grid_lambda_lower;
        report["grid_lambda_upper"] = c.grid_lambda_upper;
        report["min_eigenvalue"] = c.min_eigenvalue;
        report["min_x"] = g.node(c.min_node);
        report["flagged_nodes"] = c.flagged_nodes.size();
        report["gamma"] = c.gamma;
        msg << "bakry-emery: lambda " << c.lambda << ", min block eigenvalue " << c.min_eigenvalue << ", gamma "
            << c.gamma << " (" << c.flagged_nodes.size() << " flagged nodes)\n";
      } else {
        const Vector& p = run->steady.p;
        const double primal = primal_cost(g, *pl.dual, table, p);
        const DualityReport d = duality_report(run->sol.ell_inf, primal);
        passed = d.relative_gap <= opt.gap_tol;
        report["ell_inf"] = d.dual;
        report["primal_cost"] = d.primal;
        report["absolute_gap"] = d.absolute_gap;
        report["relative_gap"] = d.relative_gap;
        report["tolerance"] = opt.gap_tol;
        msg << "duality: ell_inf " << d.dual << ", primal " << d.primal << ", relative gap " << d.relative_gap << '\n';
      }
    }
    report["passed"] = passed;
    std::string file = "verify_" + check + ".json";
    write_json(opt.out / file, report);
    msg << (passed ? "PASS" : "FAIL") << " (report " << (opt.out / file).string() << ")\n";
    say(opt.quiet, out, msg.str());
    return passed ? kOk : kVerificationFailed;
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ergodic optimal control by operator-theoretic dynamic programming on grids"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.set_version_flag("--version", "otdp 0.1.0");

  SolveOptions so;
  std::vector<std::string> mode;
  auto* solve = app.add_subcommand("solve", "Solve the ergodic or finite-horizon problem and write grid fields");
  solve->add_option("config", so.config, "Problem configuration (TOML)")->required();
  solve->add_option("--grid", so.grid, "Nodes per axis (one value for all axes)");
  solve->add_option("--h", so.h, "Time step");
  solve->add_option("--tol", so.tol, "Feedback change tolerance");
  solve->add_option("--max-iter", so.max_iter, "Iteration cap");
  solve->add_option("--mode", mode, "ergodic | finite [N]")->expected(1, 2);
  solve->add_option("--horizon", so.horizon, "Finite-horizon step count");
  solve->add_option("--drift-flux", so.drift_flux, "upwind | fitted");
  solve->add_option("--control-flux", so.control_flux, "upwind | hybrid | central");
  solve->add_option("--energy", so.energy_T, "Also write energy.csv over this time span");
  solve->add_option("--out", so.out, "Output directory");
  solve->add_option("--threads", so.threads, "Worker cap");
  solve->add_flag("--quiet", so.quiet);

  SimulateOptions sm;
  long traj = 0;
  auto* sim = app.add_subcommand("simulate", "Closed-loop Monte Carlo or noiseless simulation");
  sim->add_option("config", sm.config, "Problem configuration (TOML)")->required();
  sim->add_option("--feedback", sm.feedback, "Feedback grid field (mu_inf.csv)")->required();
  sim->add_option("--grid", sm.grid, "Nodes per axis of the feedback grid");
  auto* traj_opt = sim->add_option("--traj", traj, "Trajectories");
  sim->add_option("--T", sm.T, "Time horizon");
  sim->add_option("--dt", sm.dt, "Time step");
  sim->add_option("--seed", sm.seed, "RNG seed");
  sim->add_option("--burn-in", sm.burn_in, "Discarded fraction of T");
  sim->add_option("--path-stride", sm.path_stride, "Time between recorded path samples");
  sim->add_flag("--deterministic", sm.deterministic, "Noiseless rollouts from the initial points");
  sim->add_option("--out", sm.out, "Output directory");
  sim->add_option("--threads", sm.threads, "Worker cap");
  sim->add_flag("--quiet", sm.quiet);

  VerifyOptions vo;
  auto* ver = app.add_subcommand("verify", "Check assumptions and invariants");
  ver->add_option("config", vo.config, "Problem configuration (TOML)")->required();
  ver->add_option("--check", vo.check, "hasminskii | bakry-emery | duality | conservation")
      ->required()
      ->check(CLI::IsMember({"hasminskii", "bakry-emery", "duality", "conservation"}));
  ver->add_option("--feedback", vo.feedback, "Feedback grid field; solved when omitted");
  ver->add_option("--grid", vo.grid, "Nodes per axis");
  ver->add_option("--gap-tol", vo.gap_tol, "Relative duality gap tolerance");
  ver->add_option("--out", vo.out, "Output directory");
  ver->add_option("--threads", vo.threads, "Worker cap");
  ver->add_flag("--quiet", vo.quiet);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  if (solve->parsed()) {
    if (!mode.empty()) {
      so.mode = mode[0];
      if (mode.size() == 2) {
        try {
          so.horizon = std::stol(mode[1]);
        } catch (const std::exception&) {
          err << "config error: --mode finite expects an integer step count\n";
          return kConfigError;
        }
      }
    }
    return cmd_solve(so, out, err);
  }
  if (sim->parsed()) {
    if (*traj_opt) sm.trajectories = static_cast<int>(traj);
    return cmd_simulate(sm, out, err);
  }
  return cmd_verify(vo, out, err);
}

}  // namespace otdp::cli
