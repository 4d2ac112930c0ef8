#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "otdp/grid_field.hpp"
#include "otdp_cli/commands.hpp"

namespace fs = std::filesystem;
using otdp::cli::run;

namespace {

const fs::path kConfigs = fs::path(OTDP_SOURCE_DIR) / "configs";

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "otdp_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "otdp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string cfg(const char* name) { return (kConfigs / name).string(); }

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST(Cli, MissingConfigIsConfigError) {
  const fs::path d = fresh_dir("missing");
  const Result r = call({"solve", (d / "nope.toml").string(), "--out", d.string(), "--quiet"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nope.toml"), std::string::npos);
}

TEST(Cli, UnknownOptionIsConfigError) {
  EXPECT_EQ(call({"solve", cfg("double_well_1d.toml"), "--bogus"}).code, 1);
  EXPECT_EQ(call({}).code, 1);
}

TEST(Cli, InvalidConfigReportsKey) {
  const fs::path d = fresh_dir("invalid");
  std::ifstream in(kConfigs / "double_well_1d.toml");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  text.replace(text.find("epsilon = 1.0"), 13, "epsilon = -1.0");
  std::ofstream(d / "bad.toml") << text;
  const Result r = call({"solve", (d / "bad.toml").string(), "--out", d.string(), "--quiet"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("epsilon"), std::string::npos);
}

TEST(Cli, SolveWritesFieldsAndManifest) {
  const fs::path d = fresh_dir("solve");
  const Result r = call({"solve", cfg("double_well_1d"), "--out", d.string(), "--quiet"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"mu_inf.csv", "v_inf.csv", "rho_inf.csv", "convergence.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(d / f)) << f;
  const otdp::GridFieldFile rho = otdp::read_grid_field(d / "rho_inf.csv");
  ASSERT_EQ(rho.counts, std::vector<int>{201});
  EXPECT_EQ(rho.columns, (std::vector<std::string>{"density", "mass"}));
  EXPECT_NEAR(rho.values.col(1).sum(), 1.0, 1e-12);
  // Closed-form steady density of the double well.
  const otdp::Grid g = rho.grid();
  Eigen::VectorXd exact(201);
  for (otdp::Index i = 0; i < 201; ++i) {
    const double x = g.coord(i, 0);
    exact[i] = g.weights()[i] * std::exp((x * x - x * x * x * x) / 4.0);
  }
  exact /= exact.sum();
  EXPECT_LE((rho.values.col(1) - exact).cwiseAbs().sum(), 0.02);

  const nlohmann::json m = read_json(d / "manifest.json");
  EXPECT_EQ(m["grid"]["counts"], nlohmann::json::array({201}));
  EXPECT_EQ(m["solver"]["drift_flux"], "upwind");
  EXPECT_EQ(m["outputs"].size(), 4u);
  for (const auto& o : m["outputs"])
    EXPECT_EQ(o["sha256"], otdp::cli::sha256_file(d / o["file"].get<std::string>()));
}

TEST(Cli, SolveIsReproducible) {
  const fs::path a = fresh_dir("repro_a"), b = fresh_dir("repro_b");
  ASSERT_EQ(call({"solve", cfg("case_study_2d.toml"), "--grid", "16", "--out", a.string(), "--quiet"}).code, 0);
  ASSERT_EQ(call({"solve", cfg("case_study_2d.toml"), "--grid", "16", "--out", b.string(), "--quiet"}).code, 0);
  for (const char* f : {"mu_inf.csv", "v_inf.csv", "rho_inf.csv", "convergence.csv"})
    EXPECT_EQ(otdp::cli::sha256_file(a / f), otdp::cli::sha256_file(b / f)) << f;
}

TEST(Cli, FiniteHorizonMode) {
  const fs::path d = fresh_dir("finite");
  const Result r = call({"solve", cfg("lqg_1d.toml"), "--grid", "41", "--mode", "finite", "20", "--out", d.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(d / "mu_0.csv"));
  EXPECT_TRUE(fs::exists(d / "v_0.csv"));
  EXPECT_FALSE(fs::exists(d / "mu_inf.csv"));
}

TEST(Cli, SimulateIsSeedDeterministic) {
  const fs::path d = fresh_dir("simulate");
  ASSERT_EQ(call({"solve", cfg("case_study_2d.toml"), "--grid", "16", "--out", d.string(), "--quiet"}).code, 0);
  const std::vector<std::string> sim{"simulate", cfg("case_study_2d.toml"), "--feedback", (d / "mu_inf.csv").string(),
                                     "--grid",   "16", "--traj", "4", "--T", "20", "--path-stride", "1", "--quiet"};
  auto with_out = [&](const fs::path& o, std::vector<std::string> extra = {}) {
    auto args = sim;
    args.push_back("--out");
    args.push_back(o.string());
    args.insert(args.end(), extra.begin(), extra.end());
    return call(args);
  };
  const fs::path a = fresh_dir("sim_a"), b = fresh_dir("sim_b"), c = fresh_dir("sim_c");
  ASSERT_EQ(with_out(a).code, 0);
  ASSERT_EQ(with_out(b, {"--threads", "3"}).code, 0);
  EXPECT_EQ(otdp::cli::sha256_file(a / "paths.csv"), otdp::cli::sha256_file(b / "paths.csv"));
  const nlohmann::json sa = read_json(a / "sim_summary.json"), sb = read_json(b / "sim_summary.json");
  EXPECT_EQ(sa["mean_cost"], sb["mean_cost"]);
  ASSERT_EQ(with_out(c, {"--seed", "99"}).code, 0);
  EXPECT_NE(read_json(c / "sim_summary.json")["mean_cost"], sa["mean_cost"]);
}

TEST(Cli, DeterministicRollouts) {
  const fs::path d = fresh_dir("deterministic");
  ASSERT_EQ(call({"solve", cfg("case_study_2d.toml"), "--grid", "16", "--out", d.string(), "--quiet"}).code, 0);
  const Result r = call({"simulate", cfg("case_study_2d.toml"), "--feedback", (d / "mu_inf.csv").string(), "--grid",
                         "16", "--deterministic", "--T", "5", "--out", d.string(), "--quiet"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(d / "paths_deterministic.csv"));
  EXPECT_FALSE(fs::exists(d / "paths.csv"));
}

TEST(Cli, FeedbackGridMismatchIsIncompatible) {
  const fs::path d = fresh_dir("mismatch");
  ASSERT_EQ(call({"solve", cfg("case_study_2d.toml"), "--grid", "16", "--out", d.string(), "--quiet"}).code, 0);
  const Result r = call({"simulate", cfg("case_study_2d.toml"), "--feedback", (d / "mu_inf.csv").string(), "--grid",
                         "20", "--traj", "2", "--T", "1", "--out", d.string(), "--quiet"});
  EXPECT_EQ(r.code, 3);
  const Result wrong_problem = call({"simulate", cfg("double_well_1d.toml"), "--feedback",
                                     (d / "mu_inf.csv").string(), "--out", d.string(), "--quiet"});
  EXPECT_EQ(wrong_problem.code, 3);
}

TEST(Cli, VerifyExitCodes) {
  const fs::path d = fresh_dir("verify");
  EXPECT_EQ(call({"verify", cfg("double_well_1d.toml"), "--check", "bakry-emery", "--out", d.string(), "--quiet"}).code, 0);
  const nlohmann::json be = read_json(d / "verify_bakry-emery.json");
  EXPECT_EQ(be["gamma"], 0.05);
  EXPECT_EQ(call({"verify", cfg("cubic_uncontrolled_1d.toml"), "--check", "hasminskii", "--out", d.string(), "--quiet"}).code, 0);
  // No Lyapunov function configured.
  EXPECT_EQ(call({"verify", cfg("double_well_1d.toml"), "--check", "hasminskii", "--out", d.string(), "--quiet"}).code, 1);
  EXPECT_EQ(call({"verify", cfg("lqg_1d.toml"), "--check", "bakry-emery", "--out", d.string(), "--quiet"}).code, 1);
  EXPECT_EQ(call({"verify", cfg("case_study_2d.toml"), "--check", "conservation", "--grid", "12", "--out", d.string(), "--quiet"}).code, 0);
  EXPECT_EQ(call({"verify", cfg("double_well_1d.toml"), "--check", "duality", "--out", d.string(), "--quiet"}).code, 0);
}

TEST(Cli, VerifyFailureExitCode) {
  const fs::path d = fresh_dir("verify_fail");
  std::ifstream in(kConfigs / "cubic_uncontrolled_1d.toml");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  text.replace(text.find("gamma4 = 0.25"), 13, "gamma4 = 5.0");
  std::ofstream(d / "cubic.toml") << text;
  const Result r = call({"verify", (d / "cubic.toml").string(), "--check", "hasminskii", "--out", d.string(), "--quiet"});
  EXPECT_EQ(r.code, 4);
  EXPECT_FALSE(read_json(d / "verify_hasminskii.json")["passed"].get<bool>());
}
