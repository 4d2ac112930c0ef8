#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace otdp::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kSolverError = 2,
  kIncompatible = 3,
  kVerificationFailed = 4,
};

struct SolveOptions {
  std::filesystem::path config;
  std::filesystem::path out = "out";
  std::vector<int> grid;  // empty: from config; one entry: all axes
  std::optional<double> h;
  std::optional<double> tol;
  std::optional<long> max_iter;
  std::optional<std::string> mode;  // "ergodic" | "finite"
  std::optional<long> horizon;
  std::optional<std::string> drift_flux;
  std::optional<std::string> control_flux;
  double energy_T = 0.0;  // > 0: also write energy.csv over this time span
  int threads = 1;
  bool quiet = false;
};

struct SimulateOptions {
  std::filesystem::path config;
  std::filesystem::path feedback;
  std::filesystem::path out = "out";
  std::vector<int> grid;
  std::optional<int> trajectories;
  std::optional<double> T;
  std::optional<double> dt;
  std::optional<long> seed;
  std::optional<double> burn_in;
  std::optional<double> path_stride;
  bool deterministic = false;
  int threads = 1;
  bool quiet = false;
};

struct VerifyOptions {
  std::filesystem::path config;
  std::string check;  // hasminskii | bakry-emery | duality | conservation
  std::optional<std::filesystem::path> feedback;
  std::filesystem::path out = "out";
  std::vector<int> grid;
  double gap_tol = 1e-2;  // duality: relative
  int threads = 1;
  bool quiet = false;
};

int cmd_solve(const SolveOptions& opt, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err);

/// Full command line (argv[0] is the program name).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

/// `path` itself, or `path` with ".toml" appended when only that exists.
std::filesystem::path resolve_config(const std::filesystem::path& path);

}  // namespace otdp::cli
