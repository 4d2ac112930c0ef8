#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "otdp/analysis.hpp"
#include "otdp/operators.hpp"
#include "otdp/problem.hpp"
#include "otdp/sde.hpp"

namespace otdp {

enum class SolveMode { Ergodic, Finite };

struct SolverSettings {
  std::vector<int> grid;  // nodes per axis
  double h = 0.05;
  double tol = 1e-6;
  double offset_tol = 1e-8;
  long max_iter = 200000;
  SolveMode mode = SolveMode::Ergodic;
  long horizon = 100;     // steps in finite mode
  AssemblyOptions flux;
  bool enforce_positivity = true;
  long anchor = -1;       // negative: center node
  int threads = 1;
};

struct SimulationSettings {
  SimConfig sim;
  std::vector<std::vector<double>> initial_points;  // noiseless runs; empty: default ring
  double deterministic_T = 100.0;
  double deterministic_dt = 0.01;
};

struct VerifySettings {
  LyapunovGammas hasminskii;
  BakryEmeryOptions bakry_emery;
  long conservation_samples = 1000;
};

struct RunConfig {
  ProblemSpec problem;
  SolverSettings solver;
  SimulationSettings simulation;
  VerifySettings verify;
};

/// Parses a TOML problem description. Unknown keys, missing required keys,
/// type mismatches, expression errors and invalid problem data are all
/// reported as ConfigError.
RunConfig parse_config(std::string_view text, std::string_view origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);

}  // namespace otdp
