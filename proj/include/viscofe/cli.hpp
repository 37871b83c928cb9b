#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "viscofe/errors.hpp"
#include "viscofe/material.hpp"

// Run configuration for the command-line front end.
//
//   command = matpoint
//   [material]
//   preset = vhb4910        # optional; listed keys override it
//   kappa = 146200
//   [loading]
//   knots = 0 1, 40 3, 80 1 # time and stretch pairs
//   [numeric]
//   safety = 0.01
//   [output]
//   interval = 1
//
// One assignment per line, '#' starts a comment, unknown keys are errors.

namespace viscofe::cli {

enum class Command { Matpoint, ShellExact, PatchTest, ShellFem, Convergence };

std::string_view to_string(Command c);
/// Throws Parse for an unknown name.
Command command_from_string(std::string_view name);

struct LoadingBlock {
  /// matpoint only: uniaxial-stress (lateral faces free) or isochoric (prescribed F).
  std::string control = "uniaxial-stress";
  /// (t, stretch) pairs starting at t = 0. The stretch is F33 for the cube and
  /// the material point, b / B for the shell.
  std::vector<std::pair<double, double>> knots;
  double A = 0.9;  // m
  double B = 1.0;  // m

  double end_time() const { return knots.back().first; }
  friend bool operator==(const LoadingBlock&, const LoadingBlock&) = default;
};

struct NumericBlock {
  double tol1 = 1e-8;
  double tol2 = 1e-9;
  double safety = 1.0;
  double dt_max = std::numeric_limits<double>::infinity();
  bool adaptive = true;
  int max_staggered = 100;
  int max_halvings = 10;
  int n_gauss = 100;
  /// Step safety of the exact solution used as the reference by convergence.
  double exact_safety = 0.01;
  // Cube mesh for patch-test.
  int cube_n = 1;
  double distortion = 0.0;
  int seed = 1;
  // Shell mesh for shell-fem, and the levels for convergence.
  int nr = 2;
  int ntheta = 4;
  std::vector<std::pair<int, int>> levels{{1, 2}, {2, 4}, {2, 8}};

  friend bool operator==(const NumericBlock&, const NumericBlock&) = default;
};

struct OutputBlock {
  std::string dir = ".";
  /// Sampling interval, s. 0 records every accepted step (matpoint and
  /// shell-exact) or only the end time (finite-element commands).
  double interval = 1.0;

  friend bool operator==(const OutputBlock&, const OutputBlock&) = default;
};

struct RunConfig {
  Command command = Command::Matpoint;
  MaterialParams material;
  LoadingBlock loading;
  NumericBlock numeric;
  OutputBlock output;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Strict parser; errors are ErrorKind::Parse with the offending line number.
RunConfig parse_config(std::string_view text);
/// Complete config text with every value in effect; parse_config reads it back
/// to an identical RunConfig.
std::string serialize_config(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);

struct RunOptions {
  int threads = 1;
  /// Overrides output.dir when non-empty.
  std::filesystem::path out_dir;
};

/// Runs the command, writes its CSV and manifest.json, and returns the paths written.
std::vector<std::filesystem::path> run(const RunConfig& cfg, const RunOptions& opt = {});

/// 0 never; 2 non-convergence, 3 step-size exhaustion, 4 I/O, 1 otherwise.
int exit_code(ErrorKind kind);

/// Fixed CSV headers.
inline constexpr std::string_view kMatpointHeader = "t,F33,lambda_lat,q,S33,T33,dissipation";
inline constexpr std::string_view kShellHeader = "t,b,P";
inline constexpr std::string_view kConvergenceHeader = "level,h,n_dof,eps_P,wall_s";

}  // namespace viscofe::cli
