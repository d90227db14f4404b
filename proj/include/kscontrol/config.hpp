#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kscontrol/pde.hpp"
#include "kscontrol/weights.hpp"

namespace ksc {

/// mean + amp cos(mode pi (x - x_lo) / L).
struct CosineProfile {
  double mean = 0.0;
  double amp = 0.0;
  int mode = 1;

  std::vector<double> sample(const Grid& grid) const;
  bool operator==(const CosineProfile&) const = default;
};

/// Everything a ksctl run depends on. Defaults are the desk-scale instance.
struct RunConfig {
  DomainSpec domain;
  std::size_t n = 128;
  std::size_t m = 256;
  Physics physics;

  WeightMode weight_mode = WeightMode::practice;
  std::optional<double> lambda;  // "auto" when empty
  std::optional<double> s;
  double c_lambda = 1.0;
  double c_s = 1.0;
  double exponent_budget = 1.0;
  /// Experimental: exponent c of e^{c s alpha} in the control weight.
  double control_exponent = 1.5;

  double epsilon = 1e-6;
  double cg_tol = 1e-10;
  std::size_t cg_max_iter = 500;
  bool jacobi = false;
  std::size_t stagnation_window = 50;

  double fp_tol = 1e-8;
  std::size_t fp_max_outer = 50;
  double c0 = 1.0;
  double c1 = 1.0;

  std::vector<double> epsilons{1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
  std::size_t samples = 100;
  std::uint64_t seed = 1;

  // control-linear, decay-study and the inequality checks use a = a_const, B = b_const.
  double a_const = 0.5;
  double b_const = 0.2;
  CosineProfile y0{0.5, 1.0, 1};
  CosineProfile z0{0.2, 0.4, 2};

  // simulate runs from (u0, v0); control-nonlinear uses them as the target's
  // initial data and starts from u0 + perturbation bump_u, v0 + perturbation bump_v.
  CosineProfile u0{1.0, 0.0, 1};
  CosineProfile v0{1.0, 0.0, 1};
  double perturbation = 1e-2;
  double blowup_guard = 1e8;
  bool verbose = false;

  std::string output_dir = "out";

  bool operator==(const RunConfig&) const = default;
};

/// Parses flat `key = value` lines; `#` starts a comment. Absent keys keep
/// their defaults. `overrides` are further `key=value` assignments applied
/// after the text (reported as line 0). Unknown or repeated keys, malformed
/// values and range violations throw ParseError.
RunConfig parse_config(std::string_view text, const std::vector<std::string>& overrides = {});

/// Every key in a fixed order, doubles with 17 significant digits.
std::string serialize(const RunConfig& cfg);

/// Names of all accepted keys, in serialization order.
std::vector<std::string> config_keys();

}  // namespace ksc
