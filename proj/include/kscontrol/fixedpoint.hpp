#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kscontrol/grid.hpp"
#include "kscontrol/hum.hpp"
#include "kscontrol/pde.hpp"

namespace ksc {

/// Free trajectory (ubar, vbar) of the nonlinear system with its drift field.
struct TrajectoryTarget {
  SpaceTimeField ubar;
  SpaceTimeField vbar;
  SpaceTimeField grad_vbar;  // neumann_gradient of vbar, level by level
  double ubar_sup = 0.0;
  double vbar_sup = 0.0;
  double grad_vbar_sup = 0.0;
  Physics physics;
};

/// Runs the uncontrolled nonlinear solver from nonnegative data.
TrajectoryTarget make_trajectory(std::span<const double> ubar0, std::span<const double> vbar0,
                                 const Physics& physics, const Grid& grid, const TimeGrid& tgrid,
                                 const SolverOptions& options = {});

/// a = chi (ubar + eta), B = chi grad vbar. Throws InvalidIterate when |eta|_inf > 1.
Coefficients linearize_around(const SpaceTimeField& eta, const TrajectoryTarget& target);

struct FixedPointConfig {
  double fp_tol = 1e-8;
  std::size_t fp_max_outer = 50;
  double c0 = 1.0;
  double c1 = 1.0;
  /// Keep the perturbation trajectory of every outer iteration.
  bool keep_iterates = false;
};

struct FixedPointReport {
  bool converged = false;
  std::size_t outer_iterations = 0;
  /// |eta^{k+1} - eta^k|_{L2(Q)} per outer iteration.
  std::vector<double> eta_delta_history;
  /// max |y^k| before clamping, per outer iteration.
  std::vector<double> y_sup_history;
  std::vector<std::size_t> cg_iterations;
  Control f;
  StateTrajectory perturbation;
  SpaceTimeField eta;  // last stored iterate, inside K
  std::vector<StateTrajectory> iterates;

  /// Closed-loop nonlinear run (u, v) with the final control.
  StateTrajectory closed_loop;
  double terminal_error_u = 0.0;  // |u(T) - ubar(T)|_inf
  double terminal_error_v = 0.0;  // |v(T) - vbar(T)|_inf
  /// Same errors for the nonlinear run with f = 0.
  double uncontrolled_error_u = 0.0;
  double uncontrolled_error_v = 0.0;
  /// max of the controlled errors over max of the uncontrolled ones.
  double closed_loop_ratio = 0.0;

  double kappa0 = 0.0;  // c0 (1 + T + 1/T)
  double radius = 0.0;  // e^{-c1 kappa0}
  /// |u0 - ubar0|_inf + |v0 - vbar0|_inf + |grad (v0 - vbar0)|_inf.
  double initial_size = 0.0;
  bool within_radius = false;
};

/// Picard iteration eta -> clamp(y[eta], -1, 1), where y[eta] is the HUM
/// controlled perturbation of the system linearised around (ubar + eta, vbar).
/// Reaching the cap is reported through `converged`, not thrown. HUM errors
/// are rethrown with the outer iteration in the message.
FixedPointReport solve_local_exact(std::span<const double> u0, std::span<const double> v0,
                                   const TrajectoryTarget& target, const HUMConfig& hum,
                                   const FixedPointConfig& cfg, const Grid& grid,
                                   const TimeGrid& tgrid);

/// L2(Q) norm with trapezoid weights in time.
double space_time_l2(const Grid& grid, const TimeGrid& tgrid, std::span<const double> field);

}  // namespace ksc
