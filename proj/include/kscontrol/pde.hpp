#pragma once

#include <span>
#include <vector>

#include "kscontrol/grid.hpp"
#include "kscontrol/tridiag.hpp"

namespace ksc {

// Space discretisation shared by every solver.
//
// Nodes i = 0..n-1 carry the unknowns; faces j = 0..n-2 sit between nodes j
// and j+1. Every divergence is taken in flux form,
//   (div F)_i = (F_i - F_{i-1}) / w_i,   F_{-1} = F_{n-1} = 0,
// with w_i the node weights of Grid, which gives zero-flux (Neumann)
// boundaries and exact discrete mass conservation. Face gradients are
// (z_{j+1} - z_j) / h and face values of nodal quantities are the two-point
// average. With these choices the Laplacian and div(a grad .) are
// self-adjoint in the weighted inner product of Grid.

struct Physics {
  double chi = 1.0;
  double gamma = 1.0;
  double delta = 1.0;
  bool operator==(const Physics&) const = default;
};

/// Coefficients of the linearised system
///   y_t = y_xx - (B y)_x - (a z_x)_x + 1_omega f,  z_t = z_xx - gamma z + delta y.
/// Step k (advancing level k-1 to level k) uses B at level k-1 and a at level k,
/// matching the time levels produced by the nonlinear IMEX scheme.
struct Coefficients {
  SpaceTimeField a;
  SpaceTimeField B;
  Physics physics;

  /// Throws InvalidArgument when sizes mismatch, entries are non-finite or B
  /// does not vanish at the boundary nodes.
  void validate(const Grid& grid, const TimeGrid& tgrid) const;
  double a_norm() const noexcept { return a.sup_norm(); }
  double B_norm() const noexcept { return B.sup_norm(); }
};

/// Space-time constant a and B; B is set to zero at the two boundary nodes.
Coefficients constant_coefficients(const Grid& grid, const TimeGrid& tgrid, double a, double B,
                                   const Physics& physics);

enum class TrajectoryRole { state, perturbation, adjoint };

/// Coupled pair over all time levels: (u, v), (y, z) or (phi, theta).
struct StateTrajectory {
  SpaceTimeField first;
  SpaceTimeField second;
  TrajectoryRole role = TrajectoryRole::state;

  std::span<const double> first_at(std::size_t k) const { return first.slice(k); }
  std::span<const double> second_at(std::size_t k) const { return second.slice(k); }
  bool operator==(const StateTrajectory&) const = default;
};

/// Distributed control; only nodes with mask 1 act on the state.
struct Control {
  SpaceTimeField f;
  std::vector<double> mask;

  static Control zero(const Grid& grid, const TimeGrid& tgrid, const Interval& omega);
  /// Sets f to zero outside the mask.
  void restrict_to_support();
};

struct SolverOptions {
  double blowup_guard = 1e8;
};

/// Nonlinear Keller-Segel step: implicit Euler for diffusion and the linear
/// reaction, chemotactic flux chi u_face (v^{k-1})_x with u at the new level.
StateTrajectory solve_forward_nonlinear(std::span<const double> u0, std::span<const double> v0,
                                        const Control& control, const Physics& physics,
                                        const Grid& grid, const TimeGrid& tgrid,
                                        const SolverOptions& options = {});

/// One-step propagator of the linearised system and its exact transpose in the
/// weighted inner product. The forward step solves for y first and then for z
/// with the new y; the backward step reverses that composition.
class LinearPropagator {
 public:
  LinearPropagator(const Coefficients& coeffs, const Grid& grid, const TimeGrid& tgrid);

  /// Advances (y, z) from level k-1 to level k with control slice f^k.
  void advance(std::size_t k, std::span<double> y, std::span<double> z,
               std::span<const double> f_masked);

  /// Backward step of the multipliers: given (phi^{k+1}, theta^{k+1}) produces
  /// (phi^k, theta^k). For k = m the inputs are the terminal data.
  void retreat(std::size_t k, std::span<double> phi, std::span<double> theta);

  /// Maps the multipliers at level 1 to the adjoint state at time 0.
  void finish(std::span<const double> phi1, std::span<double> theta);

 private:
  void assemble_drift(std::size_t k);
  void coupling(std::size_t k, std::span<const double> z, std::span<double> out) const;

  const Coefficients& coeffs_;
  const Grid& grid_;
  const TimeGrid& tgrid_;
  Tridiagonal reaction_;
  Tridiagonal drift_;
  Tridiagonal drift_t_;
  std::vector<double> work_;
  std::vector<double> scratch_;
};

StateTrajectory solve_forward_linear(std::span<const double> y0, std::span<const double> z0,
                                     const Control& control, const Coefficients& coeffs,
                                     const Grid& grid, const TimeGrid& tgrid,
                                     const SolverOptions& options = {});

/// Discrete adjoint: level 0 holds the transpose of the forward propagator
/// applied to (phiT, thetaT); levels 1..m hold the step multipliers, so that
///   <x^m, p^T> = <x^0, p^0> + dt sum_{k=1..m} <1_omega f^k, phi^k>.
StateTrajectory solve_adjoint(std::span<const double> phiT, std::span<const double> thetaT,
                              const Coefficients& coeffs, const Grid& grid,
                              const TimeGrid& tgrid);

/// Pairing of control-like fields used by the duality identity and the HUM
/// cost: dt sum_{k>=1} <mask f^k, g^k>. Equals the trapezoid rule when f
/// vanishes at t = 0 and t = T.
double control_pairing(const Grid& grid, const TimeGrid& tgrid, const SpaceTimeField& f,
                       const SpaceTimeField& g, std::span<const double> mask);

/// Discrete mass sum_i w_i u_i.
double mass(const Grid& grid, std::span<const double> u);

/// Nodal gradient: central differences inside, one-sided at the ends, then
/// zeroed at both boundary nodes (discrete B . nu = 0).
std::vector<double> neumann_gradient(const Grid& grid, std::span<const double> v);

struct ComponentNorms {
  double l2_q = 0.0;        // L2(Q), trapezoid in time
  double linf_q = 0.0;      // L-infinity(Q)
  double l2_h1 = 0.0;       // L2(0,T; H1), gradient on cell midpoints
  double terminal_l2 = 0.0; // L2(Omega) at t = T
  double initial_l2 = 0.0;  // L2(Omega) at t = 0
};

struct NormReport {
  ComponentNorms first;
  ComponentNorms second;
  /// |(first(T), second(T))| in L2(Omega)^2.
  double terminal_pair_l2 = 0.0;
};

NormReport state_norms(const StateTrajectory& traj, const Grid& grid, const TimeGrid& tgrid);

}  // namespace ksc
