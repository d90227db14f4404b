#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "kscontrol/errors.hpp"
#include "kscontrol/grid.hpp"
#include "kscontrol/pde.hpp"
#include "kscontrol/weights.hpp"

namespace ksc {

/// (y, z) or (phi, theta) at a single time level.
struct StatePair {
  std::vector<double> first;
  std::vector<double> second;

  static StatePair zeros(std::size_t n) { return {std::vector<double>(n), std::vector<double>(n)}; }
  bool operator==(const StatePair&) const = default;
};

/// Weighted L2(Omega)^2 inner product on pairs.
double inner(const Grid& grid, const StatePair& p, const StatePair& q);
double l2_norm(const Grid& grid, const StatePair& p);

struct HUMConfig {
  double epsilon = 1e-6;
  double cg_tol = 1e-10;
  std::size_t cg_max_iter = 500;
  /// Diagonal preconditioner (epsilon I).
  bool jacobi = false;
  /// Iterations over which the residual must drop tenfold.
  std::size_t stagnation_window = 50;
  Interval omega{0.3, 0.7};
  CarlemanWeights weights;
  SolverOptions solver;

  void validate() const;
};

struct HUMResult {
  Control f;
  StateTrajectory traj;
  double terminal_l2 = 0.0;
  double f_linf = 0.0;
  double f_l2 = 0.0;
  /// int int_{Q_omega} |f|^2 e^{-c s alpha}, evaluated as int int 1_omega e^{c s alpha} |phi|^2.
  double f_weighted_l2 = 0.0;
  std::size_t cg_iterations = 0;
  /// Dual objective J(p) = 1/2 <G p, p> + <x_free(T), p>, one entry per iterate.
  std::vector<double> dual_value_history;
  std::vector<double> residual_history;
  double kappa = 0.0;
  StatePair phiT_thetaT;
  double initial_l2_sum = 0.0;  // |y0|_2 + |z0|_2
  double free_terminal_l2 = 0.0;
  double epsilon = 0.0;
  double cg_tol = 0.0;
};

class CgStagnation : public Error {
 public:
  CgStagnation(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

class CgNotConverged : public Error {
 public:
  CgNotConverged(const std::string& what, HUMResult partial)
      : Error(what), partial_(std::move(partial)) {}
  const HUMResult& partial() const noexcept { return partial_; }

 private:
  HUMResult partial_;
};

/// G = Lambda W Lambda^* + epsilon I on terminal pairs, where Lambda^* maps
/// terminal adjoint data to the phi multipliers on omega and Lambda maps a
/// control to the terminal state from zero initial data.
class Gramian {
 public:
  Gramian(const HUMConfig& cfg, const Coefficients& coeffs, const Grid& grid,
          const TimeGrid& tgrid);

  StatePair apply(const StatePair& p) const;
  /// f = 1_omega e^{c s alpha} phi[p]; f vanishes at t = 0 and t = T.
  Control control_of(const StatePair& p, StateTrajectory* adjoint = nullptr) const;
  StatePair terminal_of(const Control& f) const;
  const std::vector<double>& mask() const noexcept { return mask_; }

 private:
  const HUMConfig& cfg_;
  const Coefficients& coeffs_;
  const Grid& grid_;
  const TimeGrid& tgrid_;
  std::vector<double> mask_;
};

/// G p applied through a temporary Gramian.
StatePair gramian_apply(const StatePair& pT, const HUMConfig& cfg, const Coefficients& coeffs,
                        const Grid& grid, const TimeGrid& tgrid);

/// Penalised null control: solves G p = -x_free(T) by conjugate gradient and
/// sets f = 1_omega e^{c s alpha} phi[p]. The controlled terminal state equals
/// -epsilon p up to the CG residual.
HUMResult hum_solve(std::span<const double> y0, std::span<const double> z0, const HUMConfig& cfg,
                    const Coefficients& coeffs, const Grid& grid, const TimeGrid& tgrid);

struct ControlBoundReport {
  /// ln(|f|_inf / (|y0|_2 + |z0|_2)) / kappa
  std::optional<double> c_hat;
  bool undefined_ratio = false;
  bool non_finite = false;
  double kappa = 0.0;
};

ControlBoundReport control_bound_report(const HUMResult& result, double a_norm, double B_norm,
                                        double T);

}  // namespace ksc
