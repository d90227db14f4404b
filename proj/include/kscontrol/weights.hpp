#pragma once

#include <optional>
#include <span>
#include <vector>

#include "kscontrol/grid.hpp"

namespace ksc {

/// Geometry of the control problem: Omega = (x_lo, x_hi), the control region
/// omega and the observation region omega' whose closure lies inside omega.
struct DomainSpec {
  double x_lo = 0.0;
  double x_hi = 1.0;
  Interval omega{0.3, 0.7};
  Interval omega_prime{0.4, 0.6};
  double T = 0.5;

  /// Throws InvalidDomain when the nesting or T > 0 fails.
  void validate() const;
  bool operator==(const DomainSpec&) const = default;
};

/// Exponentials below this log value are flushed to zero.
inline constexpr double kLogUnderflow = -700.0;

/// exp(log_value), or 0 when log_value < kLogUnderflow (including -inf).
double exp_clamped(double log_value) noexcept;

/// beta(x) = sin(pi psi(x)) with psi piecewise linear through
/// (x_lo, 0), (x*, 1/2), (x_hi, 1), x* the midpoint of omega'.
double beta_at(const DomainSpec& domain, double x);

/// Nodal beta. Requires omega' to hold at least three grid nodes.
std::vector<double> build_beta(const DomainSpec& domain, const Grid& grid);

/// Discrete derivative of a nodal field: forward difference, backward at the last node.
std::vector<double> discrete_derivative(const Grid& grid, std::span<const double> field);

/// Time-degenerate Carleman weights. Values at t = 0 and t = T are the
/// continuous limits: alpha = -inf, phi_w = +inf, log weights = -inf.
struct CarlemanWeights {
  std::vector<double> beta;
  double beta_norm = 0.0;
  double lambda = 0.0;
  double s = 0.0;
  /// Exponent c in the control weight e^{c s alpha}; 3/2 by default.
  double control_exponent = 1.5;
  SpaceTimeField alpha;
  SpaceTimeField phi_w;
  SpaceTimeField log_e2sa;   // 2 s alpha
  SpaceTimeField log_e32sa;  // control_exponent * s * alpha
  double gamma_lambda = 0.0;
  double eta_lambda = 0.0;
  /// min over nodes of alpha at each time level.
  std::vector<double> alpha0;

  double e2sa(std::size_t i, std::size_t k) const noexcept { return exp_clamped(log_e2sa(i, k)); }
  double e32sa(std::size_t i, std::size_t k) const noexcept {
    return exp_clamped(log_e32sa(i, k));
  }
};

CarlemanWeights weight_fields(std::span<const double> beta, double lambda, double s,
                              const TimeGrid& tgrid, double control_exponent = 1.5);

enum class WeightMode { theory, practice };

struct ParameterRequest {
  double a_norm = 0.0;
  double B_norm = 0.0;
  double T = 0.5;
  WeightMode mode = WeightMode::practice;
  double c_lambda = 1.0;
  double c_s = 1.0;
  std::optional<double> lambda;
  std::optional<double> s;
  /// Target for min_{t in [T/4, 3T/4]} |2 s alpha(x*, t)| in practice mode.
  double exponent_budget = 1.0;
};

struct WeightParameters {
  double lambda = 0.0;
  double s = 0.0;
};

/// Chooses (lambda, s). Theory mode follows the Carleman constraints
/// lambda = C_l (1 + |a|^2 + |B|^2), s >= gamma(lambda) (T + T^2); practice mode
/// fixes lambda (default 1) and scales s to the exponent budget on the time mesh.
WeightParameters select_parameters(const ParameterRequest& request, std::span<const double> beta,
                                   const TimeGrid& tgrid);

/// kappa = (1 + |a|^2 + |B|^2) T + 1/T + 1 + |a| + |B|.
double kappa(double a_norm, double B_norm, double T);

}  // namespace ksc
