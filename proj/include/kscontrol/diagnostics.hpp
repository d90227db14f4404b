#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kscontrol/grid.hpp"
#include "kscontrol/hum.hpp"
#include "kscontrol/pde.hpp"
#include "kscontrol/weights.hpp"

namespace ksc {

/// Sampled left and right sides of a weighted inequality. The empirical
/// constant is the largest sampled ratio; it bounds nothing beyond the
/// samples drawn and is tracked for stability under refinement.
struct InequalityReport {
  std::size_t sample_count = 0;  // samples kept (nonzero)
  std::size_t excluded = 0;
  std::vector<double> lhs;
  std::vector<double> rhs;
  std::vector<double> ratios;
  double max_ratio = 0.0;
  double median_ratio = 0.0;
  double empirical_constant = 0.0;
  /// ln(max_ratio) / kappa.
  double log_max_over_kappa = 0.0;
  std::size_t n = 0;
  std::size_t m = 0;
  double lambda = 0.0;
  double s = 0.0;
  double kappa = 0.0;

  bool operator==(const InequalityReport&) const = default;
};

/// Space-time integral sum_k tau_k sum_i w_i f(i, k) with trapezoid time weights.
double space_time_integral(const Grid& grid, const TimeGrid& tgrid, const SpaceTimeField& f);

/// Observability pieces for one adjoint solution.
struct ObservabilitySample {
  double lhs = 0.0;  // |phi(0)|^2 + |theta(0)|^2
  double rhs = 0.0;  // int int_{Q_omega} e^{c s alpha} |phi|^2
};
ObservabilitySample observability_terms(const StateTrajectory& adjoint, const CarlemanWeights& w,
                                        std::span<const double> mask, const Grid& grid,
                                        const TimeGrid& tgrid);

struct CarlemanSample {
  double i1 = 0.0;   // int int [(s phi)^3 |phi_x|^2 + (s phi)^5 |phi|^2] e^{2 s alpha}
  double i2 = 0.0;   // int int [s phi |theta_x|^2 + (s phi)^3 |theta|^2] e^{2 s alpha}
  double rhs = 0.0;  // int int_{Q_omega} lambda^8 (s phi)^9 e^{2 s alpha} |phi|^2
};
/// phi_w and the exponentials are combined in log space, so no product
/// overflows before the decaying factor is applied.
CarlemanSample carleman_terms(const StateTrajectory& adjoint, const CarlemanWeights& w,
                              std::span<const double> mask, const Grid& grid,
                              const TimeGrid& tgrid);
double carleman_i1(const SpaceTimeField& phi, const CarlemanWeights& w, const Grid& grid,
                   const TimeGrid& tgrid);
double carleman_i2(const SpaceTimeField& theta, const CarlemanWeights& w, const Grid& grid,
                   const TimeGrid& tgrid);

/// Random terminal pair scaled to unit L2(Omega)^2 norm. Coefficients in the
/// discrete cosine basis (orthonormal for the node weights) are independent
/// standard normals drawn mode by mode from the stream (seed, index), so the
/// nodal values are Gaussian white noise and the sample on a grid with n
/// nodes carries the same low modes as on any finer grid.
StatePair random_terminal_pair(std::uint64_t seed, std::size_t index, const Grid& grid);

/// Ratio LHS / RHS of the observability inequality over seeded samples.
/// Throws DegenerateWeight if a nonzero sample has RHS = 0.
InequalityReport observability_ratio(std::size_t samples, std::uint64_t seed,
                                     const Coefficients& coeffs, const CarlemanWeights& w,
                                     const Interval& omega, const Grid& grid,
                                     const TimeGrid& tgrid);

/// Ratio (I1 + I2) / RHS of the Carleman inequality over seeded samples.
InequalityReport carleman_ratio(std::size_t samples, std::uint64_t seed,
                                const Coefficients& coeffs, const CarlemanWeights& w,
                                const Interval& omega, const Grid& grid, const TimeGrid& tgrid);

struct DecayRow {
  double epsilon = 0.0;
  double terminal_l2 = 0.0;
  double f_linf = 0.0;
  double f_l2 = 0.0;
  std::size_t cg_iterations = 0;
  std::optional<double> c_hat;
};

struct DecayTable {
  std::vector<DecayRow> rows;
  /// Least-squares slope of ln terminal_l2 against ln epsilon; empty for one row.
  std::optional<double> slope;
  /// Largest c_hat over the rows.
  std::optional<double> c_hat_max;
  double kappa = 0.0;
  double initial_l2_sum = 0.0;
};

/// hum_solve for each epsilon of a positive, strictly decreasing list using
/// `base` for everything but epsilon. HUM errors are rethrown tagged by epsilon.
DecayTable decay_study(std::span<const double> epsilons, std::span<const double> y0,
                       std::span<const double> z0, const Coefficients& coeffs,
                       const HUMConfig& base, const Grid& grid, const TimeGrid& tgrid);

/// Least-squares slope of y against x.
double fit_slope(std::span<const double> x, std::span<const double> y);

}  // namespace ksc
