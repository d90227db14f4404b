#include "kscontrol/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "kscontrol/errors.hpp"

namespace ksc {

void DomainSpec::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(x_lo) || !finite(x_hi) || !(x_lo < x_hi)) {
    throw InvalidDomain("domain: require x_lo < x_hi");
  }
  if (!(omega.lo < omega.hi) || !(x_lo <= omega.lo) || !(omega.hi <= x_hi)) {
    throw InvalidDomain("domain: omega must be a nonempty subinterval of (x_lo, x_hi)");
  }
  if (!(omega_prime.lo < omega_prime.hi)) throw InvalidDomain("domain: omega' is empty");
  if (!(omega.lo < omega_prime.lo) || !(omega_prime.hi < omega.hi)) {
    throw InvalidDomain("domain: closure of omega' must lie inside omega");
  }
  if (!(T > 0.0) || !finite(T)) throw InvalidDomain("domain: T must be > 0");
}

double exp_clamped(double log_value) noexcept {
  return log_value < kLogUnderflow ? 0.0 : std::exp(log_value);
}

double beta_at(const DomainSpec& domain, double x) {
  const double peak = domain.omega_prime.midpoint();
  double psi;
  if (x <= peak) {
    psi = 0.5 * (x - domain.x_lo) / (peak - domain.x_lo);
  } else {
    psi = 0.5 + 0.5 * (x - peak) / (domain.x_hi - peak);
  }
  psi = std::clamp(psi, 0.0, 1.0);
  if (psi == 0.0 || psi == 1.0) return 0.0;
  return std::sin(std::numbers::pi * psi);
}

std::vector<double> build_beta(const DomainSpec& domain, const Grid& grid) {
  domain.validate();
  if (domain.omega_prime.lo <= grid.x_lo() || domain.omega_prime.hi >= grid.x_hi()) {
    throw InvalidDomain("build_beta: omega' touches the boundary");
  }
  if (grid.count_inside(domain.omega_prime) < 3) {
    throw InvalidDomain("build_beta: omega' must contain at least three grid nodes");
  }
  std::vector<double> beta(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) beta[i] = beta_at(domain, grid.x(i));
  beta.front() = 0.0;
  beta.back() = 0.0;
  return beta;
}

std::vector<double> discrete_derivative(const Grid& grid, std::span<const double> field) {
  const std::size_t n = field.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (field[i + 1] - field[i]) / grid.h();
  d[n - 1] = (field[n - 1] - field[n - 2]) / grid.h();
  return d;
}

CarlemanWeights weight_fields(std::span<const double> beta, double lambda, double s,
                              const TimeGrid& tgrid, double control_exponent) {
  if (!(lambda > 0.0) || !(s > 0.0)) throw InvalidArgument("weight_fields: need lambda, s > 0");
  if (tgrid.levels() < 3) throw InvalidArgument("weight_fields: need at least 3 time nodes");

  const std::size_t n = beta.size();
  const std::size_t levels = tgrid.levels();
  const double T = tgrid.T();
  constexpr double inf = std::numeric_limits<double>::infinity();

  CarlemanWeights w;
  w.beta.assign(beta.begin(), beta.end());
  w.beta_norm = *std::max_element(beta.begin(), beta.end());
  w.lambda = lambda;
  w.s = s;
  w.control_exponent = control_exponent;
  w.gamma_lambda = std::exp(2.0 * lambda * w.beta_norm);
  w.eta_lambda = std::exp(-lambda * w.beta_norm);
  w.alpha = SpaceTimeField(n, levels);
  w.phi_w = SpaceTimeField(n, levels);
  w.log_e2sa = SpaceTimeField(n, levels);
  w.log_e32sa = SpaceTimeField(n, levels);
  w.alpha0.assign(levels, -inf);

  std::vector<double> e_lb(n);
  for (std::size_t i = 0; i < n; ++i) e_lb[i] = std::exp(lambda * beta[i]);

  for (std::size_t k = 0; k < levels; ++k) {
    if (k == 0 || k + 1 == levels) {
      for (std::size_t i = 0; i < n; ++i) {
        w.alpha(i, k) = -inf;
        w.phi_w(i, k) = inf;
        w.log_e2sa(i, k) = -inf;
        w.log_e32sa(i, k) = -inf;
      }
      continue;
    }
    const double t = tgrid.t(k);
    const double tt = t * (T - t);
    double amin = inf;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = (e_lb[i] - w.gamma_lambda) / tt;
      w.alpha(i, k) = a;
      w.phi_w(i, k) = e_lb[i] / tt;
      w.log_e2sa(i, k) = 2.0 * s * a;
      w.log_e32sa(i, k) = control_exponent * s * a;
      amin = std::min(amin, a);
    }
    w.alpha0[k] = amin;
  }
  return w;
}

WeightParameters select_parameters(const ParameterRequest& request, std::span<const double> beta,
                                   const TimeGrid& tgrid) {
  if (request.a_norm < 0.0 || request.B_norm < 0.0 || !(request.T > 0.0)) {
    throw InvalidArgument("select_parameters: need a_norm, B_norm >= 0 and T > 0");
  }
  const double beta_norm = *std::max_element(beta.begin(), beta.end());
  const double T = request.T;
  const double load = 1.0 + request.a_norm * request.a_norm + request.B_norm * request.B_norm;

  WeightParameters out;
  if (request.mode == WeightMode::theory) {
    out.lambda = request.lambda.value_or(request.c_lambda * load);
    const double gamma = std::exp(2.0 * out.lambda * beta_norm);
    out.s = request.s.value_or(
        std::max(request.c_s * load * (T + T * T), gamma * (T + T * T)));
    return out;
  }

  out.lambda = request.lambda.value_or(1.0);
  if (request.s) {
    out.s = *request.s;
    return out;
  }
  // |alpha(x*, t)| = (e^{2 l b} - e^{l b}) / (t (T - t)) is smallest where
  // t (T - t) is largest among the time nodes of [T/4, 3T/4].
  const double slack = 1e-12 * T;
  double best = 0.0;
  for (std::size_t k = 0; k < tgrid.levels(); ++k) {
    const double t = tgrid.t(k);
    if (t >= 0.25 * T - slack && t <= 0.75 * T + slack) best = std::max(best, t * (T - t));
  }
  const double lb = out.lambda * beta_norm;
  const double alpha_mag = (std::exp(2.0 * lb) - std::exp(lb)) / best;
  out.s = request.exponent_budget / (2.0 * alpha_mag);
  return out;
}

double kappa(double a_norm, double B_norm, double T) {
  if (!(T > 0.0)) throw InvalidArgument("kappa: T must be > 0");
  return (1.0 + a_norm * a_norm + B_norm * B_norm) * T + 1.0 / T + 1.0 + a_norm + B_norm;
}

}  // namespace ksc
