#include "kscontrol/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include "kscontrol/errors.hpp"

namespace ksc {
namespace {

void check_weights(const CarlemanWeights& w, const Grid& grid, const TimeGrid& tgrid) {
  if (w.log_e2sa.nodes() != grid.size() || w.log_e2sa.levels() != tgrid.levels() ||
      w.phi_w.nodes() != grid.size() || w.phi_w.levels() != tgrid.levels()) {
    throw InvalidArgument("diagnostics: weights were built on different grids");
  }
}

// Sum over interior levels of tau_k sum_i w_i e^{2 s alpha + p ln(s phi_w) + extra} g(i, k).
// Endpoint levels carry e^{2 s alpha} = 0 and are skipped outright.
double weighted_integral(const SpaceTimeField& g, const CarlemanWeights& w, double power,
                         double log_extra, std::span<const double> mask, const Grid& grid,
                         const TimeGrid& tgrid) {
  const double log_s = std::log(w.s);
  double acc = 0.0;
  for (std::size_t k = 1; k < tgrid.steps(); ++k) {
    double level = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!mask.empty() && mask[i] == 0.0) continue;
      const double log_weight =
          w.log_e2sa(i, k) + power * (log_s + std::log(w.phi_w(i, k))) + log_extra;
      level += grid.weight(i) * exp_clamped(log_weight) * g(i, k);
    }
    acc += tgrid.trapezoid_weight(k) * level;
  }
  return acc;
}

SpaceTimeField squared(const SpaceTimeField& f) {
  SpaceTimeField out = f;
  for (auto& v : out.values()) v *= v;
  return out;
}

SpaceTimeField squared_gradient(const SpaceTimeField& f, const Grid& grid) {
  SpaceTimeField out(f.nodes(), f.levels());
  for (std::size_t k = 0; k < f.levels(); ++k) {
    auto d = discrete_derivative(grid, f.slice(k));
    for (auto& v : d) v *= v;
    out.set_slice(k, d);
  }
  return out;
}

void summarize(InequalityReport& rep) {
  rep.sample_count = rep.ratios.size();
  if (rep.ratios.empty()) return;
  std::vector<double> sorted = rep.ratios;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t c = sorted.size();
  rep.max_ratio = sorted.back();
  rep.median_ratio = c % 2 ? sorted[c / 2] : 0.5 * (sorted[c / 2 - 1] + sorted[c / 2]);
  rep.empirical_constant = rep.max_ratio;
  rep.log_max_over_kappa = std::log(rep.max_ratio) / rep.kappa;
}

InequalityReport new_report(const Coefficients& coeffs, const CarlemanWeights& w,
                            const Grid& grid, const TimeGrid& tgrid) {
  InequalityReport rep;
  rep.n = grid.size();
  rep.m = tgrid.steps();
  rep.lambda = w.lambda;
  rep.s = w.s;
  rep.kappa = kappa(coeffs.a_norm(), coeffs.B_norm(), tgrid.T());
  return rep;
}

template <class Terms>
InequalityReport sample_ratios(std::size_t samples, std::uint64_t seed, const Coefficients& coeffs,
                               const CarlemanWeights& w, const Grid& grid, const TimeGrid& tgrid,
                               Terms terms) {
  if (samples == 0) throw InvalidArgument("diagnostics: need at least one sample");
  coeffs.validate(grid, tgrid);
  check_weights(w, grid, tgrid);
  InequalityReport rep = new_report(coeffs, w, grid, tgrid);
  for (std::size_t j = 0; j < samples; ++j) {
    const StatePair p = random_terminal_pair(seed, j, grid);
    if (l2_norm(grid, p) == 0.0) {
      ++rep.excluded;
      continue;
    }
    const auto adj = solve_adjoint(p.first, p.second, coeffs, grid, tgrid);
    const auto [lhs, rhs] = terms(adj);
    if (!std::isfinite(lhs) || !std::isfinite(rhs)) {
      throw NumericalFailure("diagnostics", "non-finite weighted integral in sample " +
                                                std::to_string(j));
    }
    if (rhs == 0.0) {
      throw DegenerateWeight("diagnostics: weighted right-hand side vanishes for sample " +
                             std::to_string(j) + " (s too large for the mesh)");
    }
    rep.lhs.push_back(lhs);
    rep.rhs.push_back(rhs);
    rep.ratios.push_back(lhs / rhs);
  }
  summarize(rep);
  return rep;
}

}  // namespace

double space_time_integral(const Grid& grid, const TimeGrid& tgrid, const SpaceTimeField& f) {
  double acc = 0.0;
  for (std::size_t k = 0; k < tgrid.levels(); ++k) {
    double level = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) level += grid.weight(i) * f(i, k);
    acc += tgrid.trapezoid_weight(k) * level;
  }
  return acc;
}

ObservabilitySample observability_terms(const StateTrajectory& adjoint, const CarlemanWeights& w,
                                        std::span<const double> mask, const Grid& grid,
                                        const TimeGrid& tgrid) {
  ObservabilitySample out;
  out.lhs = inner(grid, adjoint.first.slice(0), adjoint.first.slice(0)) +
            inner(grid, adjoint.second.slice(0), adjoint.second.slice(0));
  double acc = 0.0;
  for (std::size_t k = 1; k < tgrid.steps(); ++k) {
    double level = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (mask[i] == 0.0) continue;
      const double phi = adjoint.first(i, k);
      level += grid.weight(i) * w.e32sa(i, k) * phi * phi;
    }
    acc += tgrid.trapezoid_weight(k) * level;
  }
  out.rhs = acc;
  return out;
}

double carleman_i1(const SpaceTimeField& phi, const CarlemanWeights& w, const Grid& grid,
                   const TimeGrid& tgrid) {
  return weighted_integral(squared_gradient(phi, grid), w, 3.0, 0.0, {}, grid, tgrid) +
         weighted_integral(squared(phi), w, 5.0, 0.0, {}, grid, tgrid);
}

double carleman_i2(const SpaceTimeField& theta, const CarlemanWeights& w, const Grid& grid,
                   const TimeGrid& tgrid) {
  return weighted_integral(squared_gradient(theta, grid), w, 1.0, 0.0, {}, grid, tgrid) +
         weighted_integral(squared(theta), w, 3.0, 0.0, {}, grid, tgrid);
}

CarlemanSample carleman_terms(const StateTrajectory& adjoint, const CarlemanWeights& w,
                              std::span<const double> mask, const Grid& grid,
                              const TimeGrid& tgrid) {
  check_weights(w, grid, tgrid);
  CarlemanSample out;
  out.i1 = carleman_i1(adjoint.first, w, grid, tgrid);
  out.i2 = carleman_i2(adjoint.second, w, grid, tgrid);
  out.rhs = weighted_integral(squared(adjoint.first), w, 9.0, 8.0 * std::log(w.lambda), mask,
                              grid, tgrid);
  return out;
}

StatePair random_terminal_pair(std::uint64_t seed, std::size_t index, const Grid& grid) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  const std::size_t n = grid.size();
  const std::size_t period = 2 * (n - 1);
  StatePair p = StatePair::zeros(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = normal(rng);
    const double b = normal(rng);
    const double scale = (k == 0 || k + 1 == n) ? 1.0 : std::numbers::sqrt2;
    for (std::size_t i = 0; i < n; ++i) {
      const double arg = std::numbers::pi * static_cast<double>((k * i) % period) /
                         static_cast<double>(n - 1);
      const double c = scale * std::cos(arg);
      p.first[i] += a * c;
      p.second[i] += b * c;
    }
  }
  const double norm = l2_norm(grid, p);
  if (norm > 0.0) {
    for (auto& v : p.first) v /= norm;
    for (auto& v : p.second) v /= norm;
  }
  return p;
}

InequalityReport observability_ratio(std::size_t samples, std::uint64_t seed,
                                     const Coefficients& coeffs, const CarlemanWeights& w,
                                     const Interval& omega, const Grid& grid,
                                     const TimeGrid& tgrid) {
  const auto mask = grid.mask(omega);
  return sample_ratios(samples, seed, coeffs, w, grid, tgrid, [&](const StateTrajectory& adj) {
    const auto t = observability_terms(adj, w, mask, grid, tgrid);
    return std::pair{t.lhs, t.rhs};
  });
}

InequalityReport carleman_ratio(std::size_t samples, std::uint64_t seed,
                                const Coefficients& coeffs, const CarlemanWeights& w,
                                const Interval& omega, const Grid& grid, const TimeGrid& tgrid) {
  const auto mask = grid.mask(omega);
  return sample_ratios(samples, seed, coeffs, w, grid, tgrid, [&](const StateTrajectory& adj) {
    const auto t = carleman_terms(adj, w, mask, grid, tgrid);
    return std::pair{t.i1 + t.i2, t.rhs};
  });
}

double fit_slope(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

DecayTable decay_study(std::span<const double> epsilons, std::span<const double> y0,
                       std::span<const double> z0, const Coefficients& coeffs,
                       const HUMConfig& base, const Grid& grid, const TimeGrid& tgrid) {
  if (epsilons.empty()) throw InvalidArgument("decay_study: epsilon list is empty");
  for (std::size_t j = 0; j < epsilons.size(); ++j) {
    if (!(epsilons[j] > 0.0) || (j > 0 && !(epsilons[j] < epsilons[j - 1]))) {
      throw InvalidArgument("decay_study: epsilons must be positive and strictly decreasing");
    }
  }
  DecayTable table;
  table.kappa = kappa(coeffs.a_norm(), coeffs.B_norm(), tgrid.T());
  std::vector<double> le, lt;
  for (const double eps : epsilons) {
    HUMConfig cfg = base;
    cfg.epsilon = eps;
    char tag[48];
    std::snprintf(tag, sizeof tag, "epsilon %.17g: ", eps);
    HUMResult r;
    try {
      r = hum_solve(y0, z0, cfg, coeffs, grid, tgrid);
    } catch (const CgStagnation& e) {
      throw CgStagnation(tag + std::string(e.what()), e.history());
    } catch (const CgNotConverged& e) {
      throw CgNotConverged(tag + std::string(e.what()), e.partial());
    } catch (const NumericalFailure& e) {
      throw NumericalFailure(e.stage(), tag + std::string(e.what()));
    }
    table.initial_l2_sum = r.initial_l2_sum;
    const auto bound = control_bound_report(r, coeffs.a_norm(), coeffs.B_norm(), tgrid.T());
    table.rows.push_back({eps, r.terminal_l2, r.f_linf, r.f_l2, r.cg_iterations, bound.c_hat});
    if (bound.c_hat && (!table.c_hat_max || *bound.c_hat > *table.c_hat_max)) {
      table.c_hat_max = bound.c_hat;
    }
    le.push_back(std::log(eps));
    lt.push_back(std::log(r.terminal_l2));
  }
  if (table.rows.size() > 1 &&
      std::all_of(lt.begin(), lt.end(), [](double v) { return std::isfinite(v); })) {
    table.slope = fit_slope(le, lt);
  }
  return table;
}

}  // namespace ksc
