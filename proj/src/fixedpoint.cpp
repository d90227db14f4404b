#include "kscontrol/fixedpoint.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kscontrol/errors.hpp"

namespace ksc {
namespace {

double terminal_sup_diff(const SpaceTimeField& a, const SpaceTimeField& b, std::size_t m) {
  const auto x = a.slice(m), y = b.slice(m);
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d = std::max(d, std::abs(x[i] - y[i]));
  return d;
}

HUMResult hum_at(std::size_t outer, std::span<const double> y0, std::span<const double> z0,
                 const HUMConfig& hum, const Coefficients& coeffs, const Grid& grid,
                 const TimeGrid& tgrid) {
  const std::string where = "outer iteration " + std::to_string(outer) + ": ";
  try {
    return hum_solve(y0, z0, hum, coeffs, grid, tgrid);
  } catch (const CgStagnation& e) {
    throw CgStagnation(where + e.what(), e.history());
  } catch (const CgNotConverged& e) {
    throw CgNotConverged(where + e.what(), e.partial());
  } catch (const NumericalFailure& e) {
    const std::string what = e.what();
    throw NumericalFailure(e.stage(), where + what.substr(e.stage().size() + 2));
  }
}

}  // namespace

double space_time_l2(const Grid& grid, const TimeGrid& tgrid, std::span<const double> field) {
  const std::size_t n = grid.size();
  double sum = 0.0;
  for (std::size_t k = 0; k < tgrid.levels(); ++k) {
    double level = 0.0;
    for (std::size_t i = 0; i < n; ++i) level += grid.weight(i) * field[k * n + i] * field[k * n + i];
    sum += tgrid.trapezoid_weight(k) * level;
  }
  return std::sqrt(sum);
}

TrajectoryTarget make_trajectory(std::span<const double> ubar0, std::span<const double> vbar0,
                                 const Physics& physics, const Grid& grid, const TimeGrid& tgrid,
                                 const SolverOptions& options) {
  if (ubar0.size() != grid.size() || vbar0.size() != grid.size()) {
    throw InvalidArgument("make_trajectory: initial data size does not match the grid");
  }
  auto physical = [](double x) { return std::isfinite(x) && x >= 0.0; };
  if (!std::all_of(ubar0.begin(), ubar0.end(), physical) ||
      !std::all_of(vbar0.begin(), vbar0.end(), physical)) {
    throw InvalidArgument("make_trajectory: initial densities must be finite and nonnegative");
  }
  // Any control region works with f = 0.
  const Control none = Control::zero(grid, tgrid, Interval{grid.x_lo(), grid.x_hi()});
  auto traj = solve_forward_nonlinear(ubar0, vbar0, none, physics, grid, tgrid, options);

  TrajectoryTarget t;
  t.physics = physics;
  t.grad_vbar = SpaceTimeField(grid, tgrid);
  for (std::size_t k = 0; k < tgrid.levels(); ++k) {
    t.grad_vbar.set_slice(k, neumann_gradient(grid, traj.second.slice(k)));
  }
  t.ubar = std::move(traj.first);
  t.vbar = std::move(traj.second);
  t.ubar_sup = t.ubar.sup_norm();
  t.vbar_sup = t.vbar.sup_norm();
  t.grad_vbar_sup = t.grad_vbar.sup_norm();
  return t;
}

Coefficients linearize_around(const SpaceTimeField& eta, const TrajectoryTarget& target) {
  if (eta.nodes() != target.ubar.nodes() || eta.levels() != target.ubar.levels()) {
    throw InvalidArgument("linearize_around: eta does not match the target grids");
  }
  const double eta_sup = eta.sup_norm();
  if (!(eta_sup <= 1.0)) {
    throw InvalidIterate("linearize_around: |eta|_inf = " + std::to_string(eta_sup) + " > 1");
  }
  const double chi = target.physics.chi;
  Coefficients c{SpaceTimeField(eta.nodes(), eta.levels()), SpaceTimeField(eta.nodes(), eta.levels()),
                 target.physics};
  const auto e = eta.values();
  const auto u = target.ubar.values();
  const auto g = target.grad_vbar.values();
  auto a = c.a.values();
  auto B = c.B.values();
  for (std::size_t j = 0; j < e.size(); ++j) {
    a[j] = chi * (u[j] + e[j]);
    B[j] = chi * g[j];
  }
  return c;
}

FixedPointReport solve_local_exact(std::span<const double> u0, std::span<const double> v0,
                                   const TrajectoryTarget& target, const HUMConfig& hum,
                                   const FixedPointConfig& cfg, const Grid& grid,
                                   const TimeGrid& tgrid) {
  const std::size_t n = grid.size();
  const std::size_t m = tgrid.steps();
  if (u0.size() != n || v0.size() != n || target.ubar.nodes() != n ||
      target.ubar.levels() != tgrid.levels()) {
    throw InvalidArgument("solve_local_exact: data and target grids differ");
  }
  if (!(cfg.fp_tol > 0.0) || cfg.fp_max_outer == 0) {
    throw InvalidArgument("solve_local_exact: need fp_tol > 0 and fp_max_outer > 0");
  }

  std::vector<double> y0(n), z0(n);
  for (std::size_t i = 0; i < n; ++i) {
    y0[i] = u0[i] - target.ubar(i, 0);
    z0[i] = v0[i] - target.vbar(i, 0);
  }

  FixedPointReport rep;
  const double T = tgrid.T();
  rep.kappa0 = cfg.c0 * (1.0 + T + 1.0 / T);
  rep.radius = std::exp(-cfg.c1 * rep.kappa0);
  rep.initial_size = sup_norm(y0) + sup_norm(z0) + sup_norm(neumann_gradient(grid, z0));
  rep.within_radius = rep.initial_size <= rep.radius;

  SpaceTimeField eta(grid, tgrid);
  for (std::size_t outer = 1; outer <= cfg.fp_max_outer; ++outer) {
    const Coefficients coeffs = linearize_around(eta, target);
    HUMResult r = hum_at(outer, y0, z0, hum, coeffs, grid, tgrid);

    SpaceTimeField next = r.traj.first;
    rep.y_sup_history.push_back(next.sup_norm());
    for (auto& v : next.values()) v = std::clamp(v, -1.0, 1.0);
    std::vector<double> diff(next.values().begin(), next.values().end());
    for (std::size_t j = 0; j < diff.size(); ++j) diff[j] -= eta.values()[j];
    const double delta = space_time_l2(grid, tgrid, diff);

    rep.eta_delta_history.push_back(delta);
    rep.cg_iterations.push_back(r.cg_iterations);
    rep.outer_iterations = outer;
    rep.f = std::move(r.f);
    r.traj.role = TrajectoryRole::perturbation;
    if (cfg.keep_iterates) rep.iterates.push_back(r.traj);
    rep.perturbation = std::move(r.traj);
    eta = std::move(next);
    if (delta <= cfg.fp_tol) {
      rep.converged = true;
      break;
    }
  }
  rep.eta = eta;

  const Control none{SpaceTimeField(grid, tgrid), rep.f.mask};
  const auto controlled = solve_forward_nonlinear(u0, v0, rep.f, target.physics, grid, tgrid);
  const auto free = solve_forward_nonlinear(u0, v0, none, target.physics, grid, tgrid);
  rep.terminal_error_u = terminal_sup_diff(controlled.first, target.ubar, m);
  rep.terminal_error_v = terminal_sup_diff(controlled.second, target.vbar, m);
  rep.uncontrolled_error_u = terminal_sup_diff(free.first, target.ubar, m);
  rep.uncontrolled_error_v = terminal_sup_diff(free.second, target.vbar, m);
  const double unc = std::max(rep.uncontrolled_error_u, rep.uncontrolled_error_v);
  const double ctl = std::max(rep.terminal_error_u, rep.terminal_error_v);
  rep.closed_loop_ratio = unc > 0.0 ? ctl / unc : (ctl > 0.0 ? INFINITY : 0.0);
  rep.closed_loop = controlled;
  return rep;
}

}  // namespace ksc
