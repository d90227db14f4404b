#include "kscontrol/hum.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ksc {
namespace {

// |x(T)| / (epsilon |p|) - 1 is bounded by this factor times cg_tol.
constexpr double kOptimalitySlack = 5.0;

void axpy(double a, const StatePair& x, StatePair& y) {
  for (std::size_t i = 0; i < y.first.size(); ++i) {
    y.first[i] += a * x.first[i];
    y.second[i] += a * x.second[i];
  }
}

// y = x + b y
void xpby(const StatePair& x, double b, StatePair& y) {
  for (std::size_t i = 0; i < y.first.size(); ++i) {
    y.first[i] = x.first[i] + b * y.first[i];
    y.second[i] = x.second[i] + b * y.second[i];
  }
}

StatePair scaled(const StatePair& x, double a) {
  StatePair out = x;
  for (auto& v : out.first) v *= a;
  for (auto& v : out.second) v *= a;
  return out;
}

bool finite(const StatePair& p) {
  auto ok = [](double v) { return std::isfinite(v); };
  return std::all_of(p.first.begin(), p.first.end(), ok) &&
         std::all_of(p.second.begin(), p.second.end(), ok);
}

StatePair terminal_pair(const StateTrajectory& traj, std::size_t m) {
  const auto y = traj.first.slice(m);
  const auto z = traj.second.slice(m);
  return {std::vector<double>(y.begin(), y.end()), std::vector<double>(z.begin(), z.end())};
}

}  // namespace

double inner(const Grid& grid, const StatePair& p, const StatePair& q) {
  return inner(grid, p.first, q.first) + inner(grid, p.second, q.second);
}

double l2_norm(const Grid& grid, const StatePair& p) { return std::sqrt(inner(grid, p, p)); }

void HUMConfig::validate() const {
  if (!(epsilon > 0.0)) throw InvalidArgument("hum: epsilon must be > 0");
  if (!(cg_tol > 0.0 && cg_tol < 1.0)) throw InvalidArgument("hum: cg_tol must lie in (0, 1)");
  if (cg_max_iter == 0) throw InvalidArgument("hum: cg_max_iter must be positive");
  if (weights.log_e32sa.empty()) throw InvalidArgument("hum: weights are not built");
}

Gramian::Gramian(const HUMConfig& cfg, const Coefficients& coeffs, const Grid& grid,
                 const TimeGrid& tgrid)
    : cfg_(cfg), coeffs_(coeffs), grid_(grid), tgrid_(tgrid), mask_(grid.mask(cfg.omega)) {
  cfg.validate();
  if (cfg.weights.log_e32sa.nodes() != grid.size() ||
      cfg.weights.log_e32sa.levels() != tgrid.levels()) {
    throw InvalidArgument("hum: weights were built on different grids");
  }
}

Control Gramian::control_of(const StatePair& p, StateTrajectory* adjoint) const {
  StateTrajectory adj = solve_adjoint(p.first, p.second, coeffs_, grid_, tgrid_);
  if (!adj.first.all_finite() || !adj.second.all_finite()) {
    throw NumericalFailure("gramian/adjoint", "non-finite adjoint state");
  }
  Control f{SpaceTimeField(grid_, tgrid_), mask_};
  for (std::size_t k = 1; k < tgrid_.steps(); ++k) {
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      if (mask_[i] != 0.0) f.f(i, k) = cfg_.weights.e32sa(i, k) * adj.first(i, k);
    }
  }
  if (adjoint) *adjoint = std::move(adj);
  return f;
}

StatePair Gramian::terminal_of(const Control& f) const {
  const std::vector<double> zero(grid_.size(), 0.0);
  const auto traj = solve_forward_linear(zero, zero, f, coeffs_, grid_, tgrid_, cfg_.solver);
  return terminal_pair(traj, tgrid_.steps());
}

StatePair Gramian::apply(const StatePair& p) const {
  StatePair g = terminal_of(control_of(p));
  axpy(cfg_.epsilon, p, g);
  if (!finite(g)) throw NumericalFailure("gramian/forward", "non-finite terminal state");
  return g;
}

StatePair gramian_apply(const StatePair& pT, const HUMConfig& cfg, const Coefficients& coeffs,
                        const Grid& grid, const TimeGrid& tgrid) {
  return Gramian(cfg, coeffs, grid, tgrid).apply(pT);
}

HUMResult hum_solve(std::span<const double> y0, std::span<const double> z0, const HUMConfig& cfg,
                    const Coefficients& coeffs, const Grid& grid, const TimeGrid& tgrid) {
  const Gramian gram(cfg, coeffs, grid, tgrid);
  const std::size_t n = grid.size();
  const std::size_t m = tgrid.steps();

  HUMResult res;
  res.epsilon = cfg.epsilon;
  res.cg_tol = cfg.cg_tol;
  res.kappa = kappa(coeffs.a_norm(), coeffs.B_norm(), tgrid.T());
  res.initial_l2_sum = l2_norm(grid, y0) + l2_norm(grid, z0);

  const auto free_traj = solve_forward_linear(y0, z0, Control{SpaceTimeField(grid, tgrid), gram.mask()},
                                              coeffs, grid, tgrid, cfg.solver);
  const StatePair free_T = terminal_pair(free_traj, m);
  res.free_terminal_l2 = l2_norm(grid, free_T);
  const StatePair b = scaled(free_T, -1.0);
  const double b_norm = res.free_terminal_l2;

  StatePair p = StatePair::zeros(n);
  res.dual_value_history.push_back(0.0);
  res.residual_history.push_back(b_norm);

  auto finalize = [&](HUMResult& out, const StatePair& pT) {
    StateTrajectory adj;
    out.f = gram.control_of(pT, &adj);
    out.traj = solve_forward_linear(y0, z0, out.f, coeffs, grid, tgrid, cfg.solver);
    out.terminal_l2 = l2_norm(grid, terminal_pair(out.traj, m));
    out.f_linf = out.f.f.sup_norm();
    out.f_l2 = std::sqrt(control_pairing(grid, tgrid, out.f.f, out.f.f, out.f.mask));
    out.f_weighted_l2 = control_pairing(grid, tgrid, out.f.f, adj.first, out.f.mask);
    out.phiT_thetaT = pT;
  };

  if (b_norm == 0.0) {
    finalize(res, p);
    return res;
  }

  // The controlled terminal state is -epsilon p - r, so the residual must be
  // small against epsilon |p| as well as |r0| for the optimality identity
  // |x(T)| = epsilon |p| (1 + O(cg_tol)) to hold.
  auto small_enough = [&](double r_norm, const StatePair& pk) {
    return r_norm <= cfg.cg_tol * b_norm && r_norm <= kOptimalitySlack * cfg.cg_tol * cfg.epsilon * l2_norm(grid, pk);
  };
  const double precond = cfg.jacobi ? 1.0 / cfg.epsilon : 1.0;

  std::size_t it = 0;
  StatePair r = b;
  bool converged = false;
  // Restarts recompute the true residual b - G p when the recursive one has
  // met the tolerance.
  for (int restart = 0; restart < 8 && !converged && it < cfg.cg_max_iter; ++restart) {
    if (restart > 0) {
      r = b;
      axpy(-1.0, gram.apply(p), r);
      if (small_enough(l2_norm(grid, r), p)) {
        converged = true;
        break;
      }
    }
    StatePair zr = scaled(r, precond);
    StatePair d = zr;
    double rz = inner(grid, r, zr);
    while (it < cfg.cg_max_iter) {
      const StatePair q = gram.apply(d);
      const double dq = inner(grid, d, q);
      if (!(dq > 0.0) || !std::isfinite(dq)) {
        throw NumericalFailure("cg", "curvature <d, G d> is not positive");
      }
      const double step = rz / dq;
      axpy(step, d, p);
      axpy(-step, q, r);
      ++it;
      const double r_norm = l2_norm(grid, r);
      res.residual_history.push_back(r_norm);
      StatePair bpr = b;
      axpy(1.0, r, bpr);
      res.dual_value_history.push_back(-0.5 * inner(grid, bpr, p));
      if (!std::isfinite(r_norm)) throw NumericalFailure("cg", "non-finite residual");
      if (small_enough(r_norm, p)) break;
      const std::size_t w = cfg.stagnation_window;
      if (res.residual_history.size() > w) {
        const double before = res.residual_history[res.residual_history.size() - 1 - w];
        if (before < 10.0 * r_norm) {
          throw CgStagnation("cg: residual fell less than 10x over " + std::to_string(w) +
                                 " iterations",
                             res.residual_history);
        }
      }
      zr = scaled(r, precond);
      const double rz_new = inner(grid, r, zr);
      xpby(zr, rz_new / rz, d);
      rz = rz_new;
    }
  }
  res.cg_iterations = it;
  if (!converged) {
    StatePair rt = b;
    axpy(-1.0, gram.apply(p), rt);
    converged = small_enough(l2_norm(grid, rt), p);
  }
  finalize(res, p);
  if (!converged) {
    throw CgNotConverged("cg: not converged after " + std::to_string(it) + " iterations", res);
  }
  return res;
}

ControlBoundReport control_bound_report(const HUMResult& result, double a_norm, double B_norm,
                                        double T) {
  ControlBoundReport rep;
  rep.kappa = kappa(a_norm, B_norm, T);
  if (result.initial_l2_sum == 0.0) {
    rep.undefined_ratio = true;
    return rep;
  }
  const double c = std::log(result.f_linf / result.initial_l2_sum) / rep.kappa;
  if (!std::isfinite(c)) {
    rep.non_finite = true;
    return rep;
  }
  rep.c_hat = c;
  return rep;
}

}  // namespace ksc
