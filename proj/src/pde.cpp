#include "kscontrol/pde.hpp"

#include <algorithm>
#include <cmath>

#include "kscontrol/errors.hpp"

namespace ksc {
namespace {

// I - dt div(grad y - b_face avg(y)) + dt*reaction*I.
Tridiagonal assemble_step_matrix(const Grid& grid, double dt, std::span<const double> face_drift,
                                 double reaction) {
  const std::size_t n = grid.size();
  const double h = grid.h();
  Tridiagonal A(n);
  for (std::size_t i = 0; i < n; ++i) A.diag[i] = 1.0 + dt * reaction;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double b = face_drift.empty() ? 0.0 : face_drift[j];
    const double c_minus = -1.0 / h - 0.5 * b;  // coefficient of y_j in F_j
    const double c_plus = 1.0 / h - 0.5 * b;    // coefficient of y_{j+1} in F_j
    // +F_j enters row j, -F_j enters row j+1.
    const double wl = grid.weight(j);
    const double wr = grid.weight(j + 1);
    A.diag[j] -= dt * c_minus / wl;
    A.upper[j] -= dt * c_plus / wl;
    A.lower[j + 1] += dt * c_minus / wr;
    A.diag[j + 1] += dt * c_plus / wr;
  }
  return A;
}

void check_guard(std::size_t k, std::span<const double> u, std::span<const double> v,
                 double guard) {
  double mag = 0.0;
  for (double x : u) {
    if (!std::isfinite(x)) throw BlowUpDetected(k, x);
    mag = std::max(mag, std::abs(x));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw BlowUpDetected(k, x);
    mag = std::max(mag, std::abs(x));
  }
  if (mag > guard) throw BlowUpDetected(k, mag);
}

void check_initial(const Grid& grid, std::span<const double> a, std::span<const double> b) {
  if (a.size() != grid.size() || b.size() != grid.size()) {
    throw InvalidArgument("initial/terminal data size does not match the grid");
  }
  auto finite = [](double x) { return std::isfinite(x); };
  if (!std::all_of(a.begin(), a.end(), finite) || !std::all_of(b.begin(), b.end(), finite)) {
    throw InvalidArgument("initial/terminal data must be finite");
  }
}

void check_control(const Control& control, const Grid& grid, const TimeGrid& tgrid) {
  if (control.f.nodes() != grid.size() || control.f.levels() != tgrid.levels() ||
      control.mask.size() != grid.size()) {
    throw InvalidArgument("control dimensions do not match the grids");
  }
}

}  // namespace

void Coefficients::validate(const Grid& grid, const TimeGrid& tgrid) const {
  if (a.nodes() != grid.size() || a.levels() != tgrid.levels() || B.nodes() != grid.size() ||
      B.levels() != tgrid.levels()) {
    throw InvalidArgument("coefficients: field dimensions do not match the grids");
  }
  if (!a.all_finite() || !B.all_finite()) throw InvalidArgument("coefficients: non-finite entry");
  for (std::size_t k = 0; k < B.levels(); ++k) {
    if (B(0, k) != 0.0 || B(B.nodes() - 1, k) != 0.0) {
      throw InvalidArgument("coefficients: B must vanish at the boundary nodes");
    }
  }
  if (!(physics.gamma > 0.0) || !(physics.delta >= 0.0) || !(physics.chi >= 0.0)) {
    throw InvalidArgument("coefficients: need gamma > 0, delta >= 0, chi >= 0");
  }
}

Coefficients constant_coefficients(const Grid& grid, const TimeGrid& tgrid, double a, double B,
                                   const Physics& physics) {
  Coefficients c{SpaceTimeField(grid, tgrid, a), SpaceTimeField(grid, tgrid, B), physics};
  for (std::size_t k = 0; k < tgrid.levels(); ++k) {
    c.B(0, k) = 0.0;
    c.B(grid.size() - 1, k) = 0.0;
  }
  return c;
}

Control Control::zero(const Grid& grid, const TimeGrid& tgrid, const Interval& omega) {
  return Control{SpaceTimeField(grid, tgrid), grid.mask(omega)};
}

void Control::restrict_to_support() {
  for (std::size_t k = 0; k < f.levels(); ++k) {
    for (std::size_t i = 0; i < f.nodes(); ++i) f(i, k) *= mask[i];
  }
}

StateTrajectory solve_forward_nonlinear(std::span<const double> u0, std::span<const double> v0,
                                        const Control& control, const Physics& physics,
                                        const Grid& grid, const TimeGrid& tgrid,
                                        const SolverOptions& options) {
  check_initial(grid, u0, v0);
  check_control(control, grid, tgrid);
  const std::size_t n = grid.size();
  const double dt = tgrid.dt();
  const double h = grid.h();

  StateTrajectory out{SpaceTimeField(grid, tgrid), SpaceTimeField(grid, tgrid),
                      TrajectoryRole::state};
  out.first.set_slice(0, u0);
  out.second.set_slice(0, v0);
  check_guard(0, u0, v0, options.blowup_guard);

  const Tridiagonal reaction = assemble_step_matrix(grid, dt, {}, physics.gamma);
  std::vector<double> drift(n - 1);
  std::vector<double> u(u0.begin(), u0.end());
  std::vector<double> v(v0.begin(), v0.end());
  std::vector<double> scratch, au(n), du(n);

  for (std::size_t k = 1; k <= tgrid.steps(); ++k) {
    for (std::size_t j = 0; j + 1 < n; ++j) drift[j] = physics.chi * (v[j + 1] - v[j]) / h;
    const Tridiagonal transport = assemble_step_matrix(grid, dt, drift, 0.0);
    const auto fk = control.f.slice(k);
    transport.multiply(u, au);
    for (std::size_t i = 0; i < n; ++i) du[i] = u[i] - au[i] + dt * control.mask[i] * fk[i];
    solve_tridiagonal(transport, du, scratch);
    for (std::size_t i = 0; i < n; ++i) u[i] += du[i];
    reaction.multiply(v, au);
    for (std::size_t i = 0; i < n; ++i) du[i] = v[i] - au[i] + dt * physics.delta * u[i];
    solve_tridiagonal(reaction, du, scratch);
    for (std::size_t i = 0; i < n; ++i) v[i] += du[i];
    check_guard(k, u, v, options.blowup_guard);
    out.first.set_slice(k, u);
    out.second.set_slice(k, v);
  }
  return out;
}

LinearPropagator::LinearPropagator(const Coefficients& coeffs, const Grid& grid,
                                   const TimeGrid& tgrid)
    : coeffs_(coeffs), grid_(grid), tgrid_(tgrid) {
  coeffs.validate(grid, tgrid);
  reaction_ = assemble_step_matrix(grid, tgrid.dt(), {}, coeffs.physics.gamma);
  work_.resize(grid.size());
}

void LinearPropagator::assemble_drift(std::size_t k) {
  const std::size_t n = grid_.size();
  std::vector<double> face(n - 1);
  const auto B = coeffs_.B.slice(k - 1);
  for (std::size_t j = 0; j + 1 < n; ++j) face[j] = 0.5 * (B[j] + B[j + 1]);
  drift_ = assemble_step_matrix(grid_, tgrid_.dt(), face, 0.0);
  drift_t_ = drift_.transposed();
}

void LinearPropagator::coupling(std::size_t k, std::span<const double> z,
                                std::span<double> out) const {
  const std::size_t n = grid_.size();
  const double h = grid_.h();
  const auto a = coeffs_.a.slice(k);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double flux = 0.5 * (a[j] + a[j + 1]) * (z[j + 1] - z[j]) / h;
    out[j] += flux / grid_.weight(j);
    out[j + 1] -= flux / grid_.weight(j + 1);
  }
}

void LinearPropagator::advance(std::size_t k, std::span<double> y, std::span<double> z,
                               std::span<const double> f_masked) {
  const std::size_t n = grid_.size();
  const double dt = tgrid_.dt();
  assemble_drift(k);
  // Direct form: with dt/h^2 large, y - A y cancels and the increment form
  // loses digits that the transposed solve in retreat() does not.
  coupling(k, z, work_);
  for (std::size_t i = 0; i < n; ++i) y[i] += dt * (f_masked[i] - work_[i]);
  solve_tridiagonal(drift_, y, scratch_);
  for (std::size_t i = 0; i < n; ++i) z[i] += dt * coeffs_.physics.delta * y[i];
  solve_tridiagonal(reaction_, z, scratch_);
}

void LinearPropagator::retreat(std::size_t k, std::span<double> phi, std::span<double> theta) {
  const std::size_t n = grid_.size();
  const double dt = tgrid_.dt();
  if (k < tgrid_.steps()) {
    coupling(k + 1, phi, work_);
    for (std::size_t i = 0; i < n; ++i) theta[i] -= dt * work_[i];
  }
  // The reaction operator is self-adjoint in the weighted inner product.
  solve_tridiagonal(reaction_, theta, scratch_);
  assemble_drift(k);
  for (std::size_t i = 0; i < n; ++i) {
    phi[i] = grid_.weight(i) * (phi[i] + dt * coeffs_.physics.delta * theta[i]);
  }
  solve_tridiagonal(drift_t_, phi, scratch_);
  for (std::size_t i = 0; i < n; ++i) phi[i] /= grid_.weight(i);
}

void LinearPropagator::finish(std::span<const double> phi1, std::span<double> theta) {
  coupling(1, phi1, work_);
  for (std::size_t i = 0; i < grid_.size(); ++i) theta[i] -= tgrid_.dt() * work_[i];
}

StateTrajectory solve_forward_linear(std::span<const double> y0, std::span<const double> z0,
                                     const Control& control, const Coefficients& coeffs,
                                     const Grid& grid, const TimeGrid& tgrid,
                                     const SolverOptions& options) {
  check_initial(grid, y0, z0);
  check_control(control, grid, tgrid);
  const std::size_t n = grid.size();
  LinearPropagator prop(coeffs, grid, tgrid);

  StateTrajectory out{SpaceTimeField(grid, tgrid), SpaceTimeField(grid, tgrid),
                      TrajectoryRole::perturbation};
  out.first.set_slice(0, y0);
  out.second.set_slice(0, z0);
  check_guard(0, y0, z0, options.blowup_guard);
  std::vector<double> y(y0.begin(), y0.end());
  std::vector<double> z(z0.begin(), z0.end());
  std::vector<double> fk(n);
  for (std::size_t k = 1; k <= tgrid.steps(); ++k) {
    const auto f = control.f.slice(k);
    for (std::size_t i = 0; i < n; ++i) fk[i] = control.mask[i] * f[i];
    prop.advance(k, y, z, fk);
    check_guard(k, y, z, options.blowup_guard);
    out.first.set_slice(k, y);
    out.second.set_slice(k, z);
  }
  return out;
}

StateTrajectory solve_adjoint(std::span<const double> phiT, std::span<const double> thetaT,
                              const Coefficients& coeffs, const Grid& grid,
                              const TimeGrid& tgrid) {
  if (phiT.size() != grid.size() || thetaT.size() != grid.size()) {
    throw InvalidArgument("solve_adjoint: terminal data size does not match the grid");
  }
  check_initial(grid, phiT, thetaT);
  LinearPropagator prop(coeffs, grid, tgrid);
  StateTrajectory out{SpaceTimeField(grid, tgrid), SpaceTimeField(grid, tgrid),
                      TrajectoryRole::adjoint};
  std::vector<double> phi(phiT.begin(), phiT.end());
  std::vector<double> theta(thetaT.begin(), thetaT.end());
  for (std::size_t k = tgrid.steps(); k >= 1; --k) {
    prop.retreat(k, phi, theta);
    out.first.set_slice(k, phi);
    out.second.set_slice(k, theta);
  }
  prop.finish(phi, theta);
  out.first.set_slice(0, phi);
  out.second.set_slice(0, theta);
  return out;
}

double control_pairing(const Grid& grid, const TimeGrid& tgrid, const SpaceTimeField& f,
                       const SpaceTimeField& g, std::span<const double> mask) {
  double acc = 0.0;
  for (std::size_t k = 1; k < tgrid.levels(); ++k) {
    double slice = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      slice += grid.weight(i) * mask[i] * f(i, k) * g(i, k);
    }
    acc += tgrid.dt() * slice;
  }
  return acc;
}

double mass(const Grid& grid, std::span<const double> u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += grid.weight(i) * u[i];
  return acc;
}

std::vector<double> neumann_gradient(const Grid& grid, std::span<const double> v) {
  const std::size_t n = grid.size();
  const double h = grid.h();
  std::vector<double> g(n);
  g[0] = (v[1] - v[0]) / h;
  g[n - 1] = (v[n - 1] - v[n - 2]) / h;
  for (std::size_t i = 1; i + 1 < n; ++i) g[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
  g[0] = 0.0;
  g[n - 1] = 0.0;
  return g;
}

namespace {

ComponentNorms component_norms(const SpaceTimeField& u, const Grid& grid,
                               const TimeGrid& tgrid) {
  ComponentNorms c;
  double l2 = 0.0;
  double h1 = 0.0;
  for (std::size_t k = 0; k < tgrid.levels(); ++k) {
    const auto s = u.slice(k);
    double grad2 = 0.0;
    for (std::size_t j = 0; j + 1 < s.size(); ++j) {
      const double g = (s[j + 1] - s[j]) / grid.h();
      grad2 += grid.h() * g * g;
    }
    const double val2 = inner(grid, s, s);
    l2 += tgrid.trapezoid_weight(k) * val2;
    h1 += tgrid.trapezoid_weight(k) * (val2 + grad2);
  }
  c.l2_q = std::sqrt(l2);
  c.l2_h1 = std::sqrt(h1);
  c.linf_q = u.sup_norm();
  c.terminal_l2 = l2_norm(grid, u.slice(tgrid.steps()));
  c.initial_l2 = l2_norm(grid, u.slice(0));
  return c;
}

}  // namespace

NormReport state_norms(const StateTrajectory& traj, const Grid& grid, const TimeGrid& tgrid) {
  NormReport r;
  r.first = component_norms(traj.first, grid, tgrid);
  r.second = component_norms(traj.second, grid, tgrid);
  r.terminal_pair_l2 = std::hypot(r.first.terminal_l2, r.second.terminal_l2);
  return r;
}

}  // namespace ksc
