#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ksc {

/// Tridiagonal matrix stored by bands. lower[0] and upper[n-1] are unused.
struct Tridiagonal {
  std::vector<double> lower;
  std::vector<double> diag;
  std::vector<double> upper;

  explicit Tridiagonal(std::size_t n = 0) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}

  std::size_t size() const noexcept { return diag.size(); }
  Tridiagonal transposed() const;
  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;
};

/// Thomas algorithm without pivoting; the systems assembled by the solvers are
/// diagonally dominant. Solves in place: on return `rhs` holds the solution.
void solve_tridiagonal(const Tridiagonal& a, std::span<double> rhs, std::vector<double>& scratch);

}  // namespace ksc
