#include "kscontrol/tridiag.hpp"

#include "kscontrol/errors.hpp"

namespace ksc {

Tridiagonal Tridiagonal::transposed() const {
  const std::size_t n = size();
  Tridiagonal t(n);
  t.diag = diag;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    t.upper[i] = lower[i + 1];
    t.lower[i + 1] = upper[i];
  }
  return t;
}

void Tridiagonal::multiply(std::span<const double> x, std::span<double> y) const {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    double v = diag[i] * x[i];
    if (i > 0) v += lower[i] * x[i - 1];
    if (i + 1 < n) v += upper[i] * x[i + 1];
    y[i] = v;
  }
}

void solve_tridiagonal(const Tridiagonal& a, std::span<double> rhs, std::vector<double>& scratch) {
  const std::size_t n = a.size();
  if (rhs.size() != n) throw InvalidArgument("solve_tridiagonal: size mismatch");
  scratch.resize(n);
  double pivot = a.diag[0];
  if (pivot == 0.0) throw NumericalFailure("tridiagonal", "zero pivot");
  scratch[0] = a.upper[0] / pivot;
  rhs[0] /= pivot;
  for (std::size_t i = 1; i < n; ++i) {
    pivot = a.diag[i] - a.lower[i] * scratch[i - 1];
    if (pivot == 0.0) throw NumericalFailure("tridiagonal", "zero pivot");
    scratch[i] = (i + 1 < n) ? a.upper[i] / pivot : 0.0;
    rhs[i] = (rhs[i] - a.lower[i] * rhs[i - 1]) / pivot;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= scratch[i] * rhs[i + 1];
}

}  // namespace ksc
