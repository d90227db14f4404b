#include "kscontrol/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kscontrol/errors.hpp"

namespace ksc {

Grid::Grid(double x_lo, double x_hi, std::size_t n) : x_lo_(x_lo), x_hi_(x_hi), n_(n) {
  if (!(x_lo < x_hi) || !std::isfinite(x_lo) || !std::isfinite(x_hi)) {
    throw InvalidArgument("grid: require finite x_lo < x_hi");
  }
  if (n < kMinNodes) {
    throw InvalidArgument("grid: need at least " + std::to_string(kMinNodes) + " nodes, got " +
                          std::to_string(n));
  }
  h_ = (x_hi - x_lo) / static_cast<double>(n - 1);
  weights_.assign(n, h_);
  weights_.front() = 0.5 * h_;
  weights_.back() = 0.5 * h_;
}

std::vector<double> Grid::nodes() const {
  std::vector<double> xs(n_);
  for (std::size_t i = 0; i < n_; ++i) xs[i] = x(i);
  xs.back() = x_hi_;
  return xs;
}

std::vector<double> Grid::mask(const Interval& region) const {
  std::vector<double> out(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    if (region.contains(x(i))) out[i] = 1.0;
  }
  return out;
}

std::size_t Grid::count_inside(const Interval& region) const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n_; ++i) count += region.contains(x(i)) ? 1 : 0;
  return count;
}

TimeGrid::TimeGrid(double T, std::size_t m) : T_(T), m_(m) {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("time grid: T must be > 0");
  if (m < 2) throw InvalidArgument("time grid: need at least 2 steps");
  dt_ = T / static_cast<double>(m);
}

void SpaceTimeField::set_slice(std::size_t k, std::span<const double> values) {
  if (values.size() != nodes_) throw InvalidArgument("set_slice: size mismatch");
  std::copy(values.begin(), values.end(), data_.begin() + static_cast<std::ptrdiff_t>(k * nodes_));
}

double SpaceTimeField::sup_norm() const noexcept { return ksc::sup_norm(data_); }

bool SpaceTimeField::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double inner(const Grid& grid, std::span<const double> u, std::span<const double> v) {
  if (u.size() != grid.size() || v.size() != grid.size()) {
    throw InvalidArgument("inner: size mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += grid.weight(i) * u[i] * v[i];
  return acc;
}

double l2_norm(const Grid& grid, std::span<const double> u) { return std::sqrt(inner(grid, u, u)); }

double sup_norm(std::span<const double> u) noexcept {
  double m = 0.0;
  for (double v : u) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace ksc
