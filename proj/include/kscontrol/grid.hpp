#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ksc {

/// Open interval (lo, hi) on the real line.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const noexcept { return lo < x && x < hi; }
  double midpoint() const noexcept { return 0.5 * (lo + hi); }
  double length() const noexcept { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

/// Uniform node-centred mesh on [x_lo, x_hi] with n nodes including both
/// boundary nodes. The dual cells of the boundary nodes have half width, so
/// the quadrature weights are h/2 at the ends and h elsewhere.
class Grid {
 public:
  static constexpr std::size_t kMinNodes = 8;

  Grid(double x_lo, double x_hi, std::size_t n);

  std::size_t size() const noexcept { return n_; }
  std::size_t faces() const noexcept { return n_ - 1; }
  double h() const noexcept { return h_; }
  double x_lo() const noexcept { return x_lo_; }
  double x_hi() const noexcept { return x_hi_; }
  double x(std::size_t i) const noexcept { return x_lo_ + h_ * static_cast<double>(i); }
  double weight(std::size_t i) const noexcept { return weights_[i]; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::vector<double> nodes() const;

  /// Indicator of the nodes lying strictly inside `region`.
  std::vector<double> mask(const Interval& region) const;
  std::size_t count_inside(const Interval& region) const;

 private:
  double x_lo_;
  double x_hi_;
  std::size_t n_;
  double h_;
  std::vector<double> weights_;
};

/// Uniform time mesh t_k = k dt, k = 0..m, with m dt = T.
class TimeGrid {
 public:
  TimeGrid(double T, std::size_t m);

  std::size_t steps() const noexcept { return m_; }
  std::size_t levels() const noexcept { return m_ + 1; }
  double dt() const noexcept { return dt_; }
  double T() const noexcept { return T_; }
  double t(std::size_t k) const noexcept {
    return k == m_ ? T_ : dt_ * static_cast<double>(k);
  }
  /// Trapezoid weights in time: dt/2 at the endpoints, dt inside.
  double trapezoid_weight(std::size_t k) const noexcept {
    return (k == 0 || k == m_) ? 0.5 * dt_ : dt_;
  }

 private:
  double T_;
  std::size_t m_;
  double dt_;
};

/// Scalar samples over (node, time level), stored one time slice after another.
class SpaceTimeField {
 public:
  SpaceTimeField() = default;
  SpaceTimeField(std::size_t nodes, std::size_t levels, double value = 0.0)
      : nodes_(nodes), levels_(levels), data_(nodes * levels, value) {}
  SpaceTimeField(const Grid& grid, const TimeGrid& tgrid, double value = 0.0)
      : SpaceTimeField(grid.size(), tgrid.levels(), value) {}

  std::size_t nodes() const noexcept { return nodes_; }
  std::size_t levels() const noexcept { return levels_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t k) noexcept { return data_[k * nodes_ + i]; }
  double operator()(std::size_t i, std::size_t k) const noexcept { return data_[k * nodes_ + i]; }

  std::span<double> slice(std::size_t k) noexcept { return {data_.data() + k * nodes_, nodes_}; }
  std::span<const double> slice(std::size_t k) const noexcept {
    return {data_.data() + k * nodes_, nodes_};
  }
  void set_slice(std::size_t k, std::span<const double> values);

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  /// max |entry| over the whole field.
  double sup_norm() const noexcept;
  bool all_finite() const noexcept;

  bool operator==(const SpaceTimeField&) const = default;

 private:
  std::size_t nodes_ = 0;
  std::size_t levels_ = 0;
  std::vector<double> data_;
};

/// Discrete L2(Omega) inner product with the node weights of `grid`.
double inner(const Grid& grid, std::span<const double> u, std::span<const double> v);
double l2_norm(const Grid& grid, std::span<const double> u);
double sup_norm(std::span<const double> u) noexcept;

}  // namespace ksc
