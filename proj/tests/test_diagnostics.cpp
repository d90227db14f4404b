#include <cmath>
#include <random>

#include "doctest.h"
#include "kscontrol/diagnostics.hpp"
#include "kscontrol/errors.hpp"
#include "test_support.hpp"

using namespace ksc;
using namespace ksc::testing;

namespace {

const Interval kOmega{0.3, 0.7};

CarlemanWeights practice_weights(const Grid& g, const TimeGrid& tg) {
  const auto beta = build_beta(DomainSpec{}, g);
  ParameterRequest req;
  req.T = tg.T();
  const auto p = select_parameters(req, beta, tg);
  return weight_fields(beta, p.lambda, p.s, tg);
}

CarlemanWeights theory_weights(const Grid& g, const TimeGrid& tg, const Coefficients& c) {
  const auto beta = build_beta(DomainSpec{}, g);
  ParameterRequest req;
  req.a_norm = c.a_norm();
  req.B_norm = c.B_norm();
  req.T = tg.T();
  req.mode = WeightMode::theory;
  const auto p = select_parameters(req, beta, tg);
  return weight_fields(beta, p.lambda, p.s, tg);
}

StateTrajectory zero_trajectory(const Grid& g, const TimeGrid& tg) {
  return {SpaceTimeField(g, tg), SpaceTimeField(g, tg), TrajectoryRole::adjoint};
}

}  // namespace

TEST_CASE("zero adjoint solutions give vanishing inequality terms") {
  const Grid g(0.0, 1.0, 32);
  const TimeGrid tg(0.5, 32);
  const auto w = practice_weights(g, tg);
  const auto mask = g.mask(kOmega);
  const auto o = observability_terms(zero_trajectory(g, tg), w, mask, g, tg);
  CHECK(o.lhs == 0.0);
  CHECK(o.rhs == 0.0);
  const auto c = carleman_terms(zero_trajectory(g, tg), w, mask, g, tg);
  CHECK(c.i1 == 0.0);
  CHECK(c.i2 == 0.0);
  CHECK(c.rhs == 0.0);
}

TEST_CASE("random terminal pairs are unit and reproducible") {
  const Grid g(0.0, 1.0, 50);
  const auto a = random_terminal_pair(7, 3, g);
  const auto b = random_terminal_pair(7, 3, g);
  CHECK(a == b);
  CHECK(l2_norm(g, a) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_FALSE(a == random_terminal_pair(7, 4, g));
  CHECK_FALSE(a == random_terminal_pair(8, 3, g));
}

TEST_CASE("random terminal pairs share their low modes across meshes") {
  const Grid coarse(0.0, 1.0, 33);
  const Grid fine(0.0, 1.0, 65);
  const auto a = random_terminal_pair(11, 2, coarse);
  const auto b = random_terminal_pair(11, 2, fine);
  auto mode = [](const Grid& g, const std::vector<double>& v, int k) {
    return inner(g, v, profile(g, 0.0, 1.0, k));
  };
  // Both samples are normalised, so the shared coefficients differ by one factor.
  const double scale = mode(fine, b.first, 1) / mode(coarse, a.first, 1);
  for (int k = 0; k < 6; ++k) {
    CHECK(mode(fine, b.first, k) == doctest::Approx(scale * mode(coarse, a.first, k)).epsilon(1e-10));
    CHECK(mode(fine, b.second, k) == doctest::Approx(scale * mode(coarse, a.second, k)).epsilon(1e-10));
  }
}

TEST_CASE("observability ratios are finite and deterministic") {
  const Grid g(0.0, 1.0, 64);
  const TimeGrid tg(0.5, 128);
  const auto c = constant_coefficients(g, tg, 0.5, 0.2, Physics{});
  const auto w = practice_weights(g, tg);
  const auto rep = observability_ratio(100, 42, c, w, kOmega, g, tg);
  CHECK(rep.sample_count == 100);
  CHECK(rep.excluded == 0);
  for (const double r : rep.ratios) {
    CHECK(std::isfinite(r));
    CHECK(r > 0.0);
  }
  CHECK(rep.max_ratio >= rep.median_ratio);
  CHECK(rep.empirical_constant == rep.max_ratio);
  CHECK(rep.kappa == kappa(0.5, 0.2, 0.5));
  CHECK(rep.log_max_over_kappa == std::log(rep.max_ratio) / rep.kappa);
  CHECK(observability_ratio(100, 42, c, w, kOmega, g, tg) == rep);
}

TEST_CASE("Carleman and observability maxima are stable under mesh doubling") {
  double obs[2], car[2];
  for (int level = 0; level < 2; ++level) {
    const Grid g(0.0, 1.0, 64u << level);
    const TimeGrid tg(0.5, 128u << level);
    const auto c = constant_coefficients(g, tg, 0.5, 0.2, Physics{});
    const auto w = practice_weights(g, tg);
    obs[level] = observability_ratio(100, 1, c, w, kOmega, g, tg).max_ratio;
    car[level] = carleman_ratio(100, 1, c, w, kOmega, g, tg).max_ratio;
  }
  const double obs_factor = std::max(obs[0] / obs[1], obs[1] / obs[0]);
  const double car_factor = std::max(car[0] / car[1], car[1] / car[0]);
  CHECK(obs_factor < 2.0);
  CHECK(car_factor < 2.0);
}

TEST_CASE("I2 agrees with a slice-by-slice evaluation") {
  const Grid g(0.0, 1.0, 40);
  const TimeGrid tg(0.5, 60);
  const auto c = constant_coefficients(g, tg, 0.0, 0.0, Physics{});
  const auto w = practice_weights(g, tg);
  const auto p = random_terminal_pair(5, 0, g);
  const auto adj = solve_adjoint(p.first, p.second, c, g, tg);
  const double direct = carleman_i2(adj.second, w, g, tg);

  long double acc = 0.0L;
  for (std::size_t k = 1; k < tg.steps(); ++k) {
    const auto theta = adj.second.slice(k);
    const auto d = discrete_derivative(g, theta);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const long double sp = static_cast<long double>(w.s) * w.phi_w(i, k);
      const long double e = std::exp(static_cast<long double>(w.log_e2sa(i, k)));
      acc += static_cast<long double>(tg.dt()) * g.weight(i) * e *
             (sp * d[i] * d[i] + sp * sp * sp * theta[i] * theta[i]);
    }
  }
  CHECK(rel_err(direct, static_cast<double>(acc)) <= 1e-12);
}

TEST_CASE("space-time quadrature is insensitive to summation order") {
  const Grid g(0.0, 1.0, 37);
  const TimeGrid tg(0.5, 53);
  std::mt19937_64 rng(17);
  const auto f = random_field(rng, g, tg);
  const double forward = space_time_integral(g, tg, f);
  double reversed = 0.0;
  for (std::size_t i = g.size(); i-- > 0;) {
    double column = 0.0;
    for (std::size_t k = tg.levels(); k-- > 0;) column += tg.trapezoid_weight(k) * f(i, k);
    reversed += g.weight(i) * column;
  }
  CHECK(rel_err(forward, reversed) <= 1e-13);
  SpaceTimeField one(g, tg, 1.0);
  CHECK(space_time_integral(g, tg, one) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("theory-mode weighted integrals stay finite") {
  const Grid g(0.0, 1.0, 32);
  const TimeGrid tg(0.5, 64);
  const auto c = constant_coefficients(g, tg, 0.5, 0.2, Physics{});
  const auto w = theory_weights(g, tg, c);
  const auto p = random_terminal_pair(3, 0, g);
  const auto adj = solve_adjoint(p.first, p.second, c, g, tg);
  const auto ct = carleman_terms(adj, w, g.mask(kOmega), g, tg);
  const auto ot = observability_terms(adj, w, g.mask(kOmega), g, tg);
  CHECK(std::isfinite(ct.i1));
  CHECK(std::isfinite(ct.i2));
  CHECK(std::isfinite(ct.rhs));
  CHECK(std::isfinite(ot.rhs));
}

TEST_CASE("a vanishing weighted right-hand side is reported") {
  const Grid g(0.0, 1.0, 32);
  const TimeGrid tg(0.5, 32);
  const auto c = constant_coefficients(g, tg, 0.0, 0.0, Physics{});
  const auto w = weight_fields(build_beta(DomainSpec{}, g), 1.0, 1e4, tg);
  CHECK_THROWS_AS(observability_ratio(3, 1, c, w, kOmega, g, tg), DegenerateWeight);
  CHECK_THROWS_AS(observability_ratio(0, 1, c, w, kOmega, g, tg), InvalidArgument);
}

TEST_CASE("decay study table") {
  const Grid g(0.0, 1.0, 48);
  const TimeGrid tg(0.5, 64);
  const auto c = constant_coefficients(g, tg, 0.5, 0.2, Physics{});
  HUMConfig base;
  base.weights = practice_weights(g, tg);
  const auto y0 = profile(g, 0.5, 1.0, 1);
  const auto z0 = profile(g, 0.2, 0.4, 2);

  const std::vector<double> one{1e-4};
  const auto single = decay_study(one, y0, z0, c, base, g, tg);
  CHECK(single.rows.size() == 1);
  CHECK_FALSE(single.slope.has_value());

  const std::vector<double> eps{1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
  const auto t = decay_study(eps, y0, z0, c, base, g, tg);
  REQUIRE(t.rows.size() == eps.size());
  for (std::size_t j = 1; j < t.rows.size(); ++j) {
    CHECK(t.rows[j].terminal_l2 < t.rows[j - 1].terminal_l2);
  }
  REQUIRE(t.slope.has_value());
  CHECK(*t.slope >= 0.35);
  CHECK(*t.slope <= 0.65);
  REQUIRE(t.c_hat_max.has_value());
  for (const auto& row : t.rows) {
    CHECK(row.f_linf <= std::exp(*t.c_hat_max * t.kappa) * t.initial_l2_sum * (1.0 + 1e-12));
  }

  const std::vector<double> rising{1e-6, 1e-4};
  CHECK_THROWS_AS(decay_study(rising, y0, z0, c, base, g, tg), InvalidArgument);
}

TEST_CASE("slope fit recovers an exact power law") {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.0};
  const std::vector<double> y{1.0, 1.5, 2.0, 2.5};
  CHECK(fit_slope(x, y) == doctest::Approx(0.5).epsilon(1e-15));
}
