#include "doctest.h"

#include <cmath>

#include "gci/chernoff.hpp"
#include "gci/error.hpp"
#include "gci/rng.hpp"

using namespace gci;

TEST_CASE("Gaussian shift: rho = delta^2 / 8") {
  auto ga = make_gaussian();
  for (double d : {0.5, 1.0, 2.0}) {
    const auto r = pairwise_index(ga, {0.0}, ga, {d});
    CHECK(std::abs(r.rho - d * d / 8) < 1e-6);
    CHECK(r.z_star == doctest::Approx(0.5).epsilon(1e-6));
  }
}

TEST_CASE("symmetric Bernoulli pair: rho = -log(2 sqrt(pq))") {
  auto be = make_bernoulli();
  for (double p : {0.1, 0.3, 0.45}) {
    const auto r = pairwise_index(be, {p}, be, {1 - p});
    CHECK(std::abs(r.rho + std::log(2 * std::sqrt(p * (1 - p)))) < 1e-6);
  }
}

TEST_CASE("identical laws give zero") {
  auto ex = make_exponential();
  CHECK(pairwise_index(ex, {2.0}, ex, {2.0}).rho == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("swap symmetry") {
  CounterRng rng(4, 0);
  auto ln = make_lognormal(), ex = make_exponential(), po = make_poisson(), ge = make_geometric();
  for (int i = 0; i < 10; ++i) {
    const double t = std::exp(2 * rng.uniform() - 1), g = std::exp(2 * rng.uniform() - 1);
    const auto a = pairwise_index(ln, {t}, ex, {g});
    const auto b = pairwise_index(ex, {g}, ln, {t});
    CHECK(std::abs(a.rho - b.rho) < 1e-6);
    CHECK(std::abs(a.z_star - (1 - b.z_star)) < 1e-4);
    const auto c = pairwise_index(po, {t}, ge, {g});
    const auto d = pairwise_index(ge, {g}, po, {t});
    CHECK(std::abs(c.rho - d.rho) < 1e-6);
  }
}

TEST_CASE("rate function: Legendre transform properties") {
  auto spec = LogMgfSpec::pairwise(make_lognormal(), {1.28}, make_exponential(), {1.72});
  const auto r = pairwise_index(spec.gfam, spec.g_params, spec.hfam, spec.h_params);
  CHECK(std::abs(rate_function(spec, 0.0) - r.rho) < 1e-8);
  const double mean = expected_log_ratio(spec);
  CHECK(std::abs(rate_function(spec, mean)) < 1e-8);

  // Slopes strictly inside (Lambda'(0), Lambda'(1)).
  const double top = log_mgf_deriv(spec, 1.0, 1);
  CounterRng rng(8, 0);
  for (int i = 0; i < 20; ++i) {
    const double a = mean + 0.95 * (top - mean) * rng.uniform(), b = mean + 0.95 * (top - mean) * rng.uniform();
    const double fa = rate_function(spec, a), fb = rate_function(spec, b);
    const double fm = rate_function(spec, 0.5 * (a + b));
    CHECK(fm <= 0.5 * (fa + fb) + 1e-9);
    CHECK(fa >= -1e-12);
  }
}

TEST_CASE("rate function outside the attainable slopes") {
  // Bernoulli log-ratio takes two values, so Lambda' ranges over an open interval.
  auto be = make_bernoulli();
  auto spec = LogMgfSpec::pairwise(be, {0.3}, be, {0.6});
  const double hi = std::log(0.6 / 0.3);
  CHECK_THROWS_AS(rate_function(spec, hi + 0.5), RangeError);
  try {
    rate_function(spec, hi + 0.5);
  } catch (const RangeError& e) {
    CHECK(e.attainable_upper() == doctest::Approx(hi).epsilon(1e-6));
  }
}

TEST_CASE("generalized index on Example 1") {
  auto ln = make_lognormal(), ex = make_exponential();
  const auto r = generalized_index(ln, ln->space(), ex, ex->space());
  CHECK(r.rho == doctest::Approx(0.0197680).epsilon(1e-4));
  CHECK(r.theta_star[0] == doctest::Approx(1.28).epsilon(0.01));
  CHECK(r.gamma_star[0] == doctest::Approx(1.72).epsilon(0.01));
  CHECK(r.diagnostics.separated);
  CHECK_FALSE(r.diagnostics.boundary_flag);

  SUBCASE("upper-bound dominance on random probes") {
    CounterRng rng(17, 0);
    for (int i = 0; i < 50; ++i) {
      const double t = std::exp(std::log(0.01) + rng.uniform() * std::log(5000.0));
      const double g = std::exp(std::log(0.01) + rng.uniform() * std::log(5000.0));
      CHECK(r.rho <= pairwise_index(ln, {t}, ex, {g}).rho + 1e-7);
    }
  }
  SUBCASE("worker count does not change the answer") {
    IndexConfig c;
    c.threads = 4;
    const auto r4 = generalized_index(ln, ln->space(), ex, ex->space(), c);
    CHECK(r4.rho == r.rho);
    CHECK(r4.theta_star == r.theta_star);
    CHECK(r4.gamma_star == r.gamma_star);
  }
}

TEST_CASE("generalized index on Example 2 with and without truncation") {
  auto po = make_poisson(), ge = make_geometric();
  const auto r = generalized_index(po, ParamBox({1.0}, {50.0}, {false}, {true}), ge,
                                   ParamBox({0.5}, {50.0}, {true}, {true}));
  CHECK(r.rho == doctest::Approx(0.0227351).epsilon(1e-4));
  CHECK(r.theta_star[0] == 1.0);
  CHECK(r.gamma_star[0] == doctest::Approx(0.93).epsilon(0.01));

  // Boxes reaching towards 0: the two laws merge at the origin.
  const auto z = generalized_index(po, po->space(), ge, ge->space());
  CHECK(z.rho < 1e-3);
  CHECK(z.theta_star[0] < 0.05);
  CHECK(z.gamma_star[0] < 0.05);
  CHECK(z.diagnostics.boundary_flag);
  CHECK_FALSE(z.diagnostics.warnings.empty());
}

TEST_CASE("contour grid") {
  auto ln = make_lognormal(), ex = make_exponential();
  const auto one = contour_grid(ln, ex, {1.28}, {1.72});
  REQUIRE(one.rho.size() == 1);
  CHECK(one.rho[0][0] == doctest::Approx(0.020).epsilon(0.05));

  auto ga = make_gaussian();
  const auto diag = contour_grid(ga, ga, {-1.0, 0.0, 1.0}, {-1.0, 0.0, 1.0});
  for (int i = 0; i < 3; ++i) CHECK(diag.rho[i][i] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(diag.rho[0][2] == doctest::Approx(0.5).epsilon(1e-6));

  const auto grid = contour_grid(ln, ex, make_axis(0.5, 4, 15, true), make_axis(0.5, 4, 15, true));
  const auto gen = generalized_index(ln, ParamBox({0.5}, {4.0}), ex, ParamBox({0.5}, {4.0}));
  double mn = 1e9;
  for (const auto& row : grid.rho)
    for (double v : row) mn = std::min(mn, v);
  CHECK(mn >= gen.rho - 1e-9);
  CHECK(grid.theta_axis.size() == 15);
}

TEST_CASE("multi-family rate") {
  auto ga = make_gaussian();
  std::vector<FamilyEntry> fams = {{ga, ParamBox::point({0.0}), "N0"},
                                   {ga, ParamBox::point({1.0}), "N1"},
                                   {ga, ParamBox::point({3.0}), "N3"}};
  const auto r = multi_family_rate(fams);
  CHECK(r.rho == doctest::Approx(0.125).epsilon(1e-6));
  CHECK(r.worst_pair == std::pair<std::size_t, std::size_t>{0, 1});
  CHECK(r.pairs.size() == 3);

  auto ln = make_lognormal(), ex = make_exponential();
  std::vector<FamilyEntry> two = {{ln, ln->space(), "ln"}, {ex, ex->space(), "ex"}};
  const auto k2 = multi_family_rate(two);
  CHECK(k2.rho == generalized_index(ln, ln->space(), ex, ex->space()).rho);

  // Example 1 pair plus a far-away third family.
  std::vector<FamilyEntry> three = {{ln, ParamBox({0.01}, {5.0}), "ln"},
                                    {ex, ex->space(), "ex"},
                                    {ln, ParamBox({45.0}, {50.0}), "ln-wide"}};
  const auto r3 = multi_family_rate(three);
  CHECK(r3.rho == doctest::Approx(k2.rho).epsilon(1e-6));
  CHECK(r3.worst_pair == std::pair<std::size_t, std::size_t>{0, 1});
}
