#include "doctest.h"

#include <cmath>
#include <numeric>

#include "gci/error.hpp"
#include "gci/families.hpp"
#include "oracles.hpp"

using namespace gci;

namespace {

struct Case {
  FamilyPtr fam;
  std::vector<double> params;
};

std::vector<Case> cases() {
  return {{make_lognormal(), {0.3}},   {make_lognormal(), {2.5}},     {make_exponential(), {0.7}},
          {make_exponential(), {12.0}}, {make_poisson(), {0.4}},       {make_poisson(), {30.0}},
          {make_geometric(), {0.5}},    {make_geometric(), {20.0}},    {make_gaussian(), {-1.5}},
          {make_bernoulli(), {0.2}}};
}

}  // namespace

TEST_CASE("densities match textbook formulas") {
  auto ln = make_lognormal(), ex = make_exponential(), po = make_poisson(), ge = make_geometric(),
       ga = make_gaussian(), be = make_bernoulli();
  for (double x : {0.01, 0.5, 1.0, 3.0, 40.0}) {
    CHECK(ln->log_density(std::vector{1.3}, x) == doctest::Approx(oracle::lognormal_logpdf(1.3, x)).epsilon(1e-13));
    CHECK(ex->log_density(std::vector{2.0}, x) == doctest::Approx(oracle::exponential_logpdf(2.0, x)).epsilon(1e-13));
    CHECK(ga->log_density(std::vector{0.4}, x) == doctest::Approx(oracle::normal_logpdf(0.4, x)).epsilon(1e-13));
  }
  for (double k : {0.0, 1.0, 7.0, 60.0}) {
    CHECK(po->log_density(std::vector{3.5}, k) == doctest::Approx(oracle::poisson_logpmf(3.5, k)).epsilon(1e-13));
    CHECK(ge->log_density(std::vector{0.93}, k) == doctest::Approx(oracle::geometric_logpmf(0.93, k)).epsilon(1e-13));
  }
  CHECK(be->log_density(std::vector{0.3}, 1.0) == doctest::Approx(std::log(0.3)));
  CHECK(be->log_density(std::vector{0.3}, 0.0) == doctest::Approx(std::log(0.7)));
}

TEST_CASE("every family is a probability law") {
  for (const auto& c : cases()) {
    INFO(c.fam->id() << " " << c.params[0]);
    CHECK(std::abs(log_total_mass(*c.fam, c.params)) < 1e-9);
  }
}

TEST_CASE("domain and parameter errors") {
  auto ex = make_exponential();
  CHECK_THROWS_AS(ex->log_density(std::vector{1.0}, -1.0), DomainError);
  CHECK_THROWS_AS(ex->log_density(std::vector{-1.0}, 1.0), ParameterError);
  CHECK_THROWS_AS(ex->log_density(std::vector{1.0, 2.0}, 1.0), ParameterError);
  CHECK_THROWS_AS(make_poisson()->log_density(std::vector{1.0}, 1.5), DomainError);
  CHECK_THROWS_AS(make_family("weibull"), ParameterError);
  CHECK(make_family("gaussian")->id() == "gaussian-linear");
  CHECK(family_ids().size() >= 5);
}

TEST_CASE("sample moments match the family moments") {
  for (const auto& c : cases()) {
    INFO(c.fam->id() << " " << c.params[0]);
    const auto xs = c.fam->sample(c.params, 100000, 11);
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    const double sd = std::sqrt(c.fam->variance(c.params) / static_cast<double>(xs.size()));
    CHECK(std::abs(m - c.fam->mean(c.params)) < 5.0 * sd);
    for (double x : xs) REQUIRE(c.fam->support().contains(x));
  }
}

TEST_CASE("closed-form MLE agrees with numeric maximisation and box clipping") {
  for (const auto& c : cases()) {
    INFO(c.fam->id());
    const auto xs = c.fam->sample(c.params, 400, 3);
    const auto closed = c.fam->mle(xs);
    const auto numeric = c.fam->mle_numeric(xs, c.fam->space());
    CHECK(c.fam->log_likelihood(closed, xs) >= c.fam->log_likelihood(numeric, xs) - 1e-7);
  }
  auto po = make_poisson();
  std::vector<double> zeros(10, 0.0);
  zeros[0] = 2.0;  // mean 0.2
  const auto m = po->mle(zeros, ParamBox({1.0}, {50.0}));
  CHECK(m[0] == 1.0);
}

TEST_CASE("scores match finite differences") {
  for (const auto& c : cases()) {
    INFO(c.fam->id());
    const auto xs = c.fam->sample(c.params, 5, 8);
    for (double x : xs) {
      double s = 0.0;
      c.fam->score(c.params, x, std::span<double>(&s, 1));
      const double h = 1e-6 * std::max(1.0, std::abs(c.params[0]));
      const double fd = (c.fam->log_density(std::vector{c.params[0] + h}, x) -
                         c.fam->log_density(std::vector{c.params[0] - h}, x)) /
                        (2 * h);
      CHECK(s == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("KL divergence: Gaussian shift and a quadrature oracle") {
  auto ga = make_gaussian();
  CHECK(kl_divergence(*ga, std::vector{0.0}, *ga, std::vector{1.5}) == doctest::Approx(1.125).epsilon(1e-10));

  auto ln = make_lognormal(), ex = make_exponential();
  const double theta = 1.28, gamma = 1.72;
  const double ref = oracle::integrate([&](double s) {
    const double x = std::exp(s);
    const double lg = oracle::lognormal_logpdf(theta, x);
    return std::exp(lg + s) * (lg - oracle::exponential_logpdf(gamma, x));
  });
  CHECK(kl_divergence(*ln, std::vector{theta}, *ex, std::vector{gamma}) == doctest::Approx(ref).epsilon(1e-8));
}

TEST_CASE("separation check") {
  auto ln = make_lognormal(), ex = make_exponential();
  const auto rep = check_separation(*ln, ln->space(), *ex, ex->space());
  CHECK(rep.separated);
  CHECK(rep.min_kl > 0.01);

  auto ga = make_gaussian();
  const auto same = check_separation(*ga, ParamBox({-1.0}, {1.0}), *ga, ParamBox({0.5}, {2.0}));
  CHECK_FALSE(same.separated);
  CHECK(same.min_kl < 1e-6);
}

TEST_CASE("ParamBox basics") {
  ParamBox b({0.01}, {50.0}, {true}, {true});
  CHECK(b.contains(std::vector{1.0}));
  CHECK_FALSE(b.contains(std::vector{60.0}));
  CHECK(b.project(std::vector{60.0})[0] == 50.0);
  // 45 sits at 0.9 of the box linearly but at 0.99 on the log scale.
  CHECK_FALSE(b.near_truncated_face(std::vector{45.0}, 0.05, {false}));
  CHECK(b.near_truncated_face(std::vector{45.0}, 0.05, {true}));
  CHECK(b.near_truncated_face(std::vector{0.011}, 0.05, {true}));
  ParamBox p = ParamBox::point({1.0, 2.0});
  CHECK(p.is_point());
  CHECK(p.free_dim() == 0);
  CHECK_THROWS_AS(ParamBox({2.0}, {1.0}), ParameterError);
  CHECK(make_axis(1.0, 100.0, 3, true)[1] == doctest::Approx(10.0));
  CHECK(make_axis(1.0, 3.0, 3, false)[1] == doctest::Approx(2.0));
}
