#include "doctest.h"

#include <cmath>

#include "gci/error.hpp"
#include "gci/mgf.hpp"
#include "gci/rng.hpp"
#include "oracles.hpp"

using namespace gci;

namespace {

struct Pair {
  FamilyPtr g, h;
  std::vector<double> theta, gamma;
};

// Random pairs of families that share a support.
std::vector<Pair> random_pairs(std::size_t count, std::uint64_t seed) {
  CounterRng rng(seed, 0);
  auto ln = make_lognormal(), ex = make_exponential(), po = make_poisson(), ge = make_geometric(),
       ga = make_gaussian(), be = make_bernoulli();
  auto pos = [&] { return std::exp(-1.5 + 3.5 * rng.uniform()); };
  std::vector<Pair> out;
  for (std::size_t i = 0; i < count; ++i) {
    switch (i % 5) {
      case 0: out.push_back({ln, ex, {pos()}, {pos()}}); break;
      case 1: out.push_back({po, ge, {pos()}, {pos()}}); break;
      case 2: out.push_back({ga, ga, {4 * rng.uniform() - 2}, {4 * rng.uniform() - 2}}); break;
      case 3: out.push_back({be, be, {0.05 + 0.9 * rng.uniform()}, {0.05 + 0.9 * rng.uniform()}}); break;
      default: out.push_back({ex, ln, {pos()}, {pos()}}); break;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("Lambda vanishes at 0 and 1") {
  for (const auto& p : random_pairs(40, 1)) {
    auto spec = LogMgfSpec::pairwise(p.g, p.theta, p.h, p.gamma);
    INFO(p.g->id() << "(" << p.theta[0] << ") vs " << p.h->id() << "(" << p.gamma[0] << ")");
    CHECK(log_mgf(spec, 0.0) == 0.0);
    CHECK(std::abs(log_mgf(spec, 1.0)) < 1e-6);
  }
}

TEST_CASE("lognormal vs exponential matches Boost quadrature") {
  const double theta = 1.28, gamma = 1.72;
  auto spec = LogMgfSpec::pairwise(make_lognormal(), {theta}, make_exponential(), {gamma});
  for (double z : {0.05, 0.1, 0.3, 0.51388, 0.8, 0.95, 1.0}) {
    const double m = oracle::integrate([&](double s) {
      const double x = std::exp(s);
      const double lg = oracle::lognormal_logpdf(theta, x), lh = oracle::exponential_logpdf(gamma, x);
      return std::exp(s + (1 - z) * lg + z * lh);
    });
    CHECK(log_mgf(spec, z) == doctest::Approx(std::log(m)).epsilon(1e-9));
  }
}

TEST_CASE("closed forms: exponential pair, Poisson pair, Gaussian shift") {
  {
    const double a = 0.8, c = 2.5;
    auto spec = LogMgfSpec::pairwise(make_exponential(), {a}, make_exponential(), {c});
    for (double z : {-0.2, 0.25, 0.5, 0.9, 1.1}) {
      const double rate = z / c + (1 - z) / a;
      const double ref = -z * std::log(c) - (1 - z) * std::log(a) - std::log(rate);
      CHECK(log_mgf(spec, z) == doctest::Approx(ref).epsilon(1e-10));
    }
  }
  {
    const double t = 1.3, g = 4.0;
    auto spec = LogMgfSpec::pairwise(make_poisson(), {t}, make_poisson(), {g});
    for (double z : {-0.5, 0.3, 0.7, 2.0}) {
      const double ref = std::pow(t, 1 - z) * std::pow(g, z) - (1 - z) * t - z * g;
      CHECK(log_mgf(spec, z) == doctest::Approx(ref).epsilon(1e-10));
    }
  }
  {
    auto spec = LogMgfSpec::pairwise(make_gaussian(), {0.0}, make_gaussian(), {1.7});
    for (double z : {-1.0, 0.5, 2.0}) CHECK(log_mgf(spec, z) == doctest::Approx(1.7 * 1.7 * z * (z - 1) / 2).epsilon(1e-10));
  }
}

TEST_CASE("geometric vs Poisson with an offset and a third base law") {
  LogMgfSpec spec;
  spec.gfam = make_poisson();
  spec.hfam = make_geometric();
  spec.base_params = {2.0};
  spec.g_params = {1.5};
  spec.h_params = {0.8};
  spec.offset_b = 0.1;
  for (double l : {0.2, 0.6}) {
    const double ref = oracle::sum_terms([&](double k) {
      const double lr = oracle::geometric_logpmf(0.8, k) - oracle::poisson_logpmf(1.5, k) - 0.1;
      return std::exp(oracle::poisson_logpmf(2.0, k) + l * lr);
    });
    CHECK(log_mgf(spec, l) == doctest::Approx(std::log(ref)).epsilon(1e-10));
  }
}

TEST_CASE("derivatives match finite differences and Lambda is strictly convex") {
  for (const auto& p : random_pairs(20, 2)) {
    auto spec = LogMgfSpec::pairwise(p.g, p.theta, p.h, p.gamma);
    INFO(p.g->id() << "(" << p.theta[0] << ") vs " << p.h->id() << "(" << p.gamma[0] << ")");
    for (double z : {0.2, 0.5, 0.8}) {
      const auto v = log_mgf_all(spec, z);
      const double h = 1e-5, h2 = 1e-3;
      const double fd1 = (log_mgf(spec, z + h) - log_mgf(spec, z - h)) / (2 * h);
      const double fd2 = (log_mgf(spec, z + h2) - 2 * v.value + log_mgf(spec, z - h2)) / (h2 * h2);
      CHECK(v.d1 == doctest::Approx(fd1).epsilon(1e-6).scale(1.0));
      CHECK(v.d2 == doctest::Approx(fd2).epsilon(1e-3).scale(1e-3));
      CHECK(v.d2 > 0.0);
      CHECK(log_mgf_deriv(spec, z, 1) == doctest::Approx(v.d1));
    }
    CHECK(log_mgf_deriv(spec, 0.0, 1) == doctest::Approx(expected_log_ratio(spec)).epsilon(1e-9).scale(1e-9));
  }
}

TEST_CASE("divergence is reported with its tail") {
  auto spec = LogMgfSpec::pairwise(make_lognormal(), {1.0}, make_exponential(), {1.0});
  try {
    log_mgf(spec, -0.5);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.tail() == "upper");
  }
}

TEST_CASE("validation") {
  auto bad = LogMgfSpec::pairwise(make_poisson(), {1.0}, make_exponential(), {1.0});
  CHECK_THROWS_AS(validate(bad), DomainError);
  auto neg = LogMgfSpec::pairwise(make_poisson(), {-1.0}, make_geometric(), {1.0});
  CHECK_THROWS_AS(validate(neg), ParameterError);
}
