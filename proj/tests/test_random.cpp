#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <doctest.h>

#include <cmath>
#include <vector>

#include <boost/math/distributions/gamma.hpp>

#include "cdbayes/random.hpp"
#include "cdbayes/stat_tests.hpp"
#include "support.hpp"

using namespace cdbayes;

TEST_CASE("stream seeds are deterministic and distinct") {
  CHECK(stream_seed(42, 1) == stream_seed(42, 1));
  CHECK(stream_seed(42, 1) != stream_seed(42, 2));
  CHECK(stream_seed(42, 1) != stream_seed(43, 1));
  // SplitMix64 reference output for state 0 after one increment.
  CHECK(mix64(0x9E3779B97F4A7C15ULL) == 0xE220A8397B1DCDAFULL);
  auto a = make_stream(7, 3);
  auto b = make_stream(7, 3);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
}

TEST_CASE("uniform draws stay in the open unit interval") {
  auto rng = make_stream(1, 0);
  double lo = 1.0, hi = 0.0;
  std::vector<double> u;
  for (int i = 0; i < 50000; ++i) {
    u.push_back(draw_uniform(rng));
    lo = std::min(lo, u.back());
    hi = std::max(hi, u.back());
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
  CHECK(ks_test(u, [](double x) { return x; }).p_value > 0.01);
}

TEST_CASE("normal and exponential draws") {
  auto rng = make_stream(2, 0);
  std::vector<double> z, e;
  for (int i = 0; i < 50000; ++i) {
    z.push_back(draw_normal(rng, 3.0, 2.0));
    e.push_back(draw_exponential(rng));
  }
  CHECK(ks_test(z, [](double x) { return normal_cdf(x, 3.0, 2.0); }).p_value > 0.01);
  CHECK(ks_test(e, [](double x) { return 1.0 - std::exp(-x); }).p_value > 0.01);
}

TEST_CASE("gamma draws match the Gamma CDF across shapes") {
  auto rng = make_stream(3, 0);
  for (double shape : {0.3, 1.0, 2.5, 50.0}) {
    const double rate = 1.7;
    std::vector<double> g;
    for (int i = 0; i < 50000; ++i) g.push_back(draw_gamma(rng, shape, rate));
    boost::math::gamma_distribution<> oracle(shape, 1.0 / rate);
    CAPTURE(shape);
    CHECK(ks_test(g, [&](double x) { return boost::math::cdf(oracle, x); }).p_value > 0.01);
  }
}

TEST_CASE("tiny gamma shape never returns zero") {
  auto rng = make_stream(4, 0);
  for (int i = 0; i < 20000; ++i) {
    const double g = draw_gamma(rng, 0.001, 0.001);
    REQUIRE(g > 0.0);
    REQUIRE(std::isfinite(g));
  }
}

TEST_CASE("Kolmogorov p-values agree with the exact distribution") {
  // Reference values: exact one-sample KS survival function.
  CHECK(kolmogorov_p_value(0.05, 100) == doctest::Approx(0.95322).epsilon(0.02));
  CHECK(kolmogorov_p_value(0.12, 100) == doctest::Approx(0.10330).epsilon(0.05));
  CHECK(kolmogorov_p_value(0.04, 1000) == doctest::Approx(0.07934).epsilon(0.05));
  CHECK(kolmogorov_p_value(0.20, 50) == doctest::Approx(0.03144).epsilon(0.05));
}

TEST_CASE("KS statistics") {
  std::vector<double> a;
  for (int i = 1; i <= 10; ++i) a.push_back(i / 10.0);
  CHECK(ks_test(a, [](double x) { return std::clamp(x, 0.0, 1.0); }).statistic == doctest::Approx(0.1));
  std::vector<double> x{0.1, 0.4, 0.7, 1.5, 2.0};
  std::vector<double> y{0.2, 0.3, 2.5, 3.0, 3.3, 4.0};
  CHECK(ks_test_two_sample(x, y).statistic == doctest::Approx(2.0 / 3.0));

  auto rng = make_stream(5, 0);
  std::vector<double> p, q, r;
  for (int i = 0; i < 20000; ++i) {
    p.push_back(draw_normal(rng));
    q.push_back(draw_normal(rng));
    r.push_back(draw_normal(rng, 0.1, 1.0));
  }
  CHECK(ks_test_two_sample(p, q).p_value > 0.01);
  CHECK(ks_test_two_sample(p, r).p_value < 1e-6);
}

TEST_CASE("chi-square uniformity") {
  CHECK(chi_square_survival(30.0, 19) == doctest::Approx(0.0517985).epsilon(1e-6));
  CHECK(chi_square_survival(10.0, 19) == doctest::Approx(0.9529458).epsilon(1e-6));
  std::vector<std::size_t> flat(20, 5);
  auto res = chi_square_uniform(flat);
  CHECK(res.statistic == 0.0);
  CHECK(res.dof == 19.0);
  CHECK(res.p_value == doctest::Approx(1.0));
  std::vector<std::size_t> edges(20, 0);
  edges.front() = 50;
  edges.back() = 50;
  CHECK(chi_square_uniform(edges).p_value < 1e-50);
  // Hand computation: counts {8, 2}, expected 5 each, statistic 3.6 on 1 dof.
  std::vector<std::size_t> two{8, 2};
  CHECK(chi_square_uniform(two).statistic == doctest::Approx(3.6));
}
