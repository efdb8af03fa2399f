#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fastperm/nulldist.hpp"
#include "fastperm/rng.hpp"

using fastperm::MaxNullDistribution;
using fastperm::TailConvention;

namespace {

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// E[max of n i.i.d. standard normals] by Simpson quadrature of
// x * n * phi(x) * Phi(x)^(n-1).
double expected_max_quadrature(int n) {
  const double lo = -8.0, hi = 8.0;
  const int steps = 8000;  // even
  const double h = (hi - lo) / steps;
  auto f = [n](double x) { return x * n * phi(x) * std::pow(Phi(x), n - 1); };
  double sum = f(lo) + f(hi);
  for (int i = 1; i < steps; ++i) sum += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

}  // namespace

TEST_CASE("column_max agrees with a brute-force scan") {
  REQUIRE(fastperm::column_max(std::vector<double>{0, 0, 0}) == 0.0);
  REQUIRE(fastperm::column_max(std::vector<double>{-1.2, 3.4, 2.0}) == 3.4);
  fastperm::Stream rng(1, 0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> v(64);
    for (double& x : v) x = rng.next_normal();
    double m = v[0];
    for (double x : v) {
      if (x > m) m = x;
    }
    REQUIRE(fastperm::column_max(v) == m);
  }
}

TEST_CASE("histogram construction conserves counts") {
  SECTION("single sample occupies one bin") {
    MaxNullDistribution null({1.234});
    REQUIRE(null.counts().size() == 1);
    REQUIRE(null.counts()[0] == 1);
  }
  SECTION("adjacent samples occupy adjacent bins") {
    MaxNullDistribution null({0.005, 0.015}, 0.01);
    REQUIRE(null.counts().size() == 2);
    REQUIRE(null.counts()[0] == 1);
    REQUIRE(null.counts()[1] == 1);
    REQUIRE(null.bin_left(0) == Catch::Approx(0.0));
    REQUIRE(null.bin_right(1) == Catch::Approx(0.02));
  }
  SECTION("every sample lands in exactly one bin") {
    fastperm::Stream rng(2, 0);
    std::vector<double> samples(5000);
    for (double& s : samples) s = 3.0 * rng.next_normal();
    MaxNullDistribution null(samples, 0.01);
    int64_t total = 0;
    for (int64_t c : null.counts()) total += c;
    REQUIRE(total == 5000);
  }
}

TEST_CASE("max-null of Gaussian vectors matches order-statistic quadrature") {
  const int trials = 100'000, dim = 100;
  fastperm::Stream rng(3, 0);
  std::vector<double> maxima(trials);
  for (int t = 0; t < trials; ++t) {
    double m = -1e300;
    for (int i = 0; i < dim; ++i) m = std::max(m, rng.next_normal());
    maxima[static_cast<size_t>(t)] = m;
  }
  MaxNullDistribution null(std::move(maxima), 0.01);
  double mean = 0.0;
  for (double s : null.samples()) mean += s;
  mean /= trials;
  const double expected = expected_max_quadrature(dim);
  REQUIRE(mean == Catch::Approx(expected).epsilon(0.01));
}

TEST_CASE("threshold is the ceil(q*T) order statistic") {
  std::vector<double> ladder(100);
  for (int i = 0; i < 100; ++i) ladder[static_cast<size_t>(i)] = i + 1;
  MaxNullDistribution null(ladder, 1.0);
  REQUIRE(fastperm::threshold(null, 0.05) == 95.0);
  REQUIRE(fastperm::threshold(null, 0.5) == 50.0);
  REQUIRE(fastperm::threshold(null, 0.10, TailConvention::two_sided) == 95.0);

  MaxNullDistribution constant(std::vector<double>(40, 2.5), 0.01);
  REQUIRE(fastperm::threshold(constant, 0.05) == 2.5);
  REQUIRE(fastperm::threshold(constant, 0.2) == 2.5);
}

TEST_CASE("thresholds below the resolution limit are rejected") {
  MaxNullDistribution null(std::vector<double>{1, 2, 3, 4, 5}, 1.0);
  REQUIRE_THROWS_AS(fastperm::threshold(null, 0.01), fastperm::Error);
  REQUIRE_NOTHROW(fastperm::threshold(null, 0.2));
}

TEST_CASE("corrected p-values follow the add-one counting rule") {
  std::vector<double> ladder(99);
  for (int i = 0; i < 99; ++i) ladder[static_cast<size_t>(i)] = i + 1;
  MaxNullDistribution null(ladder, 1.0);
  REQUIRE(fastperm::corrected_p_value(null, 1000.0) == Catch::Approx(1.0 / 100.0));
  REQUIRE(fastperm::corrected_p_value(null, -1000.0) == 1.0);
  // observed at the median of an odd-length set
  REQUIRE(fastperm::corrected_p_value(null, 50.0) ==
          Catch::Approx(0.5).margin(1.0 / 100.0));
}

TEST_CASE("KL of identical histograms is exactly zero") {
  std::vector<double> samples = {0.1, 0.2, 0.2, 0.35, 0.5};
  MaxNullDistribution p(samples, 0.01), q(samples, 0.01);
  REQUIRE(fastperm::kl_divergence(p, q) == 0.0);
}

TEST_CASE("KL matches the hand-computed two-bin value") {
  // p = (0.5, 0.5), q = (0.9, 0.1) -> KL = ln(5/3) ~ 0.5108, up to the
  // 1/(10T) smoothing.
  std::vector<double> p_samples, q_samples;
  for (int i = 0; i < 5000; ++i) p_samples.push_back(0.005);
  for (int i = 0; i < 5000; ++i) p_samples.push_back(0.015);
  for (int i = 0; i < 9000; ++i) q_samples.push_back(0.005);
  for (int i = 0; i < 1000; ++i) q_samples.push_back(0.015);
  MaxNullDistribution p(p_samples, 0.01), q(q_samples, 0.01);
  REQUIRE(fastperm::kl_divergence(p, q) ==
          Catch::Approx(std::log(5.0 / 3.0)).margin(2e-3));
}

TEST_CASE("KL is non-negative on random histogram pairs") {
  fastperm::Stream rng(4, 0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a(50), b(60);
    for (double& x : a) x = rng.next_normal();
    for (double& x : b) x = 0.3 + 0.8 * rng.next_normal();
    MaxNullDistribution p(a, 0.01), q(b, 0.01);
    REQUIRE(fastperm::kl_divergence(p, q) >= 0.0);
  }
}

TEST_CASE("Bhattacharyya distance basics") {
  std::vector<double> samples = {0.1, 0.2, 0.3, 0.3};
  MaxNullDistribution p(samples, 0.01), q(samples, 0.01);
  REQUIRE(fastperm::bhattacharyya(p, q) <= 1e-12);

  std::vector<double> a(100, 0.005), b(100, 0.015);
  MaxNullDistribution pa(a, 0.01), pb(b, 0.01);
  const double eps = 1.0 / (10.0 * 100.0);
  const double approx = -std::log(2.0 * std::sqrt(eps * (1.0 - eps)));
  REQUIRE(fastperm::bhattacharyya(pa, pb) == Catch::Approx(approx).margin(0.01));
  REQUIRE(fastperm::bhattacharyya(pa, pb) == fastperm::bhattacharyya(pb, pa));
}

TEST_CASE("naive null at full sampling equals the true null") {
  fastperm::Stream rng(5, 0);
  std::vector<std::vector<double>> columns;
  std::vector<double> maxima;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> col(30);
    for (double& x : col) x = rng.next_normal();
    maxima.push_back(fastperm::column_max(col));
    columns.push_back(std::move(col));
  }
  const MaxNullDistribution naive = fastperm::naive_null(columns, 0.01);
  const MaxNullDistribution truth(maxima, 0.01);
  REQUIRE(naive.samples() == truth.samples());
  REQUIRE(fastperm::kl_divergence(truth, naive) == 0.0);
}

TEST_CASE("subset maxima never exceed the full maxima") {
  fastperm::Stream rng(6, 0);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> col(40);
    for (double& x : col) x = rng.next_normal();
    std::vector<double> subset;
    for (double x : col) {
      if (rng.next_double() < 0.25) subset.push_back(x);
    }
    if (subset.empty()) subset.push_back(col[0]);
    REQUIRE(fastperm::column_max(subset) <= fastperm::column_max(col));
  }
}
