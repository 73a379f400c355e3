#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fpinn/numerics.hpp"

using fpinn::error_metrics;
using fpinn::gamma_fn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("gamma matches reference values") {
  constexpr double kSqrtPi = 1.7724538509055160273;
  CHECK_THAT(gamma_fn(1.0), WithinRel(1.0, 1e-12));
  CHECK_THAT(gamma_fn(0.5), WithinRel(kSqrtPi, 1e-12));
  CHECK_THAT(gamma_fn(2.5), WithinRel(1.5 * 0.5 * kSqrtPi, 1e-12));  // recurrence from sqrt(pi)
  CHECK_THAT(gamma_fn(3.0), WithinRel(2.0, 1e-12));
  CHECK_THAT(gamma_fn(4.0), WithinRel(6.0, 1e-12));
  CHECK_THAT(gamma_fn(5.0), WithinRel(24.0, 1e-12));
  // small-argument branch goes through the reflection formula
  CHECK_THAT(gamma_fn(0.1), WithinRel(9.5135076986687318363, 1e-12));
}

TEST_CASE("gamma satisfies the recurrence Gamma(x+1) = x Gamma(x)") {
  for (double x : {0.1, 0.5, 1.3, 2.5}) {
    CHECK_THAT(gamma_fn(x + 1.0), WithinRel(x * gamma_fn(x), 1e-11));
  }
}

TEST_CASE("gamma rejects non-positive arguments") {
  CHECK_THROWS_AS(gamma_fn(0.0), std::domain_error);
  CHECK_THROWS_AS(gamma_fn(-1.5), std::domain_error);
}

TEST_CASE("error metrics on hand-checked sequences") {
  SECTION("identical sequences") {
    const std::vector<double> v{1.0, 2.0};
    const auto m = error_metrics(v, v);
    CHECK(m.rel_l2 == 0.0);
    CHECK(m.max_abs == 0.0);
    CHECK(m.n_points == 2);
  }
  SECTION("unit offset") {
    const std::vector<double> pred{2.0, 0.0};
    const std::vector<double> ref{1.0, 0.0};
    const auto m = error_metrics(pred, ref);
    CHECK_THAT(m.rel_l2, WithinAbs(1.0, 1e-15));
    CHECK_THAT(m.max_abs, WithinAbs(1.0, 1e-15));
  }
  SECTION("zero prediction against a 3-4-5 reference") {
    const std::vector<double> pred{0.0, 0.0};
    const std::vector<double> ref{3.0, 4.0};
    const auto m = error_metrics(pred, ref);
    CHECK_THAT(m.rel_l2, WithinAbs(1.0, 1e-15));
    CHECK_THAT(m.max_abs, WithinAbs(4.0, 1e-15));
  }
  SECTION("zero reference falls back to the prediction norm") {
    const std::vector<double> pred{3.0, 4.0};
    const std::vector<double> ref{0.0, 0.0};
    CHECK_THAT(error_metrics(pred, ref).rel_l2, WithinAbs(5.0, 1e-15));
  }
}

TEST_CASE("error metrics properties") {
  auto rnd = Catch::Generators::random(-10.0, 10.0);
  std::vector<double> a, b;
  for (int i = 0; i < 32; ++i) {
    a.push_back(rnd.get());
    rnd.next();
    b.push_back(rnd.get());
    rnd.next();
  }
  SECTION("max_abs is symmetric under swapping arguments") {
    CHECK(error_metrics(a, b).max_abs == error_metrics(b, a).max_abs);
  }
  SECTION("rel_l2 is invariant under common scaling") {
    std::vector<double> sa = a, sb = b;
    const double c = -3.7;
    for (auto& x : sa) x *= c;
    for (auto& x : sb) x *= c;
    CHECK_THAT(error_metrics(sa, sb).rel_l2, WithinRel(error_metrics(a, b).rel_l2, 1e-12));
  }
  SECTION("length mismatch is rejected") {
    std::vector<double> shorter(a.begin(), a.end() - 1);
    CHECK_THROWS_AS(error_metrics(shorter, b), std::invalid_argument);
  }
}
