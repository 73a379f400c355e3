#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fpinn/autodiff.hpp"

using namespace fpinn::ad;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

/// Central finite differences (step 1e-5), the independent check on reverse
/// mode per parameter.
template <class F>
std::vector<double> fd_gradient(F&& f, std::vector<double> params, double step = 1e-5) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + step;
    const double up = f(params);
    params[i] = keep - step;
    const double dn = f(params);
    params[i] = keep;
    g[i] = (up - dn) / (2.0 * step);
  }
  return g;
}

/// 5-point central stencils for first/second derivatives (step 1e-3).
template <class F>
double fd_second(F&& f, double x, double h = 1e-3) {
  return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) /
         (12 * h * h);
}
template <class F>
double fd_first(F&& f, double x, double h = 1e-3) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

}  // namespace

TEST_CASE("jet propagation matches symbolic derivatives on random inputs") {
  auto rng = Catch::Generators::random(0.2, 2.0);
  for (int trial = 0; trial < 25; ++trial) {
    const double x = rng.get();
    rng.next();
    const auto j = Jet2<double>::seed(x);

    SECTION("composite expression, trial " + std::to_string(trial)) {
      // f(x) = tanh(x) * exp(-x^2) + x / (1 + x)
      auto f = [](auto v) {
        using std::exp;
        using std::tanh;
        return tanh(v) * exp(-(v * v)) + v / (1.0 + v);
      };
      const auto r = f(j);
      auto fd = [&](double v) { return f(v); };
      CHECK_THAT(r.v, WithinRel(f(x), 1e-14));
      CHECK_THAT(r.d1, WithinRel(fd_first(fd, x), 1e-7));
      CHECK_THAT(r.d2, WithinRel(fd_second(fd, x), 1e-5));
    }
  }
}

TEST_CASE("jet rules per primitive against closed forms") {
  const double x = 0.7;
  const auto j = Jet2<double>::seed(x);
  SECTION("product") {
    const auto r = (j * j) * j;  // x^3
    CHECK_THAT(r.v, WithinRel(x * x * x, 1e-14));
    CHECK_THAT(r.d1, WithinRel(3.0 * x * x, 1e-13));
    CHECK_THAT(r.d2, WithinRel(6.0 * x, 1e-13));
  }
  SECTION("quotient") {
    const auto r = Jet2<double>(1.0) / j;  // 1/x
    CHECK_THAT(r.d1, WithinRel(-1.0 / (x * x), 1e-12));
    CHECK_THAT(r.d2, WithinRel(2.0 / (x * x * x), 1e-12));
  }
  SECTION("power") {
    const auto r = pow(j, 2.5);
    CHECK_THAT(r.d1, WithinRel(2.5 * std::pow(x, 1.5), 1e-12));
    CHECK_THAT(r.d2, WithinRel(2.5 * 1.5 * std::pow(x, 0.5), 1e-12));
  }
  SECTION("exp") {
    const auto r = exp(j);
    CHECK_THAT(r.d2, WithinRel(std::exp(x), 1e-13));
  }
  SECTION("tanh") {
    const auto r = tanh(j);
    const double th = std::tanh(x);
    const double sech2 = 1.0 - th * th;
    CHECK_THAT(r.d1, WithinRel(sech2, 1e-13));
    CHECK_THAT(r.d2, WithinRel(-2.0 * th * sech2, 1e-12));
  }
}

TEST_CASE("reverse mode on simple scalar losses") {
  SECTION("theta^2 at theta = 3") {
    const std::vector<double> p{3.0};
    const auto g = grad([](std::span<const Var> v) { return v[0] * v[0]; }, p);
    CHECK_THAT(g[0], WithinRel(6.0, 1e-14));
  }
  SECTION("tanh(theta) at theta = 0") {
    const std::vector<double> p{0.0};
    const auto g = grad([](std::span<const Var> v) { return tanh(v[0]); }, p);
    CHECK_THAT(g[0], WithinAbs(1.0, 1e-14));
  }
  SECTION("division and power rules") {
    const std::vector<double> p{1.3, 0.4};
    auto builder = [](std::span<const Var> v) {
      return pow(v[0], 3.0) / v[1] + exp(v[1]) - 2.0 * v[0];
    };
    auto plain = [](const std::vector<double>& v) {
      return std::pow(v[0], 3.0) / v[1] + std::exp(v[1]) - 2.0 * v[0];
    };
    const auto g = grad(builder, p);
    const auto fd = fd_gradient(plain, p);
    CHECK_THAT(g[0], WithinRel(fd[0], 1e-6));
    CHECK_THAT(g[1], WithinRel(fd[1], 1e-6));
  }
}

TEST_CASE("gradient of a sum equals the sum of gradients") {
  auto rng = Catch::Generators::random(-1.0, 1.0);
  std::vector<double> p(4);
  for (auto& v : p) {
    v = rng.get();
    rng.next();
  }
  auto f1 = [](std::span<const Var> v) { return tanh(v[0]) * v[1] + v[2] * v[2]; };
  auto f2 = [](std::span<const Var> v) { return exp(v[3]) - v[0] * v[2]; };
  auto fsum = [&](std::span<const Var> v) { return f1(v) + f2(v); };
  const auto g1 = grad(f1, p);
  const auto g2 = grad(f2, p);
  const auto gs = grad(fsum, p);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK_THAT(gs[i], WithinAbs(g1[i] + g2[i], 1e-13));
  }
}

TEST_CASE("weighted history node: value and adjoints") {
  // weights[0] holds the negated sum, matching the difference form exactly
  const std::vector<double> w{-(0.5 + 2.0 + 1.5), 0.5, 2.0, 1.5};
  const std::vector<double> f{4.0, 1.0, 2.0, 3.0};
  Tape tape;
  std::vector<Var> vars;
  for (double v : f) vars.push_back(tape.leaf(v));
  const Var out = weighted_history(w, vars);
  const double expected = 0.5 * (1.0 - 4.0) + 2.0 * (2.0 - 4.0) + 1.5 * (3.0 - 4.0);
  CHECK_THAT(out.value(), WithinAbs(expected, 1e-14));
  tape.backward(out);
  CHECK_THAT(tape.adjoint(vars[0]), WithinAbs(w[0], 1e-14));
  for (std::size_t k = 1; k < w.size(); ++k) {
    CHECK_THAT(tape.adjoint(vars[k]), WithinAbs(w[k], 1e-14));
  }
  SECTION("constant history evaluates to exactly zero") {
    Tape t2;
    std::vector<Var> c;
    for (int i = 0; i < 4; ++i) c.push_back(t2.leaf(7.25));
    CHECK(weighted_history(w, c).value() == 0.0);
  }
}

TEST_CASE("replay recomputes values after leaf updates") {
  Tape tape;
  const Var x = tape.leaf(1.0);
  const Var y = tape.leaf(2.0);
  const Var z = tanh(x * y) + exp(x - y) / y;
  const double first = z.value();
  auto direct = [](double xv, double yv) {
    return std::tanh(xv * yv) + std::exp(xv - yv) / yv;
  };
  CHECK_THAT(first, WithinRel(direct(1.0, 2.0), 1e-14));
  tape.set_leaf(x, -0.3);
  tape.set_leaf(y, 0.8);
  tape.forward();
  CHECK_THAT(tape.value_at(z.index()), WithinRel(direct(-0.3, 0.8), 1e-14));
  tape.backward(z);
  auto fd = fd_gradient([&](const std::vector<double>& p) { return direct(p[0], p[1]); },
                        {-0.3, 0.8});
  CHECK_THAT(tape.adjoint(x), WithinRel(fd[0], 1e-6));
  CHECK_THAT(tape.adjoint(y), WithinRel(fd[1], 1e-6));
}

TEST_CASE("constant folding keeps constants off the tape") {
  Tape tape;
  const Var x = tape.leaf(2.0);
  const std::size_t before = tape.node_count();
  const Var a = x + 0.0;       // fold: same node
  const Var b = x * 1.0;       // fold
  const Var c = x * 0.0;       // fold to constant
  const Var d = Var(3.0) + Var(4.0);  // pure constant arithmetic
  CHECK(tape.node_count() == before);
  CHECK(a.index() == x.index());
  CHECK(b.index() == x.index());
  CHECK(c.is_const());
  CHECK(c.value() == 0.0);
  CHECK(d.is_const());
  CHECK(d.value() == 7.0);
}

TEST_CASE("fused multiply-add matches the unfused expression") {
  Tape tape;
  const Var a = tape.leaf(0.3);
  const Var b = tape.leaf(-1.7);
  const Var c = tape.leaf(2.2);
  const Var fused = fmadd(a, b, c);
  CHECK(fused.value() == 0.3 + (-1.7) * 2.2);
  tape.backward(fused);
  CHECK(tape.adjoint(a) == 1.0);
  CHECK(tape.adjoint(b) == 2.2);
  CHECK(tape.adjoint(c) == -1.7);
}

TEST_CASE("jets of tape variables differentiate through to parameters") {
  // u(w, x) = tanh(w * x); d2u/dx2 depends on w, and the tape must see it.
  Tape tape;
  const Var w = tape.leaf(0.8);
  const auto x = Jet2<Var>::seed(Var(1.1));
  const auto u = tanh(x * w);
  // loss = (d2 u / dx2)^2
  const Var lossv = u.d2 * u.d2;
  tape.backward(lossv);
  auto plain = [](const std::vector<double>& p) {
    const double wv = p[0];
    const double xv = 1.1;
    const double th = std::tanh(wv * xv);
    const double sech2 = 1.0 - th * th;
    const double d2 = -2.0 * th * sech2 * wv * wv;
    return d2 * d2;
  };
  const auto fd = fd_gradient(plain, {0.8});
  CHECK_THAT(tape.adjoint(w), WithinRel(fd[0], 1e-5));
}
