#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "absim/expr.hh"

using absim::Error;
using absim::errc;
using absim::Expression;

TEST_CASE("single variable token") {
  const auto e = Expression::parse("x2");
  const double x[] = {0.3, 0.7};
  CHECK(e.eval(x, nullptr) == 0.7);
  CHECK(e.max_x() == 2);
  CHECK(e.max_u() == 0);
}

TEST_CASE("pendulum velocity component") {
  const auto e = Expression::parse("-(9.8/5)*sin(x1)-(3/0.5)*x2+u1");
  CHECK(e.max_x() == 2);
  CHECK(e.max_u() == 1);
  const double u0[] = {0.0};
  {
    const double x[] = {0.0, 0.0};
    CHECK(e.eval(x, u0) == 0.0);
  }
  {
    const double x[] = {0.0, 1.0};
    CHECK(e.eval(x, u0) == -6.0);
  }
  {
    /* hand substitution: -(9.8/5)*sin(0.3) - 6*0.5 + 1.0 */
    const double x[] = {0.3, 0.5};
    const double u[] = {1.0};
    CHECK(e.eval(x, u) == Catch::Approx(-(9.8 / 5) * std::sin(0.3) - 6.0 * 0.5 + 1.0).epsilon(1e-15));
  }
}

TEST_CASE("syntax error carries the byte offset") {
  try {
    Expression::parse("sin(");
    FAIL("expected a syntax error");
  } catch (const Error& e) {
    CHECK(e.kind() == errc::syntax);
    CHECK(std::string(e.what()).find("offset 4") != std::string::npos);
  }
  CHECK_THROWS_AS(Expression::parse("2x1"), Error);     /* no implicit multiplication */
  CHECK_THROWS_AS(Expression::parse("foo(x1)"), Error); /* unknown function */
  CHECK_THROWS_AS(Expression::parse("z3"), Error);      /* unknown variable */
  CHECK_THROWS_AS(Expression::parse("x0"), Error);      /* indices start at 1 */
  CHECK_THROWS_AS(Expression::parse(""), Error);
  CHECK_THROWS_AS(Expression::parse("1+"), Error);
}

TEST_CASE("precedence and associativity") {
  const double x[] = {0.0};
  const double* u = nullptr;
  CHECK(Expression::parse("2+3*4").eval(x, u) == 14.0);
  CHECK(Expression::parse("2*3^2").eval(x, u) == 18.0);
  CHECK(Expression::parse("-2^2").eval(x, u) == -4.0);   /* ^ binds tighter than unary - */
  CHECK(Expression::parse("2^-1").eval(x, u) == 0.5);
  CHECK(Expression::parse("2^3^2").eval(x, u) == 512.0); /* right associative */
  CHECK(Expression::parse("8/4/2").eval(x, u) == 1.0);   /* left associative */
  CHECK(Expression::parse("1-2-3").eval(x, u) == -4.0);
  CHECK(Expression::parse("-x1^2").eval(x, u) == -0.0);
  CHECK(Expression::parse("1.5e-4").eval(x, u) == 1.5e-4);
}

TEST_CASE("domain errors name the offending subexpression") {
  const double x[] = {-1.0};
  try {
    Expression::parse("sqrt(x1)").eval(x, nullptr);
    FAIL("expected a domain error");
  } catch (const Error& e) {
    CHECK(e.kind() == errc::domain);
    CHECK(std::string(e.what()).find("sqrt(x1)") != std::string::npos);
  }
  const double zero[] = {0.0};
  CHECK_THROWS_AS(Expression::parse("1/x1").eval(zero, nullptr), Error);
  /* constant folding must not hide runtime domain faults */
  CHECK_THROWS_AS(Expression::parse("sqrt(0-1)").eval(x, nullptr), Error);
  CHECK_THROWS_AS(Expression::parse("1/0").eval(x, nullptr), Error);
}

TEST_CASE("bind validates variable indices") {
  const auto e = Expression::parse("x1+u2");
  CHECK_NOTHROW(e.bind(1, 2));
  CHECK_THROWS_AS(e.bind(1, 1), Error);
  const auto ly = Expression::parse("(x1-y1)^2");
  CHECK_THROWS_AS(ly.bind(1, 0, /*allow_y=*/false), Error);
  CHECK_NOTHROW(ly.bind(1, 0, /*allow_y=*/true));
}

TEST_CASE("evaluation is pure and repeatable") {
  const auto e = Expression::parse("exp(x1)*sin(u1)-x2/3");
  const double x[] = {0.37, -1.2};
  const double u[] = {0.9};
  const double first = e.eval(x, u);
  for (int i = 0; i < 100; ++i) CHECK(e.eval(x, u) == first);
}

namespace {

/* random expression text of bounded depth; only total functions so
 * evaluation stays finite on the sampled points */
std::string random_text(std::mt19937& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 9);
  switch (pick(rng)) {
    case 0: {
      std::uniform_real_distribution<double> num(-4.0, 4.0);
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", num(rng));
      return buf;
    }
    case 1: return "x" + std::to_string(1 + static_cast<int>(rng() % 3));
    case 2: return "u" + std::to_string(1 + static_cast<int>(rng() % 2));
    case 3: return "(" + random_text(rng, depth - 1) + "+" + random_text(rng, depth - 1) + ")";
    case 4: return "(" + random_text(rng, depth - 1) + "-" + random_text(rng, depth - 1) + ")";
    case 5: return "(" + random_text(rng, depth - 1) + "*" + random_text(rng, depth - 1) + ")";
    case 6: return "sin(" + random_text(rng, depth - 1) + ")";
    case 7: return "cos(" + random_text(rng, depth - 1) + ")";
    case 8: return "abs(" + random_text(rng, depth - 1) + ")";
    default: return "-" + random_text(rng, depth - 1);
  }
}

}  // namespace

TEST_CASE("print-parse round trip is a fixed point and preserves values") {
  std::mt19937 rng(20240901);
  std::uniform_real_distribution<double> point(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::string text = random_text(rng, 6);
    const auto e = Expression::parse(text);
    const std::string printed = e.print();
    const auto e2 = Expression::parse(printed);
    CHECK(e2.print() == printed); /* fixed point of print-parse */
    for (int pt = 0; pt < 100; ++pt) {
      const double x[] = {point(rng), point(rng), point(rng)};
      const double u[] = {point(rng), point(rng)};
      CHECK(e.eval(x, u) == e2.eval(x, u)); /* bit identical */
    }
  }
}

TEST_CASE("printer keeps exact constants") {
  const auto e = Expression::parse("0.1+1.5e-4*x1");
  const auto e2 = Expression::parse(e.print());
  const double x[] = {7.0};
  CHECK(e.eval(x, nullptr) == e2.eval(x, nullptr));
}
