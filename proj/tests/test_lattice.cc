#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "absim/lattice.hh"

using Catch::Approx;
using namespace absim;

TEST_CASE("lattice points of a symmetric interval") {
  const auto pts = lattice_points({{-1.0, 1.0}}, 0.4);
  REQUIRE(pts.size() == 5);
  const double want[] = {-0.8, -0.4, 0.0, 0.4, 0.8};
  for (std::size_t i = 0; i < 5; ++i) CHECK(pts[i][0] == Approx(want[i]).margin(1e-15));
}

TEST_CASE("fine input lattice has the exact count") {
  const auto pts = lattice_points({{-1.5, 1.5}}, 1.5e-4);
  CHECK(pts.size() == 20001);
  CHECK(pts.front()[0] == Approx(-1.5).margin(1e-12));
  CHECK(pts.back()[0] == Approx(1.5).margin(1e-12));
}

TEST_CASE("lattice can be empty") {
  CHECK(lattice_points({{0.3, 0.5}}, 1.0).empty());
}

TEST_CASE("step-ten-th lattice on the unit interval") {
  /* 1/0.1 rounds below 10 in binary; the tolerance must keep k = 10 */
  const auto pts = lattice_points({{-1.0, 1.0}}, 0.1);
  CHECK(pts.size() == 21);
}

TEST_CASE("two dimensional lattice is lexicographically ordered") {
  const auto pts = lattice_points({{-1.0, 1.0}, {-1.0, 1.0}}, 0.4);
  REQUIRE(pts.size() == 25);
  CHECK(pts[0] == Vec{-0.8, -0.8});
  CHECK(pts[4] == Vec{-0.8, 0.8});
  CHECK(pts[7][0] == Approx(-0.4).margin(1e-15)); /* 1-based id 8 is (-0.4, 0) */
  CHECK(pts[7][1] == Approx(0.0).margin(1e-15));
  CHECK(pts[24] == Vec{0.8, 0.8});
  for (std::size_t i = 1; i < pts.size(); ++i)
    CHECK(std::lexicographical_compare(pts[i - 1].begin(), pts[i - 1].end(), pts[i].begin(),
                                       pts[i].end()));
}

TEST_CASE("origin-symmetric boxes give negation-closed lattices") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> width(0.2, 3.0), step(0.05, 0.5);
  for (int t = 0; t < 50; ++t) {
    const double w = width(rng);
    const auto pts = lattice_points({{-w, w}}, step(rng));
    for (const auto& p : pts) {
      bool found = false;
      for (const auto& q : pts) found = found || q[0] == -p[0];
      CHECK(found);
    }
  }
}

TEST_CASE("nearest points on and off tie boundaries") {
  {
    const double x[] = {0.19};
    const auto q = nearest_points(x, 0.4);
    REQUIRE(q.size() == 1);
    CHECK(q[0][0] == 0.0);
  }
  {
    const double x[] = {0.2}; /* exact tie on the closed ball boundary */
    const auto q = nearest_points(x, 0.4);
    REQUIRE(q.size() == 2);
    CHECK(q[0][0] == 0.0);
    CHECK(q[1][0] == Approx(0.4).margin(1e-15));
  }
  {
    const double x[] = {-0.39, 0.01};
    const auto q = nearest_points(x, 0.4);
    REQUIRE(q.size() == 1);
    CHECK(q[0][0] == Approx(-0.4).margin(1e-15));
    CHECK(q[0][1] == 0.0);
  }
}

TEST_CASE("covering property of nearest points") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> coord(-5.0, 5.0), step(0.01, 1.5);
  for (int t = 0; t < 500; ++t) {
    const double s = step(rng);
    const double x[] = {coord(rng), coord(rng)};
    const auto qs = nearest_points(x, s);
    REQUIRE(!qs.empty());
    for (const auto& q : qs) CHECK(inf_dist(std::span(x), q) <= s / 2 + 1e-9 * s);
  }
}

namespace {

StabilityCertificate pendulum_cert() {
  StabilityCertificate c;
  c.beta = KLGain{6.17, 2.08, 1.0};
  c.gamma = KinfGain{std::sqrt(3.96), 0.5};
  return c;
}

}  // namespace

TEST_CASE("delta-ISS precision condition on the pendulum parameters") {
  const auto cert = pendulum_cert();
  AbstractionParams p{2.0, 0.4, 1.5e-4, 0.25, 0.0};
  const auto r = check_iss_condition(cert, p);
  CHECK(r.holds);
  CHECK(r.lhs == Approx(0.2484467733054814).margin(1e-12));
  CHECK(r.slack == Approx(0.0015532266945186).margin(1e-12));

  p.eta = 0.6;
  const auto r2 = check_iss_condition(cert, p);
  CHECK_FALSE(r2.holds);
  CHECK(r2.lhs == Approx(0.34844677330548135).margin(1e-12));

  /* vanishing quantization leaves only the decay term */
  AbstractionParams p3{2.0, 1e-9, 1e-12, 0.25, 0.0};
  const auto r3 = check_iss_condition(cert, p3);
  CHECK(r3.holds);
  CHECK(r3.lhs == Approx(cert.beta(0.25, 2.0)).margin(1e-5));
}

TEST_CASE("delta-GAS precision condition") {
  StabilityCertificate c;
  c.beta = KLGain{1.0, 1.0, 1.0};
  const auto r = check_gas_condition(c, {2.0, 0.3, 0.1, 0.5, 0.0});
  CHECK(r.holds);
  CHECK(r.lhs == Approx(0.31766764161830635).margin(1e-12));

  StabilityCertificate cp = pendulum_cert();
  const auto r2 = check_gas_condition(cp, {0.01, 0.01, 0.001, 0.1, 0.0});
  CHECK_FALSE(r2.holds); /* beta(0.1, 0.01) ~ 0.604 alone exceeds eps */

  /* boundary equality: beta(eps, tau) = eps exactly when c e^{-tau} = 1 */
  StabilityCertificate cb;
  cb.beta = KLGain{std::exp(1.0), 1.0, 1.0};
  AbstractionParams pb{1.0, 1e-300, 1e-300, 0.5, 0.0};
  const auto r3 = check_gas_condition(cb, pb);
  CHECK(r3.lhs == Approx(0.5).epsilon(1e-12));
}

TEST_CASE("condition checks require a gamma for the ISS route") {
  StabilityCertificate c;
  c.beta = KLGain{1.0, 1.0, 1.0};
  CHECK_THROWS_AS(check_iss_condition(c, {1.0, 0.1, 0.1, 0.5, 0.0}), Error);
  CHECK_NOTHROW(check_gas_condition(c, {1.0, 0.1, 0.1, 0.5, 0.0}));
}

TEST_CASE("condition monotonicity in eta, mu, tau") {
  const auto cert = pendulum_cert();
  std::mt19937 rng(37);
  std::uniform_real_distribution<double> pick(0.01, 1.0);
  for (int t = 0; t < 200; ++t) {
    AbstractionParams p{1.0 + pick(rng), pick(rng), 1e-4 * pick(rng), 0.25, 0.0};
    const auto base = check_iss_condition(cert, p);
    if (!base.holds) continue;
    AbstractionParams smaller = p;
    smaller.eta *= 0.5;
    smaller.mu *= 0.5;
    smaller.tau *= 2.0;
    CHECK(check_iss_condition(cert, smaller).holds);
  }
}

TEST_CASE("suggested split lands exactly on the condition boundary") {
  const auto cert = pendulum_cert();
  const auto p = suggest_params(cert, 0.25, 2.0);
  CHECK(p.eta == Approx(0.22592534190842647).epsilon(1e-9));
  CHECK(p.mu == Approx(0.0032223649063408714).epsilon(1e-9));
  CHECK(p.nu == 0.0);
  const auto r = check_iss_condition(cert, p);
  CHECK(r.holds);
  CHECK(r.slack >= 0.0);
  CHECK(r.slack <= 1e-9);
}

TEST_CASE("suggested split round trip on random certificates") {
  std::mt19937 rng(91);
  std::uniform_real_distribution<double> pc(1.0, 8.0), pl(0.3, 3.0), pk(0.2, 4.0), pe(0.05, 1.0);
  for (int t = 0; t < 200; ++t) {
    StabilityCertificate c;
    c.beta = KLGain{pc(rng), pl(rng), 1.0};
    c.gamma = KinfGain{pk(rng), t % 2 ? 1.0 : 0.5};
    const double eps = pe(rng);
    const double tau = std::log(c.beta.c) / c.beta.lambda + pe(rng) + 0.05;
    const auto p = suggest_params(c, eps, tau);
    CHECK(check_iss_condition(c, p).holds);
    const auto pg = suggest_params(c, eps, tau, /*gas_mode=*/true);
    CHECK(check_gas_condition(c, pg).holds);
  }
}

TEST_CASE("infeasible tau names the closed-form minimum") {
  const auto cert = pendulum_cert();
  try {
    suggest_params(cert, 0.25, 0.5); /* 0.5 < ln(6.17)/2.08 ~ 0.875 */
    FAIL("expected a suggestion error");
  } catch (const Error& e) {
    CHECK(e.kind() == errc::argument);
    CHECK(std::string(e.what()).find("0.874855") != std::string::npos);
  }
}

TEST_CASE("params validation") {
  AbstractionParams p{2.0, 0.4, 1.5e-4, 0.25, 0.0};
  CHECK_NOTHROW(p.validate());
  p.nu = 0.2; /* nu >= eta/2 makes the adjusted rule vacuous */
  CHECK_THROWS_AS(p.validate(), Error);
  p.nu = 0.0;
  p.eta = -0.1;
  CHECK_THROWS_AS(p.validate(), Error);
}
