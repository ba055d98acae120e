#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ranslicer/queueing.hpp"
#include "ranslicer/rng.hpp"

using namespace ranslicer;
using namespace ranslicer::queueing;

namespace {

BlockingScenario single_class(double rho, int servers) {
  BlockingScenario sc;
  sc.reserved_bandwidth = static_cast<double>(servers);
  sc.slices.push_back({"s0", 1, rho, 1.0, 1.0});  // load = rho
  return sc;
}

}  // namespace

TEST_CASE("two-state system: pi(busy) = 1/2 at rho = 1") {
  BlockingScenario sc = single_class(1.0, 1);
  CHECK(state_probability(sc, {1}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(state_probability(sc, {0}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(state_probability(sc, {2}), std::domain_error);
}

TEST_CASE("steady-state probabilities normalize") {
  BlockingScenario sc;
  sc.reserved_bandwidth = 10.0;
  sc.slices.push_back({"a", 2, 0.4, 1.0, 2.0});
  sc.slices.push_back({"b", 3, 0.2, 2.0, 3.0});
  double total = 0.0;
  for (int na = 0; na <= 5; ++na)
    for (int nb = 0; nb <= 3; ++nb) {
      if (2.0 * na + 3.0 * nb > 10.0 + 1e-9) continue;
      total += state_probability(sc, {na, nb});
    }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single class equals Erlang-B") {
  BlockingScenario sc = single_class(0.5, 2);
  const auto p = blocking_prob_exact(sc);
  CHECK(p[0] == doctest::Approx(0.076923).epsilon(1e-4));
  CHECK(p[0] == doctest::Approx(oracles::erlang_b(0.5, 2)).epsilon(1e-12));

  Substream rng(5, Substream::tag("erlang"));
  for (int trial = 0; trial < 30; ++trial) {
    const double rho = 0.2 + 3.0 * rng.uniform();
    const int n = 1 + static_cast<int>(rng.uniform() * 12);
    const auto q = blocking_prob_exact(single_class(rho, n));
    CHECK(q[0] == doctest::Approx(oracles::erlang_b(rho, n)).epsilon(1e-10));
  }
}

TEST_CASE("degenerate limits") {
  // W below the only bandwidth: every arrival blocked
  BlockingScenario sc;
  sc.reserved_bandwidth = 0.5;
  sc.slices.push_back({"a", 1, 0.3, 1.0, 1.0});
  CHECK(blocking_prob_exact(sc)[0] == doctest::Approx(1.0));
  const auto mc = blocking_prob_mc(sc, 20000, 3);
  CHECK(mc.blocking[0] == doctest::Approx(1.0));

  // blocking vanishes as W grows
  double prev = 1.0;
  for (double w : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    sc.reserved_bandwidth = w;
    const double p = blocking_prob_exact(sc)[0];
    CHECK(p <= prev + 1e-15);
    prev = p;
  }
  CHECK(prev < 1e-10);
}

TEST_CASE("state space guard") {
  BlockingScenario sc;
  sc.reserved_bandwidth = 1e9;
  for (int s = 0; s < 4; ++s)
    sc.slices.push_back({"s" + std::to_string(s), 1, 0.1, 1.0, 1.0});
  CHECK_THROWS_AS(blocking_prob_exact(sc), StateSpaceError);
}

TEST_CASE("monte carlo agrees with the exact values") {
  Substream rng(7, Substream::tag("mcx"));
  for (int trial = 0; trial < 6; ++trial) {
    BlockingScenario sc;
    sc.reserved_bandwidth = 6.0 + 6.0 * rng.uniform();
    const int ns = 2 + static_cast<int>(rng.uniform() * 2);
    for (int s = 0; s < ns; ++s)
      sc.slices.push_back({"s" + std::to_string(s), 1 + static_cast<int>(rng.uniform() * 3),
                           0.2 + rng.uniform(), 0.5 + rng.uniform(),
                           1.0 + 2.0 * rng.uniform()});
    const auto exact = blocking_prob_exact(sc);
    const auto mc = blocking_prob_mc(sc, 200000, 1000 + trial);
    for (std::size_t k = 0; k < exact.size(); ++k)
      CHECK(std::abs(exact[k] - mc.blocking[k]) <=
            3.0 * mc.ci_half_width[k] + 1e-4);
  }
}

TEST_CASE("monte carlo error shrinks with the horizon") {
  BlockingScenario sc = single_class(2.0, 3);
  const double exact = blocking_prob_exact(sc)[0];
  const auto rough = blocking_prob_mc(sc, 10000, 4);
  const auto fine = blocking_prob_mc(sc, 1000000, 4);
  CHECK(std::abs(fine.blocking[0] - exact) <=
        std::abs(rough.blocking[0] - exact) + 3.0 * rough.ci_half_width[0]);
  CHECK(std::abs(fine.blocking[0] - exact) <= 3.0 * fine.ci_half_width[0] + 1e-5);
}

TEST_CASE("lemma 1: identity scaling and the worked example") {
  BlockingScenario sc = single_class(0.5, 2);
  const auto id = lemma1_scaling_check(sc, 0, 1);
  CHECK(id.blocking_before[0] == doctest::Approx(id.blocking_after[0]).epsilon(1e-15));
  CHECK(id.holds);

  // q = 2: narrowed PRBs admit 4 concurrent at doubled load
  const auto q2 = lemma1_scaling_check(sc, 0, 2);
  CHECK(q2.exact);
  CHECK(q2.blocking_before[0] == doctest::Approx(oracles::erlang_b(0.5, 2)).epsilon(1e-10));
  CHECK(q2.blocking_after[0] == doctest::Approx(oracles::erlang_b(1.0, 4)).epsilon(1e-10));
  CHECK(q2.blocking_after[0] == doctest::Approx(0.01538).epsilon(1e-3));
  CHECK(q2.holds);
}

TEST_CASE("lemma 1 on two classes also protects the other slice") {
  BlockingScenario sc;
  sc.reserved_bandwidth = 12.0;
  sc.slices.push_back({"a", 2, 0.2, 1.0, 2.0});  // rho 0.4
  sc.slices.push_back({"b", 1, 0.6, 1.0, 3.0});  // rho 0.6
  const auto r = lemma1_scaling_check(sc, 0, 2);
  CHECK(r.exact);
  CHECK(r.hypothesis_ok);
  for (std::size_t k = 0; k < r.blocking_before.size(); ++k)
    CHECK(r.blocking_before[k] >= r.blocking_after[k] - 1e-12);
}

TEST_CASE("lemma 1 randomized suite in the large-bandwidth regime") {
  Substream rng(21, Substream::tag("lem1"));
  int violations = 0;
  for (int trial = 0; trial < 20; ++trial) {
    BlockingScenario sc;
    const double omega_max = 1.0 + rng.uniform();
    sc.reserved_bandwidth = 10.0 * omega_max * (1.2 + rng.uniform());
    const int ns = 1 + static_cast<int>(rng.uniform() * 2);
    for (int s = 0; s < ns; ++s)
      sc.slices.push_back({"s" + std::to_string(s), 1,
                           0.1 + 0.7 * rng.uniform(), 1.0,
                           0.5 + (omega_max - 0.5) * rng.uniform()});
    for (int q : {2, 4}) {
      const auto r = lemma1_scaling_check(sc, 0, q);
      if (!r.holds) ++violations;  // asymptotic lemma: log, do not fail
    }
  }
  CHECK(violations <= 2);
}

TEST_CASE("closed-form phi matches enumeration on homogeneous cases") {
  for (int n : {2, 4, 8}) {
    for (double rho : {0.3, 0.8, 1.5}) {
      const double phi = phi_single_class(1, rho, static_cast<double>(n), 1.0);
      CHECK(phi == doctest::Approx(oracles::erlang_b(rho, n)).epsilon(1e-12));
      BlockingScenario sc = single_class(rho, n);
      CHECK(phi == doctest::Approx(blocking_prob_exact(sc)[0]).epsilon(1e-10));
    }
  }
}
