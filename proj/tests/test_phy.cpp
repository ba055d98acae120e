#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ranslicer/phy.hpp"
#include "ranslicer/rng.hpp"

using namespace ranslicer;
using namespace ranslicer::phy;

TEST_CASE("q_inverse against the erfc bisection oracle") {
  CHECK(q_inverse(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q_inverse(1e-6) == doctest::Approx(4.7534).epsilon(1e-3));
  CHECK(q_inverse(2e-8) == doctest::Approx(5.488).epsilon(1e-2));
  for (double p : {0.9, 0.3, 1e-2, 1e-4, 1e-9})
    CHECK(q_inverse(p) == doctest::Approx(oracles::qinv_bisect(p)).epsilon(1e-10));
  CHECK_THROWS_AS(q_inverse(0.0), std::domain_error);
  CHECK_THROWS_AS(q_inverse(1.0), std::domain_error);
  // monotone decreasing
  CHECK(q_inverse(1e-3) > q_inverse(1e-2));
}

TEST_CASE("capacity and dispersion") {
  CHECK(capacity(0.0) == doctest::Approx(0.0));
  CHECK(dispersion(0.0) == doctest::Approx(0.0));
  CHECK(capacity(3.0) == doctest::Approx(2.0).epsilon(1e-14));
  const double ln2sq = std::log(2.0) * std::log(2.0);
  const double snr = std::pow(10.0, 0.5);  // 5 dB
  CHECK(dispersion(snr) / ln2sq ==
        doctest::Approx(1.0 - 1.0 / ((1.0 + snr) * (1.0 + snr))).epsilon(1e-14));
  CHECK(dispersion(snr) / ln2sq == doctest::Approx(0.9423).epsilon(1e-3));
  // V < ln^2 2 always, approaching it from below
  for (double s : {0.1, 1.0, 10.0, 1e4}) CHECK(dispersion(s) < ln2sq);
  CHECK(dispersion(1e8) == doctest::Approx(ln2sq).epsilon(1e-12));
}

TEST_CASE("channel uses closed form and round trip") {
  // alpha = 1/2 kills the dispersion penalty
  CHECK(channel_uses(100.0, 3.0, 0.5) == doctest::Approx(50.0).epsilon(1e-12));

  const double r = channel_uses(160.0, 31.0, 2e-8);
  CHECK(r == doctest::Approx(38.84).epsilon(1e-3));
  CHECK(fbl_payload_bits(r, 31.0, 2e-8) == doctest::Approx(160.0).epsilon(1e-9));

  CHECK_THROWS_AS(channel_uses(160.0, 0.0, 1e-6), std::domain_error);
  CHECK_THROWS_AS(channel_uses(0.0, 3.0, 1e-6), std::domain_error);

  // monotone decreasing in snr
  double prev = channel_uses(160.0, 1.0, 2e-8);
  for (double snr = 2.0; snr <= 100.0; snr += 1.0) {
    const double cur = channel_uses(160.0, snr, 2e-8);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("round trip holds across the full parameter box") {
  Substream rng(17, Substream::tag("fbl"));
  for (int i = 0; i < 1000; ++i) {
    const double bits = 50.0 + 450.0 * rng.uniform();
    const double snr = 1.0 + 99.0 * rng.uniform();
    const double alpha = std::pow(10.0, -9.0 + 6.0 * rng.uniform());
    const double r = channel_uses(bits, snr, alpha);
    const double back = fbl_payload_bits(r, snr, alpha);
    CHECK(back == doctest::Approx(bits).epsilon(1e-6));
  }
}

TEST_CASE("payload with unit dispersion never overstates the exact payload") {
  Substream rng(18, Substream::tag("fbl2"));
  for (int i = 0; i < 300; ++i) {
    const double snr = 0.5 + 80.0 * rng.uniform();
    const double alpha = std::pow(10.0, -9.0 + 6.0 * rng.uniform());
    const double r = 10.0 + 500.0 * rng.uniform();
    CHECK(fbl_payload_bits(r, snr, alpha) <=
          fbl_payload_bits_exact(r, snr, alpha) + 1e-9);
  }
}

TEST_CASE("subslice bandwidth") {
  CHECK(subslice_bandwidth(0.1, 32.0, 0.032, 1.0) == doctest::Approx(100.0));
  CHECK(subslice_bandwidth(0.1, 100.0, 0.032, 1.0) == doctest::Approx(312.5));
  const double w1 = subslice_bandwidth(0.1, 64.0, 0.032, 1.0);
  const double w2 = subslice_bandwidth(0.1, 64.0, 0.032, 2.0);
  CHECK(w1 == doctest::Approx(2.0 * w2).epsilon(1e-12));
}

TEST_CASE("square-root staffing") {
  std::vector<StaffedUser> none = {{false, 0.1, 100.0, 1.0}};
  CHECK(staffed_bandwidth(none, 0.032, 1e-6) == doctest::Approx(0.0));

  std::vector<StaffedUser> one = {{true, 0.1, 100.0, 1.0}};
  const double w = staffed_bandwidth(one, 0.032, 1e-6);
  CHECK(w == doctest::Approx(312.5 + oracles::qinv_bisect(1e-6) *
                                         std::sqrt(976562.5)).epsilon(1e-9));
  CHECK(w == doctest::Approx(5010.0).epsilon(2.0 / 5010.0));

  // beta = 1/2 leaves the mean term only
  CHECK(staffed_bandwidth(one, 0.032, 0.5) == doctest::Approx(312.5).epsilon(1e-9));

  // monotone in every masked r and in mask bits
  std::vector<StaffedUser> two = {{true, 0.1, 100.0, 1.0},
                                  {false, 0.2, 50.0, 2.0}};
  const double base = staffed_bandwidth(two, 0.032, 1e-6);
  two[0].channel_uses = 120.0;
  CHECK(staffed_bandwidth(two, 0.032, 1e-6) > base);
  two[0].channel_uses = 100.0;
  two[1].masked_on = true;
  CHECK(staffed_bandwidth(two, 0.032, 1e-6) > base);
}

TEST_CASE("shannon rate") {
  CHECK(embb_rate(1e6, 3.0) == doctest::Approx(2e6));
  CHECK(embb_rate(0.0, 3.0) == doctest::Approx(0.0));
  CHECK(embb_rate(10e6, 1.0) == doctest::Approx(1e7));
}

TEST_CASE("embb slice utility") {
  const std::vector<double> budget = {1.0, 1.0, 1.0};
  // declined slice leaves only the power balance
  CHECK(embb_utility_minislot(false, {1.0, 2.0}, {0.5, 0.5, 0.5}, 100.0,
                              budget) == doctest::Approx(300.0));
  // limit check: one UE with snr = e - 1 and zero power
  CHECK(embb_utility_minislot(true, {std::exp(1.0) - 1.0}, {0.0, 0.0, 0.0},
                              100.0, budget) == doctest::Approx(301.0));
  // powers at budget kill the balance, leaving the ln-profit alone
  CHECK(embb_utility_minislot(true, {3.0}, {1.0, 1.0, 1.0}, 100.0, budget) ==
        doctest::Approx(std::log(4.0)));
}

TEST_CASE("urllc slice utility") {
  const std::vector<double> budget = {1.0, 1.0, 1.0};
  const std::vector<std::vector<double>> zero_p = {{0.0, 0.0, 0.0}};
  CHECK(urllc_utility_minislot({false}, {5.0}, 1.0, 0.1, zero_p, 100.0,
                               budget) == doctest::Approx(300.0));
  // deadline profit is monotone decreasing in D
  CHECK(urllc_profit(0.1, 0.5) > urllc_profit(0.1, 1.0));
  CHECK(urllc_profit(0.1, 1.0) > urllc_profit(0.1, 2.0));
  // snr 0, huge D, zero power -> a_tilde + eta * sum E
  CHECK(urllc_utility_minislot({true}, {0.0}, 1e9, 0.1, zero_p, 100.0,
                               budget) == doctest::Approx(300.1));
}

TEST_CASE("utilities are additive and decreasing in transmit power") {
  const std::vector<double> budget = {1.0, 1.0, 1.0};
  const double lo =
      embb_utility_minislot(true, {2.0}, {0.3, 0.3, 0.3}, 100.0, budget);
  const double hi =
      embb_utility_minislot(true, {2.0}, {0.1, 0.1, 0.1}, 100.0, budget);
  CHECK(hi > lo);
}
