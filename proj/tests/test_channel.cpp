#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "ranslicer/channel.hpp"
#include "ranslicer/rng.hpp"

using namespace ranslicer;
using namespace ranslicer::channel;

namespace {

Topology small_topology(double shadowing_db = 10.0) {
  Topology t;
  t.region_radius_km = 0.5;
  t.antennas_per_bs = 2;
  t.antenna_gain_db = 5.0;
  t.shadowing_std_db = shadowing_db;
  t.noise_power_w = 1e-14;
  t.snr_loss = 1.5;
  t.bs_positions = boundary_bs_positions(0.5, 3);
  t.ue_groups.push_back({"e1", uniform_ue_positions(0.5, 4, 7, 0)});
  t.ue_groups.push_back({"u1", uniform_ue_positions(0.5, 2, 7, 1)});
  return t;
}

}  // namespace

TEST_CASE("path loss matches the log-distance model") {
  CHECK(path_loss_db(1.0) == doctest::Approx(128.1).epsilon(1e-12));
  CHECK(path_loss_db(0.1) == doctest::Approx(90.5).epsilon(1e-12));
  CHECK(path_loss_db(0.25) ==
        doctest::Approx(128.1 + 37.6 * std::log10(0.25)).epsilon(1e-12));
  CHECK(path_loss_db(0.25) == doctest::Approx(105.464).epsilon(1e-4));
  CHECK_THROWS_AS(path_loss_db(0.0), std::domain_error);
  CHECK_THROWS_AS(path_loss_db(-1.0), std::domain_error);
}

TEST_CASE("topology invariants are enforced") {
  Topology t = small_topology();
  CHECK_NOTHROW(t.validate());

  Topology bad = t;
  bad.snr_loss = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = t;
  bad.bs_positions[0] = {0.1, 0.1};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = t;
  bad.ue_groups[0].positions[0] = {1.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("sampling is deterministic per (seed, index)") {
  ChannelModel model(small_topology(), 42);
  const ChannelSet a = model.sample(3);
  const ChannelSet b = model.sample(3);
  for (std::size_t g = 0; g < a.h.size(); ++g)
    for (std::size_t u = 0; u < a.h[g].size(); ++u)
      CHECK(a.h[g][u] == b.h[g][u]);

  const ChannelSet c = model.sample(4);
  CHECK(a.h[0][0] != c.h[0][0]);
}

TEST_CASE("entries at distinct indices are uncorrelated") {
  ChannelModel model(small_topology(), 11);
  const int draws = 10000;
  double sxy = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0;
  for (int d = 0; d < draws; ++d) {
    const double x = model.sample(2 * d).h[0][0](0).real();
    const double y = model.sample(2 * d + 1).h[0][0](0).real();
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const double n = draws;
  const double cov = sxy / n - (sx / n) * (sy / n);
  const double vx = sxx / n - (sx / n) * (sx / n);
  const double vy = syy / n - (sy / n) * (sy / n);
  const double corr = cov / std::sqrt(vx * vy);
  CHECK(std::abs(corr) < 3.0 / std::sqrt(n));
}

TEST_CASE("mean |h|^2 matches the link budget") {
  // no shadowing so the budget is pure path loss + antenna gain
  Topology t = small_topology(0.0);
  t.ue_groups.clear();
  t.ue_groups.push_back({"e1", {{0.25, 0.0}}});
  ChannelModel model(t, 5);
  const double d = distance_km(t.ue_groups[0].positions[0], t.bs_positions[0]);
  const double budget =
      std::pow(10.0, (t.antenna_gain_db - path_loss_db(d)) / 10.0);
  CHECK(model.link_gain(0, 0, 0) == doctest::Approx(budget).epsilon(1e-12));

  const int draws = 100000;
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) {
    const auto h = model.sample(i).h[0][0];
    acc += std::norm(h(0));
  }
  CHECK(acc / draws == doctest::Approx(budget).epsilon(0.02));
}

TEST_CASE("received snr formula and scalar cases") {
  Eigen::VectorXcd h(1), w(1);
  h << std::complex<double>(1.0, 0.0);
  w << std::complex<double>(2.0, 0.0);
  CHECK(received_snr(h, w, 1.0, 1.0) == doctest::Approx(4.0));
  CHECK(received_snr(h, w, 2.0, 1.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(received_snr(h, w, 0.5, 1.0), std::domain_error);
  CHECK_THROWS_AS(received_snr(h, w, 1.5, 0.0), std::domain_error);
}

TEST_CASE("snr equals the trace identity, is phase invariant and scales") {
  Substream rng(99, Substream::tag("test"));
  for (int trial = 0; trial < 50; ++trial) {
    const int jk = 6;
    Eigen::VectorXcd h(jk), w(jk);
    for (int i = 0; i < jk; ++i) {
      h(i) = rng.cnormal();
      w(i) = rng.cnormal();
    }
    const double phi = 1.5, sigma2 = 2.0;
    const double direct = received_snr(h, w, phi, sigma2);

    const Eigen::MatrixXcd big_h = h * h.adjoint();
    const Eigen::MatrixXcd big_w = w * w.adjoint();
    const double via_trace = (big_h * big_w).trace().real() / (phi * sigma2);
    CHECK(direct == doctest::Approx(via_trace).epsilon(1e-12));

    const std::complex<double> rot = std::polar(1.0, 1.234);
    CHECK(received_snr(h, rot * w, phi, sigma2) ==
          doctest::Approx(direct).epsilon(1e-12));

    const double c = 3.7;
    CHECK(received_snr(h, std::sqrt(c) * w, phi, sigma2) ==
          doctest::Approx(c * direct).epsilon(1e-12));
  }
}

TEST_CASE("ue placement stays in the disc and bs spacing is equal") {
  const auto ues = uniform_ue_positions(0.5, 200, 3, 0);
  for (const auto& p : ues) CHECK(std::hypot(p.x, p.y) <= 0.5);
  const auto bs = boundary_bs_positions(0.5, 3);
  const double d01 = distance_km(bs[0], bs[1]);
  const double d12 = distance_km(bs[1], bs[2]);
  const double d20 = distance_km(bs[2], bs[0]);
  CHECK(d01 == doctest::Approx(d12).epsilon(1e-12));
  CHECK(d12 == doctest::Approx(d20).epsilon(1e-12));
}
