#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ranslicer/channel.hpp"
#include "ranslicer/rng.hpp"
#include "ranslicer/slicing.hpp"

using namespace ranslicer;
using namespace ranslicer::slicing;

namespace {

channel::Topology topology_for(const std::vector<int>& group_sizes,
                               std::uint64_t seed) {
  channel::Topology t;
  t.region_radius_km = 0.5;
  t.antennas_per_bs = 2;
  t.antenna_gain_db = 5.0;
  t.shadowing_std_db = 10.0;
  t.noise_power_w = 1e-14;
  t.snr_loss = 1.5;
  t.bs_positions = channel::boundary_bs_positions(0.5, 3);
  for (std::size_t g = 0; g < group_sizes.size(); ++g)
    t.ue_groups.push_back(
        {"g" + std::to_string(g),
         channel::uniform_ue_positions(0.5, group_sizes[g], seed, g)});
  return t;
}

struct Fixture {
  channel::ChannelModel model;
  SlotContext ctx;
};

Fixture small_context(std::uint64_t seed, Algorithm alg = Algorithm::iara_ab) {
  Fixture f{channel::ChannelModel(topology_for({2, 2}, seed), seed), {}};
  f.ctx.model = &f.model;
  f.ctx.sys.total_bandwidth = 10e6;
  f.ctx.sys.bs_power = {1.0, 1.0, 1.0};
  f.ctx.sys.minislots = 4;
  f.ctx.embb = {{0, 2, 2e6}};
  f.ctx.urllc = {{10, 2, 1e-3, 2e-8, 1e-6, 0.1, 160.0}};
  f.ctx.algorithm = alg;
  f.ctx.samples = 3;
  f.ctx.seed = seed;
  return f;
}

}  // namespace

TEST_CASE("sample count formula") {
  // (N^e + N^u) J K = 24
  CHECK(sample_count(2, 2, 3, 2, 0.5, 0.5) == 59);
  // theta -> 1 leaves ceil((d-1)/eps); at eps = 0.7 the ratio 23/0.7 is not
  // an integer, so the ceiling is stable under the vanishing log term
  CHECK(sample_count(2, 2, 3, 2, 0.7, 1.0 - 1e-15) ==
        static_cast<std::int64_t>(std::ceil(23.0 / 0.7)));
  CHECK(sample_count(2, 2, 3, 2, 0.5, 1.0 - 1e-15) <= 47);
  // monotone nonincreasing in eps and theta
  std::int64_t prev = 1'000'000'000;
  for (double eps : {0.1, 0.3, 0.5, 0.9}) {
    const auto m = sample_count(2, 2, 3, 2, eps, 0.5);
    CHECK(m <= prev);
    prev = m;
  }
  prev = 1'000'000'000;
  for (double theta : {0.1, 0.3, 0.5, 0.9}) {
    const auto m = sample_count(2, 2, 3, 2, 0.5, theta);
    CHECK(m <= prev);
    prev = m;
  }
  CHECK_THROWS_AS(sample_count(0, 0, 3, 2, 0.5, 0.5), std::domain_error);
  CHECK_THROWS_AS(sample_count(2, 2, 3, 2, 0.0, 0.5), std::domain_error);
}

TEST_CASE("embb acceptance basics") {
  FixedUrllcLoad none;
  none.bs_power = {0.0, 0.0, 0.0};
  const std::vector<double> budget = {1.0, 1.0, 1.0};

  AcceptanceCandidate a;
  a.slice_id = 0;
  a.qos_ok = true;
  a.bandwidth = 1e6;
  a.bs_power = {0.1, 0.1, 0.1};
  a.utility_accept = 310.0;
  a.utility_decline = 300.0;
  CHECK(embb_acceptance({a}, none, 10e6, budget) ==
        std::vector<std::uint8_t>{1});

  // infeasible QoS keeps it declined
  auto bad = a;
  bad.qos_ok = false;
  CHECK(embb_acceptance({bad}, none, 10e6, budget) ==
        std::vector<std::uint8_t>{0});

  // bandwidth admits one of two equal-utility slices: lower id wins
  auto b = a;
  b.slice_id = 1;
  CHECK(embb_acceptance({a, b}, none, 1.5e6, budget) ==
        std::vector<std::uint8_t>{1, 0});
}

TEST_CASE("embb acceptance matches an independent brute force") {
  Substream rng(3, Substream::tag("accept"));
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3;
    std::vector<AcceptanceCandidate> cands(n);
    for (int s = 0; s < n; ++s) {
      cands[s].slice_id = s;
      cands[s].qos_ok = rng.uniform() > 0.2;
      cands[s].bandwidth = 1e6 * rng.uniform();
      cands[s].bs_power = {0.4 * rng.uniform(), 0.4 * rng.uniform(),
                           0.4 * rng.uniform()};
      cands[s].utility_accept = 300.0 + 20.0 * (rng.uniform() - 0.3);
      cands[s].utility_decline = 300.0;
    }
    FixedUrllcLoad load;
    load.bs_power = {0.2 * rng.uniform(), 0.2 * rng.uniform(),
                     0.2 * rng.uniform()};
    load.reserved_bandwidth = 1e6 * rng.uniform();
    const std::vector<double> budget = {1.0, 1.0, 1.0};
    const double w = 2e6;

    const auto got = embb_acceptance(cands, load, w, budget);

    double best = -1e300;
    std::vector<std::uint8_t> want(n, 0);
    for (int bs = 0; bs < (1 << n); ++bs) {
      double u = 0.0, bw = load.reserved_bandwidth;
      std::vector<double> p = load.bs_power;
      bool ok = true;
      for (int s = 0; s < n; ++s) {
        if (bs & (1 << s)) {
          if (!cands[s].qos_ok) ok = false;
          u += cands[s].utility_accept;
          bw += cands[s].bandwidth;
          for (int j = 0; j < 3; ++j) p[j] += cands[s].bs_power[j];
        } else {
          u += cands[s].utility_decline;
        }
      }
      if (!ok || bw > w * (1.0 + 1e-9)) continue;
      for (int j = 0; j < 3; ++j)
        if (p[j] > budget[j] * (1.0 + 1e-9)) ok = false;
      if (!ok) continue;
      if (u > best + 1e-12) {
        best = u;
        for (int s = 0; s < n; ++s) want[s] = (bs >> s) & 1;
      }
    }
    double got_u = 0.0;
    for (int s = 0; s < n; ++s)
      got_u += got[s] ? cands[s].utility_accept : cands[s].utility_decline;
    CHECK(got_u == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("grm selects greedily and matches the worked example") {
  // all feasible jointly: all ones, considered in utility order
  std::vector<MaskCandidate> cands = {{0, 0, 5.0}, {0, 1, 3.0}, {1, 0, 1.0}};
  std::vector<std::vector<std::uint8_t>> calls;
  auto all_ok = [&](const std::vector<std::uint8_t>& m) {
    calls.push_back(m);
    return true;
  };
  CHECK(grm_mask(cands, all_ok) == std::vector<std::uint8_t>{1, 1, 1});
  REQUIRE(calls.size() == 3);
  CHECK(calls[0] == std::vector<std::uint8_t>{1, 0, 0});  // utility 5 first

  // capacity for exactly one: only the utility-5 user stays
  auto one_slot = [&](const std::vector<std::uint8_t>& m) {
    int count = 0;
    for (auto b : m) count += b;
    return count <= 1;
  };
  CHECK(grm_mask(cands, one_slot) == std::vector<std::uint8_t>{1, 0, 0});
  CHECK(es_mask(cands, one_slot) == std::vector<std::uint8_t>{1, 0, 0});
}

TEST_CASE("grm equals exhaustive search on utility-correlated instances") {
  Substream rng(9, Substream::tag("grm-es"));
  int mismatches = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    const int n = 4 + static_cast<int>(rng.uniform() * 6);  // up to 9
    std::vector<MaskCandidate> cands(n);
    std::vector<double> weight(n);
    for (int k = 0; k < n; ++k) {
      // high snr -> high utility and low bandwidth need
      const double z = 5.0 + 495.0 * rng.uniform();
      cands[k] = {k / 3, k % 3, std::log1p(z) + 1.0};
      weight[k] = 160.0 / std::log2(1.0 + z);
    }
    double cap = 0.0;
    for (double w : weight) cap += w;
    cap *= 0.3 + 0.5 * rng.uniform();
    auto oracle = [&](const std::vector<std::uint8_t>& m) {
      double used = 0.0;
      for (int k = 0; k < n; ++k)
        if (m[k]) used += weight[k];
      return used <= cap;
    };
    const auto g = grm_mask(cands, oracle);
    const auto e = es_mask(cands, oracle);
    double gu = 0.0, eu = 0.0;
    for (int k = 0; k < n; ++k) {
      gu += g[k] ? cands[k].utility : 0.0;
      eu += e[k] ? cands[k].utility : 0.0;
    }
    if (std::abs(gu - eu) > 1e-12) ++mismatches;
  }
  // strong form of the equal-utility finding; mismatches are logged, the
  // rate is what the invariant pins
  if (mismatches > 0)
    MESSAGE("grm/es mismatches: ", mismatches, " of ", trials);
  CHECK(mismatches <= trials / 20);
}

TEST_CASE("restoration averages and declines by acceptance count") {
  // all samples accept slice 0 at bandwidth c
  std::vector<RestorationSample> samples = {
      {{1, 1}, {2e6, 1e6}},
      {{1, 0}, {2e6, 0.0}},
      {{1, 1}, {2e6, 3e6}},
  };
  // feasible whenever total restored bandwidth fits 4.5e6
  auto feasible = [&](const std::vector<std::uint8_t>& b,
                      const std::vector<double>& w, int) {
    double total = 0.0;
    for (std::size_t k = 0; k < b.size(); ++k) total += b[k] ? w[k] : 0.0;
    return total <= 4.5e6;
  };
  const auto res = restore_slot_vars(samples, feasible);
  CHECK(res.bandwidth[0] == doctest::Approx(2e6));
  CHECK(res.accept == std::vector<std::uint8_t>{1, 1});
  CHECK(res.counts == std::vector<int>{3, 2});
  CHECK(res.declines == 0);

  // shrink the budget: slice 1 (accepted in fewer samples) goes first
  auto tight = [&](const std::vector<std::uint8_t>& b,
                   const std::vector<double>& w, int) {
    double total = 0.0;
    for (std::size_t k = 0; k < b.size(); ++k) total += b[k] ? w[k] : 0.0;
    return total <= 2.5e6;
  };
  const auto res2 = restore_slot_vars(samples, tight);
  CHECK(res2.accept == std::vector<std::uint8_t>{1, 0});
  CHECK(res2.bandwidth[1] == 0.0);
  CHECK(res2.declines == 1);
}

TEST_CASE("slot decision on a small scenario") {
  auto f = small_context(7);
  const auto slot = decide_slot(f.ctx);
  CHECK(slot.samples_succeeded == 3);
  // generous bandwidth and power: the single eMBB slice is accepted
  CHECK(slot.embb_accept == std::vector<std::uint8_t>{1});
  CHECK(slot.embb_bandwidth[0] > 0.0);
  CHECK(slot.embb_bandwidth[0] <= f.ctx.sys.total_bandwidth);
  // per-sample objective traces are monotone nondecreasing
  for (const auto& smp : slot.per_sample) {
    REQUIRE(smp.solved);
    for (std::size_t r = 1; r < smp.objective_trace.size(); ++r)
      CHECK(smp.objective_trace[r] >=
            smp.objective_trace[r - 1] -
                1e-9 * std::max(1.0, std::abs(smp.objective_trace[r - 1])));
    CHECK(smp.alternations < 250);
  }

  // determinism: identical context gives identical decisions
  auto f2 = small_context(7);
  const auto slot2 = decide_slot(f2.ctx);
  CHECK(slot2.embb_bandwidth[0] == slot.embb_bandwidth[0]);
  CHECK(slot2.embb_accept == slot.embb_accept);
}

TEST_CASE("minislot schedule produces tight beamformers and utilities") {
  auto f = small_context(13);
  const auto slot = decide_slot(f.ctx);
  double sum = 0.0;
  for (int t = 0; t < f.ctx.sys.minislots; ++t) {
    const auto ms = minislot_schedule(f.ctx, slot, t);
    REQUIRE(!ms.violation);
    CHECK(ms.max_tightness <= 1e-6);
    // slot utility is the plain sum over minislots
    sum += ms.total_utility;
    CHECK(ms.total_utility ==
          doctest::Approx(ms.embb_utility + ms.urllc_utility));
    // reserved bandwidth and accepted eMBB bandwidth fit in W
    double embb_bw = 0.0;
    for (std::size_t s = 0; s < f.ctx.embb.size(); ++s)
      embb_bw += slot.embb_accept[s] ? slot.embb_bandwidth[s] : 0.0;
    CHECK(embb_bw + ms.reserved_bandwidth <=
          f.ctx.sys.total_bandwidth * (1.0 + 1e-9));
    // per-BS power fits the budget
    for (int j = 0; j < 3; ++j)
      CHECK(ms.bs_power_used[j] <= f.ctx.sys.bs_power[j] * (1.0 + 1e-6));
  }
  CHECK(sum > 0.0);
}

TEST_CASE("empty request set reports the idle power balance") {
  Fixture f{channel::ChannelModel(topology_for({}, 5), 5), {}};
  f.ctx.model = &f.model;
  f.ctx.sys.bs_power = {1.0, 1.0, 1.0};
  f.ctx.sys.efficiency = 100.0;
  f.ctx.samples = 1;
  const auto slot = decide_slot(f.ctx);
  const auto ms = minislot_schedule(f.ctx, slot, 0);
  CHECK(ms.total_utility == doctest::Approx(300.0));
}

TEST_CASE("iara-alpha reserves strictly less than iara-alphabeta") {
  auto fa = small_context(19, Algorithm::iara_a);
  auto fb = small_context(19, Algorithm::iara_ab);
  const auto slot_a = decide_slot(fa.ctx);
  const auto slot_b = decide_slot(fb.ctx);
  const auto ms_a = minislot_schedule(fa.ctx, slot_a, 0);
  const auto ms_b = minislot_schedule(fb.ctx, slot_b, 0);
  // identical masks would make this exact; at minimum the alpha variant's
  // reservation must not exceed the alpha-beta one with the beta term
  REQUIRE(ms_a.urllc_mask == ms_b.urllc_mask);
  CHECK(ms_a.reserved_bandwidth < ms_b.reserved_bandwidth);
}
