#include "ranslicer/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace ranslicer::harness {

namespace {

struct Expanded {
  std::vector<slicing::EmbbRequest> embb;
  channel::Topology topology;
};

// Builds the concrete topology. UE positions are drawn per original slice so
// the unicast expansion (one slice per UE) sees the same geometry and, with
// globally keyed link streams, the same channels.
Expanded expand(const Scenario& sc) {
  Expanded out;
  out.topology.region_radius_km = sc.topology.region_radius_km;
  out.topology.antennas_per_bs = sc.topology.antennas_per_bs;
  out.topology.antenna_gain_db = sc.topology.antenna_gain_db;
  out.topology.shadowing_std_db = sc.topology.shadowing_std_db;
  out.topology.noise_power_w = sc.topology.noise_power_w;
  out.topology.snr_loss = sc.topology.snr_loss;
  out.topology.bs_positions = channel::boundary_bs_positions(
      sc.topology.region_radius_km, sc.topology.num_bs);

  for (std::size_t s = 0; s < sc.embb.size(); ++s) {
    const auto pos = channel::uniform_ue_positions(
        sc.topology.region_radius_km, sc.embb[s].num_ues, sc.seed, s);
    if (sc.mode == ServiceMode::multicast) {
      out.embb.push_back(sc.embb[s]);
      out.topology.ue_groups.push_back(
          {"embb-" + std::to_string(sc.embb[s].id), pos});
    } else {
      for (int i = 0; i < sc.embb[s].num_ues; ++i) {
        slicing::EmbbRequest r;
        r.id = sc.embb[s].id * 100 + i;
        r.num_ues = 1;
        r.min_rate = sc.embb[s].min_rate;
        out.embb.push_back(r);
        out.topology.ue_groups.push_back(
            {"embb-" + std::to_string(r.id), {pos[i]}});
      }
    }
  }
  for (std::size_t s = 0; s < sc.urllc.size(); ++s) {
    const auto pos = channel::uniform_ue_positions(
        sc.topology.region_radius_km, sc.urllc[s].num_ues, sc.seed,
        sc.embb.size() + s);
    out.topology.ue_groups.push_back(
        {"urllc-" + std::to_string(sc.urllc[s].id), pos});
  }
  return out;
}

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void hash_mix(std::uint64_t& h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  h ^= '|';
  h *= 0x100000001B3ULL;
}

}  // namespace

void Scenario::validate() const {
  if (topology.region_radius_km <= 0.0 || topology.num_bs < 1 ||
      topology.antennas_per_bs < 1 || topology.noise_power_w <= 0.0)
    throw std::invalid_argument("scenario: bad topology parameters");
  if (topology.snr_loss <= 1.0)
    throw std::invalid_argument("scenario: snr_loss must exceed 1");
  if (sys.total_bandwidth <= 0.0 || sys.numerology <= 0.0)
    throw std::invalid_argument("scenario: bad system parameters");
  if (static_cast<int>(sys.bs_power.size()) != topology.num_bs)
    throw std::invalid_argument("scenario: bs_power size must match num_bs");
  for (double e : sys.bs_power)
    if (e <= 0.0) throw std::invalid_argument("scenario: bs power must be > 0");
  if (!(sys.outage_prob > 0.0 && sys.outage_prob < 1.0) ||
      !(sys.sample_confidence > 0.0 && sys.sample_confidence < 1.0))
    throw std::invalid_argument("scenario: epsilon/theta must lie in (0,1)");
  if (sys.minislots < 1) throw std::invalid_argument("scenario: minislots < 1");
  for (const auto& e : embb)
    if (e.num_ues < 1 || e.min_rate <= 0.0)
      throw std::invalid_argument("scenario: bad eMBB request");
  for (const auto& u : urllc) {
    if (u.num_ues < 1 || u.deadline <= 0.0 || u.arrival_rate <= 0.0 ||
        u.packet_bits <= 0.0)
      throw std::invalid_argument("scenario: bad URLLC request");
    if (!(u.decode_error > 0.0 && u.decode_error < 1.0) ||
        !(u.blocking_target > 0.0 && u.blocking_target < 1.0))
      throw std::invalid_argument("scenario: alpha/beta outside (0,1)");
    if (u.arrival_rate * u.deadline >= 1.0)
      throw std::invalid_argument("scenario: per-UE load must be < 1");
  }
  if (sample_cap < 1 || (sample_override && *sample_override < 1))
    throw std::invalid_argument("scenario: bad sample counts");
}

std::string algorithm_name(slicing::Algorithm a) {
  switch (a) {
    case slicing::Algorithm::iara_ab:
      return "iara-ab";
    case slicing::Algorithm::es_ab:
      return "es-ab";
    case slicing::Algorithm::iara_a:
      return "iara-a";
    case slicing::Algorithm::irhs:
      return "irhs";
  }
  return "?";
}

slicing::Algorithm algorithm_from_name(const std::string& name) {
  if (name == "iara-ab") return slicing::Algorithm::iara_ab;
  if (name == "es-ab") return slicing::Algorithm::es_ab;
  if (name == "iara-a") return slicing::Algorithm::iara_a;
  if (name == "irhs") return slicing::Algorithm::irhs;
  throw std::invalid_argument("unknown algorithm: " + name);
}

void apply_sweep_value(Scenario& sc, const std::string& param,
                       const std::string& token) {
  const auto numeric = [&]() {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size())
      throw std::invalid_argument("sweep: bad numeric token " + token);
    return v;
  };
  if (param == "W") {
    sc.sys.total_bandwidth = numeric();
  } else if (param == "eta") {
    sc.sys.efficiency = numeric();
  } else if (param == "D_s") {
    const double scale = numeric();
    for (auto& u : sc.urllc) u.deadline *= scale;
  } else if (param == "R_s") {
    const double scale = numeric();
    for (auto& e : sc.embb) e.min_rate *= scale;
  } else if (param == "ue_count") {
    const int n = static_cast<int>(numeric());
    for (auto& u : sc.urllc) u.num_ues = n;
  } else if (param == "mode") {
    if (token == "unicast")
      sc.mode = ServiceMode::unicast;
    else if (token == "multicast")
      sc.mode = ServiceMode::multicast;
    else
      throw std::invalid_argument("sweep: mode must be unicast|multicast");
  } else if (param == "snr_case") {
    if (token == "I")
      sc.sys.snr_case = solver::SnrCase::enforced;
    else if (token == "II")
      sc.sys.snr_case = solver::SnrCase::relaxed;
    else
      throw std::invalid_argument("sweep: snr_case must be I|II");
  } else {
    throw std::invalid_argument("sweep: unknown parameter " + param);
  }
}

std::uint64_t scenario_hash(const Scenario& sc) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  hash_mix(h, fmt9(sc.topology.region_radius_km));
  hash_mix(h, std::to_string(sc.topology.num_bs));
  hash_mix(h, std::to_string(sc.topology.antennas_per_bs));
  hash_mix(h, fmt9(sc.topology.antenna_gain_db));
  hash_mix(h, fmt9(sc.topology.shadowing_std_db));
  hash_mix(h, fmt9(sc.topology.noise_power_w));
  hash_mix(h, fmt9(sc.topology.snr_loss));
  hash_mix(h, fmt9(sc.sys.total_bandwidth));
  for (double e : sc.sys.bs_power) hash_mix(h, fmt9(e));
  hash_mix(h, fmt9(sc.sys.numerology));
  hash_mix(h, fmt9(sc.sys.efficiency));
  hash_mix(h, fmt9(sc.sys.priority_weight));
  hash_mix(h, fmt9(sc.sys.profit_const));
  hash_mix(h, fmt9(sc.sys.outage_prob));
  hash_mix(h, fmt9(sc.sys.sample_confidence));
  hash_mix(h, std::to_string(sc.sys.minislots));
  hash_mix(h, sc.sys.snr_case == solver::SnrCase::enforced ? "I" : "II");
  hash_mix(h, fmt9(sc.sys.min_snr));
  for (const auto& e : sc.embb) {
    hash_mix(h, std::to_string(e.id));
    hash_mix(h, std::to_string(e.num_ues));
    hash_mix(h, fmt9(e.min_rate));
  }
  for (const auto& u : sc.urllc) {
    hash_mix(h, std::to_string(u.id));
    hash_mix(h, std::to_string(u.num_ues));
    hash_mix(h, fmt9(u.deadline));
    hash_mix(h, fmt9(u.decode_error));
    hash_mix(h, fmt9(u.blocking_target));
    hash_mix(h, fmt9(u.arrival_rate));
    hash_mix(h, fmt9(u.packet_bits));
  }
  hash_mix(h, algorithm_name(sc.algorithm));
  hash_mix(h, sc.mode == ServiceMode::unicast ? "unicast" : "multicast");
  hash_mix(h, std::to_string(sc.seed));
  return h;
}

RunRow run_one(const Scenario& sc) {
  sc.validate();
  Expanded ex = expand(sc);
  channel::ChannelModel model(std::move(ex.topology), sc.seed);

  int embb_ues = 0, urllc_ues = 0;
  for (const auto& e : ex.embb) embb_ues += e.num_ues;
  for (const auto& u : sc.urllc) urllc_ues += u.num_ues;

  std::int64_t m_star = 1;
  if ((embb_ues + urllc_ues) * sc.topology.num_bs *
          sc.topology.antennas_per_bs >
      1)
    m_star = slicing::sample_count(embb_ues, urllc_ues, sc.topology.num_bs,
                                   sc.topology.antennas_per_bs,
                                   sc.sys.outage_prob, sc.sys.sample_confidence);
  const int m_used =
      sc.sample_override
          ? *sc.sample_override
          : static_cast<int>(std::min<std::int64_t>(m_star, sc.sample_cap));

  slicing::SlotContext ctx;
  ctx.model = &model;
  ctx.sys = sc.sys;
  ctx.embb = ex.embb;
  ctx.urllc = sc.urllc;
  ctx.algorithm = sc.algorithm;
  ctx.samples = m_used;
  ctx.seed = sc.seed;

  const auto slot = slicing::decide_slot(ctx);

  RunRow row;
  row.algorithm = algorithm_name(sc.algorithm);
  row.seed = sc.seed;
  row.m_star = m_star;
  row.m_used = m_used;
  row.scenario_hash = scenario_hash(sc);
  for (auto b : slot.embb_accept) {
    row.accepted_embb += b ? '1' : '0';
    row.embb_accept_count += b ? 1 : 0;
  }
  double alt = 0.0;
  for (const auto& s : slot.per_sample) alt += s.alternations;
  row.alternations_avg = slot.per_sample.empty()
                             ? 0.0
                             : alt / static_cast<double>(slot.per_sample.size());

  int total_mask_slots = 0;
  double accepted_bw = 0.0;
  for (std::size_t s = 0; s < ex.embb.size(); ++s)
    if (slot.embb_accept[s]) accepted_bw += slot.embb_bandwidth[s];
  for (int t = 0; t < sc.sys.minislots; ++t) {
    const auto ms = slicing::minislot_schedule(ctx, slot, t);
    row.total_utility += ms.total_utility;
    row.embb_utility += ms.embb_utility;
    row.urllc_utility += ms.urllc_utility;
    row.total_power += ms.total_power;
    row.urllc_power += ms.urllc_power;
    row.reserved_bandwidth_avg += ms.reserved_bandwidth;
    row.max_tightness = std::max(row.max_tightness, ms.max_tightness);
    if (ms.violation) ++row.minislot_violations;
    int on = 0;
    for (auto b : ms.urllc_mask) on += b;
    row.urllc_mask_on_avg += ms.urllc_mask.empty()
                                 ? 0.0
                                 : static_cast<double>(on) /
                                       static_cast<double>(ms.urllc_mask.size());
    ++total_mask_slots;
    // independent re-validation of the emitted allocations
    if (!ms.violation) {
      for (int j = 0; j < sc.topology.num_bs; ++j)
        if (ms.bs_power_used[j] > sc.sys.bs_power[j] * (1.0 + 1e-6))
          ++row.revalidation_failures;
      if (accepted_bw + ms.reserved_bandwidth >
          sc.sys.total_bandwidth * (1.0 + 1e-6))
        ++row.revalidation_failures;
    }
  }
  if (total_mask_slots > 0) {
    row.urllc_mask_on_avg /= total_mask_slots;
    row.reserved_bandwidth_avg /= total_mask_slots;
  }
  return row;
}

RunReport sweep(const Scenario& base, const std::string& param,
                const std::vector<std::string>& grid,
                const std::vector<slicing::Algorithm>& algorithms,
                const std::vector<std::uint64_t>& seeds, int jobs) {
  struct Task {
    std::size_t value_ix, alg_ix, seed_ix;
  };
  std::vector<Task> tasks;
  for (std::size_t v = 0; v < grid.size(); ++v)
    for (std::size_t a = 0; a < algorithms.size(); ++a)
      for (std::size_t s = 0; s < seeds.size(); ++s) tasks.push_back({v, a, s});

  RunReport report;
  report.rows.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string error;
  std::mutex error_mu;

  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || failed.load()) return;
      const Task& t = tasks[i];
      try {
        Scenario sc = base;
        sc.sweep_param.clear();
        sc.sweep_grid.clear();
        apply_sweep_value(sc, param, grid[t.value_ix]);
        sc.algorithm = algorithms[t.alg_ix];
        sc.seed = seeds[t.seed_ix];
        RunRow row = run_one(sc);
        row.param = param;
        row.value = grid[t.value_ix];
        report.rows[i] = std::move(row);
      } catch (const std::exception& e) {
        std::scoped_lock lk(error_mu);
        if (!failed.exchange(true))
          error = std::string("sweep task failed: ") + e.what();
      }
    }
  };
  int n_jobs = jobs > 0 ? jobs
                        : static_cast<int>(std::max(
                              1u, std::thread::hardware_concurrency()));
  n_jobs = std::min<int>(n_jobs, static_cast<int>(tasks.size()));
  std::vector<std::thread> pool;
  for (int j = 1; j < n_jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failed.load()) throw std::runtime_error(error);
  return report;
}

std::string to_csv(const RunReport& report) {
  std::ostringstream out;
  out << "algorithm,param,value,seed,total_utility,embb_utility,urllc_utility,"
         "total_power_w,urllc_power_w,accepted_embb,embb_accept_count,"
         "urllc_mask_on_avg,w_u_hz,m_star,m_used,alternations_avg,"
         "max_tightness,minislot_violations,revalidation_failures,"
         "scenario_hash\n";
  for (const auto& r : report.rows) {
    out << r.algorithm << ',' << r.param << ',' << r.value << ',' << r.seed
        << ',' << fmt9(r.total_utility) << ',' << fmt9(r.embb_utility) << ','
        << fmt9(r.urllc_utility) << ',' << fmt9(r.total_power) << ','
        << fmt9(r.urllc_power) << ',' << (r.accepted_embb.empty() ? "-" : r.accepted_embb)
        << ',' << r.embb_accept_count << ',' << fmt9(r.urllc_mask_on_avg) << ','
        << fmt9(r.reserved_bandwidth_avg) << ',' << r.m_star << ',' << r.m_used
        << ',' << fmt9(r.alternations_avg) << ',' << fmt9(r.max_tightness)
        << ',' << r.minislot_violations << ',' << r.revalidation_failures
        << ',' << r.scenario_hash << '\n';
  }
  return out.str();
}

}  // namespace ranslicer::harness
