#include "ranslicer/slicing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ranslicer/phy.hpp"

namespace ranslicer::slicing {

namespace {

constexpr double kRelConvergence = 1e-5;  // Algorithm-2 objective delta
constexpr int kMaxAlternations = 250;     // r_max

std::int64_t checked_total_ues(const std::vector<EmbbRequest>& embb,
                               const std::vector<UrllcRequest>& urllc) {
  std::int64_t n = 0;
  for (const auto& e : embb) n += e.num_ues;
  for (const auto& u : urllc) n += u.num_ues;
  return n;
}

// Current continuous point of the alternation: covariances for every slice
// and UE (declined entities keep their last shapes so acceptance can
// reconsider them), bandwidths per eMBB slice.
struct ContState {
  std::vector<Eigen::MatrixXcd> v;      // per eMBB slice
  std::vector<double> omega;            // per eMBB slice
  std::vector<Eigen::MatrixXcd> g;      // per URLLC user, flattened
};

struct Flat {
  int slice = 0;  // URLLC slice index
  int ue = 0;
};

std::vector<Flat> flatten_urllc(const std::vector<UrllcRequest>& urllc) {
  std::vector<Flat> out;
  for (std::size_t s = 0; s < urllc.size(); ++s)
    for (int i = 0; i < urllc[s].num_ues; ++i)
      out.push_back({static_cast<int>(s), i});
  return out;
}

solver::Reservation reservation_of(Algorithm alg) {
  switch (alg) {
    case Algorithm::iara_a:
      return solver::Reservation::mean_only;
    case Algorithm::irhs:
      return solver::Reservation::continuous;
    default:
      return solver::Reservation::staffed;
  }
}

solver::ProblemParams make_params(const SlotContext& ctx) {
  const auto& topo = ctx.model->topology();
  solver::ProblemParams p;
  p.num_bs = topo.num_bs();
  p.antennas_per_bs = topo.antennas_per_bs;
  p.total_bandwidth = ctx.sys.total_bandwidth;
  p.bs_power = ctx.sys.bs_power;
  p.noise_power = topo.noise_power_w;
  p.snr_loss = topo.snr_loss;
  p.eta = ctx.sys.efficiency;
  p.priority_weight = ctx.sys.priority_weight;
  p.profit_const = ctx.sys.profit_const;
  p.numerology = ctx.sys.numerology;
  if (!ctx.urllc.empty()) {
    p.decode_error = ctx.urllc.front().decode_error;
    p.blocking_target = ctx.urllc.front().blocking_target;
  }
  p.snr_case = ctx.sys.snr_case;
  p.min_snr = ctx.sys.min_snr;
  p.reservation = reservation_of(ctx.algorithm);
  return p;
}

solver::ConvexSubproblem build_subproblem(
    const SlotContext& ctx, const channel::ChannelSet& ch,
    const std::vector<std::uint8_t>& embb_bits,
    const std::vector<std::uint8_t>& mask,
    const std::vector<double>* fixed_omega) {
  solver::ConvexSubproblem prob;
  prob.params = make_params(ctx);
  const auto flats = flatten_urllc(ctx.urllc);
  for (std::size_t s = 0; s < ctx.embb.size(); ++s) {
    solver::EmbbGroup g;
    g.slice_id = ctx.embb[s].id;
    g.accepted = embb_bits[s] != 0;
    g.min_rate = ctx.embb[s].min_rate;
    if (fixed_omega) g.fixed_bandwidth = (*fixed_omega)[s];
    g.channels = ch.h[s];
    prob.embb.push_back(std::move(g));
  }
  for (std::size_t k = 0; k < flats.size(); ++k) {
    const auto& req = ctx.urllc[flats[k].slice];
    solver::UrllcUser u;
    u.slice_id = req.id;
    u.ue_id = flats[k].ue;
    u.accepted = mask[k] != 0;
    u.deadline = req.deadline;
    u.arrival_rate = req.arrival_rate;
    u.packet_bits = req.packet_bits;
    u.channel = ch.h[ctx.embb.size() + flats[k].slice][flats[k].ue];
    prob.urllc.push_back(std::move(u));
  }
  return prob;
}

double snr_of(const Eigen::VectorXcd& h, const Eigen::MatrixXcd& m,
              double denom) {
  return std::max((h.adjoint() * m * h)(0, 0).real() / denom, 0.0);
}

// Maximizes sum_i ln(1 + c z_i) - eta * c * power over c in [0, 1] by
// bisection on the (decreasing) derivative.
double best_power_scale(const std::vector<double>& zs, double power,
                        double eta) {
  const auto deriv = [&](double c) {
    double d = -eta * power;
    for (double z : zs) d += z / (1.0 + c * z);
    return d;
  };
  if (deriv(0.0) <= 0.0) return 0.0;
  if (deriv(1.0) >= 0.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (deriv(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Deterministic channel-matched starting point: maximum-ratio shapes capped
// at a power-budget share, then rescaled to the profit-optimal power so the
// acceptance step sees each candidate at its best. Bandwidths sit just above
// the QoS need.
ContState init_state(const SlotContext& ctx, const channel::ChannelSet& ch) {
  const auto& topo = ctx.model->topology();
  const double denom = topo.snr_loss * topo.noise_power_w;
  const int n = topo.vector_dim();
  const int k = topo.antennas_per_bs;
  const auto flats = flatten_urllc(ctx.urllc);
  const int n_ent = static_cast<int>(ctx.embb.size() + flats.size());
  ContState st;
  auto capped = [&](const Eigen::MatrixXcd& shape) {
    double scale = std::numeric_limits<double>::infinity();
    for (int j = 0; j < topo.num_bs(); ++j) {
      double pj = 0.0;
      for (int a = 0; a < k; ++a) pj += shape(j * k + a, j * k + a).real();
      if (pj > 0.0)
        scale = std::min(scale, 0.45 * ctx.sys.bs_power[j] / (n_ent * pj));
    }
    if (!std::isfinite(scale)) scale = 0.0;
    return Eigen::MatrixXcd(scale * shape);
  };
  // Each candidate sits at max(profit-optimal power, the smallest power
  // whose snr makes the entity representable): QoS within a fair bandwidth
  // share for eMBB, the Case-I floor (or a sane channel-use count) for
  // URLLC. Either way the scale is clamped to the budget cap.
  const auto finish = [&](Eigen::MatrixXcd m, const std::vector<double>& zs,
                          double c_floor) {
    double c = std::max(best_power_scale(zs, m.trace().real(),
                                         ctx.sys.efficiency),
                        c_floor);
    c = std::min(std::max(c, 1e-9), 1.0);
    m *= c;
    m += 1e-12 * std::max(m.trace().real() / n, 1e-30) *
         Eigen::MatrixXcd::Identity(n, n);
    return m;
  };
  const double w_share =
      ctx.sys.total_bandwidth / std::max<std::size_t>(ctx.embb.size(), 1);
  for (std::size_t s = 0; s < ctx.embb.size(); ++s) {
    Eigen::MatrixXcd shape = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& h : ch.h[s]) shape += h * h.adjoint();
    Eigen::MatrixXcd m = capped(shape);
    std::vector<double> zs;
    double zmin_cap = std::numeric_limits<double>::infinity();
    for (const auto& h : ch.h[s]) {
      zs.push_back(snr_of(h, m, denom));
      zmin_cap = std::min(zmin_cap, zs.back());
    }
    const double z_need =
        std::pow(2.0, ctx.embb[s].min_rate / w_share) - 1.0;
    const double c_floor = zmin_cap > 0.0 ? z_need / zmin_cap : 1.0;
    st.v.push_back(finish(std::move(m), zs, c_floor));
    double zmin = std::numeric_limits<double>::infinity();
    for (const auto& h : ch.h[s]) zmin = std::min(zmin, snr_of(h, st.v.back(), denom));
    st.omega.push_back(zmin > 0.0
                           ? 1.1 * ctx.embb[s].min_rate / std::log2(1.0 + zmin)
                           : ctx.sys.total_bandwidth);
  }
  const double z_floor_urllc =
      ctx.sys.snr_case == solver::SnrCase::enforced ? 1.05 * ctx.sys.min_snr
                                                    : 0.5;
  for (const auto& f : flats) {
    const auto& h = ch.h[ctx.embb.size() + f.slice][f.ue];
    Eigen::MatrixXcd m = capped(h * h.adjoint());
    const double z = snr_of(h, m, denom);
    st.g.push_back(finish(std::move(m), {z}, z > 0.0 ? z_floor_urllc / z : 1.0));
  }
  return st;
}

std::vector<AcceptanceCandidate> embb_candidates(
    const SlotContext& ctx, const channel::ChannelSet& ch, const ContState& st,
    const std::vector<double>* fixed_omega) {
  const auto& topo = ctx.model->topology();
  const double denom = topo.snr_loss * topo.noise_power_w;
  const int k = topo.antennas_per_bs;
  double esum = 0.0;
  for (double e : ctx.sys.bs_power) esum += e;
  std::vector<AcceptanceCandidate> out;
  for (std::size_t s = 0; s < ctx.embb.size(); ++s) {
    AcceptanceCandidate c;
    c.slice_id = ctx.embb[s].id;
    c.bandwidth = fixed_omega ? (*fixed_omega)[s] : st.omega[s];
    double zmin = std::numeric_limits<double>::infinity();
    double profit = 0.0;
    for (const auto& h : ch.h[s]) {
      const double z = snr_of(h, st.v[s], denom);
      zmin = std::min(zmin, z);
      profit += std::log1p(z);
    }
    c.qos_ok = c.bandwidth * std::log2(1.0 + zmin) >=
               ctx.embb[s].min_rate * (1.0 - 1e-9);
    double ptot = 0.0;
    for (int j = 0; j < topo.num_bs(); ++j) {
      double pj = 0.0;
      for (int a = 0; a < k; ++a) pj += st.v[s](j * k + a, j * k + a).real();
      c.bs_power.push_back(pj);
      ptot += pj;
    }
    c.utility_accept = profit + ctx.sys.efficiency * (esum - ptot);
    c.utility_decline = ctx.sys.efficiency * esum;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<MaskCandidate> urllc_candidates(const SlotContext& ctx,
                                            const channel::ChannelSet& ch,
                                            const ContState& st) {
  const auto& topo = ctx.model->topology();
  const double denom = topo.snr_loss * topo.noise_power_w;
  const auto flats = flatten_urllc(ctx.urllc);
  std::vector<MaskCandidate> out;
  for (std::size_t kx = 0; kx < flats.size(); ++kx) {
    const auto& req = ctx.urllc[flats[kx].slice];
    const auto& h = ch.h[ctx.embb.size() + flats[kx].slice][flats[kx].ue];
    const double z = snr_of(h, st.g[kx], denom);
    MaskCandidate c;
    c.slice_id = flats[kx].slice;
    c.ue_id = flats[kx].ue;
    c.utility = ctx.sys.priority_weight *
                (std::log1p(z) + phy::urllc_profit(ctx.sys.profit_const, req.deadline) -
                 ctx.sys.efficiency * st.g[kx].trace().real());
    out.push_back(c);
  }
  return out;
}

// Reservation the mask implies at the current point (used by the acceptance
// step; the solver re-derives the same quantity from its slack variables).
FixedUrllcLoad urllc_load(const SlotContext& ctx, const channel::ChannelSet& ch,
                          const ContState& st,
                          const std::vector<std::uint8_t>& mask) {
  const auto& topo = ctx.model->topology();
  const double denom = topo.snr_loss * topo.noise_power_w;
  const int k = topo.antennas_per_bs;
  const auto flats = flatten_urllc(ctx.urllc);
  FixedUrllcLoad load;
  load.bs_power.assign(topo.num_bs(), 0.0);
  double mean = 0.0, var = 0.0, continuous = 0.0;
  double qbeta = 0.0;
  if (!ctx.urllc.empty())
    qbeta = phy::q_inverse(ctx.urllc.front().blocking_target);
  for (std::size_t kx = 0; kx < flats.size(); ++kx) {
    if (!mask[kx]) continue;
    const auto& req = ctx.urllc[flats[kx].slice];
    const auto& h = ch.h[ctx.embb.size() + flats[kx].slice][flats[kx].ue];
    const double z = snr_of(h, st.g[kx], denom);
    if (z <= 0.0) continue;
    const double r = phy::channel_uses(req.packet_bits, z, req.decode_error);
    mean += req.arrival_rate * r / ctx.sys.numerology;
    var += req.arrival_rate * r * r /
           (ctx.sys.numerology * ctx.sys.numerology * req.deadline);
    continuous += req.arrival_rate * r / (ctx.sys.numerology * req.deadline);
    for (int j = 0; j < topo.num_bs(); ++j)
      for (int a = 0; a < k; ++a)
        load.bs_power[j] += st.g[kx](j * k + a, j * k + a).real();
  }
  switch (reservation_of(ctx.algorithm)) {
    case solver::Reservation::staffed:
      load.reserved_bandwidth = mean + qbeta * std::sqrt(var);
      break;
    case solver::Reservation::mean_only:
      load.reserved_bandwidth = mean;
      break;
    case solver::Reservation::continuous:
      load.reserved_bandwidth = continuous;
      break;
  }
  return load;
}

void adopt_solution(const SlotContext& ctx, const solver::SolveResult& res,
                    const std::vector<std::uint8_t>& embb_bits,
                    const std::vector<std::uint8_t>& mask, ContState& st) {
  for (std::size_t s = 0; s < ctx.embb.size(); ++s) {
    if (!embb_bits[s]) continue;
    st.v[s] = res.embb_covariance[s];
    st.omega[s] = res.embb_bandwidth[s];
  }
  for (std::size_t k = 0; k < mask.size(); ++k)
    if (mask[k]) st.g[k] = res.urllc_covariance[k];
}

solver::WarmStart warm_from(const ContState& st,
                            const std::vector<double>& f_hint) {
  solver::WarmStart w;
  w.embb_covariance = st.v;
  w.urllc_covariance = st.g;
  w.embb_bandwidth = st.omega;
  w.channel_use_slack = f_hint;
  return w;
}

// One sample of the IARA/ES alternation (Algorithm 2 inner loop).
SampleOutcome run_sample_iara(const SlotContext& ctx,
                              const channel::ChannelSet& ch) {
  SampleOutcome out;
  const auto flats = flatten_urllc(ctx.urllc);
  ContState st = init_state(ctx, ch);
  std::vector<std::uint8_t> bits(ctx.embb.size(), 0);
  std::vector<std::uint8_t> mask(flats.size(), 0);
  double f_prev = -std::numeric_limits<double>::infinity();
  out.solved = true;
  for (int r = 0; r < kMaxAlternations; ++r) {
    ++out.alternations;
    auto bits_new = embb_acceptance(embb_candidates(ctx, ch, st, nullptr),
                                    urllc_load(ctx, ch, st, mask),
                                    ctx.sys.total_bandwidth, ctx.sys.bs_power);
    const auto oracle = [&](const std::vector<std::uint8_t>& m) {
      return solver::check_feasibility(
                 build_subproblem(ctx, ch, bits_new, m, nullptr))
          .feasible;
    };
    auto mask_new = ctx.algorithm == Algorithm::es_ab
                        ? es_mask(urllc_candidates(ctx, ch, st), oracle)
                        : grm_mask(urllc_candidates(ctx, ch, st), oracle);
    // Algorithm-2 guard: revert the mask when it lowers the objective at the
    // current continuous point. The old mask may have become infeasible
    // against the new acceptance bits, in which case it cannot be restored.
    if (mask_new != mask) {
      const auto prob_new = build_subproblem(ctx, ch, bits_new, mask_new, nullptr);
      const auto prob_old = build_subproblem(ctx, ch, bits_new, mask, nullptr);
      if (solver::objective_value(prob_new, st.v, st.g) <=
              solver::objective_value(prob_old, st.v, st.g) &&
          solver::check_feasibility(prob_old).feasible)
        mask_new = mask;
    }
    const auto prev_bits = bits;
    const auto prev_mask = mask;
    bits = std::move(bits_new);
    mask = std::move(mask_new);

    auto prob = build_subproblem(ctx, ch, bits, mask, nullptr);
    std::vector<double> f_hint(flats.size(), 0.0);
    const auto warm = warm_from(st, f_hint);
    const auto res = solver::solve(prob, {}, &warm);
    if (res.status != solver::SolveStatus::optimal) {
      out.solved = false;
      std::ostringstream why;
      why << "solve "
          << (res.status == solver::SolveStatus::infeasible ? "infeasible"
                                                            : "hit iteration cap")
          << " at round " << out.alternations << " (violation "
          << res.max_violation << "; accepted";
      for (auto b : bits) why << ' ' << int(b);
      why << "; mask";
      for (auto b : mask) why << ' ' << int(b);
      why << ")";
      out.failure = why.str();
      break;
    }
    if (res.objective < f_prev) {
      // numerical floor: keep the better previous point
      bits = prev_bits;
      mask = prev_mask;
      break;
    }
    adopt_solution(ctx, res, bits, mask, st);
    out.objective_trace.push_back(res.objective);
    if (std::isfinite(f_prev) &&
        std::abs(res.objective - f_prev) <=
            kRelConvergence * std::max(1.0, std::abs(f_prev)))
      break;
    f_prev = res.objective;
  }
  out.embb_accept = bits;
  out.embb_bandwidth.assign(ctx.embb.size(), 0.0);
  for (std::size_t s = 0; s < ctx.embb.size(); ++s)
    if (bits[s]) out.embb_bandwidth[s] = st.omega[s];
  out.urllc_mask = mask;
  return out;
}

// One sample of the IRHS baseline: greedy joint admission (eMBB slices and
// URLLC slices ranked by utility), continuous per-UE reservation, no
// minislot masking.
SampleOutcome run_sample_irhs(const SlotContext& ctx,
                              const channel::ChannelSet& ch) {
  SampleOutcome out;
  const auto flats = flatten_urllc(ctx.urllc);
  ContState st = init_state(ctx, ch);
  std::vector<std::uint8_t> bits(ctx.embb.size(), 0);
  std::vector<std::uint8_t> mask(flats.size(), 0);
  double f_prev = -std::numeric_limits<double>::infinity();
  out.solved = true;

  const auto slice_mask = [&](const std::vector<std::uint8_t>& uslice) {
    std::vector<std::uint8_t> m(flats.size(), 0);
    for (std::size_t k = 0; k < flats.size(); ++k)
      m[k] = uslice[flats[k].slice];
    return m;
  };

  for (int r = 0; r < kMaxAlternations; ++r) {
    ++out.alternations;
    // rank every slice by its utility contribution at the current point
    struct Cand {
      bool embb;
      int index;
      double utility;
    };
    std::vector<Cand> cands;
    const auto ec = embb_candidates(ctx, ch, st, nullptr);
    for (std::size_t s = 0; s < ec.size(); ++s)
      cands.push_back({true, static_cast<int>(s),
                       ec[s].utility_accept - ec[s].utility_decline});
    const auto uc = urllc_candidates(ctx, ch, st);
    std::vector<double> slice_utility(ctx.urllc.size(), 0.0);
    for (std::size_t k = 0; k < flats.size(); ++k)
      slice_utility[flats[k].slice] += uc[k].utility;
    for (std::size_t s = 0; s < ctx.urllc.size(); ++s)
      cands.push_back({false, static_cast<int>(s), slice_utility[s]});
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) {
                       return a.utility > b.utility;
                     });

    std::vector<std::uint8_t> bits_new(ctx.embb.size(), 0);
    std::vector<std::uint8_t> uslice(ctx.urllc.size(), 0);
    for (const auto& c : cands) {
      auto b = bits_new;
      auto u = uslice;
      if (c.embb)
        b[c.index] = 1;
      else
        u[c.index] = 1;
      const bool ok =
          solver::check_feasibility(
              build_subproblem(ctx, ch, b, slice_mask(u), nullptr))
              .feasible;
      if (ok) {
        bits_new = std::move(b);
        uslice = std::move(u);
      }
    }
    auto mask_new = slice_mask(uslice);
    if (mask_new != mask || bits_new != bits) {
      const auto prob_new = build_subproblem(ctx, ch, bits_new, mask_new, nullptr);
      const auto prob_old = build_subproblem(ctx, ch, bits, mask, nullptr);
      if (solver::objective_value(prob_new, st.v, st.g) <=
              solver::objective_value(prob_old, st.v, st.g) &&
          solver::check_feasibility(prob_old).feasible) {
        bits_new = bits;
        mask_new = mask;
      }
    }
    const auto prev_bits = bits;
    const auto prev_mask = mask;
    bits = std::move(bits_new);
    mask = std::move(mask_new);

    auto prob = build_subproblem(ctx, ch, bits, mask, nullptr);
    std::vector<double> f_hint(flats.size(), 0.0);
    const auto warm = warm_from(st, f_hint);
    const auto res = solver::solve(prob, {}, &warm);
    if (res.status != solver::SolveStatus::optimal) {
      out.solved = false;
      std::ostringstream why;
      why << "solve "
          << (res.status == solver::SolveStatus::infeasible ? "infeasible"
                                                            : "hit iteration cap")
          << " at round " << out.alternations << " (violation "
          << res.max_violation << "; accepted";
      for (auto b : bits) why << ' ' << int(b);
      why << "; mask";
      for (auto b : mask) why << ' ' << int(b);
      why << ")";
      out.failure = why.str();
      break;
    }
    if (res.objective < f_prev) {
      bits = prev_bits;
      mask = prev_mask;
      break;
    }
    adopt_solution(ctx, res, bits, mask, st);
    out.objective_trace.push_back(res.objective);
    if (std::isfinite(f_prev) &&
        std::abs(res.objective - f_prev) <=
            kRelConvergence * std::max(1.0, std::abs(f_prev)))
      break;
    f_prev = res.objective;
  }
  out.embb_accept = bits;
  out.embb_bandwidth.assign(ctx.embb.size(), 0.0);
  for (std::size_t s = 0; s < ctx.embb.size(); ++s)
    if (bits[s]) out.embb_bandwidth[s] = st.omega[s];
  out.urllc_mask = mask;
  return out;
}

}  // namespace

void SlotContext::validate() const {
  if (!model) throw std::invalid_argument("slot context: missing channel model");
  const auto& topo = model->topology();
  if (topo.ue_groups.size() != embb.size() + urllc.size())
    throw std::invalid_argument("slot context: topology groups != slices");
  for (std::size_t s = 0; s < embb.size(); ++s) {
    if (embb[s].num_ues < 1 || embb[s].min_rate <= 0.0)
      throw std::invalid_argument("slot context: bad eMBB request");
    if (static_cast<int>(topo.ue_groups[s].positions.size()) != embb[s].num_ues)
      throw std::invalid_argument("slot context: eMBB UE count mismatch");
  }
  for (std::size_t s = 0; s < urllc.size(); ++s) {
    const auto& u = urllc[s];
    if (u.num_ues < 1 || u.deadline <= 0.0 || u.arrival_rate <= 0.0 ||
        u.packet_bits <= 0.0)
      throw std::invalid_argument("slot context: bad URLLC request");
    if (!(u.decode_error > 0.0 && u.decode_error < 1.0) ||
        !(u.blocking_target > 0.0 && u.blocking_target < 1.0))
      throw std::invalid_argument("slot context: alpha/beta outside (0,1)");
    if (u.arrival_rate * u.deadline >= 1.0)
      throw std::invalid_argument("slot context: per-UE load rho_s must be < 1");
    if (static_cast<int>(topo.ue_groups[embb.size() + s].positions.size()) !=
        u.num_ues)
      throw std::invalid_argument("slot context: URLLC UE count mismatch");
    if (u.decode_error != urllc.front().decode_error ||
        u.blocking_target != urllc.front().blocking_target)
      throw std::invalid_argument(
          "slot context: mixed alpha/beta across URLLC slices is unsupported");
  }
  if (static_cast<int>(sys.bs_power.size()) != topo.num_bs())
    throw std::invalid_argument("slot context: bs_power size mismatch");
  if (samples < 1) throw std::invalid_argument("slot context: samples < 1");
}

std::int64_t sample_count(int embb_ues, int urllc_ues, int num_bs,
                          int antennas_per_bs, double epsilon, double theta) {
  if (!(epsilon > 0.0 && epsilon < 1.0) || !(theta > 0.0 && theta < 1.0))
    throw std::domain_error("sample_count: epsilon/theta must lie in (0,1)");
  const double d = static_cast<double>(embb_ues + urllc_ues) * num_bs *
                   antennas_per_bs;
  if (d <= 1.0)
    throw std::domain_error("sample_count: dimension (N^e+N^u)JK must exceed 1");
  const double lt = std::log(1.0 / theta);
  const double val =
      (d - 1.0 + lt + std::sqrt(2.0 * (d - 1.0) * lt + lt * lt)) / epsilon;
  return static_cast<std::int64_t>(std::ceil(val - 1e-12));
}

std::vector<std::uint8_t> embb_acceptance(
    const std::vector<AcceptanceCandidate>& candidates,
    const FixedUrllcLoad& urllc_load, double total_bandwidth,
    const std::vector<double>& bs_budget) {
  const std::size_t n = candidates.size();
  if (n > 20)
    throw std::invalid_argument("embb_acceptance: enumeration limited to 20 slices");
  std::vector<std::uint8_t> best(n, 0);
  double best_utility = -std::numeric_limits<double>::infinity();
  int best_count = -1;
  for (std::uint64_t bitset = 0; bitset < (1ull << n); ++bitset) {
    double utility = 0.0, bw = urllc_load.reserved_bandwidth;
    std::vector<double> power = urllc_load.bs_power;
    if (power.size() < bs_budget.size()) power.resize(bs_budget.size(), 0.0);
    bool ok = true;
    int count = 0;
    for (std::size_t s = 0; s < n && ok; ++s) {
      if (bitset & (1ull << s)) {
        if (!candidates[s].qos_ok) {
          ok = false;
          break;
        }
        ++count;
        utility += candidates[s].utility_accept;
        bw += candidates[s].bandwidth;
        for (std::size_t j = 0; j < candidates[s].bs_power.size(); ++j)
          power[j] += candidates[s].bs_power[j];
      } else {
        utility += candidates[s].utility_decline;
      }
    }
    if (!ok || bw > total_bandwidth * (1.0 + 1e-9)) continue;
    for (std::size_t j = 0; j < bs_budget.size(); ++j)
      if (power[j] > bs_budget[j] * (1.0 + 1e-9)) ok = false;
    if (!ok) continue;
    std::vector<std::uint8_t> bits(n, 0);
    for (std::size_t s = 0; s < n; ++s) bits[s] = (bitset >> s) & 1u;
    const bool better =
        utility > best_utility + 1e-12 ||
        (std::abs(utility - best_utility) <= 1e-12 &&
         (count > best_count ||
          (count == best_count && bits > best)));  // prefer low ids accepted
    if (better) {
      // lexicographic preference: bits with earlier slices accepted compare
      // greater because acceptance is encoded as 1
      best_utility = std::max(best_utility, utility);
      best_count = count;
      best = bits;
    }
  }
  return best;
}

std::vector<std::uint8_t> grm_mask(const std::vector<MaskCandidate>& candidates,
                                   const MaskOracle& feasible) {
  const std::size_t n = candidates.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (candidates[a].utility != candidates[b].utility)
      return candidates[a].utility > candidates[b].utility;
    if (candidates[a].slice_id != candidates[b].slice_id)
      return candidates[a].slice_id < candidates[b].slice_id;
    return candidates[a].ue_id < candidates[b].ue_id;
  });
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t k : order) {
    mask[k] = 1;
    if (!feasible(mask)) mask[k] = 0;
  }
  return mask;
}

std::vector<std::uint8_t> es_mask(const std::vector<MaskCandidate>& candidates,
                                  const MaskOracle& feasible) {
  const std::size_t n = candidates.size();
  if (n > 16)
    throw std::invalid_argument("es_mask: exhaustive search limited to 16 users");
  // Enumerate every subset, but test feasibility in decreasing-utility order:
  // admitting fewer users never breaks feasibility, so the first feasible
  // subset in that order is the exhaustive-search optimum.
  struct Entry {
    double utility;
    int count;
    std::vector<std::uint8_t> mask;
  };
  std::vector<Entry> entries;
  entries.reserve(1ull << n);
  for (std::uint64_t bitset = 0; bitset < (1ull << n); ++bitset) {
    Entry e;
    e.mask.assign(n, 0);
    e.utility = 0.0;
    e.count = 0;
    for (std::size_t k = 0; k < n; ++k)
      if (bitset & (1ull << k)) {
        e.mask[k] = 1;
        e.utility += candidates[k].utility;
        ++e.count;
      }
    entries.push_back(std::move(e));
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (std::abs(a.utility - b.utility) > 1e-12) return a.utility > b.utility;
    if (a.count != b.count) return a.count > b.count;
    return a.mask > b.mask;
  });
  for (const auto& e : entries)
    if (feasible(e.mask)) return e.mask;
  return std::vector<std::uint8_t>(n, 0);
}

RestorationResult restore_slot_vars(
    const std::vector<RestorationSample>& samples,
    const std::function<bool(const std::vector<std::uint8_t>&,
                             const std::vector<double>&, int)>& sample_feasible) {
  if (samples.empty())
    throw std::invalid_argument("restore_slot_vars: no samples");
  const std::size_t n = samples.front().accept.size();
  RestorationResult res;
  res.bandwidth.assign(n, 0.0);
  res.counts.assign(n, 0);
  for (const auto& s : samples) {
    for (std::size_t k = 0; k < n; ++k) {
      res.bandwidth[k] += s.bandwidth[k];
      res.counts[k] += s.accept[k] ? 1 : 0;
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    res.bandwidth[k] /= static_cast<double>(samples.size());
  res.accept.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k)
    res.accept[k] = res.bandwidth[k] > 0.0 ? 1 : 0;

  std::vector<bool> pending(samples.size(), true);
  while (true) {
    bool all_ok = true;
    for (std::size_t m = 0; m < samples.size(); ++m) {
      if (!pending[m]) continue;
      if (sample_feasible(res.accept, res.bandwidth, static_cast<int>(m)))
        pending[m] = false;
      else
        all_ok = false;
    }
    if (all_ok) break;
    // decline the slice accepted least often; ties resolve to the lowest id
    int victim = -1;
    for (std::size_t k = 0; k < n; ++k) {
      if (!res.accept[k]) continue;
      if (victim < 0 || res.counts[k] < res.counts[victim]) victim = static_cast<int>(k);
    }
    if (victim < 0) break;  // everything declined: b = 0 is always feasible
    res.accept[victim] = 0;
    res.bandwidth[victim] = 0.0;
    ++res.declines;
    pending.assign(samples.size(), true);
  }
  return res;
}

SlotDecision decide_slot(const SlotContext& ctx) {
  ctx.validate();
  SlotDecision slot;
  slot.samples_used = ctx.samples;
  slot.per_sample.reserve(ctx.samples);
  for (int m = 0; m < ctx.samples; ++m) {
    const auto ch = ctx.model->sample(kSlotSampleBase + m);
    slot.per_sample.push_back(ctx.algorithm == Algorithm::irhs
                                  ? run_sample_irhs(ctx, ch)
                                  : run_sample_iara(ctx, ch));
    if (slot.per_sample.back().solved) ++slot.samples_succeeded;
  }
  if (slot.samples_succeeded * 5 < ctx.samples * 4) {
    std::string detail = "decide_slot: fewer than 80% of the samples solved";
    for (int m = 0; m < ctx.samples; ++m)
      if (!slot.per_sample[m].solved && !slot.per_sample[m].failure.empty()) {
        detail += "; sample " + std::to_string(m) + ": " +
                  slot.per_sample[m].failure;
        break;
      }
    throw SlotError(detail);
  }

  std::vector<RestorationSample> rest;
  std::vector<int> sample_index;
  for (int m = 0; m < ctx.samples; ++m) {
    if (!slot.per_sample[m].solved) continue;
    rest.push_back({slot.per_sample[m].embb_accept,
                    slot.per_sample[m].embb_bandwidth});
    sample_index.push_back(m);
  }
  const auto feasible = [&](const std::vector<std::uint8_t>& accept,
                            const std::vector<double>& omega, int idx) {
    const auto ch = ctx.model->sample(kSlotSampleBase + sample_index[idx]);
    std::vector<std::uint8_t> no_urllc(flatten_urllc(ctx.urllc).size(), 0);
    const auto prob = build_subproblem(ctx, ch, accept, no_urllc, &omega);
    return solver::check_feasibility(prob).feasible;
  };
  const auto restored = restore_slot_vars(rest, feasible);
  slot.embb_accept = restored.accept;
  slot.embb_bandwidth = restored.bandwidth;
  slot.accept_counts = restored.counts;
  slot.restoration_declines = restored.declines;

  slot.urllc_slice_accept.assign(ctx.urllc.size(), 1);
  if (ctx.algorithm == Algorithm::irhs && !ctx.urllc.empty()) {
    // IRHS carries its slice-level URLLC admission into the minislots:
    // a slice is kept when the majority of samples admitted it.
    const auto flats = flatten_urllc(ctx.urllc);
    std::vector<int> votes(ctx.urllc.size(), 0);
    int solved = 0;
    for (const auto& smp : slot.per_sample) {
      if (!smp.solved) continue;
      ++solved;
      for (std::size_t k = 0; k < flats.size(); ++k)
        if (smp.urllc_mask[k] && flats[k].ue == 0) ++votes[flats[k].slice];
    }
    for (std::size_t s = 0; s < ctx.urllc.size(); ++s)
      slot.urllc_slice_accept[s] = 2 * votes[s] >= solved ? 1 : 0;
  }
  return slot;
}

MinislotDecision minislot_schedule(const SlotContext& ctx,
                                   const SlotDecision& slot,
                                   long minislot_index) {
  ctx.validate();
  const auto& topo = ctx.model->topology();
  const double denom = topo.snr_loss * topo.noise_power_w;
  const int nbs = topo.num_bs();
  const int k = topo.antennas_per_bs;
  const auto flats = flatten_urllc(ctx.urllc);
  const auto ch = ctx.model->sample(kMinislotSampleBase + minislot_index);

  MinislotDecision out;
  out.bs_power_used.assign(nbs, 0.0);
  double esum = 0.0;
  for (double e : ctx.sys.bs_power) esum += e;

  // empty system: idle power balance
  if (ctx.embb.empty() && ctx.urllc.empty()) {
    out.total_utility = ctx.sys.efficiency * esum;
    return out;
  }

  ContState st = init_state(ctx, ch);
  for (std::size_t s = 0; s < ctx.embb.size(); ++s)
    st.omega[s] = slot.embb_bandwidth[s];

  std::vector<std::uint8_t> bits = slot.embb_accept;
  std::vector<std::uint8_t> mask(flats.size(), 0);
  const auto oracle = [&](const std::vector<std::uint8_t>& m) {
    return solver::check_feasibility(
               build_subproblem(ctx, ch, bits, m, &slot.embb_bandwidth))
        .feasible;
  };
  switch (ctx.algorithm) {
    case Algorithm::es_ab:
      mask = es_mask(urllc_candidates(ctx, ch, st), oracle);
      break;
    case Algorithm::irhs:
      // every UE of every admitted slice stays on; idle UEs are not masked
      for (std::size_t u = 0; u < flats.size(); ++u)
        mask[u] = slot.urllc_slice_accept.empty()
                      ? 1
                      : slot.urllc_slice_accept[flats[u].slice];
      if (!oracle(mask)) mask.assign(flats.size(), 0);
      break;
    default:
      mask = grm_mask(urllc_candidates(ctx, ch, st), oracle);
      break;
  }

  auto prob = build_subproblem(ctx, ch, bits, mask, &slot.embb_bandwidth);
  std::vector<double> f_hint(flats.size(), 0.0);
  auto warm = warm_from(st, f_hint);
  auto res = solver::solve(prob, {}, &warm);
  if (res.status != solver::SolveStatus::optimal) {
    // retry with the URLLC mask cleared; a failure after that means the slot
    // decision was mis-sized for this channel draw
    mask.assign(flats.size(), 0);
    prob = build_subproblem(ctx, ch, bits, mask, &slot.embb_bandwidth);
    res = solver::solve(prob, {}, &warm);
    if (res.status != solver::SolveStatus::optimal) {
      out.violation = true;
      out.urllc_mask = mask;
      out.total_utility =
          ctx.sys.efficiency * esum *
          (static_cast<double>(ctx.embb.size()) +
           ctx.sys.priority_weight * static_cast<double>(ctx.urllc.size()));
      out.embb_utility = ctx.sys.efficiency * esum * ctx.embb.size();
      out.urllc_utility = out.total_utility - out.embb_utility;
      return out;
    }
  }
  out.urllc_mask = mask;

  // rank-one beamformers and realized quantities
  out.embb_beamformers.assign(
      ctx.embb.size(), Eigen::VectorXcd::Zero(topo.vector_dim()));
  out.urllc_beamformers.assign(
      flats.size(), Eigen::VectorXcd::Zero(topo.vector_dim()));
  solver::ExtractionOptions exopt;
  exopt.seed = ctx.seed ^ static_cast<std::uint64_t>(minislot_index);
  for (std::size_t s = 0; s < ctx.embb.size(); ++s) {
    if (!bits[s]) continue;
    auto ex = solver::extract_beamformer(res.embb_covariance[s], k, exopt);
    out.embb_beamformers[s] = ex.beamformer;
    out.max_tightness = std::max(out.max_tightness, ex.tightness);
    out.randomized_extraction |= ex.randomized;
  }
  for (std::size_t u = 0; u < flats.size(); ++u) {
    if (!mask[u]) continue;
    auto ex = solver::extract_beamformer(res.urllc_covariance[u], k, exopt);
    out.urllc_beamformers[u] = ex.beamformer;
    out.max_tightness = std::max(out.max_tightness, ex.tightness);
    out.randomized_extraction |= ex.randomized;
  }

  // realized utilities from the extracted vectors
  double embb_u = 0.0;
  for (std::size_t s = 0; s < ctx.embb.size(); ++s) {
    std::vector<double> snrs;
    std::vector<double> bs_power(nbs, 0.0);
    if (bits[s]) {
      for (const auto& h : ch.h[s])
        snrs.push_back(channel::received_snr(h, out.embb_beamformers[s],
                                             topo.snr_loss, topo.noise_power_w));
      for (int j = 0; j < nbs; ++j)
        bs_power[j] =
            out.embb_beamformers[s].segment(j * k, k).squaredNorm();
    }
    embb_u += phy::embb_utility_minislot(bits[s] != 0, snrs, bs_power,
                                         ctx.sys.efficiency, ctx.sys.bs_power);
    for (int j = 0; j < nbs; ++j)
      out.bs_power_used[j] += bits[s] ? bs_power[j] : 0.0;
  }
  double urllc_u = 0.0;
  double mean = 0.0, var = 0.0, continuous = 0.0;
  for (std::size_t s = 0; s < ctx.urllc.size(); ++s) {
    std::vector<bool> mbits;
    std::vector<double> snrs;
    std::vector<std::vector<double>> powers;
    for (std::size_t u = 0; u < flats.size(); ++u) {
      if (flats[u].slice != static_cast<int>(s)) continue;
      mbits.push_back(mask[u] != 0);
      const auto& h = ch.h[ctx.embb.size() + s][flats[u].ue];
      const double snr =
          mask[u] ? channel::received_snr(h, out.urllc_beamformers[u],
                                          topo.snr_loss, topo.noise_power_w)
                  : 0.0;
      snrs.push_back(snr);
      std::vector<double> pj(nbs, 0.0);
      for (int j = 0; j < nbs; ++j)
        pj[j] = mask[u]
                    ? out.urllc_beamformers[u].segment(j * k, k).squaredNorm()
                    : 0.0;
      for (int j = 0; j < nbs; ++j) {
        out.bs_power_used[j] += pj[j];
        out.urllc_power += pj[j];
      }
      powers.push_back(std::move(pj));
      if (mask[u] && snr > 0.0) {
        const auto& req = ctx.urllc[s];
        const double r = phy::channel_uses(req.packet_bits, snr, req.decode_error);
        mean += req.arrival_rate * r / ctx.sys.numerology;
        var += req.arrival_rate * r * r /
               (ctx.sys.numerology * ctx.sys.numerology * req.deadline);
        continuous += req.arrival_rate * r / (ctx.sys.numerology * req.deadline);
      }
    }
    urllc_u += phy::urllc_utility_minislot(mbits, snrs, ctx.urllc[s].deadline,
                                           ctx.sys.profit_const, powers,
                                           ctx.sys.efficiency, ctx.sys.bs_power);
  }
  switch (reservation_of(ctx.algorithm)) {
    case solver::Reservation::staffed:
      out.reserved_bandwidth =
          mean + (ctx.urllc.empty()
                      ? 0.0
                      : phy::q_inverse(ctx.urllc.front().blocking_target)) *
                     std::sqrt(var);
      break;
    case solver::Reservation::mean_only:
      out.reserved_bandwidth = mean;
      break;
    case solver::Reservation::continuous:
      out.reserved_bandwidth = continuous;
      break;
  }
  out.embb_utility = embb_u;
  out.urllc_utility = ctx.sys.priority_weight * urllc_u;
  out.total_utility = embb_u + out.urllc_utility;
  for (double p : out.bs_power_used) out.total_power += p;
  return out;
}

}  // namespace ranslicer::slicing
