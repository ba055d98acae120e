#include "ranslicer/queueing.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "ranslicer/rng.hpp"

namespace ranslicer::queueing {

namespace {

constexpr std::uint64_t kTagArrival = Substream::tag("mc-arrivals");

// Bandwidth admission comparisons tolerate relative float noise so that
// W = n * omega admits exactly n transmissions.
double admit_eps(const BlockingScenario& sc) {
  return 1e-9 * std::max(sc.reserved_bandwidth, 1.0);
}

int slice_cap(const BlockingScenario& sc, const SliceClass& s) {
  if (s.bandwidth > sc.reserved_bandwidth + admit_eps(sc)) return 0;
  return static_cast<int>(
      std::floor((sc.reserved_bandwidth + admit_eps(sc)) / s.bandwidth));
}

}  // namespace

void BlockingScenario::validate() const {
  if (reserved_bandwidth < 0.0)
    throw std::invalid_argument("blocking scenario: W^u must be >= 0");
  if (slices.empty())
    throw std::invalid_argument("blocking scenario: no slices");
  for (const auto& s : slices) {
    if (s.num_ues < 1 || s.per_ue_arrival_rate <= 0.0 || s.duration <= 0.0 ||
        s.bandwidth <= 0.0)
      throw std::invalid_argument(
          "blocking scenario: slice parameters must be positive");
  }
}

std::uint64_t state_space_size(const BlockingScenario& sc) {
  sc.validate();
  std::uint64_t n = 1;
  for (const auto& s : sc.slices) {
    const std::uint64_t c = static_cast<std::uint64_t>(slice_cap(sc, s)) + 1;
    if (n > (std::uint64_t(1) << 62) / c) return std::uint64_t(1) << 62;
    n *= c;
  }
  return n;
}

namespace {

template <typename F>
void enumerate_rec(const BlockingScenario& sc, std::size_t s,
                   std::vector<int>& counts, double weight, double used,
                   double eps, F& visit) {
  if (s == sc.slices.size()) {
    visit(counts, weight, used);
    return;
  }
  const double rho = sc.slices[s].load();
  double w = weight;
  for (int n = 0;; ++n) {
    const double u = used + n * sc.slices[s].bandwidth;
    if (u > sc.reserved_bandwidth + eps) break;
    if (n > 0) w *= rho / n;  // rho^n / n! built incrementally
    counts[s] = n;
    enumerate_rec(sc, s + 1, counts, w, u, eps, visit);
  }
  counts[s] = 0;
}

// Walks every admissible count vector and folds (counts, weight, used
// bandwidth) into the visitor.
template <typename F>
void enumerate_states(const BlockingScenario& sc, F&& visit) {
  std::vector<int> counts(sc.slices.size(), 0);
  enumerate_rec(sc, 0, counts, 1.0, 0.0, admit_eps(sc), visit);
}

}  // namespace

double state_probability(const BlockingScenario& sc,
                         const std::vector<int>& counts) {
  sc.validate();
  if (counts.size() != sc.slices.size())
    throw std::domain_error("state_probability: count vector size mismatch");
  double used = 0.0;
  double w = 1.0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    if (counts[s] < 0)
      throw std::domain_error("state_probability: negative count");
    used += counts[s] * sc.slices[s].bandwidth;
    const double rho = sc.slices[s].load();
    for (int k = 1; k <= counts[s]; ++k) w *= rho / k;
  }
  if (used > sc.reserved_bandwidth + admit_eps(sc))
    throw std::domain_error("state_probability: state outside admissible set");
  double norm = 0.0;
  enumerate_states(sc, [&](const std::vector<int>&, double wt, double) {
    norm += wt;
  });
  return w / norm;
}

std::vector<double> blocking_prob_exact(const BlockingScenario& sc,
                                        std::uint64_t state_cap) {
  sc.validate();
  if (state_space_size(sc) > state_cap)
    throw StateSpaceError("blocking_prob_exact: state space exceeds cap");
  const int ns = static_cast<int>(sc.slices.size());
  const double eps = admit_eps(sc);
  double norm = 0.0;
  std::vector<double> blocked(ns, 0.0);
  enumerate_states(sc, [&](const std::vector<int>&, double wt, double used) {
    norm += wt;
    for (int k = 0; k < ns; ++k)
      if (used + sc.slices[k].bandwidth > sc.reserved_bandwidth + eps)
        blocked[k] += wt;
  });
  for (int k = 0; k < ns; ++k) blocked[k] /= norm;
  return blocked;
}

McEstimate blocking_prob_mc(const BlockingScenario& sc, std::uint64_t horizon,
                            std::uint64_t seed, int replications) {
  sc.validate();
  if (replications < 1) replications = 1;
  const int ns = static_cast<int>(sc.slices.size());
  const double eps = admit_eps(sc);
  std::vector<std::uint64_t> arrivals(ns, 0), blocked(ns, 0);

  const std::uint64_t per_rep =
      std::max<std::uint64_t>(1, horizon / replications);
  for (int rep = 0; rep < replications; ++rep) {
    Substream rng(seed, kTagArrival, static_cast<std::uint64_t>(rep));
    const std::uint64_t warmup = std::max<std::uint64_t>(per_rep / 10, 100);
    // departures as a min-heap of (time, slice)
    using Ev = std::pair<double, int>;
    std::priority_queue<Ev, std::vector<Ev>, std::greater<Ev>> departures;
    std::vector<int> active(ns, 0);
    std::vector<double> next_arrival(ns);
    double now = 0.0;
    for (int s = 0; s < ns; ++s)
      next_arrival[s] =
          -std::log(rng.uniform()) / sc.slices[s].aggregate_rate();
    std::uint64_t seen = 0;
    while (seen < per_rep + warmup) {
      int s_next = 0;
      for (int s = 1; s < ns; ++s)
        if (next_arrival[s] < next_arrival[s_next]) s_next = s;
      const double t_arr = next_arrival[s_next];
      while (!departures.empty() && departures.top().first <= t_arr) {
        --active[departures.top().second];
        departures.pop();
      }
      now = t_arr;
      double used = 0.0;
      for (int s = 0; s < ns; ++s) used += active[s] * sc.slices[s].bandwidth;
      const bool admit =
          used + sc.slices[s_next].bandwidth <= sc.reserved_bandwidth + eps;
      if (seen >= warmup) {
        ++arrivals[s_next];
        if (!admit) ++blocked[s_next];
      }
      if (admit) {
        ++active[s_next];
        departures.emplace(now + sc.slices[s_next].duration, s_next);
      }
      next_arrival[s_next] =
          now - std::log(rng.uniform()) / sc.slices[s_next].aggregate_rate();
      ++seen;
    }
  }

  McEstimate out;
  out.blocking.resize(ns);
  out.ci_half_width.resize(ns);
  out.arrivals = arrivals;
  for (int s = 0; s < ns; ++s) {
    const double n = static_cast<double>(std::max<std::uint64_t>(arrivals[s], 1));
    const double p = blocked[s] / n;
    out.blocking[s] = p;
    out.ci_half_width[s] = 1.96 * std::sqrt(std::max(p * (1.0 - p), 0.0) / n);
  }
  return out;
}

Lemma1Result lemma1_scaling_check(const BlockingScenario& sc, int slice, int q,
                                  std::uint64_t mc_horizon,
                                  std::uint64_t seed) {
  sc.validate();
  if (slice < 0 || slice >= static_cast<int>(sc.slices.size()))
    throw std::invalid_argument("lemma1_scaling_check: bad slice index");
  if (q < 1) throw std::invalid_argument("lemma1_scaling_check: q must be >= 1");

  BlockingScenario scaled = sc;
  scaled.slices[slice].bandwidth /= q;
  scaled.slices[slice].duration *= q;

  Lemma1Result out;
  out.hypothesis_ok = sc.slices[slice].load() < 1.0;
  const std::uint64_t cap = 1u << 20;
  out.exact =
      state_space_size(sc) <= cap && state_space_size(scaled) <= cap;
  double tol;
  if (out.exact) {
    out.blocking_before = blocking_prob_exact(sc);
    out.blocking_after = blocking_prob_exact(scaled);
    tol = 1e-12;
  } else {
    const auto before = blocking_prob_mc(sc, mc_horizon, seed);
    const auto after = blocking_prob_mc(scaled, mc_horizon, seed + 1);
    out.blocking_before = before.blocking;
    out.blocking_after = after.blocking;
    tol = 0.0;
    for (std::size_t k = 0; k < before.blocking.size(); ++k)
      tol = std::max(tol, 3.0 * (before.ci_half_width[k] + after.ci_half_width[k]));
  }
  out.holds = true;
  for (std::size_t k = 0; k < out.blocking_before.size(); ++k)
    if (out.blocking_before[k] < out.blocking_after[k] - tol) out.holds = false;
  return out;
}

double phi_single_class(int q, double load, double reserved_bandwidth,
                        double bandwidth) {
  if (q < 1 || load <= 0.0 || reserved_bandwidth <= 0.0 || bandwidth <= 0.0)
    throw std::domain_error("phi_single_class: arguments must be positive");
  const int n_ub = static_cast<int>(
      std::ceil(reserved_bandwidth / (bandwidth / q) - 1e-12));
  const int n_lb = n_ub - q + 1;
  const double rho = q * load;
  double term = 1.0, denom = 1.0, numer = (n_lb <= 0) ? 1.0 : 0.0;
  for (int n = 1; n <= n_ub; ++n) {
    term *= rho / n;
    denom += term;
    if (n >= n_lb) numer += term;
  }
  return numer / denom;
}

}  // namespace ranslicer::queueing
