#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ranslicer::queueing {

/// One traffic class: every UE in the slice offers Poisson packets at
/// `per_ue_arrival_rate`, each held for `duration` seconds over `bandwidth`
/// Hz. Transmissions within a slice are homogeneous; heterogeneity across
/// slices is fully supported.
struct SliceClass {
  std::string id;
  int num_ues = 1;
  double per_ue_arrival_rate = 0.0;  // lambda_{i,s}
  double duration = 0.0;             // d_{i,s}
  double bandwidth = 0.0;            // omega_{i,s}^u

  double aggregate_rate() const { return num_ues * per_ue_arrival_rate; }
  double load() const { return aggregate_rate() * duration; }  // rho_s
};

struct BlockingScenario {
  double reserved_bandwidth = 0.0;  // W^u
  std::vector<SliceClass> slices;

  void validate() const;  // throws std::invalid_argument
};

/// Thrown when the exact engine would need more than the state cap.
struct StateSpaceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Number of admissible states (product over slices of cap_s + 1).
std::uint64_t state_space_size(const BlockingScenario& sc);

/// Product-form probability of the state with `counts[s]` concurrent slice-s
/// transmissions: G * prod_s rho_s^{n_s} / n_s!. Throws std::domain_error
/// when the state violates the bandwidth constraint.
double state_probability(const BlockingScenario& sc,
                         const std::vector<int>& counts);

/// Exact blocking probability of every slice by PASTA: probability mass on
/// states where one more slice-k transmission would not fit.
std::vector<double> blocking_prob_exact(const BlockingScenario& sc,
                                        std::uint64_t state_cap = 1u << 20);

struct McEstimate {
  std::vector<double> blocking;       // per slice
  std::vector<double> ci_half_width;  // 95% binomial CI per slice
  std::vector<std::uint64_t> arrivals;
};

/// Discrete-event oracle: per-slice Poisson arrivals, deterministic holding,
/// admission iff the reserved bandwidth fits. `horizon` counts measured
/// arrivals (after warm-up), split over `replications` substreams.
McEstimate blocking_prob_mc(const BlockingScenario& sc, std::uint64_t horizon,
                            std::uint64_t seed, int replications = 4);

struct Lemma1Result {
  std::vector<double> blocking_before;
  std::vector<double> blocking_after;
  bool holds = false;        // before >= after - tol, every slice
  bool exact = false;        // evaluated by enumeration (vs Monte Carlo)
  bool hypothesis_ok = true; // rho_s < 1 held for the scaled slice
};

/// Compares blocking for (omega, d) against (omega_s/q, q*d_s) on slice s.
Lemma1Result lemma1_scaling_check(const BlockingScenario& sc, int slice,
                                  int q, std::uint64_t mc_horizon = 200000,
                                  std::uint64_t seed = 1);

/// Closed-form conditional blocking ratio for a single homogeneous class
/// given the rest of the system idle; validated against enumeration only on
/// homogeneous cases.
double phi_single_class(int q, double load, double reserved_bandwidth,
                        double bandwidth);

}  // namespace ranslicer::queueing
