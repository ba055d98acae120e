#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ranslicer/channel.hpp"
#include "ranslicer/solver.hpp"

namespace ranslicer::slicing {

struct EmbbRequest {
  int id = 0;
  int num_ues = 1;       // I_s^e
  double min_rate = 0.0; // R_s [bit/s]
};

struct UrllcRequest {
  int id = 0;
  int num_ues = 1;            // I_s^u
  double deadline = 0.0;      // D_s [s]
  double decode_error = 2e-8; // alpha
  double blocking_target = 1e-6;  // beta
  double arrival_rate = 0.1;  // lambda per UE
  double packet_bits = 160.0; // L^u
};

struct SystemParams {
  double total_bandwidth = 10e6;
  std::vector<double> bs_power = {1.0, 1.0, 1.0};
  double numerology = 0.032;     // kappa
  double efficiency = 100.0;     // eta
  double priority_weight = 1.0;  // rho_hat
  double profit_const = 0.1;     // a_tilde
  double outage_prob = 0.5;      // epsilon
  double sample_confidence = 0.5;  // theta
  int minislots = 60;            // T
  solver::SnrCase snr_case = solver::SnrCase::enforced;
  double min_snr = 5.0;
};

enum class Algorithm { iara_ab, es_ab, iara_a, irhs };

/// Minimum SAA sample count M* for dimension (N^e + N^u) * J * K.
std::int64_t sample_count(int embb_ues, int urllc_ues, int num_bs,
                          int antennas_per_bs, double epsilon, double theta);

// --- eMBB acceptance (exact enumeration of the linear integer program) ----

struct AcceptanceCandidate {
  int slice_id = 0;
  bool qos_ok = false;            // rate constraint holds at the fixed point
  double bandwidth = 0.0;         // omega_s
  std::vector<double> bs_power;   // tr(Z_j V_s)
  double utility_accept = 0.0;
  double utility_decline = 0.0;
};

struct FixedUrllcLoad {
  std::vector<double> bs_power;
  double reserved_bandwidth = 0.0;
};

/// Feasible b^e maximizing the summed utilities; ties prefer more accepted
/// slices, then the lexicographically earliest acceptance.
std::vector<std::uint8_t> embb_acceptance(
    const std::vector<AcceptanceCandidate>& candidates,
    const FixedUrllcLoad& urllc_load, double total_bandwidth,
    const std::vector<double>& bs_budget);

// --- URLLC resource masks ------------------------------------------------

struct MaskCandidate {
  int slice_id = 0;
  int ue_id = 0;
  double utility = 0.0;
};

using MaskOracle = std::function<bool(const std::vector<std::uint8_t>&)>;

/// Greedy mask: consider candidates by descending utility (ties by lowest
/// (slice, ue)), keep a bit iff the oracle accepts the tentative mask.
std::vector<std::uint8_t> grm_mask(const std::vector<MaskCandidate>& candidates,
                                   const MaskOracle& feasible);

/// Exhaustive mask search over all 2^N subsets (guarded at N <= 16): the
/// feasible mask with the greatest summed utility; ties prefer more active
/// bits, then lexicographic order.
std::vector<std::uint8_t> es_mask(const std::vector<MaskCandidate>& candidates,
                                  const MaskOracle& feasible);

// --- Two-timescale machinery ----------------------------------------------

/// Channel-sample index spaces for the three draw families.
constexpr long kSlotSampleBase = 0;
constexpr long kMinislotSampleBase = 1 << 20;
constexpr long kValidationSampleBase = 2 << 20;

struct SampleOutcome {
  bool solved = false;
  std::vector<std::uint8_t> embb_accept;
  std::vector<double> embb_bandwidth;
  std::vector<std::uint8_t> urllc_mask;  // flattened in (slice, ue) order
  std::vector<double> objective_trace;   // post-solve objective per round
  int alternations = 0;
  std::string failure;  // diagnostic when !solved
};

struct SlotDecision {
  std::vector<std::uint8_t> embb_accept;   // b_s^e(tbar)
  std::vector<double> embb_bandwidth;      // omega_s^e(tbar)
  std::vector<int> accept_counts;          // C_s^e
  /// Per URLLC slice; all-ones for the IARA family (subslices are masked per
  /// minislot), majority vote over samples for IRHS (no per-minislot masks).
  std::vector<std::uint8_t> urllc_slice_accept;
  int samples_used = 0;
  int samples_succeeded = 0;
  int restoration_declines = 0;
  std::vector<SampleOutcome> per_sample;
};

struct SlotError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SlotContext {
  const channel::ChannelModel* model = nullptr;
  SystemParams sys;
  std::vector<EmbbRequest> embb;
  std::vector<UrllcRequest> urllc;
  Algorithm algorithm = Algorithm::iara_ab;
  int samples = 1;  // M
  std::uint64_t seed = 1;

  void validate() const;
};

/// Slot phase: per-sample alternating optimization (Algorithm 2 for the
/// IARA/ES family, greedy joint admission for IRHS) followed by the
/// restoration of the slot variables. Throws SlotError when fewer than 80%
/// of the samples solve.
SlotDecision decide_slot(const SlotContext& ctx);

struct RestorationSample {
  std::vector<std::uint8_t> accept;
  std::vector<double> bandwidth;
};

struct RestorationResult {
  std::vector<std::uint8_t> accept;
  std::vector<double> bandwidth;
  std::vector<int> counts;
  int declines = 0;
};

/// Averages the per-sample bandwidths, then greedily declines the slice with
/// the smallest acceptance count until every per-sample problem is feasible
/// under the fixed slot variables.
RestorationResult restore_slot_vars(
    const std::vector<RestorationSample>& samples,
    const std::function<bool(const std::vector<std::uint8_t>&,
                             const std::vector<double>&, int)>& sample_feasible);

struct MinislotDecision {
  std::vector<std::uint8_t> urllc_mask;
  std::vector<Eigen::VectorXcd> embb_beamformers;   // per slice
  std::vector<Eigen::VectorXcd> urllc_beamformers;  // per (slice, ue)
  double reserved_bandwidth = 0.0;  // realized W^u
  double embb_utility = 0.0;
  double urllc_utility = 0.0;   // already weighted by rho_hat
  double total_utility = 0.0;
  double total_power = 0.0;
  double urllc_power = 0.0;
  std::vector<double> bs_power_used;
  double max_tightness = 0.0;
  bool randomized_extraction = false;
  bool violation = false;  // slot decision infeasible for this channel draw
};

/// Minislot phase at fixed slot variables: resource mask, beamforming solve,
/// rank-one extraction, realized utilities.
MinislotDecision minislot_schedule(const SlotContext& ctx,
                                   const SlotDecision& slot,
                                   long minislot_index);

}  // namespace ranslicer::slicing
