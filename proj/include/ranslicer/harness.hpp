#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ranslicer/channel.hpp"
#include "ranslicer/slicing.hpp"

namespace ranslicer::harness {

enum class ServiceMode { multicast, unicast };

/// Geometry knobs of a scenario (the concrete Topology is derived from these
/// plus the seed).
struct TopologySpec {
  double region_radius_km = 0.5;
  int num_bs = 3;
  int antennas_per_bs = 2;
  double antenna_gain_db = 5.0;
  double shadowing_std_db = 10.0;
  double noise_power_w = 1e-14;  // -110 dBm
  double snr_loss = 1.5;
};

struct Scenario {
  TopologySpec topology;
  slicing::SystemParams sys;
  std::vector<slicing::EmbbRequest> embb;
  std::vector<slicing::UrllcRequest> urllc;
  slicing::Algorithm algorithm = slicing::Algorithm::iara_ab;
  ServiceMode mode = ServiceMode::multicast;
  std::uint64_t seed = 1;
  int sample_cap = 50;                 // M = min(M*, cap) unless overridden
  std::optional<int> sample_override;  // explicit M
  std::string sweep_param;             // optional sweep spec
  std::vector<std::string> sweep_grid;

  void validate() const;  // throws std::invalid_argument
};

struct RunRow {
  std::string algorithm;
  std::string param;  // empty when not sweeping
  std::string value;
  std::uint64_t seed = 0;
  double total_utility = 0.0;
  double embb_utility = 0.0;
  double urllc_utility = 0.0;
  double total_power = 0.0;
  double urllc_power = 0.0;
  std::string accepted_embb;  // bit string, slice order
  int embb_accept_count = 0;
  double urllc_mask_on_avg = 0.0;
  double reserved_bandwidth_avg = 0.0;
  std::int64_t m_star = 0;
  int m_used = 0;
  double alternations_avg = 0.0;
  double max_tightness = 0.0;
  int minislot_violations = 0;
  int revalidation_failures = 0;  // independent constraint re-check
  std::uint64_t scenario_hash = 0;
};

struct RunReport {
  std::vector<RunRow> rows;
};

/// Applies one sweep value: W and eta set absolutes, D_s / R_s scale the
/// request baselines, ue_count replaces the URLLC slice sizes, mode and
/// snr_case switch the tokens "unicast|multicast" / "I|II".
void apply_sweep_value(Scenario& sc, const std::string& param,
                       const std::string& token);

std::string algorithm_name(slicing::Algorithm a);
slicing::Algorithm algorithm_from_name(const std::string& name);

/// Deterministic FNV-1a hash of the canonical scenario serialization.
std::uint64_t scenario_hash(const Scenario& sc);

/// One slot + T minislots of the scenario's algorithm.
RunRow run_one(const Scenario& sc);

/// Fans (grid value x algorithm x seed) runs over `jobs` threads; rows come
/// back sorted by (param value index, algorithm, seed) regardless of the
/// execution order.
RunReport sweep(const Scenario& base, const std::string& param,
                const std::vector<std::string>& grid,
                const std::vector<slicing::Algorithm>& algorithms,
                const std::vector<std::uint64_t>& seeds, int jobs = 0);

/// CSV with the documented column set; floats carry 9 significant digits.
std::string to_csv(const RunReport& report);

}  // namespace ranslicer::harness
