#pragma once

#include <vector>

namespace ranslicer::phy {

/// Inverse of the standard normal tail Q(x) = 0.5 * erfc(x / sqrt(2)).
/// Monotone bisection, accurate to ~1e-12; throws for p outside (0, 1).
double q_inverse(double p);

/// AWGN capacity per channel use, log2(1 + snr).
double capacity(double snr);

/// Channel dispersion ln^2(2) * (1 - 1/(1+snr)^2); < ln^2(2) always.
double dispersion(double snr);

/// Channel uses needed to carry `bits` at decode-error alpha (closed form
/// from the quadratic in sqrt(r)). Throws when capacity is zero.
double channel_uses(double bits, double snr, double alpha);

/// Payload carried by r channel uses under the approximation inverted by
/// channel_uses: r*C - Qinv(alpha)*sqrt(r).
double fbl_payload_bits(double r, double snr, double alpha);

/// Payload with the exact dispersion term: r*C - Qinv(alpha)*sqrt(r*V(snr)).
double fbl_payload_bits_exact(double r, double snr, double alpha);

/// Sub-slice bandwidth lambda * r / (kappa * D); transmission duration is the
/// full deadline D.
double subslice_bandwidth(double arrival_rate, double channel_uses,
                          double numerology, double deadline);

/// One masked URLLC user as seen by the staffing rule.
struct StaffedUser {
  bool masked_on = false;
  double arrival_rate = 0.0;  // lambda
  double channel_uses = 0.0;  // r
  double deadline = 0.0;      // D
};

/// Mean component of the staffing rule, sum of b * lambda * r / kappa.
double staffing_mean(const std::vector<StaffedUser>& users, double numerology);

/// Variance component, sum of b * lambda * r^2 / (kappa^2 * D).
double staffing_variance(const std::vector<StaffedUser>& users,
                         double numerology);

/// Square-root staffing: mean + Qinv(beta) * sqrt(variance).
double staffed_bandwidth(const std::vector<StaffedUser>& users,
                         double numerology, double blocking_target);

/// Shannon rate omega * log2(1 + snr) in bit/s.
double embb_rate(double bandwidth, double snr);

/// Deadline-mapped URLLC profit a_tilde / (1 - exp(-deadline)).
double urllc_profit(double profit_const, double deadline);

/// Per-minislot eMBB slice utility: accept * sum_i ln(1+snr_i)
/// + eta * sum_j (E_j - accept * power_j).
double embb_utility_minislot(bool accepted, const std::vector<double>& snrs,
                             const std::vector<double>& bs_powers, double eta,
                             const std::vector<double>& bs_budget);

/// Per-minislot URLLC slice utility: sum_i b_i * (ln(1+snr_i) + profit)
/// + eta * sum_j (E_j - sum_i b_i * power_i,j).
double urllc_utility_minislot(const std::vector<bool>& mask,
                              const std::vector<double>& snrs, double deadline,
                              double profit_const,
                              const std::vector<std::vector<double>>& ue_bs_powers,
                              double eta, const std::vector<double>& bs_budget);

}  // namespace ranslicer::phy
