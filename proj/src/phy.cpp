#include "ranslicer/phy.hpp"

#include <cmath>
#include <stdexcept>

namespace ranslicer::phy {

namespace {
constexpr double kLn2 = 0.69314718055994530942;

double q_tail(double x) { return 0.5 * std::erfc(x * 0.70710678118654752440); }
}  // namespace

double q_inverse(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("q_inverse: p must lie in (0, 1)");
  double lo = -40.0, hi = 40.0;
  // Q is strictly decreasing; bisect until the interval collapses.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (q_tail(mid) > p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-14 * (1.0 + std::abs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

double capacity(double snr) {
  if (snr < 0.0) throw std::domain_error("capacity: snr must be >= 0");
  return std::log2(1.0 + snr);
}

double dispersion(double snr) {
  if (snr < 0.0) throw std::domain_error("dispersion: snr must be >= 0");
  const double a = 1.0 + snr;
  return kLn2 * kLn2 * (1.0 - 1.0 / (a * a));
}

double channel_uses(double bits, double snr, double alpha) {
  if (bits <= 0.0) throw std::domain_error("channel_uses: bits must be > 0");
  const double c = capacity(snr);
  if (c <= 0.0)
    throw std::domain_error("channel_uses: zero capacity (snr = 0)");
  const double q = q_inverse(alpha);
  const double q2 = q * q;
  // r = L/C + q2/(2C^2) + sqrt(q2^2 + 4*L*C*q2)/(2C^2); the radical form is
  // exact at q2 = 0 where the printed sqrt(1 + 4LC/q2) blows up.
  return bits / c + q2 / (2.0 * c * c) +
         std::sqrt(q2 * q2 + 4.0 * bits * c * q2) / (2.0 * c * c);
}

double fbl_payload_bits(double r, double snr, double alpha) {
  if (r < 0.0) throw std::domain_error("fbl_payload_bits: r must be >= 0");
  return r * capacity(snr) - q_inverse(alpha) * std::sqrt(r);
}

double fbl_payload_bits_exact(double r, double snr, double alpha) {
  if (r < 0.0) throw std::domain_error("fbl_payload_bits: r must be >= 0");
  return r * capacity(snr) - q_inverse(alpha) * std::sqrt(r * dispersion(snr));
}

double subslice_bandwidth(double arrival_rate, double channel_uses,
                          double numerology, double deadline) {
  if (arrival_rate <= 0.0 || channel_uses <= 0.0 || numerology <= 0.0 ||
      deadline <= 0.0)
    throw std::domain_error("subslice_bandwidth: arguments must be positive");
  return arrival_rate * channel_uses / (numerology * deadline);
}

double staffing_mean(const std::vector<StaffedUser>& users, double numerology) {
  double s = 0.0;
  for (const auto& u : users)
    if (u.masked_on) s += u.arrival_rate * u.channel_uses / numerology;
  return s;
}

double staffing_variance(const std::vector<StaffedUser>& users,
                         double numerology) {
  double s = 0.0;
  for (const auto& u : users)
    if (u.masked_on)
      s += u.arrival_rate * u.channel_uses * u.channel_uses /
           (numerology * numerology * u.deadline);
  return s;
}

double staffed_bandwidth(const std::vector<StaffedUser>& users,
                         double numerology, double blocking_target) {
  if (numerology <= 0.0)
    throw std::domain_error("staffed_bandwidth: numerology must be positive");
  const double mean = staffing_mean(users, numerology);
  const double var = staffing_variance(users, numerology);
  return mean + q_inverse(blocking_target) * std::sqrt(var);
}

double embb_rate(double bandwidth, double snr) {
  if (bandwidth < 0.0) throw std::domain_error("embb_rate: bandwidth < 0");
  return bandwidth * std::log2(1.0 + snr);
}

double urllc_profit(double profit_const, double deadline) {
  if (deadline <= 0.0) throw std::domain_error("urllc_profit: deadline <= 0");
  return profit_const / (1.0 - std::exp(-deadline));
}

double embb_utility_minislot(bool accepted, const std::vector<double>& snrs,
                             const std::vector<double>& bs_powers, double eta,
                             const std::vector<double>& bs_budget) {
  double u = 0.0;
  if (accepted)
    for (double s : snrs) u += std::log1p(s);
  for (std::size_t j = 0; j < bs_budget.size(); ++j) {
    const double p = accepted && j < bs_powers.size() ? bs_powers[j] : 0.0;
    u += eta * (bs_budget[j] - p);
  }
  return u;
}

double urllc_utility_minislot(const std::vector<bool>& mask,
                              const std::vector<double>& snrs, double deadline,
                              double profit_const,
                              const std::vector<std::vector<double>>& ue_bs_powers,
                              double eta, const std::vector<double>& bs_budget) {
  const double profit = urllc_profit(profit_const, deadline);
  double u = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) u += std::log1p(snrs[i]) + profit;
  for (std::size_t j = 0; j < bs_budget.size(); ++j) {
    double p = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i] && i < ue_bs_powers.size() && j < ue_bs_powers[i].size())
        p += ue_bs_powers[i][j];
    u += eta * (bs_budget[j] - p);
  }
  return u;
}

}  // namespace ranslicer::phy
