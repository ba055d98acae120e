#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ranslicer::solver {

enum class SnrCase { enforced, relaxed };  // Case I / Case II

/// How the URLLC bandwidth reservation enters the bandwidth constraint.
enum class Reservation {
  staffed,     // mean + Qinv(beta) * sqrt(variance)
  mean_only,   // mean alone (the alpha-only variant)
  continuous,  // per-UE Eq.-(5) bandwidth held at all times (IRHS)
};

struct EmbbGroup {
  int slice_id = 0;
  bool accepted = false;
  double min_rate = 0.0;          // R_s [bit/s]
  double fixed_bandwidth = -1.0;  // >= 0: omega is a constant, not a variable
  std::vector<Eigen::VectorXcd> channels;  // stacked JK vector per UE
};

struct UrllcUser {
  int slice_id = 0;
  int ue_id = 0;
  bool accepted = false;
  double deadline = 0.0;      // D_s [s]
  double arrival_rate = 0.0;  // lambda
  double packet_bits = 0.0;   // L^u
  Eigen::VectorXcd channel;
};

struct ProblemParams {
  int num_bs = 3;
  int antennas_per_bs = 2;
  double total_bandwidth = 10e6;        // W [Hz]
  std::vector<double> bs_power;         // E_j [W]
  double noise_power = 1e-14;           // sigma^2
  double snr_loss = 1.5;                // phi
  double eta = 100.0;                   // energy efficiency coefficient
  double priority_weight = 1.0;         // rho_hat
  double profit_const = 0.1;            // a_tilde
  double numerology = 0.032;            // kappa
  double decode_error = 2e-8;           // alpha
  double blocking_target = 1e-6;        // beta
  double min_snr = 5.0;                 // Case-I floor (linear)
  SnrCase snr_case = SnrCase::enforced;
  Reservation reservation = Reservation::staffed;

  int vector_dim() const { return num_bs * antennas_per_bs; }
};

/// Fixed-acceptance convex subproblem over {omega_s, V_s, G_{i,s}, f_{i,s}}.
struct ConvexSubproblem {
  ProblemParams params;
  std::vector<EmbbGroup> embb;
  std::vector<UrllcUser> urllc;

  void validate() const;  // throws std::invalid_argument
};

enum class SolveStatus { optimal, infeasible, max_iterations };

struct SolveResult {
  SolveStatus status = SolveStatus::infeasible;
  double objective = 0.0;  // full P1 objective incl. power-balance constants
  std::vector<double> embb_bandwidth;              // per eMBB group
  std::vector<Eigen::MatrixXcd> embb_covariance;   // V_s (zero when declined)
  std::vector<Eigen::MatrixXcd> urllc_covariance;  // G_{i,s}
  std::vector<double> channel_use_slack;           // f_{i,s}
  std::vector<double> embb_tightness;              // lambda2/lambda1 per V
  std::vector<double> urllc_tightness;             // per G
  double kkt_residual = 0.0;  // relative optimality-gap bound at exit
  double max_violation = 0.0; // phase-1 certificate when infeasible
  int newton_iterations = 0;
  int outer_iterations = 0;
};

struct SolveOptions {
  double tol = 1e-6;  // relative optimality gap target
  int max_outer = 500;
  int max_newton_per_stage = 80;
  double barrier_growth = 60.0;
  double centering_tol = 1e-5;   // Newton-decrement^2 threshold en route
  double final_centering_tol = 2e-9;  // polish at the last barrier stage
  // Newton budget for the feasibility phase; near-boundary instances can
  // burn thousands of iterations before certifying either way, and callers
  // that only need a yes/no (the mask oracles) treat a timeout as "no".
  int phase1_newton_budget = 1200;
};

/// Optional starting point (used to skip phase 1 when strictly feasible).
struct WarmStart {
  std::vector<Eigen::MatrixXcd> embb_covariance;
  std::vector<Eigen::MatrixXcd> urllc_covariance;
  std::vector<double> embb_bandwidth;
  std::vector<double> channel_use_slack;
};

/// Log-barrier interior-point solve of the relaxed subproblem.
SolveResult solve(const ConvexSubproblem& problem,
                  const SolveOptions& options = {},
                  const WarmStart* warm = nullptr);

/// P1 objective value at an explicit point (power-balance constants
/// included); masked-off entities contribute nothing.
double objective_value(const ConvexSubproblem& problem,
                       const std::vector<Eigen::MatrixXcd>& embb_covariance,
                       const std::vector<Eigen::MatrixXcd>& urllc_covariance);

/// Constant part of the objective: per-slice power balances plus the
/// deadline profits of the accepted URLLC users.
double objective_constant(const ConvexSubproblem& problem);

struct FeasibilityReport {
  bool feasible = false;
  std::string method;      // "witness", "bound", "phase1", "trivial"
  double max_violation = 0.0;
};

/// True iff PSD matrices (and bandwidths, when free) exist satisfying the
/// QoS / power / min-SNR / bandwidth constraints at the fixed acceptance
/// bits. Cheap certificates first, phase-1 solve as the exact fallback.
FeasibilityReport check_feasibility(const ConvexSubproblem& problem);

struct ExtractionOptions {
  double tightness_threshold = 1e-6;
  int randomization_candidates = 64;
  std::uint64_t seed = 1;
  /// Optional candidate score (higher is better); default prefers the
  /// candidate closest to M in Frobenius norm.
  std::function<double(const Eigen::VectorXcd&)> score;
};

struct ExtractionResult {
  Eigen::VectorXcd beamformer;
  double tightness = 0.0;  // lambda2 / lambda1
  bool randomized = false;
};

/// Principal-eigenpair extraction when the matrix is numerically rank one;
/// Gaussian randomization (rescaled to the matrix's per-BS powers) otherwise.
ExtractionResult extract_beamformer(const Eigen::MatrixXcd& matrix,
                                    int antennas_per_bs,
                                    const ExtractionOptions& options = {});

/// lambda2/lambda1 of a PSD matrix (0 for the zero matrix).
double tightness_ratio(const Eigen::MatrixXcd& matrix);

}  // namespace ranslicer::solver
