#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace ranslicer::channel {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// One group of UEs served by the same slice.
struct UeGroup {
  std::string slice_id;
  std::vector<Point> positions;
};

/// Static geometry and large-scale parameters of the deployment. Base
/// stations sit equally spaced on the boundary circle; UEs anywhere inside.
struct Topology {
  double region_radius_km = 0.5;
  int antennas_per_bs = 2;
  double antenna_gain_db = 5.0;
  double shadowing_std_db = 10.0;
  double noise_power_w = 1e-14;  // sigma^2
  double snr_loss = 1.5;         // phi >= 1
  std::vector<Point> bs_positions;
  std::vector<UeGroup> ue_groups;

  int num_bs() const { return static_cast<int>(bs_positions.size()); }
  int vector_dim() const { return num_bs() * antennas_per_bs; }
  int total_ues() const;

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
};

/// Places J base stations equally spaced on the boundary of the disc.
std::vector<Point> boundary_bs_positions(double radius_km, int num_bs);

/// Draws UE positions uniformly (by area) inside the disc.
std::vector<Point> uniform_ue_positions(double radius_km, int count,
                                        std::uint64_t seed,
                                        std::uint64_t stream);

double distance_km(const Point& a, const Point& b);

/// Downlink path loss in dB; throws std::domain_error for d <= 0.
double path_loss_db(double distance_km);

/// Per-minislot channel vectors for every (group, UE) pair. Entries are the
/// stacked per-BS vectors, length J*K.
struct ChannelSet {
  long index = 0;
  std::vector<std::vector<Eigen::VectorXcd>> h;  // [group][ue]
};

/// Frozen large-scale state plus an i.i.d. small-scale sampler. Shadowing is
/// drawn once per (UE, BS) link from the seed; per-index draws vary only the
/// small-scale fading, so repeated sampling at one index is bit-identical.
class ChannelModel {
 public:
  ChannelModel(Topology topology, std::uint64_t seed);

  const Topology& topology() const { return topo_; }
  std::uint64_t seed() const { return seed_; }

  /// Mean power gain (linear) of the (group, ue, bs) link, i.e. E|h_k|^2 of
  /// each of the K entries of that block.
  double link_gain(int group, int ue, int bs) const;

  ChannelSet sample(long index) const;

 private:
  Topology topo_;
  std::uint64_t seed_ = 0;
  std::vector<std::vector<std::vector<double>>> amplitude_;  // [group][ue][bs]
};

/// Received SNR |h^H w|^2 / (phi * sigma^2); Eq. shared by both slice types.
double received_snr(const Eigen::VectorXcd& h, const Eigen::VectorXcd& w,
                    double snr_loss, double noise_power);

}  // namespace ranslicer::channel
