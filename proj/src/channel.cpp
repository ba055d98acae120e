#include "ranslicer/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "ranslicer/rng.hpp"

namespace ranslicer::channel {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr std::uint64_t kTagPlacement = Substream::tag("ue-placement");
constexpr std::uint64_t kTagShadow = Substream::tag("shadowing");
constexpr std::uint64_t kTagFading = Substream::tag("small-scale");
}  // namespace

int Topology::total_ues() const {
  int n = 0;
  for (const auto& g : ue_groups) n += static_cast<int>(g.positions.size());
  return n;
}

void Topology::validate() const {
  if (region_radius_km <= 0.0)
    throw std::invalid_argument("topology: region radius must be positive");
  if (antennas_per_bs < 1)
    throw std::invalid_argument("topology: antennas_per_bs must be >= 1");
  if (noise_power_w <= 0.0)
    throw std::invalid_argument("topology: noise power must be positive");
  if (snr_loss <= 1.0)
    throw std::invalid_argument("topology: snr_loss must exceed 1");
  if (bs_positions.empty())
    throw std::invalid_argument("topology: at least one BS required");
  const double r = region_radius_km;
  const double boundary_tol = 1e-9 * r;
  for (const auto& p : bs_positions) {
    const double d = std::hypot(p.x, p.y);
    if (std::abs(d - r) > boundary_tol)
      throw std::invalid_argument("topology: BS not on the region boundary");
  }
  // Equally spaced means every BS is the same distance from its neighbours.
  const int j = num_bs();
  if (j >= 2) {
    const double expect = 2.0 * r * std::sin(kPi / j);
    for (int k = 0; k < j; ++k) {
      const double d = distance_km(bs_positions[k], bs_positions[(k + 1) % j]);
      if (std::abs(d - expect) > 1e-6 * r)
        throw std::invalid_argument("topology: BSs not equally spaced");
    }
  }
  for (const auto& g : ue_groups)
    for (const auto& p : g.positions)
      if (std::hypot(p.x, p.y) > r * (1.0 + 1e-12))
        throw std::invalid_argument("topology: UE outside the region");
}

std::vector<Point> boundary_bs_positions(double radius_km, int num_bs) {
  if (radius_km <= 0.0 || num_bs < 1)
    throw std::invalid_argument("boundary_bs_positions: bad arguments");
  std::vector<Point> out(num_bs);
  for (int j = 0; j < num_bs; ++j) {
    const double a = 2.0 * kPi * j / num_bs;
    out[j] = {radius_km * std::cos(a), radius_km * std::sin(a)};
  }
  return out;
}

std::vector<Point> uniform_ue_positions(double radius_km, int count,
                                        std::uint64_t seed,
                                        std::uint64_t stream) {
  std::vector<Point> out(count);
  for (int i = 0; i < count; ++i) {
    Substream rng(seed, kTagPlacement, stream, static_cast<std::uint64_t>(i));
    const double r = radius_km * std::sqrt(rng.uniform());
    const double a = 2.0 * kPi * rng.uniform();
    out[i] = {r * std::cos(a), r * std::sin(a)};
  }
  return out;
}

double distance_km(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

double path_loss_db(double d_km) {
  if (d_km <= 0.0)
    throw std::domain_error("path_loss_db: distance must be positive");
  return 128.1 + 37.6 * std::log10(d_km);
}

ChannelModel::ChannelModel(Topology topology, std::uint64_t seed)
    : topo_(std::move(topology)), seed_(seed) {
  topo_.validate();
  const int nbs = topo_.num_bs();
  amplitude_.resize(topo_.ue_groups.size());
  // streams are keyed by the global UE index so regrouping the same UEs
  // (e.g. the unicast expansion) keeps their links bit-identical
  int global_ue = 0;
  for (std::size_t g = 0; g < topo_.ue_groups.size(); ++g) {
    const auto& group = topo_.ue_groups[g];
    amplitude_[g].resize(group.positions.size());
    for (std::size_t u = 0; u < group.positions.size(); ++u) {
      amplitude_[g][u].resize(nbs);
      for (int j = 0; j < nbs; ++j) {
        Substream rng(seed_, kTagShadow, static_cast<std::uint64_t>(global_ue),
                      static_cast<std::uint64_t>(j));
        const double shadow_db =
            topo_.shadowing_std_db > 0.0 ? topo_.shadowing_std_db * rng.normal()
                                         : 0.0;
        const double d = distance_km(group.positions[u], topo_.bs_positions[j]);
        const double gain_db =
            topo_.antenna_gain_db + shadow_db - path_loss_db(d);
        amplitude_[g][u][j] = std::pow(10.0, gain_db / 20.0);
      }
      ++global_ue;
    }
  }
}

double ChannelModel::link_gain(int group, int ue, int bs) const {
  const double a = amplitude_.at(group).at(ue).at(bs);
  return a * a;
}

ChannelSet ChannelModel::sample(long index) const {
  ChannelSet out;
  out.index = index;
  const int nbs = topo_.num_bs();
  const int k = topo_.antennas_per_bs;
  out.h.resize(topo_.ue_groups.size());
  int global_ue = 0;
  for (std::size_t g = 0; g < topo_.ue_groups.size(); ++g) {
    out.h[g].resize(topo_.ue_groups[g].positions.size());
    for (std::size_t u = 0; u < topo_.ue_groups[g].positions.size(); ++u) {
      Substream rng(seed_, kTagFading, static_cast<std::uint64_t>(index),
                    static_cast<std::uint64_t>(global_ue));
      Eigen::VectorXcd h(nbs * k);
      for (int j = 0; j < nbs; ++j) {
        const double a = amplitude_[g][u][j];
        for (int ant = 0; ant < k; ++ant) h(j * k + ant) = a * rng.cnormal();
      }
      out.h[g][u] = std::move(h);
      ++global_ue;
    }
  }
  return out;
}

double received_snr(const Eigen::VectorXcd& h, const Eigen::VectorXcd& w,
                    double snr_loss, double noise_power) {
  if (h.size() != w.size())
    throw std::domain_error("received_snr: dimension mismatch");
  if (noise_power <= 0.0)
    throw std::domain_error("received_snr: noise power must be positive");
  if (snr_loss < 1.0)
    throw std::domain_error("received_snr: snr_loss must be >= 1");
  const std::complex<double> inner = h.dot(w);  // h^H w
  return std::norm(inner) / (snr_loss * noise_power);
}

}  // namespace ranslicer::channel
