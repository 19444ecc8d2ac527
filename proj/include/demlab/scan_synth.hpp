#pragma once
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "demlab/rng.hpp"
#include "demlab/scan_map.hpp"

namespace demlab {

// Synthetic angular efficiency maps. Real receivers show a central coupling
// peak whose size and shape differ between channels, occasional off-axis
// reflection peaks from polished component edges, ring features from light
// scattered at lens mounts, and a weak noise floor. The generator reproduces
// those ingredients per channel, multiplies by a hard aperture (the beam
// misses the front lens beyond it), and max-normalizes each channel.

struct PeakSpec {
  double phi_mrad = 0.0;
  double theta_mrad = 0.0;
  double sigma_phi_mrad = 0.1;
  double sigma_theta_mrad = 0.1;
  double amplitude = 0.0;

  double eval(double phi, double theta) const {
    if (amplitude == 0.0) return 0.0;
    const double dx = (phi - phi_mrad) / sigma_phi_mrad;
    const double dy = (theta - theta_mrad) / sigma_theta_mrad;
    return amplitude * std::exp(-0.5 * (dx * dx + dy * dy));
  }
};

struct RingSpec {
  double radius_mrad = 0.0;
  double width_mrad = 0.05;
  double amplitude = 0.0;
  double az_modulation = 0.0;  // in [0,1); one side of the ring is brighter
  double az_phase_rad = 0.0;

  double eval(double phi, double theta) const {
    if (amplitude == 0.0) return 0.0;
    const double r = std::hypot(phi, theta);
    const double dr = (r - radius_mrad) / width_mrad;
    const double az = 1.0 + az_modulation * std::cos(std::atan2(theta, phi) -
                                                     az_phase_rad);
    return amplitude * az * std::exp(-0.5 * dr * dr);
  }
};

struct ChannelFeatures {
  PeakSpec central;
  PeakSpec reflection;
  // Fraction of this channel's reflection peak that also couples into the
  // conjugate channel's fiber.
  double conjugate_leak = 0.0;
  RingSpec ring;
};

struct ScanPreset {
  std::string name;
  GridSpec grid;
  std::array<ChannelFeatures, 4> channel;
  double noise_amplitude = 0.0;     // uniform [0, amp) per cell per channel
  double aperture_radius_mrad = 0;  // hard zero outside; 0 disables
};

// Preset tuned so that the four reflection peaks qualify as attack points
// under the search thresholds (H: 0.2/75, V: 0.002/8, D: 0.4/80, A: 0.1/20)
// while the central region and rings stay below them.
inline ScanPreset paper_like_preset() {
  ScanPreset p;
  p.name = "paper-like";
  p.grid = GridSpec{};  // 97x97 covering +-1.84 mrad
  p.noise_amplitude = 5e-4;
  p.aperture_radius_mrad = 1.84;

  auto& h = p.channel[index_of(Pol::H)];
  h.central = {+0.020, -0.012, 0.165, 0.195, 1.0};
  h.reflection = {+1.11, +0.31, 0.075, 0.075, 0.30};
  h.conjugate_leak = 0.015;
  h.ring = {1.66, 0.062, 0.0015, 0.3, 0.4};

  auto& v = p.channel[index_of(Pol::V)];
  v.central = {-0.016, +0.024, 0.210, 0.170, 1.0};
  v.reflection = {-0.92, +0.68, 0.070, 0.070, 0.0075};
  v.conjugate_leak = 0.015;
  v.ring = {1.66, 0.062, 0.0016, 0.3, 1.7};

  auto& d = p.channel[index_of(Pol::D)];
  d.central = {+0.012, +0.018, 0.180, 0.150, 1.0};
  d.reflection = {+0.52, -1.22, 0.080, 0.080, 0.50};
  d.conjugate_leak = 0.015;
  d.ring = {1.66, 0.062, 0.0018, 0.3, 2.9};

  auto& a = p.channel[index_of(Pol::A)];
  a.central = {-0.020, -0.014, 0.150, 0.205, 1.0};
  a.reflection = {-1.18, -0.79, 0.072, 0.072, 0.13};
  a.conjugate_leak = 0.015;
  a.ring = {1.66, 0.062, 0.0012, 0.3, 4.3};

  return p;
}

// Identical Gaussian coupling in all four channels: no mismatch anywhere, so
// threshold searches with delta_min > 1 must come up empty.
inline ScanPreset featureless_preset() {
  ScanPreset p;
  p.name = "featureless";
  p.grid = GridSpec{};
  p.noise_amplitude = 0.0;
  p.aperture_radius_mrad = 1.84;
  for (auto& ch : p.channel) ch.central = {0.0, 0.0, 0.18, 0.18, 1.0};
  return p;
}

inline std::optional<ScanPreset> find_preset(std::string_view name) {
  if (name == "paper-like") return paper_like_preset();
  if (name == "featureless") return featureless_preset();
  return std::nullopt;
}

// Deterministic map synthesis: the same (preset, seed) pair always produces
// a bit-identical map. Noise is drawn from a counter stream keyed by
// (seed, channel, cell), so it does not depend on traversal order.
inline EfficiencyMap synthesize_scan(const ScanPreset& preset,
                                     std::uint64_t seed) {
  preset.grid.validate();
  if (preset.noise_amplitude < 0.0)
    throw std::domain_error("synthesize_scan: negative noise amplitude");

  EfficiencyMap map = EfficiencyMap::zeros(preset.grid);
  const GridSpec& g = preset.grid;

  for (Pol ch : kAllPols) {
    const ChannelFeatures& f = preset.channel[index_of(ch)];
    const ChannelFeatures& conj = preset.channel[index_of(conjugate_of(ch))];
    auto& out = map.eta[index_of(ch)];

    for (int ip = 0; ip < g.n_phi; ++ip) {
      const double phi = g.phi_at(ip);
      for (int it = 0; it < g.n_theta; ++it) {
        const double theta = g.theta_at(it);
        const std::size_t cell = g.cell(ip, it);

        double val = f.central.eval(phi, theta) + f.reflection.eval(phi, theta);
        val += conj.conjugate_leak * conj.reflection.eval(phi, theta);
        val += f.ring.eval(phi, theta);
        if (preset.noise_amplitude > 0.0) {
          const std::uint64_t stream =
              (std::uint64_t(index_of(ch) + 1) << 40) + cell;
          CounterRng cell_rng = CounterRng::for_stream(seed, stream);
          val += preset.noise_amplitude * cell_rng.next_double();
        }
        if (preset.aperture_radius_mrad > 0.0 &&
            std::hypot(phi, theta) > preset.aperture_radius_mrad) {
          val = 0.0;
        }
        out[cell] = val;
      }
    }

    double peak = 0.0;
    for (double x : out) peak = x > peak ? x : peak;
    if (peak > 0.0)
      for (double& x : out) x /= peak;
  }
  return map;
}

}  // namespace demlab
