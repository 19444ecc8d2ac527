#pragma once
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "demlab/models.hpp"
#include "demlab/polarization.hpp"

namespace demlab {

// Uniform 2D angular grid. Angles are in mrad relative to the aligned beam.
// Cells are stored row-major with phi as the outer index: cell = ip*n_theta+it.
struct GridSpec {
  double phi_min_mrad = -1.84;
  double phi_max_mrad = 1.84;
  double theta_min_mrad = -1.84;
  double theta_max_mrad = 1.84;
  int n_phi = 97;
  int n_theta = 97;

  std::size_t n_cells() const {
    return static_cast<std::size_t>(n_phi) * static_cast<std::size_t>(n_theta);
  }
  double phi_at(int ip) const {
    return phi_min_mrad +
           (phi_max_mrad - phi_min_mrad) * ip / double(n_phi - 1);
  }
  double theta_at(int it) const {
    return theta_min_mrad +
           (theta_max_mrad - theta_min_mrad) * it / double(n_theta - 1);
  }
  std::size_t cell(int ip, int it) const {
    return static_cast<std::size_t>(ip) * n_theta + it;
  }

  void validate() const {
    if (n_phi < 2 || n_theta < 2)
      throw std::domain_error("GridSpec: need at least 2 steps per axis");
    if (!(phi_max_mrad > phi_min_mrad) || !(theta_max_mrad > theta_min_mrad))
      throw std::domain_error("GridSpec: empty angular range");
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// Photon count rates straight off a scan: per-cell per-channel rates in
// counts/s, per-channel background rates, and the integration time used per
// point (metadata; rates are already per second).
struct RawScan {
  GridSpec grid;
  std::array<std::vector<double>, 4> counts;  // [channel][cell], counts/s
  ChannelVector background_rate;              // counts/s
  double integration_s = 1.0;

  double count(Pol ch, std::size_t cell) const {
    return counts[index_of(ch)][cell];
  }
};

// Normalized per-channel detection efficiencies on the scan grid. After
// normalization each channel's grid maximum is 1 (or the whole channel is 0).
struct EfficiencyMap {
  GridSpec grid;
  std::array<std::vector<double>, 4> eta;  // [channel][cell], in [0,1]

  double value(Pol ch, std::size_t cell) const {
    return eta[index_of(ch)][cell];
  }
  double& value(Pol ch, std::size_t cell) { return eta[index_of(ch)][cell]; }

  ChannelVector at_cell(std::size_t cell) const {
    return ChannelVector{eta[0][cell], eta[1][cell], eta[2][cell],
                         eta[3][cell]};
  }

  double channel_max(Pol ch) const {
    double m = 0.0;
    for (double x : eta[index_of(ch)]) m = x > m ? x : m;
    return m;
  }

  static EfficiencyMap zeros(const GridSpec& grid) {
    grid.validate();
    EfficiencyMap m;
    m.grid = grid;
    for (auto& ch : m.eta) ch.assign(grid.n_cells(), 0.0);
    return m;
  }
};

// Background subtraction followed by per-channel max-normalization:
//   value = max(rate - background, 0) / max_over_grid(rate - background).
// A channel that never rises above its background comes out identically zero.
inline EfficiencyMap normalize_scan(const RawScan& raw) {
  raw.grid.validate();
  const std::size_t n = raw.grid.n_cells();
  for (const auto& ch : raw.counts)
    if (ch.size() != n)
      throw std::invalid_argument("normalize_scan: count grid size mismatch");

  EfficiencyMap map = EfficiencyMap::zeros(raw.grid);
  for (Pol ch : kAllPols) {
    const auto& cnt = raw.counts[index_of(ch)];
    const double bg = raw.background_rate[ch];
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, cnt[i] - bg);
    if (peak <= 0.0) continue;  // identically at or below background
    auto& out = map.eta[index_of(ch)];
    for (std::size_t i = 0; i < n; ++i)
      out[i] = std::max(cnt[i] - bg, 0.0) / peak;
  }
  return map;
}

}  // namespace demlab
