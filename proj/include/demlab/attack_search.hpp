#pragma once
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "demlab/scan_map.hpp"

namespace demlab {

// An angle Eve can use to resend polarization `pol`: the normalized channel
// efficiencies there and the mismatch ratio
//   delta = min(eta_pol/eta_nc0, eta_pol/eta_nc1)
// over the two channels of the non-compatible basis. A zero non-compatible
// efficiency makes the ratio +inf (ideal for the attacker); +inf compares
// greater than every finite delta.
struct AttackPoint {
  Pol pol = Pol::H;
  double phi_mrad = 0.0;
  double theta_mrad = 0.0;
  ChannelVector eta_hat;  // normalized efficiencies at this angle
  double delta = 0.0;
};

inline double mismatch_delta(const ChannelVector& eta_hat, Pol pol) {
  const double own = eta_hat[pol];
  auto [n0, n1] = pols_in(other_basis(basis_of(pol)));
  const double inf = std::numeric_limits<double>::infinity();
  const double r0 = eta_hat[n0] > 0.0 ? own / eta_hat[n0] : inf;
  const double r1 = eta_hat[n1] > 0.0 ? own / eta_hat[n1] : inf;
  return std::min(r0, r1);
}

// Per-polarization acceptance thresholds for the angle search.
struct SearchThresholds {
  std::array<double, 4> eta_min{0.2, 0.002, 0.4, 0.1};
  std::array<double, 4> delta_min{75.0, 8.0, 80.0, 20.0};

  static SearchThresholds standard() { return SearchThresholds{}; }

  // Tight settings used to certify a countermeasure: any channel above 0.1%
  // efficiency with a mismatch of 4 or more counts as a usable angle.
  static SearchThresholds tight() {
    SearchThresholds t;
    t.eta_min = {0.001, 0.001, 0.001, 0.001};
    t.delta_min = {4.0, 4.0, 4.0, 4.0};
    return t;
  }

  void validate() const {
    for (double e : eta_min)
      if (!(e >= 0.0 && e <= 1.0))
        throw std::domain_error("SearchThresholds: eta_min outside [0,1]");
    for (double d : delta_min)
      if (!(d >= 1.0))
        throw std::domain_error("SearchThresholds: delta_min below 1");
  }
};

struct AttackSearchResult {
  std::array<std::vector<AttackPoint>, 4> qualifying;
  std::array<std::optional<AttackPoint>, 4> best;

  bool all_nonempty() const {
    for (const auto& q : qualifying)
      if (q.empty()) return false;
    return true;
  }
  bool all_empty() const {
    for (const auto& q : qualifying)
      if (!q.empty()) return false;
    return true;
  }
};

// Scan every grid cell for every polarization j; a cell qualifies when
// eta_j >= eta_min(j) and delta_j >= delta_min(j). The best point maximizes
// eta_j, ties broken by larger delta, then by scan order (phi-major). Empty
// result sets are a legitimate outcome, not an error.
inline AttackSearchResult find_attack_points(const EfficiencyMap& map,
                                             const SearchThresholds& th) {
  map.grid.validate();
  th.validate();
  AttackSearchResult res;

  for (int ip = 0; ip < map.grid.n_phi; ++ip) {
    for (int it = 0; it < map.grid.n_theta; ++it) {
      const std::size_t cell = map.grid.cell(ip, it);
      const ChannelVector eta = map.at_cell(cell);
      for (Pol j : kAllPols) {
        const int ji = index_of(j);
        if (eta[j] < th.eta_min[ji]) continue;
        const double delta = mismatch_delta(eta, j);
        if (!(delta >= th.delta_min[ji])) continue;

        AttackPoint pt{j, map.grid.phi_at(ip), map.grid.theta_at(it), eta,
                       delta};
        res.qualifying[ji].push_back(pt);
        auto& best = res.best[ji];
        if (!best || pt.eta_hat[j] > best->eta_hat[j] ||
            (pt.eta_hat[j] == best->eta_hat[j] && pt.delta > best->delta)) {
          best = pt;
        }
      }
    }
  }
  return res;
}

// Spatial-filter countermeasure: multiply every channel by a radially
// symmetric window centered on the aligned beam -- flat inside the
// field-of-view radius, Gaussian falloff of scale edge_urad outside -- then
// re-normalize each channel.
inline EfficiencyMap pinhole_filter(const EfficiencyMap& map, double fov_urad,
                                    double edge_urad = 10.0) {
  map.grid.validate();
  if (!(fov_urad > 0.0)) throw std::domain_error("pinhole_filter: fov <= 0");
  if (!(edge_urad > 0.0)) throw std::domain_error("pinhole_filter: edge <= 0");

  const double radius_mrad = 0.5 * fov_urad / 1000.0;
  EfficiencyMap out = EfficiencyMap::zeros(map.grid);

  std::vector<double> window(map.grid.n_cells());
  for (int ip = 0; ip < map.grid.n_phi; ++ip) {
    for (int it = 0; it < map.grid.n_theta; ++it) {
      const double r = std::hypot(map.grid.phi_at(ip), map.grid.theta_at(it));
      double w = 1.0;
      if (r > radius_mrad) {
        const double d_urad = (r - radius_mrad) * 1000.0;
        const double u = d_urad / edge_urad;
        w = std::exp(-0.5 * u * u);
      }
      window[map.grid.cell(ip, it)] = w;
    }
  }

  for (Pol ch : kAllPols) {
    auto& dst = out.eta[index_of(ch)];
    const auto& src = map.eta[index_of(ch)];
    double peak = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = src[i] * window[i];
      peak = dst[i] > peak ? dst[i] : peak;
    }
    if (peak > 0.0)
      for (double& x : dst) x /= peak;
  }
  return out;
}

}  // namespace demlab
