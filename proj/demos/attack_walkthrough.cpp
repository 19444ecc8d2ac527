// End-to-end walkthrough of the library API: synthesize a receiver scan,
// locate attack angles, optimize Eve's photon numbers at a few loss points,
// and show what the pinhole filter does to the same map.

#include <cstdio>

#include "demlab/attack_search.hpp"
#include "demlab/optimize.hpp"
#include "demlab/rates.hpp"
#include "demlab/scan_synth.hpp"

int main() {
  using namespace demlab;

  const EfficiencyMap map = synthesize_scan(paper_like_preset(), 1);
  const AttackSearchResult search =
      find_attack_points(map, SearchThresholds::standard());

  std::printf("attack angles found on the synthetic receiver scan:\n");
  std::array<AttackPoint, 4> points;
  for (Pol j : kAllPols) {
    const auto& best = search.best[index_of(j)];
    if (!best) {
      std::printf("  %s: none\n", name_of(j).data());
      return 1;
    }
    points[index_of(j)] = *best;
    std::printf("  %s: (%+.3f, %+.3f) mrad  eta=%.4f  delta=%.1f\n",
                name_of(j).data(), best->phi_mrad, best->theta_mrad,
                best->eta_hat[j], best->delta);
  }

  ReceiverModel receiver;
  EveDetectorModel eve;
  OptimizerConfig cfg;

  std::printf("\n%6s %10s %10s %10s\n", "loss", "QBER_ab", "QBER_A", "QBER_B");
  for (double loss : {3.0, 6.0, 9.0, 12.0, 15.0}) {
    LinkModel link;
    link.loss_db = loss;
    const RateReport base = baseline_no_eve(link, receiver);

    cfg.mode = OptimizerMode::TotalRate;
    const auto mode_a = optimize_mode_a(points, link, receiver, eve, cfg);
    cfg.mode = OptimizerMode::PerPolarizationRates;
    const auto mode_b = optimize_mode_b(points, link, receiver, eve, cfg);

    std::printf("%4.0fdB %9.4f%% %9.4f%% %9.4f%%%s\n", loss, 100 * base.qber,
                100 * mode_a.qber_e, 100 * mode_b.qber_e,
                mode_a.converged && mode_b.converged ? "" : "  (!)");
  }

  const EfficiencyMap filtered = pinhole_filter(map, 100.0);
  const AttackSearchResult after =
      find_attack_points(filtered, SearchThresholds::tight());
  std::printf("\nwith a 100 urad field-of-view pinhole: %s\n",
              after.all_empty() ? "no usable attack angles remain"
                                : "attack angles still present");
  return 0;
}
