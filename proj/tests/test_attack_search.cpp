#include "demlab/attack_search.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <tuple>

#include "demlab/rng.hpp"
#include "demlab/scan_synth.hpp"

using namespace demlab;

namespace {

EfficiencyMap uniform_map(int n, const ChannelVector& eta) {
  GridSpec g;
  g.phi_min_mrad = -1.0;
  g.phi_max_mrad = 1.0;
  g.theta_min_mrad = -1.0;
  g.theta_max_mrad = 1.0;
  g.n_phi = n;
  g.n_theta = n;
  EfficiencyMap m = EfficiencyMap::zeros(g);
  for (Pol ch : kAllPols)
    for (auto& x : m.eta[index_of(ch)]) x = eta[ch];
  return m;
}

// Qualifying cells as a comparable set of (pol, phi index, theta index).
std::set<std::tuple<int, double, double>> point_set(
    const AttackSearchResult& res) {
  std::set<std::tuple<int, double, double>> s;
  for (Pol j : kAllPols)
    for (const auto& pt : res.qualifying[index_of(j)])
      s.insert({index_of(j), pt.phi_mrad, pt.theta_mrad});
  return s;
}

}  // namespace

TEST(MismatchDelta, MinRatioOverNonCompatibleChannels) {
  // eta_h=0.2 against d=0.0025, a=0.0026: min(80, 76.92) = 76.92...
  const ChannelVector eta{0.2, 0.15, 0.0025, 0.0026};
  EXPECT_NEAR(mismatch_delta(eta, Pol::H), 0.2 / 0.0026, 1e-12);
  // The conjugate channel does not enter delta.
  const ChannelVector eta2{0.2, 0.9, 0.0025, 0.0026};
  EXPECT_DOUBLE_EQ(mismatch_delta(eta, Pol::H), mismatch_delta(eta2, Pol::H));
}

TEST(MismatchDelta, ZeroDenominatorIsUnbounded) {
  const ChannelVector eta{0.3, 0.1, 0.0, 0.001};
  EXPECT_EQ(mismatch_delta(eta, Pol::H), 0.3 / 0.001);
  const ChannelVector ideal{0.3, 0.1, 0.0, 0.0};
  EXPECT_TRUE(std::isinf(mismatch_delta(ideal, Pol::H)));
  EXPECT_GT(mismatch_delta(ideal, Pol::H), 1e300);
}

// Spot cell against an exhaustive scan over all nine cells of a 3x3 map.
TEST(FindAttackPoints, SelectsTheOnlyQualifyingCell) {
  EfficiencyMap map = uniform_map(3, ChannelVector{0.5, 0.5, 0.5, 0.5});
  const std::size_t hot = map.grid.cell(2, 1);
  map.eta[0][hot] = 0.3;
  map.eta[1][hot] = 0.29;
  map.eta[2][hot] = 0.003;
  map.eta[3][hot] = 0.003;

  SearchThresholds th;
  th.eta_min = {0.2, 0.2, 0.2, 0.2};
  th.delta_min = {75, 75, 75, 75};
  const auto res = find_attack_points(map, th);

  // Independent brute force over every cell and polarization.
  int expected_count = 0;
  for (std::size_t c = 0; c < map.grid.n_cells(); ++c) {
    const auto eta = map.at_cell(c);
    for (Pol j : kAllPols) {
      const auto [n0, n1] = pols_in(other_basis(basis_of(j)));
      const double delta =
          std::min(eta[j] / eta[n0], eta[j] / eta[n1]);
      if (eta[j] >= th.eta_min[index_of(j)] &&
          delta >= th.delta_min[index_of(j)])
        ++expected_count;
    }
  }
  int got = 0;
  for (const auto& q : res.qualifying) got += static_cast<int>(q.size());
  EXPECT_EQ(got, expected_count);
  // The hot cell works for both H (0.3/0.003 = 100) and its conjugate V
  // (0.29/0.003 = 96.7); no other cell or polarization qualifies.
  EXPECT_EQ(expected_count, 2);
  EXPECT_EQ(res.qualifying[index_of(Pol::H)].size(), 1u);
  EXPECT_EQ(res.qualifying[index_of(Pol::V)].size(), 1u);

  ASSERT_TRUE(res.best[index_of(Pol::H)].has_value());
  const AttackPoint& best = *res.best[index_of(Pol::H)];
  EXPECT_DOUBLE_EQ(best.eta_hat[Pol::H], 0.3);
  EXPECT_DOUBLE_EQ(best.delta, 100.0);
  EXPECT_DOUBLE_EQ(best.phi_mrad, map.grid.phi_at(2));
  EXPECT_DOUBLE_EQ(best.theta_mrad, map.grid.theta_at(1));
  EXPECT_DOUBLE_EQ(res.best[index_of(Pol::V)]->delta, 0.29 / 0.003);
  EXPECT_FALSE(res.best[index_of(Pol::D)].has_value());
  EXPECT_FALSE(res.best[index_of(Pol::A)].has_value());
}

TEST(FindAttackPoints, UniformMapHasNoMismatch) {
  const auto map = uniform_map(5, ChannelVector{0.7, 0.7, 0.7, 0.7});
  SearchThresholds th = SearchThresholds::tight();  // delta_min = 4
  EXPECT_TRUE(find_attack_points(map, th).all_empty());
  // delta == 1 exactly everywhere, so even delta_min = 1 qualifies all cells.
  th.delta_min = {1, 1, 1, 1};
  const auto res = find_attack_points(map, th);
  EXPECT_EQ(res.qualifying[0].size(), map.grid.n_cells());
}

TEST(FindAttackPoints, BestPointMaximizesEtaThenDelta) {
  EfficiencyMap map = uniform_map(3, ChannelVector{0, 0, 0, 0});
  auto set_cell = [&](std::size_t c, double h, double v, double d, double a) {
    map.eta[0][c] = h;
    map.eta[1][c] = v;
    map.eta[2][c] = d;
    map.eta[3][c] = a;
  };
  set_cell(0, 0.5, 0.1, 0.01, 0.01);   // eta 0.5, delta 50
  set_cell(4, 0.6, 0.1, 0.02, 0.02);   // eta 0.6, delta 30  <- larger eta
  set_cell(8, 0.6, 0.1, 0.01, 0.01);   // eta 0.6, delta 60  <- tie, more delta
  SearchThresholds th;
  th.eta_min = {0.1, 0.1, 0.1, 0.1};
  th.delta_min = {10, 10, 10, 10};
  const auto res = find_attack_points(map, th);
  ASSERT_TRUE(res.best[0].has_value());
  EXPECT_DOUBLE_EQ(res.best[0]->delta, 60.0);
  EXPECT_DOUBLE_EQ(res.best[0]->phi_mrad, map.grid.phi_at(2));
}

// Rescaling every channel's raw counts by one positive constant leaves the
// search result unchanged: normalization divides it back out and delta is a
// ratio.
TEST(FindAttackPoints, InvariantUnderUniformRescaling) {
  CounterRng rng(123);
  SearchThresholds th;
  th.eta_min = {0.05, 0.05, 0.05, 0.05};
  th.delta_min = {2, 2, 2, 2};
  for (int trial = 0; trial < 200; ++trial) {
    RawScan raw;
    raw.grid = GridSpec{-1, 1, -1, 1, 5, 5};
    raw.background_rate = ChannelVector{0, 0, 0, 0};
    for (auto& ch : raw.counts) {
      ch.resize(raw.grid.n_cells());
      for (auto& x : ch) x = 1000.0 * rng.next_double();
    }
    const double gamma = std::exp(6.0 * rng.next_double() - 3.0);
    RawScan scaled = raw;
    for (auto& ch : scaled.counts)
      for (auto& x : ch) x *= gamma;

    const auto a = find_attack_points(normalize_scan(raw), th);
    const auto b = find_attack_points(normalize_scan(scaled), th);
    EXPECT_EQ(point_set(a), point_set(b));
  }
}

TEST(FindAttackPoints, AllZeroChannelNeverQualifies) {
  auto map = uniform_map(4, ChannelVector{0.9, 0.8, 0.7, 0.6});
  for (auto& x : map.eta[index_of(Pol::V)]) x = 0.0;
  SearchThresholds th = SearchThresholds::tight();
  const auto res = find_attack_points(map, th);
  EXPECT_TRUE(res.qualifying[index_of(Pol::V)].empty());
  EXPECT_FALSE(res.best[index_of(Pol::V)].has_value());
}

TEST(PinholeFilter, CenterUnchangedFarAnglesErased) {
  const auto map = synthesize_scan(paper_like_preset(), 1);
  const auto filtered = pinhole_filter(map, 100.0, 10.0);

  // Center cell of the 97x97 grid sits at (0,0) where the window is 1.
  const std::size_t center = map.grid.cell(48, 48);
  for (int ch = 0; ch < 4; ++ch)
    EXPECT_NEAR(filtered.eta[ch][center] /
                    (map.eta[ch][center] / map.channel_max(kAllPols[ch])),
                1.0, 1e-12);

  // A cell 0.5 mrad off axis is ~45 falloff widths outside the window; the
  // attenuation exceeds 1e9 and in fact underflows to zero.
  const std::size_t off = map.grid.cell(61, 48);  // phi ~ +0.498 mrad
  ASSERT_GT(map.eta[0][off], 0.0);
  for (int ch = 0; ch < 4; ++ch) EXPECT_EQ(filtered.eta[ch][off], 0.0);
}

TEST(PinholeFilter, ClosesTheSideChannel) {
  const auto map = synthesize_scan(paper_like_preset(), 1);
  // Unfiltered map is attackable under the standard thresholds.
  EXPECT_TRUE(
      find_attack_points(map, SearchThresholds::standard()).all_nonempty());
  // After a 100 urad field-of-view pinhole even the tight search is empty.
  const auto filtered = pinhole_filter(map, 100.0, 10.0);
  EXPECT_TRUE(
      find_attack_points(filtered, SearchThresholds::tight()).all_empty());
}

TEST(PinholeFilter, NeverAddsQualifyingCells) {
  const auto map = synthesize_scan(paper_like_preset(), 2);
  for (double fov : {60.0, 100.0, 400.0}) {
    const auto filtered = pinhole_filter(map, fov, 10.0);
    for (const SearchThresholds& th :
         {SearchThresholds::standard(), SearchThresholds::tight()}) {
      const auto before = find_attack_points(map, th);
      const auto after = find_attack_points(filtered, th);
      for (int j = 0; j < 4; ++j)
        EXPECT_LE(after.qualifying[j].size(), before.qualifying[j].size());
    }
  }
}

TEST(PinholeFilter, WindowCoveringAllFeaturesIsIdentity) {
  const auto map = synthesize_scan(paper_like_preset(), 1);
  // 3.68 mrad field of view spans the scanned range; everything beyond the
  // window radius was already dark (the beam misses the aperture), so the
  // filtered map is bit-identical.
  const auto filtered = pinhole_filter(map, 3680.0, 10.0);
  for (int ch = 0; ch < 4; ++ch) EXPECT_EQ(filtered.eta[ch], map.eta[ch]);
}

TEST(PinholeFilter, RejectsBadParameters) {
  const auto map = uniform_map(3, ChannelVector{1, 1, 1, 1});
  EXPECT_THROW(pinhole_filter(map, 0.0), std::domain_error);
  EXPECT_THROW(pinhole_filter(map, 100.0, 0.0), std::domain_error);
}
