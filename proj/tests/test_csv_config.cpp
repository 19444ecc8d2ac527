#include <gtest/gtest.h>

#include <limits>
#include <sstream>

#include "demlab/config.hpp"
#include "demlab/csv_io.hpp"
#include "demlab/scan_synth.hpp"

using namespace demlab;

TEST(MapCsv, RoundTripIsExact) {
  const auto map = synthesize_scan(paper_like_preset(), 4);
  std::stringstream ss;
  csv::write_map(ss, map, {"demlab test"});
  const auto back = csv::read_map(ss);
  EXPECT_EQ(back.grid, map.grid);
  for (int ch = 0; ch < 4; ++ch) EXPECT_EQ(back.eta[ch], map.eta[ch]);
}

TEST(MapCsv, WriteIsDeterministic) {
  const auto map = synthesize_scan(paper_like_preset(), 4);
  std::stringstream a, b;
  csv::write_map(a, map);
  csv::write_map(b, map);
  EXPECT_EQ(a.str(), b.str());
}

// The Gaussian window edge produces subnormal values; they must survive a
// write/read cycle rather than trip the number parser.
TEST(MapCsv, FilteredMapWithSubnormalsRoundTrips) {
  const auto filtered =
      pinhole_filter(synthesize_scan(paper_like_preset(), 1), 100.0, 10.0);
  bool has_subnormal = false;
  for (int ch = 0; ch < 4; ++ch)
    for (double x : filtered.eta[ch])
      if (x > 0.0 && x < std::numeric_limits<double>::min())
        has_subnormal = true;
  EXPECT_TRUE(has_subnormal);

  std::stringstream ss;
  csv::write_map(ss, filtered);
  const auto back = csv::read_map(ss);
  for (int ch = 0; ch < 4; ++ch) EXPECT_EQ(back.eta[ch], filtered.eta[ch]);
}

TEST(RawScanCsv, RoundTripAndAutoDetection) {
  RawScan scan;
  scan.grid = GridSpec{-0.5, 0.5, -0.5, 0.5, 3, 3};
  scan.background_rate = ChannelVector{210, 180, 240, 195};
  scan.integration_s = 1.0;
  for (int ch = 0; ch < 4; ++ch) {
    scan.counts[ch].resize(9);
    for (int i = 0; i < 9; ++i)
      scan.counts[ch][i] = 250.0 + 100.0 * ch + 13.0 * i;
  }
  std::stringstream ss;
  csv::write_raw_scan(ss, scan);
  const std::string text = ss.str();

  std::istringstream is1(text);
  const RawScan back = csv::read_raw_scan(is1);
  EXPECT_EQ(back.grid, scan.grid);
  EXPECT_EQ(back.background_rate, scan.background_rate);
  for (int ch = 0; ch < 4; ++ch) EXPECT_EQ(back.counts[ch], scan.counts[ch]);

  // The auto reader must spot the bg_* keys and normalize.
  std::istringstream is2(text);
  const EfficiencyMap map = csv::read_map_auto(is2);
  const EfficiencyMap expected = normalize_scan(scan);
  for (int ch = 0; ch < 4; ++ch) EXPECT_EQ(map.eta[ch], expected.eta[ch]);
}

TEST(MapCsv, MalformedInputReportsLineNumbers) {
  const std::string good_header =
      "# phi_min_mrad=0 phi_max_mrad=1 theta_min_mrad=0 theta_max_mrad=1 "
      "n_phi=2 n_theta=2\n";
  {
    std::istringstream is(good_header + "0,0,0.1,0.1,0.1\n");
    try {
      csv::read_map(is);
      FAIL() << "expected ParseError";
    } catch (const csv::ParseError& e) {
      EXPECT_EQ(e.line, 2);
    }
  }
  {
    std::istringstream is(good_header +
                          "0,0,0.1,0.1,0.1,0.1\n0,1,oops,0.1,0.1,0.1\n");
    try {
      csv::read_map(is);
      FAIL() << "expected ParseError";
    } catch (const csv::ParseError& e) {
      EXPECT_EQ(e.line, 3);
    }
  }
  {
    std::istringstream is("# n_phi=2 n_theta=2\n0,0,1,1,1,1\n");
    EXPECT_THROW(csv::read_map(is), csv::ParseError);  // missing grid keys
  }
  {
    // Right shape, wrong row count.
    std::istringstream is(good_header + "0,0,1,1,1,1\n");
    EXPECT_THROW(csv::read_map(is), csv::ParseError);
  }
  {
    // Efficiency outside [0,1].
    std::istringstream is(good_header +
                          "0,0,1,1,1,1\n0,1,2.5,1,1,1\n1,0,1,1,1,1\n"
                          "1,1,1,1,1,1\n");
    EXPECT_THROW(csv::read_map(is), csv::ParseError);
  }
}

TEST(AttackReportCsv, UnboundedDeltaPrintsInf) {
  AttackSearchResult res;
  AttackPoint pt;
  pt.pol = Pol::H;
  pt.phi_mrad = 0.5;
  pt.theta_mrad = -0.25;
  pt.eta_hat = ChannelVector{0.3, 0.1, 0.0, 0.0};
  pt.delta = mismatch_delta(pt.eta_hat, Pol::H);
  res.qualifying[0].push_back(pt);
  res.best[0] = pt;

  std::stringstream ss;
  csv::write_attack_report(ss, res);
  EXPECT_NE(ss.str().find("H,0.5,-0.25,"), std::string::npos);
  EXPECT_NE(ss.str().find(",inf"), std::string::npos);
}

TEST(SweepCsv, EmitsOneRowPerLossPoint) {
  std::vector<SweepResult> rows(2);
  rows[0].loss_db = 3.0;
  rows[0].baseline.total_rate = 0.0625;  // exactly representable
  rows[0].baseline.qber = 0.015625;
  rows[0].attack_available = true;
  rows[0].attack.total_rate = 0.0625;
  rows[0].attack.qber_e = 0.02;
  rows[0].attack.mu = {1, 2, 3, 4};
  rows[0].attack.residual = 1e-6;
  rows[0].attack.converged = true;
  rows[1].loss_db = 4.0;
  rows[1].baseline.total_rate = 0.04;
  rows[1].baseline.qber = 0.017;
  rows[1].attack_available = false;

  std::stringstream ss;
  csv::write_sweep(ss, rows, {"header line"});
  const std::string text = ss.str();
  int data_rows = 0;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty() && line[0] != '#') ++data_rows;
  EXPECT_EQ(data_rows, 2);
  EXPECT_NE(text.find("3,0.0625,0.015625,"), std::string::npos);
  EXPECT_NE(text.find(",true"), std::string::npos);
  EXPECT_NE(text.find(",false"), std::string::npos);
  EXPECT_NE(text.find("# header line"), std::string::npos);
}

TEST(Config, DefaultsMatchTheReferenceReceiver) {
  const RunConfig cfg = config_from_json(nlohmann::json::object());
  EXPECT_DOUBLE_EQ(cfg.receiver.eta_det, 0.4);
  EXPECT_DOUBLE_EQ(cfg.link.fidelity_ab, 0.9831);
  EXPECT_DOUBLE_EQ(cfg.link.fidelity_eb, 0.9904);
  EXPECT_DOUBLE_EQ(cfg.eve.eta_e, 0.85);
  EXPECT_EQ(cfg.loss_grid_db.size(), 13u);
  EXPECT_EQ(cfg.loss_grid_db.front(), 3.0);
  EXPECT_EQ(cfg.loss_grid_db.back(), 15.0);
  for (double c : cfg.receiver.background.v) {
    EXPECT_GE(c, 430e-9);
    EXPECT_LE(c, 1560e-9);
  }
  EXPECT_DOUBLE_EQ(cfg.thresholds.eta_min[index_of(Pol::V)], 0.002);
  EXPECT_DOUBLE_EQ(cfg.thresholds.delta_min[index_of(Pol::D)], 80.0);
  EXPECT_EQ(cfg.scan_preset, "paper-like");
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW(config_from_json({{"receiver", {{"eta", 0.4}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"recevier", {{"eta_det", 0.4}}}}),
               ConfigError);
  EXPECT_THROW(config_from_json({{"optimizer", {{"mode", "fastest"}}}}),
               ConfigError);
  EXPECT_THROW(
      config_from_json({{"thresholds", {{"eta_min", {{"X", 0.5}}}}}}),
      ConfigError);
}

TEST(Config, ParsesAndValidates) {
  nlohmann::json j = {
      {"receiver", {{"eta_det", 0.5}, {"c", {1e-7, 2e-7, 3e-7, 4e-7}}}},
      {"link",
       {{"fidelity_ab", 0.99}, {"loss_db", 7.5}, {"loss_grid_db", {3, 6}}}},
      {"eve", {{"eta_e", 0.9}}},
      {"optimizer", {{"mode", "perpol"}, {"restarts", 4}}},
      {"scan", {{"preset", "featureless"}}},
      {"seed", 42},
  };
  const RunConfig cfg = config_from_json(j);
  EXPECT_DOUBLE_EQ(cfg.receiver.eta_det, 0.5);
  EXPECT_DOUBLE_EQ(cfg.link.loss_db, 7.5);
  EXPECT_EQ(cfg.loss_grid_db, (std::vector<double>{3, 6}));
  EXPECT_EQ(cfg.optimizer.mode, OptimizerMode::PerPolarizationRates);
  EXPECT_EQ(cfg.optimizer.restarts, 4);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.optimizer.seed, 42u);

  EXPECT_THROW(config_from_json({{"link", {{"loss_db", -1.0}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"seed", -3}}), ConfigError);
  EXPECT_THROW(config_from_json({{"link", {{"loss_grid_db", nlohmann::json::array()}}}}),
               ConfigError);
}

TEST(Config, ResolvedJsonRoundTripsAndIsStable) {
  RunConfig cfg;
  cfg.seed = 9;
  cfg.optimizer.seed = 9;
  cfg.optimizer.mode = OptimizerMode::PerPolarizationRates;
  const auto j = config_to_json(cfg);
  const RunConfig back = config_from_json(j);
  EXPECT_EQ(config_to_json(back).dump(), j.dump());

  const auto h1 = provenance_header(cfg, "sweep");
  const auto h2 = provenance_header(cfg, "sweep");
  EXPECT_EQ(h1, h2);
}
