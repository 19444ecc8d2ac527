// demlab -- desk-scale laboratory for the spatial-mode efficiency-mismatch
// attack on a four-channel polarization QKD receiver.
//
// Subcommands:
//   generate-scan   synthesize an angular efficiency map (or raw scan) CSV
//   analyze-scan    search a map for usable attack angles
//   sweep           baseline + optimized attack across a channel-loss grid
//   countermeasure  apply the pinhole filter and re-run the angle search
//   montecarlo      pulse-level simulation vs the closed-form rates
//
// Exit codes: 0 success, 1 validation failure (e.g. oracle mismatch),
// 2 usage or input error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "demlab/config.hpp"
#include "demlab/csv_io.hpp"
#include "demlab/montecarlo.hpp"
#include "demlab/optimize.hpp"
#include "demlab/scan_synth.hpp"

namespace {

using namespace demlab;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;

struct CliError : std::runtime_error {
  int code;
  CliError(int code, const std::string& what)
      : std::runtime_error(what), code(code) {}
};

RunConfig load_config(const std::string& path,
                      const std::optional<std::uint64_t>& seed_override) {
  RunConfig cfg;
  if (!path.empty()) {
    try {
      cfg = load_config_file(path);
    } catch (const ConfigError& e) {
      throw CliError(kExitUsage, std::string("config error: ") + e.what());
    }
  }
  if (seed_override) {
    cfg.seed = *seed_override;
    cfg.optimizer.seed = *seed_override;
  }
  return cfg;
}

EfficiencyMap load_map_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CliError(kExitUsage, "cannot open map file: " + path);
  try {
    return csv::read_map_auto(is);
  } catch (const csv::ParseError& e) {
    throw CliError(kExitUsage, path + ": " + e.what());
  }
}

EfficiencyMap map_from_config(const RunConfig& cfg) {
  if (!cfg.scan_path.empty()) return load_map_file(cfg.scan_path);
  const auto preset = find_preset(cfg.scan_preset);
  if (!preset)
    throw CliError(kExitUsage, "unknown scan preset: " + cfg.scan_preset);
  return synthesize_scan(*preset, cfg.seed);
}

void apply_threshold_choice(RunConfig& cfg, const std::string& choice) {
  if (choice.empty()) return;
  if (choice == "standard")
    cfg.thresholds = SearchThresholds::standard();
  else if (choice == "tight")
    cfg.thresholds = SearchThresholds::tight();
  else
    throw CliError(kExitUsage, "unknown threshold preset: " + choice);
}

void print_search_summary(const AttackSearchResult& res) {
  for (Pol j : kAllPols) {
    const auto& q = res.qualifying[index_of(j)];
    std::cout << name_of(j) << ": ";
    if (q.empty()) {
      std::cout << "no qualifying points\n";
      continue;
    }
    const AttackPoint& b = *res.best[index_of(j)];
    std::cout << q.size() << " qualifying point(s); best at ("
              << csv::fmt(b.phi_mrad) << ", " << csv::fmt(b.theta_mrad)
              << ") mrad, eta=" << csv::fmt(b.eta_hat[j])
              << ", delta=" << csv::fmt(b.delta) << "\n";
  }
}

int cmd_generate_scan(const RunConfig& cfg, const std::string& preset_name,
                      const std::string& out_path, bool raw) {
  const auto preset = find_preset(preset_name);
  if (!preset)
    throw CliError(kExitUsage, "unknown preset: " + preset_name +
                                   " (expected paper-like or featureless)");

  RunConfig resolved = cfg;
  resolved.scan_preset = preset_name;
  const auto header = provenance_header(resolved, "generate-scan");

  const EfficiencyMap map = synthesize_scan(*preset, cfg.seed);
  csv::write_file(out_path, [&](std::ostream& os) {
    if (raw) {
      // Invert normalization into plausible count rates so the background
      // subtraction path can be exercised on synthetic data.
      RawScan scan;
      scan.grid = map.grid;
      scan.background_rate = ChannelVector{210.0, 180.0, 240.0, 195.0};
      scan.integration_s = 1.0;
      constexpr double kPeakRate = 1e5;  // counts/s at the best coupling
      for (Pol ch : kAllPols) {
        auto& cnt = scan.counts[index_of(ch)];
        cnt.resize(map.grid.n_cells());
        for (std::size_t i = 0; i < cnt.size(); ++i)
          cnt[i] = map.eta[index_of(ch)][i] * kPeakRate +
                   scan.background_rate[ch];
      }
      csv::write_raw_scan(os, scan, header);
    } else {
      csv::write_map(os, map, header);
    }
  });
  std::cout << "wrote " << out_path << " (" << map.grid.n_phi << "x"
            << map.grid.n_theta << " grid)\n";
  return kExitOk;
}

int cmd_analyze_scan(const RunConfig& cfg, const std::string& map_path,
                     const std::string& out_path) {
  const EfficiencyMap map =
      map_path.empty() ? map_from_config(cfg) : load_map_file(map_path);
  const AttackSearchResult res = find_attack_points(map, cfg.thresholds);

  if (!out_path.empty()) {
    const auto header = provenance_header(cfg, "analyze-scan");
    csv::write_file(out_path, [&](std::ostream& os) {
      csv::write_attack_report(os, res, header);
    });
  }
  print_search_summary(res);
  if (res.all_empty()) std::cout << "no attack points\n";
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, const std::string& mode_flag,
              const std::string& out_path) {
  RunConfig run = cfg;
  if (!mode_flag.empty()) {
    if (mode_flag == "total")
      run.optimizer.mode = OptimizerMode::TotalRate;
    else if (mode_flag == "perpol")
      run.optimizer.mode = OptimizerMode::PerPolarizationRates;
    else
      throw CliError(kExitUsage, "unknown mode: " + mode_flag);
  }

  const EfficiencyMap map = map_from_config(run);
  const AttackSearchResult search = find_attack_points(map, run.thresholds);
  const auto rows =
      sweep_loss(run.loss_grid_db, run.optimizer.mode, search.best, run.link,
                 run.receiver, run.eve, run.optimizer);

  const auto header = provenance_header(run, "sweep");
  csv::write_file(out_path, [&](std::ostream& os) {
    csv::write_sweep(os, rows, header);
  });

  int converged = 0, unavailable = 0;
  for (const auto& r : rows) {
    if (!r.attack_available)
      ++unavailable;
    else if (r.attack.converged)
      ++converged;
  }
  std::cout << "wrote " << out_path << ": " << rows.size() << " loss points, "
            << converged << " converged";
  if (unavailable == static_cast<int>(rows.size()))
    std::cout << "; no attack available";
  std::cout << "\n";
  return kExitOk;
}

int cmd_countermeasure(const RunConfig& cfg, const std::string& map_path,
                       double fov_urad, double edge_urad,
                       const std::string& out_path) {
  const EfficiencyMap map =
      map_path.empty() ? map_from_config(cfg) : load_map_file(map_path);

  EfficiencyMap filtered = map;
  const bool filter_applied = std::isfinite(fov_urad);
  if (filter_applied) filtered = pinhole_filter(map, fov_urad, edge_urad);

  const AttackSearchResult res = find_attack_points(filtered, cfg.thresholds);
  if (!out_path.empty()) {
    auto header = provenance_header(cfg, "countermeasure");
    header.push_back("fov_urad: " + csv::fmt(fov_urad));
    csv::write_file(out_path, [&](std::ostream& os) {
      csv::write_map(os, filtered, header);
    });
  }
  print_search_summary(res);
  std::cout << "verdict: " << (res.all_empty() ? "SECURE" : "VULNERABLE")
            << "\n";
  return kExitOk;
}

int cmd_montecarlo(const RunConfig& cfg, std::uint64_t n_pulses,
                   const std::string& scenario_flag,
                   const std::string& out_path) {
  TrialConfig trial;
  trial.n_pulses = n_pulses;
  trial.seed = cfg.seed;
  trial.link = cfg.link;
  trial.receiver = cfg.receiver;

  std::vector<std::pair<std::string, ComparisonReport>> reports;

  const bool run_baseline =
      scenario_flag == "baseline" || scenario_flag == "both";
  const bool run_attack = scenario_flag == "attack" || scenario_flag == "both";
  if (!run_baseline && !run_attack)
    throw CliError(kExitUsage, "unknown scenario: " + scenario_flag);

  if (run_baseline) {
    trial.scenario = Scenario::BaselineNoEve;
    const TrialStats stats = run_trials(trial);
    reports.emplace_back(
        "baseline", compare_to_analytic(
                        stats, baseline_no_eve(cfg.link, cfg.receiver)));
  }

  if (run_attack) {
    const EfficiencyMap map = map_from_config(cfg);
    const AttackSearchResult search = find_attack_points(map, cfg.thresholds);
    if (!search.all_nonempty())
      throw CliError(kExitUsage,
                     "attack scenario needs attack points for all four "
                     "polarizations");
    std::array<AttackPoint, 4> points;
    for (Pol j : kAllPols) points[index_of(j)] = *search.best[index_of(j)];
    const OptimizationResult opt = optimize_attack(
        points, cfg.link, cfg.receiver, cfg.eve, cfg.optimizer);

    EveStrategy strat;
    strat.mu = opt.mu;
    strat.points = points;
    strat.eve = cfg.eve;
    strat.fidelity_eb = cfg.link.fidelity_eb;

    trial.scenario = Scenario::FakedStateAttack;
    trial.strategy = strat;
    const TrialStats stats = run_trials(trial);
    reports.emplace_back(
        "attack",
        compare_to_analytic(stats, totals_with_eve(strat, cfg.link,
                                                   cfg.receiver)));
  }

  auto header = provenance_header(cfg, "montecarlo");
  header.push_back("n_pulses: " + std::to_string(n_pulses));
  csv::write_file(out_path, [&](std::ostream& os) {
    for (const auto& h : header) os << "# " << h << "\n";
    os << "# columns: quantity,analytic,estimate,stderr,z\n";
    for (const auto& [tag, rep] : reports)
      for (const auto& r : rep.rows) {
        os << tag << '_' << r.quantity << ',' << csv::fmt(r.analytic) << ','
           << csv::fmt(r.estimate) << ',' << csv::fmt(r.stderr_est) << ',';
        if (r.sufficient)
          os << csv::fmt(r.z);
        else
          os << "nan";
        os << '\n';
      }
  });

  bool all_pass = true;
  for (const auto& [tag, rep] : reports) {
    for (const auto& r : rep.rows) {
      if (!r.sufficient) {
        std::cout << tag << '_' << r.quantity << ": insufficient data\n";
      } else if (!r.pass) {
        std::cout << tag << '_' << r.quantity << ": |z|=" << std::abs(r.z)
                  << " exceeds 3\n";
        all_pass = false;
      }
    }
  }
  std::cout << "wrote " << out_path << "; "
            << (all_pass ? "all quantities within 3 sigma"
                         : "oracle disagreement detected")
            << "\n";
  return all_pass ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Spatial-mode detector-efficiency-mismatch attack laboratory for a "
      "free-space BB84 polarization receiver"};
  app.require_subcommand(1);
  app.fallthrough();  // --config/--seed may follow the subcommand

  std::string config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "override the configured seed");

  // generate-scan
  auto* gen = app.add_subcommand("generate-scan",
                                 "synthesize an angular efficiency map");
  std::string gen_preset = "paper-like";
  std::string gen_out = "map.csv";
  bool gen_raw = false;
  gen->add_option("--preset", gen_preset, "map preset (paper-like|featureless)");
  gen->add_option("-o,--out", gen_out, "output CSV path");
  gen->add_flag("--raw", gen_raw, "emit raw count rates instead of a map");

  // analyze-scan
  auto* ana = app.add_subcommand("analyze-scan",
                                 "search a map for usable attack angles");
  std::string ana_map, ana_out, ana_thresholds;
  ana->add_option("map", ana_map, "map or raw-scan CSV (default: config scan)");
  ana->add_option("-o,--out", ana_out, "attack-point report CSV");
  ana->add_option("--thresholds", ana_thresholds,
                  "threshold preset (standard|tight)");

  // sweep
  auto* sw = app.add_subcommand("sweep",
                                "baseline and attack across the loss grid");
  std::string sw_mode, sw_out = "sweep.csv";
  sw->add_option("--mode", sw_mode, "constraint mode (total|perpol)");
  sw->add_option("-o,--out", sw_out, "output CSV path");

  // countermeasure
  auto* cm = app.add_subcommand("countermeasure",
                                "evaluate the pinhole spatial filter");
  std::string cm_map, cm_out, cm_thresholds = "tight";
  double cm_fov = 100.0, cm_edge = 10.0;
  cm->add_option("map", cm_map, "map CSV (default: config scan)");
  cm->add_option("--fov-urad", cm_fov,
                 "full field-of-view diameter in urad (inf = no filter)");
  cm->add_option("--edge-urad", cm_edge, "falloff scale outside the window");
  cm->add_option("-o,--out", cm_out, "filtered map CSV");
  cm->add_option("--thresholds", cm_thresholds,
                 "threshold preset (standard|tight)");

  // montecarlo
  auto* mc = app.add_subcommand("montecarlo",
                                "pulse-level oracle vs closed-form rates");
  std::uint64_t mc_n = 1000000;
  std::string mc_out = "comparison.csv", mc_scenario = "both";
  mc->add_option("--n-pulses", mc_n, "number of simulated pulses");
  mc->add_option("--scenario", mc_scenario, "baseline|attack|both");
  mc->add_option("-o,--out", mc_out, "comparison CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const RunConfig cfg = load_config(config_path, seed);
    if (gen->parsed()) return cmd_generate_scan(cfg, gen_preset, gen_out,
                                                gen_raw);
    if (ana->parsed()) {
      RunConfig c = cfg;
      apply_threshold_choice(c, ana_thresholds);
      return cmd_analyze_scan(c, ana_map, ana_out);
    }
    if (sw->parsed()) return cmd_sweep(cfg, sw_mode, sw_out);
    if (cm->parsed()) {
      RunConfig c = cfg;
      apply_threshold_choice(c, cm_thresholds);
      return cmd_countermeasure(c, cm_map, cm_fov, cm_edge, cm_out);
    }
    if (mc->parsed()) return cmd_montecarlo(cfg, mc_n, mc_scenario, mc_out);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
