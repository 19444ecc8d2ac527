#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "demlab/rates.hpp"
#include "demlab/rng.hpp"

namespace demlab {

// Eve's free parameters are the four mean photon numbers. Mode TotalRate
// matches Bob's total sifted rate while minimizing the QBER he observes;
// Mode PerPolarizationRates pins all four conditional rates, which fixes the
// photon numbers completely.
enum class OptimizerMode { TotalRate, PerPolarizationRates };

struct OptimizerConfig {
  OptimizerMode mode = OptimizerMode::TotalRate;
  double mu_max = 1e6;
  double constraint_tol = 1e-4;  // relative rate residual
  double objective_tol = 1e-6;   // simplex spread stop
  int max_iters = 10000;
  int restarts = 8;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(mu_max > 0.0)) throw std::domain_error("OptimizerConfig: mu_max");
    if (!(constraint_tol > 0.0) || !(objective_tol > 0.0))
      throw std::domain_error("OptimizerConfig: tolerances must be > 0");
    if (max_iters < 1 || restarts < 1)
      throw std::domain_error("OptimizerConfig: iteration counts");
  }
};

// The photon numbers span orders of magnitude (a dim channel needs a very
// bright resend), so all searches run in log space above this floor.
inline constexpr double kMuFloor = 1e-6;

struct OptimizationResult {
  std::array<double, 4> mu{0.0, 0.0, 0.0, 0.0};
  double qber_e = 0.0;
  double total_rate = 0.0;
  std::array<double, 4> rate{0.0, 0.0, 0.0, 0.0};
  // TotalRate mode: residual = |R_e/R_ab - 1| and the per-pol entries are
  // informational. PerPolarizationRates: per-pol relative residuals and
  // residual = max over them.
  std::array<double, 4> residual_per_pol{0.0, 0.0, 0.0, 0.0};
  double residual = 0.0;
  bool feasible = false;
  bool converged = false;
  int iterations = 0;
  std::string note;
};

namespace detail {

// First crossing of a monotone-then-saturating curve: scan a log grid for
// the smallest mu with f(mu) >= target, then bisect the bracketing interval.
// The rate is not monotone over the whole range (a very bright resend floods
// the other basis and squashing discards the event), so the scan must pick
// the rising branch rather than trust a global bracket.
inline std::optional<double> first_crossing(
    const std::function<double(double)>& f, double target, double lo,
    double hi) {
  if (f(lo) >= target) return lo;
  const int per_decade = 8;
  const double decades = std::log10(hi / lo);
  const int n = std::max(1, static_cast<int>(std::ceil(per_decade * decades)));
  double a = lo;
  double b = hi;
  bool found = false;
  for (int i = 1; i <= n; ++i) {
    const double x = i == n ? hi : lo * std::pow(10.0, decades * i / n);
    if (f(x) >= target) {
      b = x;
      found = true;
      break;
    }
    a = x;
  }
  if (!found) return std::nullopt;
  for (int it = 0; it < 200 && b / a - 1.0 > 1e-15; ++it) {
    const double m = std::sqrt(a * b);
    if (f(m) >= target)
      b = m;
    else
      a = m;
  }
  return std::sqrt(a * b);
}

}  // namespace detail

// Solve R_e(j)(mu_j) = target for one polarization, holding the other three
// photon numbers fixed at their values in `strategy`. Returns the smallest
// solution in [kMuFloor, mu_max], or nullopt when the rate cannot reach the
// target anywhere in range.
inline std::optional<double> solve_single_rate(Pol j, double target,
                                               EveStrategy strategy,
                                               const LinkModel& link,
                                               const ReceiverModel& receiver,
                                               double mu_max = 1e6) {
  const auto em = eve_probs_for_link(strategy, link);
  auto rate_at = [&](double m) {
    strategy.mu[index_of(j)] = m;
    const auto table = detail::resend_table(strategy, receiver);
    return detail::rate_from_table(j, em, table, receiver);
  };
  return detail::first_crossing(rate_at, target, kMuFloor, mu_max);
}

// Pin all four conditional rates to the no-Eve values: damped coordinate
// iteration where each pass re-solves the scalar equation per polarization.
// The cross coupling (one resend leaking into another basis's squash) is
// weak, so the sweep contracts quickly.
inline OptimizationResult optimize_mode_b(
    const std::array<AttackPoint, 4>& points, const LinkModel& link,
    const ReceiverModel& receiver, const EveDetectorModel& eve,
    const OptimizerConfig& config) {
  config.validate();
  const RateReport base = baseline_no_eve(link, receiver);
  OptimizationResult res;
  if (!(base.total_rate > 0.0)) {
    res.note = "baseline rate is zero; nothing to match";
    return res;
  }

  EveStrategy strat;
  strat.points = points;
  strat.eve = eve;
  strat.fidelity_eb = link.fidelity_eb;
  strat.mu = {1.0, 1.0, 1.0, 1.0};

  const int max_sweeps = std::max(4, config.max_iters / 100);
  bool all_bracketed = true;
  int sweeps = 0;
  for (; sweeps < max_sweeps; ++sweeps) {
    all_bracketed = true;
    for (Pol j : kAllPols) {
      const auto mu_j = solve_single_rate(j, base.rate_of(j), strat, link,
                                          receiver, config.mu_max);
      if (mu_j) {
        strat.mu[index_of(j)] = *mu_j;
      } else {
        strat.mu[index_of(j)] = config.mu_max;
        all_bracketed = false;
      }
    }
    const RateReport rep = totals_with_eve(strat, link, receiver);
    double worst = 0.0;
    for (Pol j : kAllPols)
      worst = std::max(worst,
                       std::abs(rep.rate_of(j) / base.rate_of(j) - 1.0));
    if (all_bracketed && worst <= 0.1 * config.constraint_tol) break;
  }

  const RateReport rep = totals_with_eve(strat, link, receiver);
  res.mu = strat.mu;
  res.qber_e = rep.qber;
  res.total_rate = rep.total_rate;
  res.rate = rep.rate;
  double worst = 0.0;
  for (Pol j : kAllPols) {
    const double r = std::abs(rep.rate_of(j) / base.rate_of(j) - 1.0);
    res.residual_per_pol[index_of(j)] = r;
    worst = std::max(worst, r);
  }
  res.residual = worst;
  res.iterations = sweeps + 1;
  res.feasible = all_bracketed;
  res.converged = all_bracketed && worst <= config.constraint_tol;
  if (!all_bracketed)
    res.note = "per-polarization rate unreachable within mu bounds";
  return res;
}

namespace detail {

// Plain Nelder-Mead downhill simplex, minimizing f over R^dim with box
// clamping. Returns the best vertex; `evals` is a running budget.
template <int Dim>
inline std::array<double, Dim> nelder_mead(
    const std::function<double(const std::array<double, Dim>&)>& f,
    std::array<double, Dim> x0, double step, double lo, double hi,
    int max_evals, double ftol) {
  constexpr int N = Dim;
  auto clamp_pt = [&](std::array<double, N> p) {
    for (double& c : p) c = std::clamp(c, lo, hi);
    return p;
  };

  std::array<std::array<double, N>, N + 1> pts;
  std::array<double, N + 1> fv;
  int evals = 0;
  pts[0] = clamp_pt(x0);
  fv[0] = f(pts[0]);
  ++evals;
  for (int i = 0; i < N; ++i) {
    auto p = x0;
    p[i] += step;
    pts[i + 1] = clamp_pt(p);
    fv[i + 1] = f(pts[i + 1]);
    ++evals;
  }

  auto order = [&] {
    std::array<int, N + 1> idx;
    for (int i = 0; i <= N; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return fv[a] < fv[b]; });
    std::array<std::array<double, N>, N + 1> p2;
    std::array<double, N + 1> f2;
    for (int i = 0; i <= N; ++i) {
      p2[i] = pts[idx[i]];
      f2[i] = fv[idx[i]];
    }
    pts = p2;
    fv = f2;
  };

  while (evals < max_evals) {
    order();
    if (fv[N] - fv[0] < ftol) break;

    std::array<double, N> centroid{};
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) centroid[j] += pts[i][j] / N;

    auto lerp = [&](double t) {
      std::array<double, N> p;
      for (int j = 0; j < N; ++j)
        p[j] = centroid[j] + t * (pts[N][j] - centroid[j]);
      return clamp_pt(p);
    };

    const auto xr = lerp(-1.0);
    const double fr = f(xr);
    ++evals;
    if (fr < fv[0]) {
      const auto xe = lerp(-2.0);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        pts[N] = xe;
        fv[N] = fe;
      } else {
        pts[N] = xr;
        fv[N] = fr;
      }
    } else if (fr < fv[N - 1]) {
      pts[N] = xr;
      fv[N] = fr;
    } else {
      const auto xc = lerp(fr < fv[N] ? -0.5 : 0.5);
      const double fc = f(xc);
      ++evals;
      if (fc < std::min(fr, fv[N])) {
        pts[N] = xc;
        fv[N] = fc;
      } else {
        for (int i = 1; i <= N; ++i) {
          for (int j = 0; j < N; ++j)
            pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
          fv[i] = f(pts[i]);
          ++evals;
        }
      }
    }
  }
  order();
  return pts[0];
}

}  // namespace detail

// Match only the total sifted rate and minimize QBER: exterior quadratic
// penalty on the rate constraint, downhill simplex in log-mu, deterministic
// multi-start. Every candidate is finished by re-matching the rate exactly
// with a uniform scale factor before it competes on QBER.
inline OptimizationResult optimize_mode_a(
    const std::array<AttackPoint, 4>& points, const LinkModel& link,
    const ReceiverModel& receiver, const EveDetectorModel& eve,
    const OptimizerConfig& config) {
  config.validate();
  const RateReport base = baseline_no_eve(link, receiver);
  OptimizationResult out;
  if (!(base.total_rate > 0.0)) {
    out.note = "baseline rate is zero; nothing to match";
    return out;
  }
  const double r_ab = base.total_rate;

  EveStrategy strat;
  strat.points = points;
  strat.eve = eve;
  strat.fidelity_eb = link.fidelity_eb;

  int evals = 0;
  auto report_for = [&](const std::array<double, 4>& mu) {
    strat.mu = mu;
    ++evals;
    return totals_with_eve(strat, link, receiver);
  };

  const double xlo = std::log(kMuFloor);
  const double xhi = std::log(config.mu_max);
  auto mu_from_log = [&](const std::array<double, 4>& x) {
    std::array<double, 4> mu;
    for (int i = 0; i < 4; ++i)
      mu[i] = std::exp(std::clamp(x[i], xlo, xhi));
    return mu;
  };

  // Exact rate matching along the ray s*mu (first crossing in s).
  auto polish = [&](std::array<double, 4> mu)
      -> std::optional<std::array<double, 4>> {
    auto rate_of_scale = [&](double s) {
      std::array<double, 4> m = mu;
      for (double& v : m) v = std::clamp(v * s, 0.0, config.mu_max);
      return report_for(m).total_rate;
    };
    const auto s = detail::first_crossing(rate_of_scale, r_ab, 1e-9, 1e9);
    if (!s) return std::nullopt;
    for (double& v : mu) v = std::clamp(v * *s, 0.0, config.mu_max);
    return mu;
  };

  // Start points: the fully pinned solution, a decoupled per-channel match,
  // and seeded log-space perturbations of the latter.
  std::vector<std::array<double, 4>> starts;
  {
    const auto pinned = optimize_mode_b(points, link, receiver, eve, config);
    if (pinned.feasible) starts.push_back(pinned.mu);

    EveStrategy probe = strat;
    probe.mu = {kMuFloor, kMuFloor, kMuFloor, kMuFloor};
    std::array<double, 4> decoupled;
    bool ok = true;
    for (Pol j : kAllPols) {
      const auto m = solve_single_rate(j, base.rate_of(j), probe, link,
                                       receiver, config.mu_max);
      if (!m) ok = false;
      decoupled[index_of(j)] = m.value_or(1.0);
    }
    if (ok) starts.push_back(decoupled);
    CounterRng rng = CounterRng::for_stream(config.seed, 0xA77Au);
    const std::array<double, 4> anchor = ok ? decoupled
                                            : std::array<double, 4>{1, 1, 1, 1};
    while (static_cast<int>(starts.size()) < config.restarts) {
      std::array<double, 4> s;
      for (int i = 0; i < 4; ++i) {
        const double u = rng.next_double() * 2.0 - 1.0;
        s[i] = std::clamp(anchor[i] * std::exp(3.4 * u), kMuFloor,
                          config.mu_max);
      }
      starts.push_back(s);
    }
  }

  struct Candidate {
    std::array<double, 4> mu;
    double qber;
    double residual;
  };
  std::optional<Candidate> best_feasible;
  std::optional<Candidate> best_any;

  auto consider = [&](const std::array<double, 4>& mu) {
    const RateReport rep = report_for(mu);
    const double resid = std::abs(rep.total_rate / r_ab - 1.0);
    Candidate c{mu, rep.qber, resid};
    if (!best_any || c.residual < best_any->residual) best_any = c;
    if (resid <= config.constraint_tol &&
        (!best_feasible || c.qber < best_feasible->qber))
      best_feasible = c;
  };

  const int evals_per_stage = std::max(200, config.max_iters / 3);
  for (const auto& start : starts) {
    std::array<double, 4> x;
    for (int i = 0; i < 4; ++i)
      x[i] = std::log(std::clamp(start[i], kMuFloor, config.mu_max));

    for (const double weight : {1e2, 1e4, 1e6}) {
      auto objective = [&](const std::array<double, 4>& xx) {
        const RateReport rep = report_for(mu_from_log(xx));
        const double r = rep.total_rate / r_ab - 1.0;
        return rep.qber + weight * r * r;
      };
      x = detail::nelder_mead<4>(objective, x, 0.35, xlo, xhi,
                                 evals_per_stage, config.objective_tol);
    }
    if (const auto polished = polish(mu_from_log(x))) consider(*polished);
    consider(mu_from_log(x));
  }

  const Candidate chosen =
      best_feasible ? *best_feasible
                    : best_any.value_or(Candidate{{0, 0, 0, 0}, 0.0, 1.0});
  const RateReport rep = report_for(chosen.mu);
  out.mu = chosen.mu;
  out.qber_e = rep.qber;
  out.total_rate = rep.total_rate;
  out.rate = rep.rate;
  for (Pol j : kAllPols)
    out.residual_per_pol[index_of(j)] =
        std::abs(rep.rate_of(j) / base.rate_of(j) - 1.0);
  out.residual = std::abs(rep.total_rate / r_ab - 1.0);
  out.feasible = best_feasible.has_value();
  out.converged = out.feasible && out.residual <= config.constraint_tol;
  out.iterations = evals;
  if (!out.feasible)
    out.note = "total rate could not be matched within tolerance";
  return out;
}

inline OptimizationResult optimize_attack(
    const std::array<AttackPoint, 4>& points, const LinkModel& link,
    const ReceiverModel& receiver, const EveDetectorModel& eve,
    const OptimizerConfig& config) {
  return config.mode == OptimizerMode::TotalRate
             ? optimize_mode_a(points, link, receiver, eve, config)
             : optimize_mode_b(points, link, receiver, eve, config);
}

// One record per channel-loss point of a sweep.
struct SweepResult {
  double loss_db = 0.0;
  RateReport baseline;
  bool attack_available = false;
  OptimizationResult attack;
  std::string note;
};

// Evaluate baseline and optimized attack across a loss grid. Points are
// independent; each gets a seed derived from (config.seed, index) so the
// sweep is reproducible regardless of evaluation order.
inline std::vector<SweepResult> sweep_loss(
    const std::vector<double>& losses_db, OptimizerMode mode,
    const std::array<std::optional<AttackPoint>, 4>& best_points,
    const LinkModel& link_template, const ReceiverModel& receiver,
    const EveDetectorModel& eve, const OptimizerConfig& config) {
  if (losses_db.empty())
    throw std::invalid_argument("sweep_loss: empty loss grid");

  bool have_points = true;
  std::array<AttackPoint, 4> points;
  for (Pol j : kAllPols) {
    if (best_points[index_of(j)])
      points[index_of(j)] = *best_points[index_of(j)];
    else
      have_points = false;
  }

  std::vector<SweepResult> out;
  out.reserve(losses_db.size());
  for (std::size_t i = 0; i < losses_db.size(); ++i) {
    SweepResult row;
    row.loss_db = losses_db[i];
    LinkModel link = link_template;
    link.loss_db = losses_db[i];
    row.baseline = baseline_no_eve(link, receiver);
    if (!have_points) {
      row.note = "no attack available";
      out.push_back(std::move(row));
      continue;
    }
    OptimizerConfig cfg = config;
    cfg.mode = mode;
    cfg.seed = derive_stream(config.seed, i);
    row.attack = optimize_attack(points, link, receiver, eve, cfg);
    row.attack_available = true;
    if (!row.attack.converged) row.note = "optimizer did not converge";
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace demlab
