#pragma once
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "demlab/rates.hpp"
#include "demlab/rng.hpp"

namespace demlab {

// Pulse-level stochastic oracle. Where the closed-form rates use the
// additive background approximation (p = c + 1 - exp(-m)), the simulation
// uses the exact model: a detector clicks if the signal fires OR the
// background fires, p = 1 - exp(-m) * (1 - c). Eve's dark counts, neglected
// analytically, are also kept. Comparing the two therefore bounds the
// approximation error of the formulas instead of inheriting it.
//
// Per pulse:
//   1. Alice draws a uniform polarization.
//   2. Without Eve the pulse crosses the line (mean mu_alice * T) into a
//      receiver with uniform peak efficiency.
//   3. With Eve she measures in a uniform random basis (her detectors click
//      independently with coherent-state probabilities); exactly one click
//      makes her resend that polarization at its attack angle with its own
//      mean photon number, anything else sends vacuum.
//   4. Bob's four detectors click independently; squashing keeps same-basis
//      events (double click -> random bit) and discards cross-basis ones.
//   5. The event is sifted when Bob's squashed basis matches Alice's.
//
// Every pulse draws from its own counter-derived stream, so tallies are
// independent of traversal order and can be sharded without changing results.

enum class Scenario { BaselineNoEve, FakedStateAttack };

struct TrialConfig {
  std::uint64_t n_pulses = 1000000;
  std::uint64_t seed = 1;
  Scenario scenario = Scenario::BaselineNoEve;
  LinkModel link;
  ReceiverModel receiver;
  EveStrategy strategy;  // used by FakedStateAttack only

  void validate() const {
    if (n_pulses < 1) throw std::domain_error("TrialConfig: n_pulses < 1");
    link.validate();
    receiver.validate();
    if (scenario == Scenario::FakedStateAttack) strategy.eve.validate();
  }
};

struct TrialStats {
  std::uint64_t n = 0;
  std::array<std::uint64_t, 4> sent{};     // pulses per Alice polarization
  std::array<std::uint64_t, 4> sifted{};   // sifted events per sent pol
  std::array<std::uint64_t, 4> errors{};   // sifted errors per sent pol
  std::array<std::uint64_t, 4> det_clicks{};  // raw clicks per Bob detector
  std::uint64_t discarded_cross_basis = 0;
  std::uint64_t double_clicks = 0;

  std::uint64_t sifted_total() const {
    std::uint64_t s = 0;
    for (auto x : sifted) s += x;
    return s;
  }
  std::uint64_t error_total() const {
    std::uint64_t s = 0;
    for (auto x : errors) s += x;
    return s;
  }

  static double binom_stderr(double p, double n) {
    return n > 0.0 ? std::sqrt(p * (1.0 - p) / n) : 0.0;
  }

  double rate_estimate() const { return double(sifted_total()) / double(n); }
  double rate_stderr() const {
    return binom_stderr(rate_estimate(), double(n));
  }
  double qber_estimate() const {
    const auto s = sifted_total();
    return s > 0 ? double(error_total()) / double(s) : 0.0;
  }
  double qber_stderr() const {
    return binom_stderr(qber_estimate(), double(sifted_total()));
  }
  double rate_estimate(Pol j) const {
    const auto i = index_of(j);
    return sent[i] > 0 ? double(sifted[i]) / double(sent[i]) : 0.0;
  }
  double rate_stderr(Pol j) const {
    return binom_stderr(rate_estimate(j), double(sent[index_of(j)]));
  }
  double error_estimate(Pol j) const {
    const auto i = index_of(j);
    return sent[i] > 0 ? double(errors[i]) / double(sent[i]) : 0.0;
  }
  double error_stderr(Pol j) const {
    return binom_stderr(error_estimate(j), double(sent[index_of(j)]));
  }
};

namespace detail {

// Exact per-detector click probability: independent signal and background.
inline double click_prob_exact(double mean, double background) {
  return 1.0 - std::exp(-mean) * (1.0 - background);
}

// Bob's per-detector click probabilities for a pulse of mean photon number
// mu in polarization `sent` against absolute channel efficiencies eta.
inline ChannelVector bob_click_probs_exact(double mu, Pol sent,
                                           const ChannelVector& eta,
                                           const ReceiverModel& receiver,
                                           double fidelity) {
  ChannelVector q;
  for (Pol i : kAllPols) {
    double mean;
    if (i == sent)
      mean = 0.5 * mu * fidelity * eta[i];
    else if (i == conjugate_of(sent))
      mean = 0.5 * mu * (1.0 - fidelity) * eta[i];
    else
      mean = 0.25 * mu * eta[i];
    q[i] = click_prob_exact(mean, receiver.background[i]);
  }
  return q;
}

struct SquashOutcome {
  bool detected = false;
  bool discarded = false;
  bool double_click = false;
  Pol value = Pol::H;
};

// Squash a click pattern; a same-basis double click costs one random bit.
inline SquashOutcome squash(const std::array<bool, 4>& clicks,
                            CounterRng& rng) {
  const bool h = clicks[0], v = clicks[1], d = clicks[2], a = clicks[3];
  const bool hv = h || v;
  const bool da = d || a;
  SquashOutcome out;
  if (!hv && !da) return out;
  if (hv && da) {
    out.discarded = true;
    return out;
  }
  out.detected = true;
  if (hv) {
    if (h && v) {
      out.double_click = true;
      out.value = rng.bernoulli(0.5) ? Pol::H : Pol::V;
    } else {
      out.value = h ? Pol::H : Pol::V;
    }
  } else {
    if (d && a) {
      out.double_click = true;
      out.value = rng.bernoulli(0.5) ? Pol::D : Pol::A;
    } else {
      out.value = d ? Pol::D : Pol::A;
    }
  }
  return out;
}

}  // namespace detail

// Estimate per-detector raw click frequencies for a fixed resend; used to
// validate the click formulas channel by channel.
inline ChannelVector simulate_click_frequency(double mu, Pol sent,
                                              const ChannelVector& eta_abs,
                                              const ReceiverModel& receiver,
                                              double fidelity,
                                              std::uint64_t n_pulses,
                                              std::uint64_t seed) {
  const ChannelVector q = detail::bob_click_probs_exact(mu, sent, eta_abs,
                                                        receiver, fidelity);
  std::array<std::uint64_t, 4> hits{};
  for (std::uint64_t i = 0; i < n_pulses; ++i) {
    CounterRng rng = CounterRng::for_stream(seed, i);
    for (Pol ch : kAllPols)
      if (rng.bernoulli(q[ch])) ++hits[index_of(ch)];
  }
  ChannelVector freq;
  for (Pol ch : kAllPols)
    freq[ch] = double(hits[index_of(ch)]) / double(n_pulses);
  return freq;
}

inline TrialStats run_trials(const TrialConfig& config) {
  config.validate();
  TrialStats stats;
  stats.n = config.n_pulses;

  const double mu_alice = config.link.mu_alice();
  const double transmittance = config.link.transmittance();

  // Baseline: per sent polarization, Bob's exact click probabilities.
  std::array<ChannelVector, 4> baseline_q;
  {
    const double mu_arrived = mu_alice * transmittance;
    const ChannelVector eta{config.receiver.eta_det, config.receiver.eta_det,
                            config.receiver.eta_det, config.receiver.eta_det};
    for (Pol j : kAllPols)
      baseline_q[index_of(j)] = detail::bob_click_probs_exact(
          mu_arrived, j, eta, config.receiver, config.link.fidelity_ab);
  }

  // Attack: Eve's detector click probabilities and Bob's response to each
  // possible resend (plus vacuum).
  const double eta_e = config.strategy.eve.eta_e;
  const double dark = config.strategy.eve.dark;
  const double f_ae = config.link.fidelity_ab;
  const double p_eve_correct = detail::click_prob_exact(
      mu_alice * f_ae * eta_e, dark);
  const double p_eve_wrong = detail::click_prob_exact(
      mu_alice * (1.0 - f_ae) * eta_e, dark);
  const double p_eve_nc = detail::click_prob_exact(0.5 * mu_alice * eta_e,
                                                   dark);
  std::array<ChannelVector, 4> resend_q;
  ChannelVector vacuum_q;
  for (Pol k : kAllPols) {
    const AttackPoint& pt = config.strategy.point_of(k);
    resend_q[index_of(k)] = detail::bob_click_probs_exact(
        config.strategy.mu_of(k), k, pt.eta_hat.scaled(config.receiver.eta_det),
        config.receiver, config.strategy.fidelity_eb);
  }
  for (Pol i : kAllPols)
    vacuum_q[i] = detail::click_prob_exact(0.0, config.receiver.background[i]);

  for (std::uint64_t pulse = 0; pulse < config.n_pulses; ++pulse) {
    CounterRng rng = CounterRng::for_stream(config.seed, pulse);
    const Pol alice = kAllPols[rng.next_below(4)];
    ++stats.sent[index_of(alice)];

    const ChannelVector* q = nullptr;
    if (config.scenario == Scenario::BaselineNoEve) {
      q = &baseline_q[index_of(alice)];
    } else {
      const Basis eve_basis =
          rng.bernoulli(0.5) ? Basis::HV : Basis::DA;
      bool click_first, click_second;
      auto [p1, p2] = pols_in(eve_basis);
      if (eve_basis == basis_of(alice)) {
        const bool first_is_correct = (p1 == alice);
        const double pa = first_is_correct ? p_eve_correct : p_eve_wrong;
        const double pb = first_is_correct ? p_eve_wrong : p_eve_correct;
        click_first = rng.bernoulli(pa);
        click_second = rng.bernoulli(pb);
      } else {
        click_first = rng.bernoulli(p_eve_nc);
        click_second = rng.bernoulli(p_eve_nc);
      }
      if (click_first != click_second) {
        const Pol resend = click_first ? p1 : p2;
        q = &resend_q[index_of(resend)];
      } else {
        q = &vacuum_q;  // no click or double click: Eve stays silent
      }
    }

    std::array<bool, 4> clicks;
    for (Pol ch : kAllPols) {
      clicks[index_of(ch)] = rng.bernoulli((*q)[ch]);
      if (clicks[index_of(ch)]) ++stats.det_clicks[index_of(ch)];
    }

    const auto outcome = detail::squash(clicks, rng);
    if (outcome.discarded) {
      ++stats.discarded_cross_basis;
      continue;
    }
    if (!outcome.detected) continue;
    if (outcome.double_click) ++stats.double_clicks;
    if (basis_of(outcome.value) != basis_of(alice)) continue;  // sifted away
    ++stats.sifted[index_of(alice)];
    if (outcome.value != alice) ++stats.errors[index_of(alice)];
  }
  return stats;
}

// One analytic-vs-simulation check. Quantities whose binomial standard error
// vanishes carry no information at this sample size and are skipped.
struct ComparisonRow {
  std::string quantity;
  double analytic = 0.0;
  double estimate = 0.0;
  double stderr_est = 0.0;
  double z = 0.0;
  bool sufficient = false;
  bool pass = false;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  bool all_pass = true;

  std::vector<std::string> failing() const {
    std::vector<std::string> names;
    for (const auto& r : rows)
      if (r.sufficient && !r.pass) names.push_back(r.quantity);
    return names;
  }
};

inline ComparisonReport compare_to_analytic(const TrialStats& stats,
                                            const RateReport& analytic) {
  if (stats.n == 0)
    throw std::invalid_argument("compare_to_analytic: empty trial");
  std::uint64_t sent_sum = 0;
  for (auto s : stats.sent) sent_sum += s;
  if (sent_sum != stats.n)
    throw std::invalid_argument(
        "compare_to_analytic: tallies inconsistent with pulse count");

  ComparisonReport rep;
  // A quantity carries information once its observed stderr is nonzero. The
  // z denominator takes the larger of the observed and the null-hypothesis
  // binomial variance: for rare events (a handful of expected counts) the
  // observed variance alone understates the spread badly.
  auto add = [&](const std::string& name, double analytic_value,
                 double estimate, double n_samples) {
    ComparisonRow row;
    row.quantity = name;
    row.analytic = analytic_value;
    row.estimate = estimate;
    const double observed_se = TrialStats::binom_stderr(estimate, n_samples);
    const double null_se = TrialStats::binom_stderr(analytic_value, n_samples);
    row.stderr_est = std::max(observed_se, null_se);
    row.sufficient = observed_se > 0.0;
    if (row.sufficient) {
      row.z = (estimate - analytic_value) / row.stderr_est;
      row.pass = std::abs(row.z) <= 3.0;
      if (!row.pass) rep.all_pass = false;
    }
    rep.rows.push_back(row);
  };

  add("R", analytic.total_rate, stats.rate_estimate(), double(stats.n));
  add("QBER", analytic.qber, stats.qber_estimate(),
      double(stats.sifted_total()));
  for (Pol j : kAllPols) {
    const double sent_j = double(stats.sent[index_of(j)]);
    add(std::string("R_") + std::string(name_of(j)), analytic.rate_of(j),
        stats.rate_estimate(j), sent_j);
    add(std::string("E_") + std::string(name_of(j)), analytic.error_of(j),
        stats.error_estimate(j), sent_j);
  }
  return rep;
}

}  // namespace demlab
