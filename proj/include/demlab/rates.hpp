#pragma once
#include <array>
#include <stdexcept>

#include "demlab/attack_search.hpp"
#include "demlab/click_model.hpp"
#include "demlab/models.hpp"

namespace demlab {

// Eve's full intercept-resend configuration: one mean photon number and one
// resend angle per polarization, her detector model, and the fidelity of her
// resend path to Bob. Her station sits next to Bob, so resent pulses reach
// the receiver without line loss.
struct EveStrategy {
  std::array<double, 4> mu{0.0, 0.0, 0.0, 0.0};
  std::array<AttackPoint, 4> points;
  EveDetectorModel eve;
  double fidelity_eb = 0.9904;

  double mu_of(Pol p) const { return mu[index_of(p)]; }
  const AttackPoint& point_of(Pol p) const { return points[index_of(p)]; }
};

// Conditional sifted rates R(j) and error rates E(j) per sent polarization,
// plus the totals R = (1/4) sum_j R(j) and QBER = sum_j E(j) / (4R).
struct RateReport {
  std::array<double, 4> rate{0.0, 0.0, 0.0, 0.0};
  std::array<double, 4> error{0.0, 0.0, 0.0, 0.0};
  double total_rate = 0.0;
  double qber = 0.0;

  double rate_of(Pol p) const { return rate[index_of(p)]; }
  double error_of(Pol p) const { return error[index_of(p)]; }
};

namespace detail {

// Squashed outcome probabilities at Bob for each of Eve's four possible
// resends; computing them once makes a strategy evaluation cheap enough for
// tight optimizer loops.
struct ResendTable {
  // [resend pol][basis] and [resend pol][value]
  std::array<std::array<double, 2>, 4> basis_prob{};
  std::array<std::array<double, 4>, 4> value_prob{};
};

inline ResendTable resend_table(const EveStrategy& strategy,
                                const ReceiverModel& receiver) {
  ResendTable t;
  for (Pol k : kAllPols) {
    const AttackPoint& pt = strategy.point_of(k);
    const ChannelVector eta_abs = pt.eta_hat.scaled(receiver.eta_det);
    const ChannelVector p = raw_click_probs(strategy.mu_of(k), k, eta_abs,
                                            receiver, strategy.fidelity_eb);
    const int ki = index_of(k);
    t.basis_prob[ki][0] = squashed_basis_prob(p, Basis::HV);
    t.basis_prob[ki][1] = squashed_basis_prob(p, Basis::DA);
    for (Pol v : kAllPols)
      t.value_prob[ki][index_of(v)] = squashed_value_prob(p, v);
  }
  return t;
}

// R(j) from precomputed pieces. Bob's squash must land in Alice's basis; the
// no-resend branch leaves only background coincidences in that basis.
inline double rate_from_table(Pol j, const EveMeasurementProbs& em,
                              const ResendTable& t,
                              const ReceiverModel& receiver) {
  const Basis b = basis_of(j);
  const int bi = static_cast<int>(b);
  const Pol cj = conjugate_of(j);
  auto [o1, o2] = pols_in(other_basis(b));
  auto [b1, b2] = pols_in(b);
  const double c1 = receiver.background[b1];
  const double c2 = receiver.background[b2];

  return em.compatible_correct * t.basis_prob[index_of(j)][bi] +
         em.compatible_wrong * t.basis_prob[index_of(cj)][bi] +
         em.noncompatible_single * (t.basis_prob[index_of(o1)][bi] +
                                    t.basis_prob[index_of(o2)][bi]) +
         em.no_resend() * (c1 + c2 - c1 * c2);
}

// E(j): Bob reads the conjugate of what Alice sent.
inline double error_from_table(Pol j, const EveMeasurementProbs& em,
                               const ResendTable& t,
                               const ReceiverModel& receiver) {
  const Pol cj = conjugate_of(j);
  const int vi = index_of(cj);
  auto [o1, o2] = pols_in(other_basis(basis_of(j)));
  const double cv = receiver.background[cj];
  const double cs = receiver.background[j];

  return em.compatible_correct * t.value_prob[index_of(j)][vi] +
         em.compatible_wrong * t.value_prob[index_of(cj)][vi] +
         em.noncompatible_single *
             (t.value_prob[index_of(o1)][vi] + t.value_prob[index_of(o2)][vi]) +
         em.no_resend() * (cv - 0.5 * cv * cs);
}

}  // namespace detail

inline EveMeasurementProbs eve_probs_for_link(const EveStrategy& strategy,
                                              const LinkModel& link) {
  // Eve taps the line at Alice's output, so she sees the full source mean
  // photon number and the Alice-side fidelity.
  return eve_measurement_probs(link.mu_alice(), link.fidelity_ab,
                               strategy.eve);
}

inline double conditional_rate_with_eve(Pol alice_sent,
                                        const EveStrategy& strategy,
                                        const LinkModel& link,
                                        const ReceiverModel& receiver) {
  link.validate();
  receiver.validate();
  const auto em = eve_probs_for_link(strategy, link);
  const auto table = detail::resend_table(strategy, receiver);
  return detail::rate_from_table(alice_sent, em, table, receiver);
}

inline double conditional_error_with_eve(Pol alice_sent,
                                         const EveStrategy& strategy,
                                         const LinkModel& link,
                                         const ReceiverModel& receiver) {
  link.validate();
  receiver.validate();
  const auto em = eve_probs_for_link(strategy, link);
  const auto table = detail::resend_table(strategy, receiver);
  return detail::error_from_table(alice_sent, em, table, receiver);
}

inline RateReport totals_with_eve(const EveStrategy& strategy,
                                  const LinkModel& link,
                                  const ReceiverModel& receiver) {
  link.validate();
  receiver.validate();
  const auto em = eve_probs_for_link(strategy, link);
  const auto table = detail::resend_table(strategy, receiver);

  RateReport rep;
  double rate_sum = 0.0, err_sum = 0.0;
  for (Pol j : kAllPols) {
    const int ji = index_of(j);
    rep.rate[ji] = detail::rate_from_table(j, em, table, receiver);
    rep.error[ji] = detail::error_from_table(j, em, table, receiver);
    rate_sum += rep.rate[ji];
    err_sum += rep.error[ji];
  }
  rep.total_rate = 0.25 * rate_sum;
  rep.qber = rep.total_rate > 0.0 ? err_sum / (4.0 * rep.total_rate) : 0.0;
  return rep;
}

// Rates without Eve: Alice's pulse (mean photon number mu_alice) crosses the
// lossy line, arriving with mean mu_alice * T = T^2, and meets a receiver
// aligned at normal incidence where every channel has the peak absolute
// efficiency.
inline RateReport baseline_no_eve(const LinkModel& link,
                                  const ReceiverModel& receiver) {
  link.validate();
  receiver.validate();
  const double mu_arrived = link.mu_alice() * link.transmittance();
  const ChannelVector eta_uniform{receiver.eta_det, receiver.eta_det,
                                  receiver.eta_det, receiver.eta_det};

  RateReport rep;
  double rate_sum = 0.0, err_sum = 0.0;
  for (Pol j : kAllPols) {
    const ChannelVector p = raw_click_probs(mu_arrived, j, eta_uniform,
                                            receiver, link.fidelity_ab);
    const int ji = index_of(j);
    rep.rate[ji] = squashed_basis_prob(p, basis_of(j));
    rep.error[ji] = squashed_value_prob(p, conjugate_of(j));
    rate_sum += rep.rate[ji];
    err_sum += rep.error[ji];
  }
  rep.total_rate = 0.25 * rate_sum;
  rep.qber = rep.total_rate > 0.0 ? err_sum / (4.0 * rep.total_rate) : 0.0;
  return rep;
}

}  // namespace demlab
