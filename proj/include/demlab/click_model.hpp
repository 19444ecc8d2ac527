#pragma once
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "demlab/models.hpp"
#include "demlab/polarization.hpp"

namespace demlab {

// Elementary click statistics of a weak coherent pulse in a passive-basis
// four-channel polarization receiver, and of Eve's active-basis intercept
// receiver. All functions are pure.

// Raw per-detector click probabilities for a pulse of mean photon number mu
// in polarization `sent`, entering a receiver whose channel i has absolute
// efficiency eta_i. The 50:50 basis splitter sends half the light to each
// basis; the polarizing splitter routes it by fidelity F:
//   compatible, correct channel:  p = c + 1 - exp(-mu*F*eta/2)
//   compatible, wrong channel:    p = c + 1 - exp(-mu*(1-F)*eta/2)
//   each non-compatible channel:  p = c + 1 - exp(-mu*eta/4)
// The additive background c is a first-order approximation; results are
// clamped to [0,1].
inline ChannelVector raw_click_probs(double mu, Pol sent,
                                     const ChannelVector& eta,
                                     const ReceiverModel& receiver,
                                     double fidelity) {
  if (!(mu >= 0.0)) throw std::domain_error("raw_click_probs: mu < 0");
  if (!(fidelity >= 0.5 && fidelity <= 1.0))
    throw std::domain_error("raw_click_probs: fidelity outside [0.5,1]");
  if (!eta.all_in_unit_interval())
    throw std::domain_error("raw_click_probs: efficiency outside [0,1]");

  ChannelVector p;
  for (Pol i : kAllPols) {
    double exponent;
    if (i == sent) {
      exponent = 0.5 * mu * fidelity * eta[i];
    } else if (i == conjugate_of(sent)) {
      exponent = 0.5 * mu * (1.0 - fidelity) * eta[i];
    } else {
      exponent = 0.25 * mu * eta[i];
    }
    double val = receiver.background[i] - std::expm1(-exponent);
    p[i] = std::clamp(val, 0.0, 1.0);
  }
  return p;
}

// Probability that squashing yields an outcome in `basis`: no click in the
// other basis, at least one click in this basis. A double click within the
// basis is kept (it squashes to a random bit); cross-basis multi-clicks are
// discarded by the (1-p) factors.
inline double squashed_basis_prob(const ChannelVector& p, Basis basis) {
  if (!p.all_in_unit_interval())
    throw std::domain_error("squashed_basis_prob: probability outside [0,1]");
  auto [x, y] = pols_in(basis);
  auto [ox, oy] = pols_in(other_basis(basis));
  return (1.0 - p[ox]) * (1.0 - p[oy]) * (p[x] + p[y] - p[x] * p[y]);
}

// Probability that squashing yields the specific value `value`: its detector
// clicked, the conjugate double click contributes half (random bit), and the
// other basis stayed silent.
inline double squashed_value_prob(const ChannelVector& p, Pol value) {
  if (!p.all_in_unit_interval())
    throw std::domain_error("squashed_value_prob: probability outside [0,1]");
  Pol conj = conjugate_of(value);
  auto [ox, oy] = pols_in(other_basis(basis_of(value)));
  return (p[value] - 0.5 * p[conj] * p[value]) * (1.0 - p[ox]) *
         (1.0 - p[oy]);
}

// Eve's single-click outcome probabilities for an intercepted pulse of mean
// photon number mu and source fidelity F. With an active basis choice all
// light reaches the chosen analyzer:
//   compatible basis:  correct detector mean mu*F*eta_e, wrong mu*(1-F)*eta_e
//   other basis:       each detector mean mu*eta_e/2
// Dark counts (<1e-9) are neglected here; the pulse-level simulation keeps
// them.
inline EveMeasurementProbs eve_measurement_probs(double mu, double fidelity,
                                                 const EveDetectorModel& eve) {
  if (!(mu >= 0.0)) throw std::domain_error("eve_measurement_probs: mu < 0");
  if (!(fidelity >= 0.5 && fidelity <= 1.0))
    throw std::domain_error("eve_measurement_probs: fidelity outside [0.5,1]");
  eve.validate();

  const double a = std::exp(-mu * fidelity * eve.eta_e);
  const double b = std::exp(-mu * (1.0 - fidelity) * eve.eta_e);
  const double z = std::exp(-0.5 * mu * eve.eta_e);

  EveMeasurementProbs out;
  out.compatible_correct = 0.5 * (1.0 - a) * b;
  out.compatible_wrong = 0.5 * a * (1.0 - b);
  out.noncompatible_single = 0.5 * (1.0 - z) * z;
  return out;
}

}  // namespace demlab
