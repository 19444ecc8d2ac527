#pragma once
#include <array>
#include <cmath>
#include <stdexcept>

#include "demlab/polarization.hpp"

namespace demlab {

// One value per detector channel, indexed by the polarization the channel
// detects. Used for efficiencies, click probabilities and background rates.
struct ChannelVector {
  std::array<double, 4> v{0.0, 0.0, 0.0, 0.0};

  constexpr ChannelVector() = default;
  constexpr ChannelVector(double h, double vv, double d, double a)
      : v{h, vv, d, a} {}

  double& operator[](Pol p) { return v[index_of(p)]; }
  double operator[](Pol p) const { return v[index_of(p)]; }

  double max() const {
    double m = v[0];
    for (double x : v) m = x > m ? x : m;
    return m;
  }

  ChannelVector scaled(double s) const {
    return ChannelVector{v[0] * s, v[1] * s, v[2] * s, v[3] * s};
  }

  bool all_in_unit_interval() const {
    for (double x : v)
      if (!(x >= 0.0 && x <= 1.0)) return false;
    return true;
  }

  friend bool operator==(const ChannelVector&, const ChannelVector&) = default;
};

// Bob's receiver: peak absolute detection efficiency (shared by all four
// channels at normal incidence) and per-channel background click
// probabilities per bit slot (1 ns coincidence window).
struct ReceiverModel {
  double eta_det = 0.4;
  ChannelVector background{430e-9, 1560e-9, 800e-9, 1100e-9};

  void validate() const {
    if (!(eta_det > 0.0 && eta_det <= 1.0))
      throw std::domain_error("ReceiverModel: eta_det outside (0,1]");
    for (double c : background.v)
      if (!(c >= 0.0 && c <= 1e-3))
        throw std::domain_error("ReceiverModel: background outside [0,1e-3]");
  }

  friend bool operator==(const ReceiverModel&, const ReceiverModel&) = default;
};

// Alice-Bob line. Alice's source is set to mean photon number equal to the
// line transmittance, so both are derived from loss_db.
struct LinkModel {
  double loss_db = 6.0;
  double fidelity_ab = 0.9831;  // Alice->Bob and Alice->Eve optical fidelity
  double fidelity_eb = 0.9904;  // Eve->Bob optical fidelity

  double transmittance() const { return std::pow(10.0, -loss_db / 10.0); }
  double mu_alice() const { return transmittance(); }

  void validate() const {
    if (!(loss_db >= 0.0))
      throw std::domain_error("LinkModel: loss_db must be >= 0");
    if (!(fidelity_ab >= 0.5 && fidelity_ab <= 1.0) ||
        !(fidelity_eb >= 0.5 && fidelity_eb <= 1.0))
      throw std::domain_error("LinkModel: fidelity outside [0.5,1]");
  }

  friend bool operator==(const LinkModel&, const LinkModel&) = default;
};

// Eve's intercept receiver (active basis choice, two detectors).
struct EveDetectorModel {
  double eta_e = 0.85;
  double dark = 1e-9;  // per bit slot; negligible analytically, kept for the
                       // pulse-level simulation

  void validate() const {
    if (!(eta_e > 0.0 && eta_e <= 1.0))
      throw std::domain_error("EveDetectorModel: eta_e outside (0,1]");
    if (!(dark >= 0.0 && dark <= 1e-6))
      throw std::domain_error("EveDetectorModel: dark outside [0,1e-6]");
  }

  friend bool operator==(const EveDetectorModel&,
                         const EveDetectorModel&) = default;
};

// Probabilities of Eve's per-pulse measurement outcomes.
//   compatible_correct: she picked the sender's basis, only the correct
//       detector clicked.
//   compatible_wrong:   she picked the sender's basis, only the wrong
//       detector clicked.
//   noncompatible_single: she picked the other basis and exactly one given
//       detector clicked (same value for either of the two detectors).
// Anything else (no click, double click) makes her send vacuum.
struct EveMeasurementProbs {
  double compatible_correct = 0.0;
  double compatible_wrong = 0.0;
  double noncompatible_single = 0.0;

  double no_resend() const {
    return 1.0 - compatible_correct - compatible_wrong -
           2.0 * noncompatible_single;
  }
};

}  // namespace demlab
