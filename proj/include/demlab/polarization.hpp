#pragma once
#include <array>
#include <optional>
#include <string_view>

namespace demlab {

// The four BB84 polarization states. The receiver has one detector channel
// per state, so the same enum indexes detector channels (h, v, d, a).
enum class Pol : int { H = 0, V = 1, D = 2, A = 3 };

enum class Basis : int { HV = 0, DA = 1 };

inline constexpr std::array<Pol, 4> kAllPols{Pol::H, Pol::V, Pol::D, Pol::A};

constexpr int index_of(Pol p) { return static_cast<int>(p); }

constexpr Basis basis_of(Pol p) {
  return (p == Pol::H || p == Pol::V) ? Basis::HV : Basis::DA;
}

// H<->V, D<->A; an involution.
constexpr Pol conjugate_of(Pol p) {
  switch (p) {
    case Pol::H: return Pol::V;
    case Pol::V: return Pol::H;
    case Pol::D: return Pol::A;
    case Pol::A: return Pol::D;
  }
  return Pol::H;
}

constexpr Basis other_basis(Basis b) {
  return b == Basis::HV ? Basis::DA : Basis::HV;
}

// The two polarizations measured in basis b, in enum order.
constexpr std::array<Pol, 2> pols_in(Basis b) {
  return b == Basis::HV ? std::array<Pol, 2>{Pol::H, Pol::V}
                        : std::array<Pol, 2>{Pol::D, Pol::A};
}

constexpr std::string_view name_of(Pol p) {
  switch (p) {
    case Pol::H: return "H";
    case Pol::V: return "V";
    case Pol::D: return "D";
    case Pol::A: return "A";
  }
  return "?";
}

constexpr std::string_view name_of(Basis b) {
  return b == Basis::HV ? "HV" : "DA";
}

inline std::optional<Pol> parse_pol(std::string_view s) {
  if (s == "H" || s == "h") return Pol::H;
  if (s == "V" || s == "v") return Pol::V;
  if (s == "D" || s == "d") return Pol::D;
  if (s == "A" || s == "a") return Pol::A;
  return std::nullopt;
}

}  // namespace demlab
