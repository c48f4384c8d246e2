#pragma once

#include <cmath>
#include <compare>
#include <stdexcept>
#include <string>

namespace modescope {

inline constexpr double two_pi = 6.283185307179586476925286766559;

// CODATA 2018 SI values.
inline constexpr double hbar_joule_s = 1.054571817e-34;
inline constexpr double boltzmann_joule_per_kelvin = 1.380649e-23;

inline void require_finite(double value, const char* what) {
    if (!std::isfinite(value)) {
        throw std::domain_error(std::string(what) + ": value must be finite");
    }
}

/// Signed frequency with explicit unit accessors. The stored representation
/// is an ordinary (cycles per second) frequency so that Hz values read from
/// files round-trip bit-exactly; model formulas consume rad_per_s().
class AngularFrequency {
  public:
    constexpr AngularFrequency() = default;

    static constexpr AngularFrequency from_hz(double hz) { return AngularFrequency{hz}; }
    static constexpr AngularFrequency from_ghz(double ghz) { return AngularFrequency{ghz * 1e9}; }
    static constexpr AngularFrequency from_rad_per_s(double rad_per_s) {
        return AngularFrequency{rad_per_s / two_pi};
    }

    constexpr double hz() const { return hz_; }
    constexpr double ghz() const { return hz_ * 1e-9; }
    constexpr double rad_per_s() const { return hz_ * two_pi; }

    friend constexpr AngularFrequency operator+(AngularFrequency a, AngularFrequency b) {
        return AngularFrequency{a.hz_ + b.hz_};
    }
    friend constexpr AngularFrequency operator-(AngularFrequency a, AngularFrequency b) {
        return AngularFrequency{a.hz_ - b.hz_};
    }
    constexpr AngularFrequency operator-() const { return AngularFrequency{-hz_}; }
    friend constexpr AngularFrequency operator*(double s, AngularFrequency f) {
        return AngularFrequency{s * f.hz_};
    }
    friend constexpr auto operator<=>(AngularFrequency, AngularFrequency) = default;

  private:
    explicit constexpr AngularFrequency(double hz) : hz_(hz) {}
    double hz_ = 0.0;
};

}  // namespace modescope
