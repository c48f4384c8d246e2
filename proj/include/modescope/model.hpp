#pragma once

#include "modescope/units.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace modescope {

// ----------------------------- Domain types ---------------------------------

/// One electromagnetic mode seen by the qubit.
struct Mode {
    AngularFrequency omega_bare;  // bare cavity resonance
    AngularFrequency kappa;       // cavity energy decay rate
    AngularFrequency chi;         // dispersive shift, signed
    std::string label;

    void validate() const {
        require_finite(omega_bare.hz(), "Mode.omega_bare");
        require_finite(kappa.hz(), "Mode.kappa");
        require_finite(chi.hz(), "Mode.chi");
        if (!(kappa.hz() > 0.0)) throw std::domain_error("Mode: kappa must be > 0");
        if (!(omega_bare.hz() > 0.0)) throw std::domain_error("Mode: omega_bare must be > 0");
    }
};

/// A continuous-wave tone applied to the qubit/cavity network.
struct Drive {
    AngularFrequency omega_d;     // tone frequency
    AngularFrequency epsilon_rf;  // effective drive amplitude

    void validate() const {
        require_finite(omega_d.hz(), "Drive.omega_d");
        require_finite(epsilon_rf.hz(), "Drive.epsilon_rf");
        if (epsilon_rf.hz() < 0.0) throw std::domain_error("Drive: epsilon_rf must be >= 0");
    }
};

/// Qubit properties with the CW tone off.
struct QubitBaseline {
    AngularFrequency omega_q;             // qubit 0-1 transition
    double gamma2_intrinsic_per_s = 0.0;  // 1/T2 with no CW drive
    double t1_s = 0.0;                    // may be +inf for the idealized no-decay limit

    void validate() const {
        require_finite(omega_q.hz(), "QubitBaseline.omega_q");
        if (std::isnan(t1_s) || !(t1_s > 0.0)) {
            throw std::domain_error("QubitBaseline: t1_s must be > 0");
        }
        if (std::isnan(gamma2_intrinsic_per_s) || gamma2_intrinsic_per_s < 0.0) {
            throw std::domain_error("QubitBaseline: gamma2_intrinsic_per_s must be >= 0");
        }
        // T2 <= 2 T1, with a little slack for rates specified right at the limit.
        const double floor = std::isinf(t1_s) ? 0.0 : 1.0 / (2.0 * t1_s);
        if (gamma2_intrinsic_per_s < floor * (1.0 - 1e-12)) {
            throw std::domain_error("QubitBaseline: gamma2_intrinsic violates T2 <= 2*T1");
        }
    }
};

/// Qubit baseline plus every mode it couples to. The mode list may be empty.
struct Environment {
    QubitBaseline qubit;
    std::vector<Mode> modes;

    void validate() const {
        qubit.validate();
        std::unordered_set<std::string> labels;
        for (const auto& m : modes) {
            m.validate();
            if (!labels.insert(m.label).second) {
                throw std::domain_error("Environment: duplicate mode label '" + m.label + "'");
            }
        }
    }
};

/// Mean cavity photon number with the qubit excited (+) or in the ground (-) state.
struct PhotonNumbers {
    double excited = 0.0;  // n_+
    double ground = 0.0;   // n_-
    double sum() const { return excited + ground; }
    double mean() const { return 0.5 * (excited + ground); }
};

// ------------------------------ Core formulas -------------------------------

/// Drive detuning from the bare cavity resonance, in rad/s.
inline double detuning_rad_per_s(const Mode& mode, const Drive& drive) {
    return (drive.omega_d.hz() - mode.omega_bare.hz()) * two_pi;
}

inline PhotonNumbers photon_numbers(const Mode& mode, const Drive& drive) {
    mode.validate();
    drive.validate();
    const double kappa = mode.kappa.rad_per_s();
    const double chi = mode.chi.rad_per_s();
    const double delta = detuning_rad_per_s(mode, drive);
    const double eps2 = drive.epsilon_rf.rad_per_s() * drive.epsilon_rf.rad_per_s();
    const double k2_over_4 = 0.25 * kappa * kappa;
    const double dp = delta + chi;
    const double dm = delta - chi;
    return PhotonNumbers{eps2 / (k2_over_4 + dp * dp), eps2 / (k2_over_4 + dm * dm)};
}

/// Spectral weight of photon-number fluctuations seen by the qubit (dimensionless).
inline double dephasing_spectral_density(const Mode& mode, const Drive& drive) {
    const PhotonNumbers n = photon_numbers(mode, drive);
    const double kappa = mode.kappa.rad_per_s();
    const double chi = mode.chi.rad_per_s();
    const double delta = detuning_rad_per_s(mode, drive);
    return 2.0 * n.sum() * chi * chi / (0.25 * kappa * kappa + chi * chi + delta * delta);
}

/// Measurement-induced dephasing rate of the qubit, in 1/s. The asymmetry
/// weight w reweights the two photon branches as 2w*n_+ and 2(1-w)*n_-;
/// w = 1/2 restores the symmetric branch-sum form.
inline double measurement_dephasing_rate(const Mode& mode, const Drive& drive,
                                         double asymmetry_w) {
    require_finite(asymmetry_w, "asymmetry_w");
    if (asymmetry_w < 0.0 || asymmetry_w > 1.0) {
        throw std::domain_error("measurement_dephasing_rate: asymmetry_w must be in [0, 1]");
    }
    const PhotonNumbers n = photon_numbers(mode, drive);
    const double kappa = mode.kappa.rad_per_s();
    const double chi = mode.chi.rad_per_s();
    const double delta = detuning_rad_per_s(mode, drive);
    const double weighted = 2.0 * asymmetry_w * n.excited + 2.0 * (1.0 - asymmetry_w) * n.ground;
    const double density =
        2.0 * weighted * chi * chi / (0.25 * kappa * kappa + chi * chi + delta * delta);
    return 0.5 * kappa * density;
}

/// Total dephasing rate: intrinsic baseline plus independent mode contributions.
inline double total_dephasing_rate(const Environment& env, const Drive& drive,
                                   double asymmetry_w) {
    env.validate();
    double gamma2 = env.qubit.gamma2_intrinsic_per_s;
    for (const auto& mode : env.modes) {
        gamma2 += measurement_dephasing_rate(mode, drive, asymmetry_w);
    }
    return gamma2;
}

/// Drive-induced qubit frequency pull, 2*chi*n_bar with n_bar the branch mean.
/// Leading-order dispersive result; accurate for |chi| well below kappa/2.
inline AngularFrequency stark_shift(const Mode& mode, const Drive& drive) {
    const PhotonNumbers n = photon_numbers(mode, drive);
    return AngularFrequency::from_rad_per_s(2.0 * mode.chi.rad_per_s() * n.mean());
}

inline double quality_factor(const Mode& mode) {
    mode.validate();
    return mode.omega_bare.hz() / mode.kappa.hz();
}

/// Bose-Einstein occupancy of a mode at temperature T.
inline double thermal_occupancy(double temperature_kelvin, AngularFrequency omega) {
    require_finite(temperature_kelvin, "temperature_kelvin");
    require_finite(omega.hz(), "omega");
    if (!(omega.hz() > 0.0)) throw std::domain_error("thermal_occupancy: omega must be > 0");
    if (temperature_kelvin < 0.0) {
        throw std::domain_error("thermal_occupancy: temperature must be >= 0");
    }
    if (temperature_kelvin == 0.0) return 0.0;
    const double x = hbar_joule_s * omega.rad_per_s() /
                     (boltzmann_joule_per_kelvin * temperature_kelvin);
    return 1.0 / std::expm1(x);
}

/// Invert the Bose-Einstein occupancy: temperature at which a mode holds n_bar photons.
inline double photons_to_temperature(double n_bar, AngularFrequency omega) {
    require_finite(n_bar, "n_bar");
    require_finite(omega.hz(), "omega");
    if (!(omega.hz() > 0.0)) throw std::domain_error("photons_to_temperature: omega must be > 0");
    if (!(n_bar > 0.0)) {
        throw std::domain_error("photons_to_temperature: n_bar must be > 0");
    }
    const double x = std::log1p(1.0 / n_bar);
    return hbar_joule_s * omega.rad_per_s() / (boltzmann_joule_per_kelvin * x);
}

/// Effective drive amplitude from applied power: epsilon = sqrt(conversion * power),
/// so the steady-state photon number is exactly linear in power. The conversion
/// factor carries Hz^2 per power unit.
inline AngularFrequency power_to_amplitude(double power, double conversion) {
    require_finite(power, "power");
    require_finite(conversion, "conversion");
    if (power < 0.0) throw std::domain_error("power_to_amplitude: power must be >= 0");
    if (!(conversion > 0.0)) {
        throw std::domain_error("power_to_amplitude: conversion must be > 0");
    }
    return AngularFrequency::from_hz(std::sqrt(conversion * power));
}

}  // namespace modescope
