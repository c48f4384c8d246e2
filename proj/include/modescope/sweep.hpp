#pragma once

#include "modescope/model.hpp"
#include "modescope/units.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace modescope {

enum class TraceKind { echo, ramsey };

/// One simulated decay experiment: signal versus pulse-separation delay.
struct Trace {
    std::vector<double> delays_s;
    std::vector<double> signal;
    TraceKind kind = TraceKind::echo;
    AngularFrequency ramsey_detuning;  // deliberate fringe detuning, ramsey only

    void validate() const;
};

/// One point of a coherence-spectroscopy sweep.
struct SweepRecord {
    AngularFrequency drive_freq;
    double t2_s = 0.0;
    double t2_err_s = 0.0;
    double gamma2_per_s = 0.0;
};

/// Two noise knobs: additive Gaussian readout noise per trace point and a
/// relative scatter applied to extracted T2 values. The same seed always
/// reproduces the same draws.
struct NoiseModel {
    double readout_sigma = 0.0;
    double t2_jitter_rel = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (readout_sigma < 0.0) throw std::domain_error("NoiseModel: readout_sigma must be >= 0");
        if (t2_jitter_rel < 0.0) throw std::domain_error("NoiseModel: t2_jitter_rel must be >= 0");
    }
};

/// Spin-echo decay under a CW tone: exp(-Gamma2 tau). The echo refocuses the
/// static drive-induced frequency pull, so no fringe appears.
Trace simulate_echo_trace(const Environment& env, const Drive& drive,
                          const std::vector<double>& delays_s, const NoiseModel& noise,
                          double asymmetry_w = 0.5);

/// Ramsey decay: exp(-Gamma2 tau) cos((detuning + total Stark shift) tau).
Trace simulate_ramsey_trace(const Environment& env, const Drive& drive,
                            const std::vector<double>& delays_s,
                            AngularFrequency fringe_detuning, const NoiseModel& noise,
                            double asymmetry_w = 0.5);

struct T2Estimate {
    double t2_s = 0.0;
    double t2_err_s = 0.0;
    std::optional<AngularFrequency> fringe_freq;  // ramsey traces only
    bool unresolved = false;  // T2 beyond 10x the delay span: lower bound only
};

class TraceFitError : public std::runtime_error {
  public:
    TraceFitError(const std::string& msg, double residual_norm)
        : std::runtime_error(msg), residual_norm(residual_norm) {}
    double residual_norm;
};

/// Fit the decay model matching trace.kind and return T2 with its standard
/// error (covariance scaled by the reduced chi-square).
T2Estimate extract_t2(const Trace& trace);

enum class SweepMode { direct, via_traces };

/// Sweep the CW tone over freq_grid and record T2/Gamma2 per point. `direct`
/// evaluates the rate model; `via_traces` simulates an echo trace per point
/// and re-extracts T2. Per-point noise derives from (noise.seed, index), so
/// any evaluation order gives identical records.
std::vector<SweepRecord> generate_rate_sweep(const Environment& env,
                                             AngularFrequency epsilon_rf,
                                             const std::vector<AngularFrequency>& freq_grid,
                                             double asymmetry_w, const NoiseModel& noise,
                                             SweepMode mode, int threads = 1);

struct PowerPoint {
    double power = 0.0;
    double n_bar = 0.0;
};

/// Photon number versus applied power at a fixed drive frequency; exactly
/// linear with slope set by the power-to-amplitude conversion. n_thermal adds
/// a constant residual occupancy to every point.
std::vector<PowerPoint> power_sweep(const Mode& mode, double conversion,
                                    const std::vector<double>& power_grid,
                                    AngularFrequency drive_freq, double n_thermal = 0.0);

}  // namespace modescope
