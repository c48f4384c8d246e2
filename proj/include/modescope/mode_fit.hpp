#pragma once

#include "modescope/levmar.hpp"
#include "modescope/model.hpp"
#include "modescope/sweep.hpp"
#include "modescope/units.hpp"

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace modescope {

/// Parameters of the single-mode dephasing model fitted to a Gamma2 sweep.
/// Canonical form: chi > 0, with asymmetry_w weighting the photon branch that
/// resonates at omega_bare - chi. The mirror (chi, w) -> (-chi, 1-w) leaves
/// the model invariant, so a sweep alone cannot fix the sign of chi.
struct ModeFitParams {
    AngularFrequency omega_bare;
    AngularFrequency kappa;
    AngularFrequency chi;
    AngularFrequency epsilon_rf;
    double asymmetry_w = 0.5;
    double gamma2_baseline_per_s = 0.0;
};

/// Names of the packed parameter vector, in order.
inline constexpr std::array<const char*, 6> mode_fit_param_names = {
    "omega_bare_hz", "kappa_hz", "chi_hz", "epsilon_rf_hz", "asymmetry_w",
    "gamma2_baseline_per_s"};

/// Model Gamma2(drive frequency) for the packed parameter vector.
double mode_fit_model(const Eigen::VectorXd& packed, AngularFrequency drive_freq);

Eigen::VectorXd pack_mode_fit_params(const ModeFitParams& params);
ModeFitParams unpack_mode_fit_params(const Eigen::VectorXd& packed);

class NoFeatureError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class FitConvergenceError : public std::runtime_error {
  public:
    FitConvergenceError(const std::string& msg, FitResult diagnostics)
        : std::runtime_error(msg), diagnostics(std::move(diagnostics)) {}
    FitResult diagnostics;
};

/// Heuristic starting point: baseline from the lowest-quartile median, peak
/// pair by prominence, chi from the splitting, kappa from the taller peak's
/// width, epsilon from the peak heights, w from the height ratio.
ModeFitParams initial_guess(const std::vector<SweepRecord>& sweep);

struct ModeFitOptions {
    std::optional<double> fixed_w;  // pin the asymmetry weight (e.g. 0.5)
    FitOptions lm;
};

struct ModeFitOutcome {
    ModeFitParams params;
    FitResult fit;          // covariance already rescaled for unweighted fits
    bool weighted = false;  // 1/sigma weights from t2_err were used
    bool chi_canonicalized = false;
    double q_factor = 0.0;
    double q_factor_std_error = 0.0;
    double n_bar_on_resonance = 0.0;  // branch-mean photon number at omega_bare
};

/// Fit the windowed sweep to baseline + measurement-induced dephasing of one
/// mode, weighting residuals by 1/sigma(Gamma2) whenever every record carries
/// a positive t2_err. Throws FitConvergenceError with diagnostics on failure.
ModeFitOutcome fit_single_mode(const std::vector<SweepRecord>& sweep,
                               const std::optional<ModeFitParams>& guess = std::nullopt,
                               const ModeFitOptions& options = {});

}  // namespace modescope
