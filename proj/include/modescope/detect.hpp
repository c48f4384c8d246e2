#pragma once

#include "modescope/mode_fit.hpp"
#include "modescope/sweep.hpp"
#include "modescope/units.hpp"

#include <optional>
#include <string>
#include <vector>

namespace modescope {

enum class ModeOrigin { designed, em_simulated };

struct CatalogEntry {
    std::string label;
    AngularFrequency freq;
    ModeOrigin origin = ModeOrigin::designed;
};

/// Known designed and simulation-predicted modes to classify features against.
struct ModeCatalog {
    std::vector<CatalogEntry> entries;
    double rel_tolerance = 0.025;

    void validate() const;
};

enum class FeatureClass { designed, harmonic, spurious, neighbor, unknown };

const char* to_string(FeatureClass c);

struct DetectedFeature {
    AngularFrequency center_freq;
    double depth_per_s = 0.0;   // peak Gamma2 above the rolling baseline
    AngularFrequency width;     // span between half-prominence crossings
    FeatureClass classification = FeatureClass::unknown;
    std::optional<std::string> matched_label;
    std::optional<double> match_error_rel;
    std::optional<int> harmonic_order;
};

/// Prominence-based peak detection on Gamma2 minus a rolling-median baseline
/// (window: 5% of the sweep span). Features closer than min_separation are
/// merged keeping the deeper one.
std::vector<DetectedFeature> detect_features(const std::vector<SweepRecord>& sweep,
                                             double min_prominence_per_s,
                                             AngularFrequency min_separation);

/// Classify each feature: nearest catalog entry within rel_tolerance
/// (designed entries win exact ties), then integer harmonics (2x, 3x) of
/// designed entries, then qubit transition frequencies, else unknown.
std::vector<DetectedFeature> classify(std::vector<DetectedFeature> features,
                                      const ModeCatalog& catalog,
                                      const std::vector<AngularFrequency>& qubit_freqs);

struct ValueWithError {
    double value = 0.0;
    double std_error = 0.0;
};

struct ModeReport {
    ValueWithError q_factor;
    std::optional<ValueWithError> photon_slope;       // n_bar per power unit
    std::optional<ValueWithError> thermal_intercept;  // n_bar at zero power
    std::optional<double> power_fit_r_squared;
    std::optional<double> t0_kelvin;                  // set when the intercept is > 0
    std::optional<double> t0_upper_bound_kelvin;      // from intercept + 1 std error
    bool zero_occupancy_consistent = false;
    bool calibration_suspect = false;  // intercept negative beyond 1 std error
};

/// Quality factor with propagated uncertainty, plus the photon-vs-power line
/// and the zero-power temperature when power data is supplied.
ModeReport mode_report(const ModeFitOutcome& fit,
                       const std::optional<std::vector<PowerPoint>>& power_data);

}  // namespace modescope
