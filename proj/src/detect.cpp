#include "modescope/detect.hpp"

#include "modescope/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace modescope {

namespace {

double rel_error(double feature_hz, double reference_hz) {
    return std::abs(feature_hz - reference_hz) / reference_hz;
}

/// Rolling median over a frequency window of 5% of the sweep span.
std::vector<double> rolling_baseline(const std::vector<double>& freq,
                                     const std::vector<double>& gamma) {
    const double half_window = 0.025 * (freq.back() - freq.front());
    std::vector<double> baseline(gamma.size());
    std::vector<double> window;
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 0; i < freq.size(); ++i) {
        while (freq[lo] < freq[i] - half_window) ++lo;
        while (hi < freq.size() && freq[hi] <= freq[i] + half_window) ++hi;
        window.assign(gamma.begin() + static_cast<std::ptrdiff_t>(lo),
                      gamma.begin() + static_cast<std::ptrdiff_t>(hi));
        const std::size_t mid = window.size() / 2;
        std::nth_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(mid),
                         window.end());
        double med = window[mid];
        if (window.size() % 2 == 0) {
            std::nth_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(mid) - 1,
                             window.end());
            med = 0.5 * (med + window[mid - 1]);
        }
        baseline[i] = med;
    }
    return baseline;
}

double crossing_width(const std::vector<double>& freq, const std::vector<double>& excess,
                      std::size_t peak) {
    const double half = 0.5 * excess[peak];
    double left = freq.front();
    for (std::size_t i = peak; i-- > 0;) {
        if (excess[i] < half) {
            const double frac = (excess[i + 1] - half) / (excess[i + 1] - excess[i]);
            left = freq[i + 1] + frac * (freq[i] - freq[i + 1]);
            break;
        }
    }
    double right = freq.back();
    for (std::size_t i = peak + 1; i < excess.size(); ++i) {
        if (excess[i] < half) {
            const double frac = (excess[i - 1] - half) / (excess[i - 1] - excess[i]);
            right = freq[i - 1] + frac * (freq[i] - freq[i - 1]);
            break;
        }
    }
    double width = right - left;
    if (!(width > 0.0)) {
        const std::size_t hi = std::min(peak + 1, freq.size() - 1);
        const std::size_t lo = (peak > 0) ? peak - 1 : 0;
        width = (freq[hi] - freq[lo]) / std::max<std::size_t>(1, hi - lo);
    }
    return width;
}

}  // namespace

void ModeCatalog::validate() const {
    if (!(rel_tolerance > 0.0) || rel_tolerance > 0.1) {
        throw std::domain_error("ModeCatalog: rel_tolerance must be in (0, 0.1]");
    }
    std::unordered_set<std::string> labels;
    for (const auto& entry : entries) {
        if (!(entry.freq.hz() > 0.0)) {
            throw std::domain_error("ModeCatalog: frequencies must be positive");
        }
        if (!labels.insert(entry.label).second) {
            throw std::domain_error("ModeCatalog: duplicate label '" + entry.label + "'");
        }
    }
}

const char* to_string(FeatureClass c) {
    switch (c) {
        case FeatureClass::designed: return "designed";
        case FeatureClass::harmonic: return "harmonic";
        case FeatureClass::spurious: return "spurious";
        case FeatureClass::neighbor: return "neighbor";
        case FeatureClass::unknown: return "unknown";
    }
    return "unknown";
}

std::vector<DetectedFeature> detect_features(const std::vector<SweepRecord>& sweep,
                                             double min_prominence_per_s,
                                             AngularFrequency min_separation) {
    if (sweep.size() < 10) {
        throw std::domain_error("detect_features: need at least 10 sweep points");
    }
    std::vector<double> freq(sweep.size()), gamma(sweep.size());
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        freq[i] = sweep[i].drive_freq.hz();
        gamma[i] = sweep[i].gamma2_per_s;
        if (i > 0 && !(freq[i] > freq[i - 1])) {
            throw std::invalid_argument("detect_features: sweep must be sorted by frequency");
        }
    }

    const std::vector<double> baseline = rolling_baseline(freq, gamma);
    std::vector<double> excess(gamma.size());
    for (std::size_t i = 0; i < gamma.size(); ++i) excess[i] = gamma[i] - baseline[i];

    struct Candidate {
        std::size_t index;
        double height;
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < excess.size(); ++i) {
        const bool left_ok = (i == 0) || excess[i] > excess[i - 1];
        const bool right_ok = (i + 1 == excess.size()) || excess[i] >= excess[i + 1];
        if (left_ok && right_ok && excess[i] >= min_prominence_per_s && excess[i] > 0.0) {
            candidates.push_back(Candidate{i, excess[i]});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return (a.height != b.height) ? a.height > b.height : a.index < b.index;
    });

    // Keep the deeper of any pair closer than min_separation.
    std::vector<Candidate> kept;
    for (const Candidate& cand : candidates) {
        bool shadowed = false;
        for (const Candidate& k : kept) {
            if (std::abs(freq[cand.index] - freq[k.index]) < min_separation.hz()) {
                shadowed = true;
                break;
            }
        }
        if (!shadowed) kept.push_back(cand);
    }
    std::sort(kept.begin(), kept.end(),
              [](const Candidate& a, const Candidate& b) { return a.index < b.index; });

    std::vector<DetectedFeature> features;
    features.reserve(kept.size());
    for (const Candidate& k : kept) {
        DetectedFeature f;
        f.center_freq = sweep[k.index].drive_freq;
        f.depth_per_s = k.height;
        f.width = AngularFrequency::from_hz(crossing_width(freq, excess, k.index));
        features.push_back(f);
    }
    return features;
}

std::vector<DetectedFeature> classify(std::vector<DetectedFeature> features,
                                      const ModeCatalog& catalog,
                                      const std::vector<AngularFrequency>& qubit_freqs) {
    catalog.validate();
    for (DetectedFeature& f : features) {
        const double f_hz = f.center_freq.hz();
        f.classification = FeatureClass::unknown;
        f.matched_label.reset();
        f.match_error_rel.reset();
        f.harmonic_order.reset();

        // Direct match: nearest entry within tolerance. Designed entries win
        // ties over simulated ones, then the lower frequency wins.
        const CatalogEntry* best = nullptr;
        double best_err = std::numeric_limits<double>::infinity();
        for (const CatalogEntry& entry : catalog.entries) {
            const double err = rel_error(f_hz, entry.freq.hz());
            if (err > catalog.rel_tolerance) continue;
            const bool better =
                err < best_err ||
                (err == best_err && best != nullptr &&
                 ((entry.origin == ModeOrigin::designed && best->origin != ModeOrigin::designed) ||
                  (entry.origin == best->origin && entry.freq < best->freq)));
            if (best == nullptr || better) {
                best = &entry;
                best_err = err;
            }
        }
        if (best != nullptr) {
            f.classification = (best->origin == ModeOrigin::designed) ? FeatureClass::designed
                                                                      : FeatureClass::spurious;
            f.matched_label = best->label;
            f.match_error_rel = best_err;
            continue;
        }

        // Harmonics of designed entries.
        const CatalogEntry* harmonic = nullptr;
        double harmonic_err = std::numeric_limits<double>::infinity();
        int harmonic_order = 0;
        for (int order : {2, 3}) {
            for (const CatalogEntry& entry : catalog.entries) {
                if (entry.origin != ModeOrigin::designed) continue;
                const double err = rel_error(f_hz / order, entry.freq.hz());
                if (err > catalog.rel_tolerance || err >= harmonic_err) continue;
                harmonic = &entry;
                harmonic_err = err;
                harmonic_order = order;
            }
        }
        if (harmonic != nullptr) {
            f.classification = FeatureClass::harmonic;
            f.matched_label = harmonic->label;
            f.match_error_rel = harmonic_err;
            f.harmonic_order = harmonic_order;
            continue;
        }

        bool neighbor = false;
        for (const AngularFrequency& q : qubit_freqs) {
            if (rel_error(f_hz, q.hz()) <= catalog.rel_tolerance) neighbor = true;
        }
        if (neighbor) f.classification = FeatureClass::neighbor;
    }
    return features;
}

ModeReport mode_report(const ModeFitOutcome& fit,
                       const std::optional<std::vector<PowerPoint>>& power_data) {
    if (!fit.fit.converged) {
        throw std::invalid_argument("mode_report: requires a converged fit");
    }
    ModeReport report;
    report.q_factor = ValueWithError{fit.q_factor, fit.q_factor_std_error};
    if (!power_data) return report;

    std::vector<double> power(power_data->size()), n_bar(power_data->size());
    for (std::size_t i = 0; i < power_data->size(); ++i) {
        power[i] = (*power_data)[i].power;
        n_bar[i] = (*power_data)[i].n_bar;
    }
    const LinearFit line = linear_fit(power, n_bar);
    report.photon_slope = ValueWithError{line.slope, line.slope_std_error};
    report.thermal_intercept = ValueWithError{line.intercept, line.intercept_std_error};
    report.power_fit_r_squared = line.r_squared;

    if (line.intercept > 0.0) {
        report.t0_kelvin = photons_to_temperature(line.intercept, fit.params.omega_bare);
    } else {
        report.zero_occupancy_consistent = true;
    }
    const double n_upper = line.intercept + line.intercept_std_error;
    if (!report.t0_kelvin && n_upper > 0.0) {
        report.t0_upper_bound_kelvin = photons_to_temperature(n_upper, fit.params.omega_bare);
    }
    report.calibration_suspect = line.intercept < -line.intercept_std_error;
    return report;
}

}  // namespace modescope
