#include "modescope/mode_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace modescope {

namespace {

using Eigen::VectorXd;

double median_of(std::vector<double> values) {
    const std::size_t n = values.size();
    const std::size_t mid = n / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                     values.end());
    double result = values[mid];
    if (n % 2 == 0) {
        std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid) - 1,
                         values.end());
        result = 0.5 * (result + values[mid - 1]);
    }
    return result;
}

struct Peak {
    std::size_t index = 0;
    double height = 0.0;
};

/// Half-height crossing positions around a peak, linearly interpolated.
/// Returns the full width; falls back to the local grid step when the peak
/// is unresolved.
double half_height_width(const std::vector<double>& freq, const std::vector<double>& excess,
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

std::vector<Peak> local_maxima(const std::vector<double>& excess) {
    std::vector<Peak> peaks;
    const std::size_t n = excess.size();
    for (std::size_t i = 0; i < n; ++i) {
        const bool left_ok = (i == 0) || excess[i] > excess[i - 1];
        const bool right_ok = (i + 1 == n) || excess[i] >= excess[i + 1];
        if (left_ok && right_ok && excess[i] > 0.0) {
            peaks.push_back(Peak{i, excess[i]});
        }
    }
    return peaks;
}

}  // namespace

Eigen::VectorXd pack_mode_fit_params(const ModeFitParams& p) {
    VectorXd packed(6);
    packed << p.omega_bare.hz(), p.kappa.hz(), p.chi.hz(), p.epsilon_rf.hz(), p.asymmetry_w,
        p.gamma2_baseline_per_s;
    return packed;
}

ModeFitParams unpack_mode_fit_params(const Eigen::VectorXd& packed) {
    if (packed.size() != 6) throw std::invalid_argument("mode fit vector must have 6 entries");
    ModeFitParams p;
    p.omega_bare = AngularFrequency::from_hz(packed(0));
    p.kappa = AngularFrequency::from_hz(packed(1));
    p.chi = AngularFrequency::from_hz(packed(2));
    p.epsilon_rf = AngularFrequency::from_hz(packed(3));
    p.asymmetry_w = packed(4);
    p.gamma2_baseline_per_s = packed(5);
    return p;
}

double mode_fit_model(const Eigen::VectorXd& packed, AngularFrequency drive_freq) {
    const ModeFitParams p = unpack_mode_fit_params(packed);
    const Mode mode{p.omega_bare, p.kappa, p.chi, "fit"};
    const Drive drive{drive_freq, p.epsilon_rf};
    return p.gamma2_baseline_per_s + measurement_dephasing_rate(mode, drive, p.asymmetry_w);
}

ModeFitParams initial_guess(const std::vector<SweepRecord>& sweep) {
    if (sweep.size() < 10) {
        throw std::invalid_argument("initial_guess: need at least 10 sweep points");
    }
    std::vector<double> freq(sweep.size()), gamma(sweep.size());
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        freq[i] = sweep[i].drive_freq.hz();
        gamma[i] = sweep[i].gamma2_per_s;
        if (i > 0 && !(freq[i] > freq[i - 1])) {
            throw std::invalid_argument("initial_guess: sweep must be sorted by frequency");
        }
    }

    // Baseline from the quietest quartile; scatter from the MAD so the feature
    // itself does not inflate the noise estimate.
    std::vector<double> sorted = gamma;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t quartile = std::max<std::size_t>(1, sorted.size() / 4);
    const double baseline =
        median_of(std::vector<double>(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(quartile)));
    std::vector<double> deviation(gamma.size());
    const double center = median_of(gamma);
    for (std::size_t i = 0; i < gamma.size(); ++i) deviation[i] = std::abs(gamma[i] - center);
    const double scatter = 1.4826 * median_of(deviation);

    std::vector<double> excess(gamma.size());
    double excess_max = 0.0;
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        excess[i] = gamma[i] - baseline;
        excess_max = std::max(excess_max, excess[i]);
    }
    const double feature_floor =
        std::max(3.0 * scatter, 1e-9 * std::max(baseline, std::numeric_limits<double>::min()));
    if (!(excess_max > feature_floor)) {
        throw NoFeatureError("initial_guess: no excursion above the baseline scatter");
    }

    const std::vector<Peak> peaks = local_maxima(excess);
    const Peak primary = *std::max_element(
        peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.height < b.height; });

    // Exclude everything inside the primary's half-height span when hunting
    // for the partner peak of the 2*chi splitting.
    const double half = 0.5 * primary.height;
    std::size_t lo = primary.index;
    while (lo > 0 && excess[lo - 1] >= half) --lo;
    std::size_t hi = primary.index;
    while (hi + 1 < excess.size() && excess[hi + 1] >= half) ++hi;

    std::optional<Peak> secondary;
    const double secondary_floor = std::max(3.0 * scatter, 0.02 * primary.height);
    for (const Peak& peak : peaks) {
        if (peak.index >= lo && peak.index <= hi) continue;
        if (peak.height < secondary_floor) continue;
        if (!secondary || peak.height > secondary->height) secondary = peak;
    }

    ModeFitParams guess;
    guess.gamma2_baseline_per_s = baseline;
    if (secondary) {
        const Peak& low = (primary.index < secondary->index) ? primary : *secondary;
        const Peak& high = (primary.index < secondary->index) ? *secondary : primary;
        const double f_lo = freq[low.index];
        const double f_hi = freq[high.index];
        guess.omega_bare = AngularFrequency::from_hz(0.5 * (f_lo + f_hi));
        guess.chi = AngularFrequency::from_hz(0.5 * (f_hi - f_lo));
        const Peak& taller = (primary.height >= secondary->height) ? primary : *secondary;
        guess.kappa = AngularFrequency::from_hz(half_height_width(freq, excess, taller.index));
        guess.asymmetry_w = low.height / (low.height + high.height);
        const double kr = guess.kappa.rad_per_s();
        const double xr = guess.chi.rad_per_s();
        const double eps2 =
            (low.height + high.height) * kr * (0.25 * kr * kr + 2.0 * xr * xr) / (8.0 * xr * xr);
        guess.epsilon_rf = AngularFrequency::from_rad_per_s(std::sqrt(std::max(eps2, 0.0)));
    } else {
        // Unresolved splitting: a single peak at the bare frequency.
        const double width = half_height_width(freq, excess, primary.index);
        guess.omega_bare = AngularFrequency::from_hz(freq[primary.index]);
        guess.chi = AngularFrequency::from_hz(0.25 * width);
        guess.kappa = AngularFrequency::from_hz(0.5 * width);
        guess.asymmetry_w = 0.5;
        const double kr = guess.kappa.rad_per_s();
        const double xr = guess.chi.rad_per_s();
        const double lorentz = 0.25 * kr * kr + xr * xr;
        const double eps2 = primary.height * lorentz * lorentz / (2.0 * kr * xr * xr);
        guess.epsilon_rf = AngularFrequency::from_rad_per_s(std::sqrt(std::max(eps2, 0.0)));
    }
    return guess;
}

ModeFitOutcome fit_single_mode(const std::vector<SweepRecord>& sweep,
                               const std::optional<ModeFitParams>& guess,
                               const ModeFitOptions& options) {
    ModeFitParams start = guess ? *guess : initial_guess(sweep);

    bool canonicalized = false;
    if (start.chi.hz() < 0.0) {
        start.chi = -start.chi;
        start.asymmetry_w = 1.0 - start.asymmetry_w;
        canonicalized = true;
    }
    if (options.fixed_w) start.asymmetry_w = *options.fixed_w;

    bool weighted = !sweep.empty();
    for (const SweepRecord& rec : sweep) {
        if (!(rec.t2_err_s > 0.0) || !(rec.t2_s > 0.0)) weighted = false;
    }
    std::vector<double> freq_hz(sweep.size()), gamma(sweep.size()), weight(sweep.size(), 1.0);
    double freq_min = std::numeric_limits<double>::infinity();
    double freq_max = -std::numeric_limits<double>::infinity();
    double gamma_max = 0.0;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        freq_hz[i] = sweep[i].drive_freq.hz();
        gamma[i] = sweep[i].gamma2_per_s;
        freq_min = std::min(freq_min, freq_hz[i]);
        freq_max = std::max(freq_max, freq_hz[i]);
        gamma_max = std::max(gamma_max, gamma[i]);
        if (weighted) {
            const double sigma = sweep[i].t2_err_s / (sweep[i].t2_s * sweep[i].t2_s);
            weight[i] = 1.0 / sigma;
        }
    }

    FitProblem problem;
    problem.options = options.lm;
    problem.initial = pack_mode_fit_params(start);
    VectorXd lb(6), ub(6);
    lb << freq_min, start.kappa.hz() / 100.0, start.chi.hz() / 100.0, 0.0, 0.0, 0.0;
    ub << freq_max, start.kappa.hz() * 100.0, start.chi.hz() * 100.0,
        std::max(start.epsilon_rf.hz() * 1e3, 1.0), 1.0, std::max(gamma_max, 1.0);
    if (options.fixed_w) {
        lb(4) = *options.fixed_w;
        ub(4) = *options.fixed_w;
    }
    problem.lower_bounds = lb;
    problem.upper_bounds = ub;
    for (Eigen::Index i = 0; i < 6; ++i) {
        problem.initial(i) = std::clamp(problem.initial(i), lb(i), ub(i));
    }

    problem.residual = [&freq_hz, &gamma, &weight](const VectorXd& p) {
        VectorXd r(static_cast<Eigen::Index>(freq_hz.size()));
        for (std::size_t i = 0; i < freq_hz.size(); ++i) {
            const double model = mode_fit_model(p, AngularFrequency::from_hz(freq_hz[i]));
            r(static_cast<Eigen::Index>(i)) = (model - gamma[i]) * weight[i];
        }
        return r;
    };

    FitResult fit = lm_minimize(problem);
    if (!fit.converged) {
        throw FitConvergenceError("fit_single_mode: minimizer did not converge (" +
                                      fit.stop_reason + ")",
                                  std::move(fit));
    }

    // Without per-point sigmas the covariance carries an unknown noise scale;
    // the reduced chi-square supplies it.
    if (!weighted) {
        fit.covariance *= fit.reduced_chi2;
        fit.std_errors = fit.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    }

    ModeFitOutcome outcome;
    outcome.params = unpack_mode_fit_params(fit.params);
    outcome.weighted = weighted;
    outcome.chi_canonicalized = canonicalized;
    outcome.q_factor = outcome.params.omega_bare.hz() / outcome.params.kappa.hz();
    const double inv_k = 1.0 / outcome.params.kappa.hz();
    const double dq_domega = inv_k;
    const double dq_dkappa = -outcome.params.omega_bare.hz() * inv_k * inv_k;
    const double q_var = dq_domega * dq_domega * fit.covariance(0, 0) +
                         dq_dkappa * dq_dkappa * fit.covariance(1, 1) +
                         2.0 * dq_domega * dq_dkappa * fit.covariance(0, 1);
    outcome.q_factor_std_error = std::sqrt(std::max(q_var, 0.0));
    const Mode fitted_mode{outcome.params.omega_bare, outcome.params.kappa, outcome.params.chi,
                           "fit"};
    const Drive on_resonance{outcome.params.omega_bare, outcome.params.epsilon_rf};
    outcome.n_bar_on_resonance = photon_numbers(fitted_mode, on_resonance).mean();
    outcome.fit = std::move(fit);
    return outcome;
}

}  // namespace modescope
