#include "modescope/sweep.hpp"

#include "modescope/levmar.hpp"
#include "modescope/rng.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

namespace modescope {

namespace {

using Eigen::VectorXd;

void require_increasing(const std::vector<double>& delays) {
    if (delays.empty()) throw std::invalid_argument("trace delays must be nonempty");
    for (std::size_t i = 1; i < delays.size(); ++i) {
        if (!(delays[i] > delays[i - 1])) {
            throw std::invalid_argument("trace delays must be strictly increasing");
        }
    }
    if (!(delays.front() >= 0.0)) throw std::invalid_argument("trace delays must be >= 0");
}

std::vector<double> gaussian_noise(std::size_t n, double sigma, std::uint64_t seed) {
    std::vector<double> out(n, 0.0);
    if (sigma > 0.0) {
        std::mt19937_64 engine(seed);
        std::normal_distribution<double> normal(0.0, sigma);
        for (auto& v : out) v = normal(engine);
    }
    return out;
}

double mean_tail(const std::vector<double>& values, std::size_t count) {
    count = std::max<std::size_t>(1, std::min(count, values.size()));
    double sum = 0.0;
    for (std::size_t i = values.size() - count; i < values.size(); ++i) sum += values[i];
    return sum / static_cast<double>(count);
}

}  // namespace

void Trace::validate() const {
    require_increasing(delays_s);
    if (signal.size() != delays_s.size()) {
        throw std::invalid_argument("trace signal length must match delays");
    }
}

Trace simulate_echo_trace(const Environment& env, const Drive& drive,
                          const std::vector<double>& delays_s, const NoiseModel& noise,
                          double asymmetry_w) {
    require_increasing(delays_s);
    noise.validate();
    const double gamma2 = total_dephasing_rate(env, drive, asymmetry_w);

    Trace trace;
    trace.kind = TraceKind::echo;
    trace.delays_s = delays_s;
    trace.signal.resize(delays_s.size());
    const auto draw = gaussian_noise(delays_s.size(), noise.readout_sigma, noise.seed);
    for (std::size_t i = 0; i < delays_s.size(); ++i) {
        trace.signal[i] = std::exp(-gamma2 * delays_s[i]) + draw[i];
    }
    return trace;
}

Trace simulate_ramsey_trace(const Environment& env, const Drive& drive,
                            const std::vector<double>& delays_s,
                            AngularFrequency fringe_detuning, const NoiseModel& noise,
                            double asymmetry_w) {
    require_increasing(delays_s);
    noise.validate();
    const double gamma2 = total_dephasing_rate(env, drive, asymmetry_w);
    double fringe = fringe_detuning.rad_per_s();
    for (const auto& mode : env.modes) fringe += stark_shift(mode, drive).rad_per_s();

    Trace trace;
    trace.kind = TraceKind::ramsey;
    trace.ramsey_detuning = fringe_detuning;
    trace.delays_s = delays_s;
    trace.signal.resize(delays_s.size());
    const auto draw = gaussian_noise(delays_s.size(), noise.readout_sigma, noise.seed);
    for (std::size_t i = 0; i < delays_s.size(); ++i) {
        const double tau = delays_s[i];
        trace.signal[i] = std::exp(-gamma2 * tau) * std::cos(fringe * tau) + draw[i];
    }
    return trace;
}

T2Estimate extract_t2(const Trace& trace) {
    trace.validate();
    const std::size_t n = trace.delays_s.size();
    if (n < 8) throw std::invalid_argument("extract_t2: need at least 8 trace points");
    const std::vector<double>& tau = trace.delays_s;
    const std::vector<double>& s = trace.signal;
    const double span = tau.back() - tau.front();
    double min_spacing = span;
    for (std::size_t i = 1; i < n; ++i) min_spacing = std::min(min_spacing, tau[i] - tau[i - 1]);

    FitProblem problem;
    std::size_t gamma_index = 1;
    std::optional<std::size_t> omega_index;

    if (trace.kind == TraceKind::echo) {
        // A exp(-gamma tau) + B
        const double b0 = mean_tail(s, n / 10 + 1);
        double a0 = s.front() - b0;
        if (std::abs(a0) < 1e-6) a0 = (a0 < 0.0) ? -1e-6 : 1e-6;
        double gamma0 = 1.0 / std::max(span / 3.0, min_spacing);
        for (std::size_t i = 0; i < n; ++i) {
            if ((s[i] - b0) / a0 < std::exp(-1.0) && tau[i] > 0.0) {
                gamma0 = 1.0 / tau[i];
                break;
            }
        }
        problem.initial = Eigen::Vector3d(a0, gamma0, b0);
        problem.lower_bounds = Eigen::Vector3d(-4.0, 0.0, -2.0);
        problem.upper_bounds = Eigen::Vector3d(4.0, 50.0 / min_spacing, 2.0);
        problem.residual = [&tau, &s](const VectorXd& p) {
            VectorXd r(tau.size());
            for (std::size_t i = 0; i < tau.size(); ++i) {
                r(static_cast<Eigen::Index>(i)) =
                    p(0) * std::exp(-p(1) * tau[i]) + p(2) - s[i];
            }
            return r;
        };
    } else {
        // A exp(-gamma tau) cos(omega tau + phi) + B
        double b0 = 0.0;
        for (double v : s) b0 += v;
        b0 /= static_cast<double>(n);
        double a0 = 0.0;
        for (double v : s) a0 = std::max(a0, std::abs(v - b0));
        if (a0 < 1e-6) a0 = 1e-6;
        std::size_t crossings = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if ((s[i - 1] - b0) * (s[i] - b0) < 0.0) ++crossings;
        }
        const double pi = 0.5 * two_pi;
        const double omega0 = (crossings >= 2)
                                  ? pi * static_cast<double>(crossings) / span
                                  : std::abs(trace.ramsey_detuning.rad_per_s());
        const double gamma0 = 1.0 / std::max(span / 2.0, min_spacing);
        problem.initial = (VectorXd(5) << a0, gamma0, omega0, 0.0, b0).finished();
        problem.lower_bounds = (VectorXd(5) << 0.0, 0.0, 0.0, -3.2, -2.0).finished();
        problem.upper_bounds =
            (VectorXd(5) << 4.0, 50.0 / min_spacing, pi / min_spacing, 3.2, 2.0).finished();
        gamma_index = 1;
        omega_index = 2;
        problem.residual = [&tau, &s](const VectorXd& p) {
            VectorXd r(tau.size());
            for (std::size_t i = 0; i < tau.size(); ++i) {
                r(static_cast<Eigen::Index>(i)) =
                    p(0) * std::exp(-p(1) * tau[i]) * std::cos(p(2) * tau[i] + p(3)) + p(4) - s[i];
            }
            return r;
        };
    }

    const FitResult fit = lm_minimize(problem);
    if (!fit.converged) {
        throw TraceFitError("extract_t2: decay fit did not converge (|r| = " +
                                std::to_string(fit.final_residual_norm) + ")",
                            fit.final_residual_norm);
    }

    const double gamma = fit.params(static_cast<Eigen::Index>(gamma_index));
    const double gamma_var =
        fit.covariance(static_cast<Eigen::Index>(gamma_index), static_cast<Eigen::Index>(gamma_index)) *
        fit.reduced_chi2;

    T2Estimate estimate;
    estimate.t2_s = (gamma > 0.0) ? 1.0 / gamma : std::numeric_limits<double>::infinity();
    estimate.t2_err_s =
        (gamma > 0.0) ? std::sqrt(std::max(gamma_var, 0.0)) / (gamma * gamma) : 0.0;
    if (omega_index) {
        estimate.fringe_freq = AngularFrequency::from_rad_per_s(
            fit.params(static_cast<Eigen::Index>(*omega_index)));
    }
    estimate.unresolved = !(estimate.t2_s <= 10.0 * tau.back());
    return estimate;
}

namespace {

SweepRecord sweep_point(const Environment& env, AngularFrequency epsilon_rf,
                        AngularFrequency freq, double asymmetry_w, const NoiseModel& noise,
                        SweepMode mode, std::uint64_t index) {
    const Drive drive{freq, epsilon_rf};
    const double gamma_expected = total_dephasing_rate(env, drive, asymmetry_w);

    double jitter_factor = 1.0;
    if (noise.t2_jitter_rel > 0.0) {
        std::mt19937_64 engine(derive_subseed(noise.seed, index, 1));
        std::normal_distribution<double> normal(0.0, 1.0);
        do {
            jitter_factor = 1.0 + noise.t2_jitter_rel * normal(engine);
        } while (!(jitter_factor > 0.0));
    }

    SweepRecord record;
    record.drive_freq = freq;
    if (mode == SweepMode::direct) {
        const double t2 = (1.0 / gamma_expected) * jitter_factor;
        record.t2_s = t2;
        record.t2_err_s = t2 * noise.t2_jitter_rel;
        record.gamma2_per_s = 1.0 / t2;
    } else {
        const double tau_max = (gamma_expected > 0.0) ? 3.0 / gamma_expected : 1.0;
        constexpr int n_delays = 60;
        std::vector<double> delays(n_delays);
        for (int k = 0; k < n_delays; ++k) {
            delays[static_cast<std::size_t>(k)] =
                tau_max * static_cast<double>(k + 1) / static_cast<double>(n_delays);
        }
        NoiseModel point_noise = noise;
        point_noise.seed = derive_subseed(noise.seed, index, 0);
        const Trace trace = simulate_echo_trace(env, drive, delays, point_noise, asymmetry_w);
        const T2Estimate estimate = extract_t2(trace);
        const double t2 = estimate.t2_s * jitter_factor;
        record.t2_s = t2;
        record.t2_err_s = std::hypot(estimate.t2_err_s, estimate.t2_s * noise.t2_jitter_rel);
        record.gamma2_per_s = 1.0 / t2;
    }
    return record;
}

}  // namespace

std::vector<SweepRecord> generate_rate_sweep(const Environment& env, AngularFrequency epsilon_rf,
                                             const std::vector<AngularFrequency>& freq_grid,
                                             double asymmetry_w, const NoiseModel& noise,
                                             SweepMode mode, int threads) {
    if (freq_grid.empty()) throw std::invalid_argument("generate_rate_sweep: empty grid");
    for (std::size_t i = 1; i < freq_grid.size(); ++i) {
        if (!(freq_grid[i] > freq_grid[i - 1])) {
            throw std::invalid_argument("generate_rate_sweep: grid must be increasing");
        }
    }
    env.validate();
    noise.validate();

    std::vector<SweepRecord> records(freq_grid.size());
    const auto run_range = [&](std::size_t begin, std::size_t end, std::exception_ptr& error) {
        try {
            for (std::size_t i = begin; i < end; ++i) {
                records[i] = sweep_point(env, epsilon_rf, freq_grid[i], asymmetry_w, noise, mode,
                                         static_cast<std::uint64_t>(i));
            }
        } catch (...) {
            error = std::current_exception();
        }
    };

    if (threads <= 1 || freq_grid.size() < 2) {
        std::exception_ptr error;
        run_range(0, freq_grid.size(), error);
        if (error) std::rethrow_exception(error);
        return records;
    }

    const auto count = static_cast<std::size_t>(threads);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(count);
    const std::size_t chunk = (freq_grid.size() + count - 1) / count;
    for (std::size_t t = 0; t < count; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(begin + chunk, freq_grid.size());
        if (begin >= end) break;
        pool.emplace_back(run_range, begin, end, std::ref(errors[t]));
    }
    for (auto& worker : pool) worker.join();
    for (const auto& error : errors) {
        if (error) std::rethrow_exception(error);
    }
    return records;
}

std::vector<PowerPoint> power_sweep(const Mode& mode, double conversion,
                                    const std::vector<double>& power_grid,
                                    AngularFrequency drive_freq, double n_thermal) {
    if (n_thermal < 0.0) throw std::domain_error("power_sweep: n_thermal must be >= 0");
    std::vector<PowerPoint> points;
    points.reserve(power_grid.size());
    for (double power : power_grid) {
        const Drive drive{drive_freq, power_to_amplitude(power, conversion)};
        points.push_back(PowerPoint{power, photon_numbers(mode, drive).mean() + n_thermal});
    }
    return points;
}

}  // namespace modescope
