#include "modescope/lindblad.hpp"

#include "modescope/regression.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

namespace modescope {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

constexpr double top_fock_budget = 1e-4;

/// Right-hand side of the dispersive master equation, written as
///   rho' = G rho + rho G^dag + kappa a rho a^dag,  G = -iH - (kappa/2) n.
/// G is block diagonal over the qubit with tridiagonal cavity blocks, so all
/// products below are diagonal scalings and single-row/column shifts, O(N^2).
class DispersiveRhs {
  public:
    DispersiveRhs(const Mode& mode, const Drive& drive, int fock_cutoff)
        : n_(fock_cutoff), eps_(drive.epsilon_rf.rad_per_s()), kappa_(mode.kappa.rad_per_s()) {
        const double chi = mode.chi.rad_per_s();
        const double delta = detuning_rad_per_s(mode, drive);
        const double delta_q[2] = {delta - chi, delta + chi};  // ground, excited

        sq_ = VectorXd(n_ - 1);
        for (int k = 0; k + 1 < n_; ++k) sq_(k) = std::sqrt(static_cast<double>(k + 1));

        for (int q = 0; q < 2; ++q) {
            diag_[q] = VectorXcd(n_);
            for (int k = 0; k < n_; ++k) {
                diag_[q](k) = cplx(-0.5 * kappa_ * k, -delta_q[q] * k);
            }
            diag_conj_[q] = diag_[q].conjugate();
        }
    }

    void operator()(const MatrixXcd& rho, MatrixXcd& out) const {
        const int n = n_;
        const cplx mie(0.0, -eps_);
        const cplx pie(0.0, eps_);

        // G rho: act on row blocks per qubit state.
        for (int q = 0; q < 2; ++q) {
            auto src = rho.middleRows(q * n, n);
            auto dst = out.middleRows(q * n, n);
            dst.noalias() = diag_[q].asDiagonal() * src;
            dst.topRows(n - 1).noalias() += mie * (sq_.asDiagonal() * src.bottomRows(n - 1));
            dst.bottomRows(n - 1).noalias() += mie * (sq_.asDiagonal() * src.topRows(n - 1));
        }

        // rho G^dag: act on column blocks.
        for (int q = 0; q < 2; ++q) {
            auto src = rho.middleCols(q * n, n);
            auto dst = out.middleCols(q * n, n);
            dst.noalias() += src * diag_conj_[q].asDiagonal();
            dst.leftCols(n - 1).noalias() += pie * (src.rightCols(n - 1) * sq_.asDiagonal());
            dst.rightCols(n - 1).noalias() += pie * (src.leftCols(n - 1) * sq_.asDiagonal());
        }

        // kappa a rho a^dag: shift each qubit block up-left with sqrt weights.
        for (int qr = 0; qr < 2; ++qr) {
            for (int qc = 0; qc < 2; ++qc) {
                out.block(qr * n, qc * n, n - 1, n - 1).noalias() +=
                    kappa_ * (sq_.asDiagonal() * rho.block(qr * n + 1, qc * n + 1, n - 1, n - 1) *
                              sq_.asDiagonal());
            }
        }
    }

  private:
    int n_;
    double eps_;
    double kappa_;
    VectorXd sq_;
    VectorXcd diag_[2];
    VectorXcd diag_conj_[2];
};

OracleSample sample_observables(double t, const MatrixXcd& rho, int n) {
    cplx rho01(0.0, 0.0);
    double n_photon = 0.0;
    for (int k = 0; k < n; ++k) {
        rho01 += rho(k, n + k);
        n_photon += static_cast<double>(k) * (rho(k, k).real() + rho(n + k, n + k).real());
    }
    return OracleSample{t, std::abs(rho01), std::arg(rho01), n_photon};
}

}  // namespace

TruncatedState TruncatedState::superposition_vacuum(int fock_cutoff) {
    TruncatedState state;
    state.fock_cutoff = fock_cutoff;
    state.density = MatrixXcd::Zero(2 * fock_cutoff, 2 * fock_cutoff);
    const int n = fock_cutoff;
    state.density(0, 0) = 0.5;
    state.density(0, n) = 0.5;
    state.density(n, 0) = 0.5;
    state.density(n, n) = 0.5;
    return state;
}

double TruncatedState::trace_error() const {
    return std::abs(density.trace() - cplx(1.0, 0.0));
}

double TruncatedState::hermiticity_error() const {
    return (density - density.adjoint()).cwiseAbs().maxCoeff();
}

double TruncatedState::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> solver(0.5 * (density + density.adjoint()));
    return solver.eigenvalues().minCoeff();
}

void OracleConfig::validate(double kappa_rad_per_s) const {
    if (fock_cutoff < 4) throw std::domain_error("OracleConfig: fock_cutoff must be >= 4");
    if (dt_s < 0.0 || !std::isfinite(dt_s)) {
        throw std::domain_error("OracleConfig: dt_s must be finite and >= 0");
    }
    if (dt_s > 0.0 && dt_s * kappa_rad_per_s > 0.01) {
        throw std::domain_error("OracleConfig: dt * kappa must not exceed 0.01");
    }
    if (!(transient_fraction >= 0.0) || transient_fraction >= 1.0) {
        throw std::domain_error("OracleConfig: transient_fraction must be in [0, 1)");
    }
    if (t_max_s < 0.0 || !std::isfinite(t_max_s)) {
        throw std::domain_error("OracleConfig: t_max_s must be finite and >= 0");
    }
}

OracleSeries evolve_dispersive(const Mode& mode, const Drive& drive, const OracleConfig& config) {
    mode.validate();
    drive.validate();
    const double kappa = mode.kappa.rad_per_s();
    config.validate(kappa);

    const double dt = (config.dt_s > 0.0) ? config.dt_s : 0.008 / kappa;

    double t_max = config.t_max_s;
    if (t_max == 0.0) {
        // Reach the cavity steady state, then cover a measurable slice of the
        // expected coherence decay without unbounded step counts.
        const double gamma_expected = measurement_dephasing_rate(mode, drive, 0.5);
        t_max = 12.0 / kappa;
        if (gamma_expected > 0.0) t_max = std::max(t_max, 2.5 / gamma_expected);
        t_max = std::min(t_max, 2.0e5 * dt);
        t_max = std::max(t_max, 12.0 / kappa);
    }
    const auto steps = static_cast<long>(std::ceil(t_max / dt));

    const int n = config.fock_cutoff;
    const int dim = 2 * n;
    const DispersiveRhs rhs(mode, drive, n);

    TruncatedState state = TruncatedState::superposition_vacuum(n);
    MatrixXcd k1(dim, dim), k2(dim, dim), k3(dim, dim), k4(dim, dim), work(dim, dim);

    OracleSeries series;
    series.dt_s = dt;
    series.samples.reserve(static_cast<std::size_t>(steps) + 1);
    series.samples.push_back(sample_observables(0.0, state.density, n));

    for (long step = 1; step <= steps; ++step) {
        rhs(state.density, k1);
        work = state.density + (0.5 * dt) * k1;
        rhs(work, k2);
        work = state.density + (0.5 * dt) * k2;
        rhs(work, k3);
        work = state.density + dt * k3;
        rhs(work, k4);
        state.density += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        const double t = static_cast<double>(step) * dt;
        series.samples.push_back(sample_observables(t, state.density, n));

        const double top_pop =
            state.density(n - 1, n - 1).real() + state.density(dim - 1, dim - 1).real();
        series.top_fock_population_max = std::max(series.top_fock_population_max, top_pop);
        if (top_pop > top_fock_budget) {
            std::ostringstream msg;
            msg << "evolve_dispersive: top Fock level population " << top_pop << " exceeds "
                << top_fock_budget << " at t = " << t << " s (fock_cutoff = " << n
                << "); increase the cutoff";
            throw CutoffError(msg.str(), top_pop);
        }

        if (config.checkpoint_stride > 0 && step % config.checkpoint_stride == 0) {
            series.checkpoints.push_back(TruncatedState{n, state.density});
        }
    }

    series.checkpoints.push_back(std::move(state));
    return series;
}

RateEstimate extract_rate(const OracleSeries& series, double transient_fraction) {
    if (!(transient_fraction >= 0.0) || transient_fraction >= 1.0) {
        throw std::domain_error("extract_rate: transient_fraction must be in [0, 1)");
    }
    const std::size_t total = series.samples.size();
    const auto first = static_cast<std::size_t>(
        std::ceil(transient_fraction * static_cast<double>(total)));
    if (total < first + 8) {
        throw ExtractionError("extract_rate: fewer than 8 post-transient samples");
    }

    std::vector<double> t, log_abs, phase;
    t.reserve(total - first);
    log_abs.reserve(total - first);
    phase.reserve(total - first);

    double prev_abs = 0.0;
    double unwrapped = 0.0;
    double prev_raw = 0.0;
    for (std::size_t i = first; i < total; ++i) {
        const OracleSample& s = series.samples[i];
        if (!(s.rho01_abs > 0.0)) {
            throw ExtractionError("extract_rate: non-positive coherence envelope after transient");
        }
        if (i > first) {
            // The envelope of a dephasing coherence must not grow; allow only
            // rounding-level wiggle.
            if (s.rho01_abs - prev_abs > 1e-6 * prev_abs) {
                throw ExtractionError("extract_rate: non-monotone coherence envelope");
            }
            double d = s.rho01_phase_rad - prev_raw;
            d -= two_pi * std::round(d / two_pi);
            unwrapped += d;
        }
        prev_abs = s.rho01_abs;
        prev_raw = s.rho01_phase_rad;
        t.push_back(s.t_s);
        log_abs.push_back(std::log(s.rho01_abs));
        phase.push_back(unwrapped);
    }

    const LinearFit envelope = linear_fit(t, log_abs);
    const LinearFit drift = linear_fit(t, phase);
    return RateEstimate{-envelope.slope, AngularFrequency::from_rad_per_s(drift.slope)};
}

}  // namespace modescope
