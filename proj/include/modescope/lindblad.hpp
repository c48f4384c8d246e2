#pragma once

#include "modescope/model.hpp"
#include "modescope/units.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace modescope {

/// Qubit (+) cavity density matrix on a truncated Fock space, ordered
/// qubit ⊗ cavity with the qubit ground block first.
struct TruncatedState {
    int fock_cutoff = 0;        // cavity dimension N; full dimension is 2N
    Eigen::MatrixXcd density;   // (2N) x (2N)

    /// (|g> + |e>)/sqrt(2) ⊗ |vacuum>
    static TruncatedState superposition_vacuum(int fock_cutoff);

    double trace_error() const;        // |tr(rho) - 1|
    double hermiticity_error() const;  // max |rho - rho^dagger|
    double min_eigenvalue() const;
};

struct OracleConfig {
    int fock_cutoff = 20;
    double dt_s = 0.0;               // 0 => 0.008 / kappa
    double t_max_s = 0.0;            // 0 => long enough to resolve the expected rate
    double transient_fraction = 0.3;
    int checkpoint_stride = 0;       // if > 0, keep full states every this many steps

    void validate(double kappa_rad_per_s) const;
};

struct OracleSample {
    double t_s = 0.0;
    double rho01_abs = 0.0;        // |qubit g-e coherence|
    double rho01_phase_rad = 0.0;  // raw arg, in (-pi, pi]
    double n_photon = 0.0;         // <a^dagger a>
};

struct OracleSeries {
    std::vector<OracleSample> samples;
    std::vector<TruncatedState> checkpoints;  // includes the final state
    double top_fock_population_max = 0.0;
    double dt_s = 0.0;
};

/// Raised when the top Fock level becomes populated beyond the truncation budget.
class CutoffError : public std::runtime_error {
  public:
    CutoffError(const std::string& msg, double population)
        : std::runtime_error(msg), population(population) {}
    double population;
};

class ExtractionError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Integrate the drive-frame master equation
///   d rho/dt = -i[H, rho] + kappa D[a] rho,
///   H = Delta_r a^dagger a + chi a^dagger a sigma_z + epsilon_rf (a + a^dagger),
/// with fixed-step RK4, starting from (|g> + |e>)/sqrt(2) ⊗ |vacuum>.
OracleSeries evolve_dispersive(const Mode& mode, const Drive& drive, const OracleConfig& config);

struct RateEstimate {
    double gamma_per_s = 0.0;      // decay rate of |rho01|
    AngularFrequency freq_shift;   // slope of the unwrapped rho01 phase
};

/// Log-linear fit of the coherence envelope and linear fit of the unwrapped
/// phase, after discarding the leading transient_fraction of the series.
RateEstimate extract_rate(const OracleSeries& series, double transient_fraction);

}  // namespace modescope
