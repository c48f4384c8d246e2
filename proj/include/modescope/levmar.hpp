#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace modescope {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct FitOptions {
    int max_iterations = 200;
    double gradient_tolerance = 1e-10;  // scale-invariant; see lm_minimize
    double step_tolerance = 1e-12;      // relative parameter step
    double damping_init = 1e-3;         // 0 starts with a pure Gauss-Newton step
    double fd_rel_step = 1e-6;
    double fd_scale_floor = 1.0;
};

/// Bounded nonlinear least-squares problem: minimize (1/2)|residual(p)|^2
/// over the box [lower_bounds, upper_bounds]. Empty bound vectors mean
/// unconstrained; otherwise sizes must match the parameter dimension.
struct FitProblem {
    ResidualFn residual;
    Eigen::VectorXd initial;
    Eigen::VectorXd lower_bounds;
    Eigen::VectorXd upper_bounds;
    FitOptions options;
};

struct FitResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;     // (J^T J)^-1 at the solution (pseudo-inverse if singular)
    Eigen::VectorXd std_errors;     // sqrt of the covariance diagonal
    double reduced_chi2 = 0.0;      // |r|^2 / (n - m)
    int iterations = 0;
    bool converged = false;
    double final_residual_norm = 0.0;
    bool at_bound = false;          // some parameter finished on a box bound
    std::string stop_reason;
    std::vector<double> cost_trace;  // (1/2)|r|^2 after each accepted step
};

/// Central-difference Jacobian with per-parameter step
/// rel_step * max(|p_i|, scale_floor). Throws std::domain_error naming the
/// parameter index if the residual turns non-finite at a probe point.
Eigen::MatrixXd finite_difference_jacobian(const ResidualFn& residual,
                                           const Eigen::VectorXd& params, double rel_step,
                                           double scale_floor = 1.0);

/// Levenberg-Marquardt with multiplicative damping of the scaled normal
/// equations and projection onto the box bounds. Exhausting max_iterations
/// returns a non-converged result rather than throwing.
FitResult lm_minimize(const FitProblem& problem);

}  // namespace modescope
