#include "modescope/levmar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace modescope {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd clamp_to_bounds(VectorXd p, const VectorXd& lb, const VectorXd& ub) {
    if (lb.size() > 0) p = p.cwiseMax(lb);
    if (ub.size() > 0) p = p.cwiseMin(ub);
    return p;
}

/// Jacobian that keeps probe points inside the box by shrinking toward a
/// one-sided difference when a bound is in the way.
MatrixXd bounded_jacobian(const ResidualFn& residual, const VectorXd& p, const VectorXd& lb,
                          const VectorXd& ub, double rel_step, double scale_floor,
                          Eigen::Index n_residuals) {
    const Eigen::Index m = p.size();
    MatrixXd jac(n_residuals, m);
    VectorXd probe = p;
    for (Eigen::Index j = 0; j < m; ++j) {
        const double h = rel_step * std::max(std::abs(p(j)), scale_floor);
        double hi = p(j) + h;
        double lo = p(j) - h;
        if (ub.size() > 0) hi = std::min(hi, ub(j));
        if (lb.size() > 0) lo = std::max(lo, lb(j));
        if (hi == lo) {
            jac.col(j).setZero();
            continue;
        }
        probe(j) = hi;
        const VectorXd r_hi = residual(probe);
        probe(j) = lo;
        const VectorXd r_lo = residual(probe);
        probe(j) = p(j);
        if (!r_hi.allFinite() || !r_lo.allFinite()) {
            throw std::domain_error("jacobian: residual non-finite probing parameter " +
                                    std::to_string(j));
        }
        jac.col(j) = (r_hi - r_lo) / (hi - lo);
    }
    return jac;
}

/// Pseudo-inverse of a symmetric PSD matrix via its eigendecomposition.
MatrixXd symmetric_pinv(const MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(a);
    const VectorXd& ev = solver.eigenvalues();
    const double cutoff = std::max(ev.cwiseAbs().maxCoeff(), 0.0) * 1e-14;
    VectorXd inv = VectorXd::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) > cutoff && ev(i) > 0.0) inv(i) = 1.0 / ev(i);
    }
    return solver.eigenvectors() * inv.asDiagonal() * solver.eigenvectors().transpose();
}

}  // namespace

MatrixXd finite_difference_jacobian(const ResidualFn& residual, const VectorXd& params,
                                    double rel_step, double scale_floor) {
    if (!(rel_step > 0.0)) throw std::domain_error("finite_difference_jacobian: rel_step must be > 0");
    const VectorXd r0 = residual(params);
    return bounded_jacobian(residual, params, VectorXd(), VectorXd(), rel_step, scale_floor,
                            r0.size());
}

FitResult lm_minimize(const FitProblem& problem) {
    const FitOptions& opt = problem.options;
    const Eigen::Index m = problem.initial.size();
    if (m == 0) throw std::invalid_argument("lm_minimize: empty parameter vector");
    const VectorXd& lb = problem.lower_bounds;
    const VectorXd& ub = problem.upper_bounds;
    if ((lb.size() > 0 && lb.size() != m) || (ub.size() > 0 && ub.size() != m)) {
        throw std::invalid_argument("lm_minimize: bound size mismatch");
    }
    if (lb.size() > 0 && ub.size() > 0 && (lb.array() > ub.array()).any()) {
        throw std::invalid_argument("lm_minimize: lower bound exceeds upper bound");
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        if (lb.size() > 0 && problem.initial(i) < lb(i)) {
            throw std::invalid_argument("lm_minimize: initial point violates lower bound");
        }
        if (ub.size() > 0 && problem.initial(i) > ub(i)) {
            throw std::invalid_argument("lm_minimize: initial point violates upper bound");
        }
    }

    VectorXd p = problem.initial;
    VectorXd r = problem.residual(p);
    if (!r.allFinite()) {
        throw std::domain_error("lm_minimize: residual non-finite at the initial point");
    }
    if (r.size() < m) {
        throw std::invalid_argument("lm_minimize: fewer residuals than parameters");
    }

    FitResult result;
    double cost = 0.5 * r.squaredNorm();
    result.cost_trace.push_back(cost);

    const auto finish = [&](bool converged, const std::string& reason, int iterations) {
        result.params = p;
        result.converged = converged;
        result.stop_reason = reason;
        result.iterations = iterations;
        result.final_residual_norm = r.norm();
        const MatrixXd jac = bounded_jacobian(problem.residual, p, lb, ub, opt.fd_rel_step,
                                              opt.fd_scale_floor, r.size());
        VectorXd scale = jac.colwise().norm();
        for (Eigen::Index i = 0; i < m; ++i) {
            if (!(scale(i) > 0.0)) scale(i) = 1.0;
        }
        const VectorXd inv_scale = scale.cwiseInverse();
        const MatrixXd a_hat =
            inv_scale.asDiagonal() * (jac.transpose() * jac) * inv_scale.asDiagonal();
        result.covariance =
            inv_scale.asDiagonal() * symmetric_pinv(a_hat) * inv_scale.asDiagonal();
        result.std_errors = result.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
        const auto dof = static_cast<double>(r.size() - m);
        result.reduced_chi2 = (dof > 0.0) ? r.squaredNorm() / dof : 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if ((lb.size() > 0 && p(i) == lb(i)) || (ub.size() > 0 && p(i) == ub(i))) {
                result.at_bound = true;
            }
        }
        return result;
    };

    if (r.isZero(0.0)) {
        return finish(true, "zero residual at the initial point", 0);
    }

    double lambda = opt.damping_init;
    for (int iter = 1; iter <= opt.max_iterations; ++iter) {
        const MatrixXd jac = bounded_jacobian(problem.residual, p, lb, ub, opt.fd_rel_step,
                                              opt.fd_scale_floor, r.size());
        const VectorXd gradient = jac.transpose() * r;

        // MINPACK-style orthogonality measure: cosine between each Jacobian
        // column and the residual. Scale-free in both parameters and data.
        const double r_norm = r.norm();
        double g_rel = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double col_norm = jac.col(i).norm();
            if (col_norm > 0.0 && r_norm > 0.0) {
                g_rel = std::max(g_rel, std::abs(gradient(i)) / (col_norm * r_norm));
            }
        }
        if (g_rel <= opt.gradient_tolerance) {
            return finish(true, "gradient tolerance reached", iter - 1);
        }

        // Scaled normal equations: unit diagonal keeps the damping meaningful
        // across wildly different parameter magnitudes.
        const MatrixXd a = jac.transpose() * jac;
        VectorXd d = a.diagonal().cwiseMax(0.0).cwiseSqrt();
        for (Eigen::Index i = 0; i < m; ++i) {
            if (!(d(i) > 0.0)) d(i) = 1.0;
        }
        const VectorXd inv_d = d.cwiseInverse();
        const MatrixXd a_hat = inv_d.asDiagonal() * a * inv_d.asDiagonal();
        const VectorXd g_hat = inv_d.asDiagonal() * gradient;

        bool accepted = false;
        while (true) {
            MatrixXd damped = a_hat;
            damped.diagonal().array() += lambda;
            const VectorXd step_hat = damped.ldlt().solve(-g_hat);
            const VectorXd trial = clamp_to_bounds(p + inv_d.asDiagonal() * step_hat, lb, ub);
            const VectorXd step = trial - p;

            bool step_small = step_hat.allFinite();
            for (Eigen::Index i = 0; step_small && i < m; ++i) {
                if (std::abs(step(i)) > opt.step_tolerance * (std::abs(p(i)) + opt.step_tolerance)) {
                    step_small = false;
                }
            }
            if (step_small) {
                return finish(true, "step tolerance reached", iter);
            }

            bool improved = false;
            VectorXd r_trial;
            if (step.allFinite()) {
                r_trial = problem.residual(trial);
                improved = r_trial.allFinite() && 0.5 * r_trial.squaredNorm() < cost;
            }
            if (improved) {
                p = trial;
                r = std::move(r_trial);
                cost = 0.5 * r.squaredNorm();
                result.cost_trace.push_back(cost);
                lambda = (lambda > 0.0) ? lambda / 10.0 : 0.0;
                accepted = true;
                break;
            }
            lambda = std::max(lambda, 1e-12) * 10.0;
            if (lambda > 1e14) break;
        }
        if (!accepted) {
            return finish(false, "damping exhausted without improvement", iter);
        }
        if (cost == 0.0) {
            return finish(true, "zero residual", iter);
        }
    }
    return finish(false, "max_iterations exceeded", opt.max_iterations);
}

}  // namespace modescope
