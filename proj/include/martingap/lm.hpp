#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace martingap {

struct LmOptions {
    double lambda0 = 1e-3;
    double rel_tol = 1e-10;
    std::size_t max_iter = 200;
    // Penalty weight on ||theta||^2 added to the squared residual norm.
    // Biases the stationary point; prefer lambda_min when the goal is
    // step stabilization without bias.
    double ridge = 0.0;
    // Floor on the damping factor: Tikhonov regularization of each step.
    double lambda_min = 1e-12;
};

struct LmResult {
    Eigen::VectorXd theta;
    double cost = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    // Initial cost followed by the cost after each accepted step; the
    // sequence is non-increasing by construction.
    std::vector<double> cost_trace;
};

// Levenberg-Marquardt with identity damping for
//   min_theta ||r(theta)||^2 + ridge * ||theta||^2.
//
// Convention: residual_fn returns r with r_i = y_i - f_i(theta) and
// jacobian_fn returns J with J(i, j) = d f_i / d theta_j, so the damped
// normal equations read (J^T J + ridge I + lambda I) delta = J^T r - ridge theta.
//
// lambda starts at lambda0, divides by 10 on an accepted step (floored at
// 1e-12) and multiplies by 10 on a rejected one; the solve gives up once
// lambda exceeds 1e15. Convergence is a relative cost drop below rel_tol
// on an accepted step, or an initial cost that is already ~0.
inline LmResult lm_minimize(
    const Eigen::VectorXd& theta0,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual_fn,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& jacobian_fn,
    const LmOptions& opts = {}) {
    auto cost_of = [&](const Eigen::VectorXd& th) {
        double c = residual_fn(th).squaredNorm();
        if (opts.ridge > 0.0) c += opts.ridge * th.squaredNorm();
        return c;
    };

    LmResult res;
    res.theta = theta0;
    res.cost = cost_of(theta0);
    res.cost_trace.push_back(res.cost);
    if (res.cost <= 1e-30) {
        res.converged = true;
        return res;
    }

    double lambda = opts.lambda0;
    while (res.iterations < opts.max_iter) {
        ++res.iterations;
        const Eigen::VectorXd r = residual_fn(res.theta);
        const Eigen::MatrixXd jac = jacobian_fn(res.theta);
        Eigen::MatrixXd h = jac.transpose() * jac;
        Eigen::VectorXd g = jac.transpose() * r;
        if (opts.ridge > 0.0) {
            h.diagonal().array() += opts.ridge;
            g -= opts.ridge * res.theta;
        }
        Eigen::MatrixXd damped = h;
        damped.diagonal().array() += lambda;
        const Eigen::VectorXd delta = damped.ldlt().solve(g);
        if (!delta.allFinite()) {
            lambda *= 10.0;
            if (lambda > 1e15) break;
            continue;
        }
        const Eigen::VectorXd trial = res.theta + delta;
        const double trial_cost = cost_of(trial);
        if (trial_cost < res.cost) {
            const double rel =
                (res.cost - trial_cost) / std::max(res.cost, 1e-300);
            res.theta = trial;
            res.cost = trial_cost;
            res.cost_trace.push_back(trial_cost);
            lambda = std::max(lambda / 10.0, opts.lambda_min);
            if (rel < opts.rel_tol) {
                res.converged = true;
                break;
            }
        } else {
            // Plateau: heavily damped and still no strictly better point.
            if (std::abs(trial_cost - res.cost) <=
                    opts.rel_tol * std::max(res.cost, 1e-300) &&
                lambda > 1e6) {
                res.converged = true;
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e15) break;
        }
    }
    return res;
}

}  // namespace martingap
