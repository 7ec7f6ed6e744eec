#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "stm/errors.hpp"

namespace stm {

/// Canonical L1-regularized quadratic program
///
///     minimize  1/2 x'Px - q'x + lambda * |x|_1
///
/// with P symmetric positive semidefinite. Every sparse profile subproblem in
/// the topic model is cast into this form.
template <class Scalar>
struct L1QP {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Mat P;
    Vec q;
    Scalar lambda{0};

    Eigen::Index size() const noexcept { return q.size(); }

    void validate() const {
        if (P.rows() != P.cols() || P.rows() != q.size()) {
            throw std::invalid_argument("L1QP: P must be square and match q");
        }
        if (!(lambda >= Scalar(0))) throw std::invalid_argument("L1QP: lambda must be >= 0");
        const Scalar scale = std::max(Scalar(1), P.cwiseAbs().maxCoeff());
        if (P.size() > 0 && (P - P.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10) * scale) {
            throw std::invalid_argument("L1QP: P is not symmetric");
        }
    }
};

template <class Scalar>
struct L1QPSolution {
    typename L1QP<Scalar>::Vec x;
    Scalar objective{0};
    Scalar kkt_residual{0};
    int iterations = 0;
    bool converged = false;
};

template <class Scalar, class Derived>
Scalar l1qp_objective(const L1QP<Scalar>& problem, const Eigen::MatrixBase<Derived>& x) {
    return Scalar(0.5) * x.dot(problem.P * x) - problem.q.dot(x) +
           problem.lambda * x.template lpNorm<1>();
}

/// Largest violation of the optimality conditions of the canonical problem:
/// |g_i + lambda*sign(x_i)| on the support, max(|g_i| - lambda, 0) off it,
/// where g = Px - q.
template <class Scalar, class Derived>
Scalar kkt_residual(const L1QP<Scalar>& problem, const Eigen::MatrixBase<Derived>& x) {
    const typename L1QP<Scalar>::Vec g = problem.P * x - problem.q;
    Scalar worst(0);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const Scalar v = x(i) != Scalar(0)
                             ? std::abs(g(i) + problem.lambda * (x(i) > 0 ? Scalar(1) : Scalar(-1)))
                             : std::max(std::abs(g(i)) - problem.lambda, Scalar(0));
        worst = std::max(worst, v);
    }
    return worst;
}

namespace detail {

template <class Scalar>
Scalar sign_of(Scalar v) {
    return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0));
}

} // namespace detail

/// Feature-sign search for the canonical L1QP.
///
/// Maintains an active set with a fixed sign pattern theta. Each step solves
/// the sign-restricted quadratic in closed form, x_A = P_AA^{-1}(q_A - lambda*theta_A),
/// then line-searches the segment towards it, checking the objective at every
/// point where a coordinate crosses zero. Zero coordinates are activated one
/// at a time (largest |gradient| first, lowest index on ties).
///
/// A singular P_AA is retried once with jitter 1e-9*trace(P)/K on the diagonal;
/// a second failure throws SolverError. Exceeding `max_iter` returns the best
/// iterate with `converged == false`.
template <class Scalar>
L1QPSolution<Scalar> solve_feature_sign(const L1QP<Scalar>& problem, Scalar tol, int max_iter,
                                        const std::optional<typename L1QP<Scalar>::Vec>& warm_start = std::nullopt) {
    using Mat = typename L1QP<Scalar>::Mat;
    using Vec = typename L1QP<Scalar>::Vec;
    using Eigen::Index;
    using detail::sign_of;

    if (!(tol > Scalar(0))) throw std::invalid_argument("solve_feature_sign: tol must be > 0");
    const Index K = problem.size();
    const auto& P = problem.P;
    const auto& q = problem.q;
    const Scalar lambda = problem.lambda;

    L1QPSolution<Scalar> out;
    out.x = Vec::Zero(K);
    if (warm_start) {
        if (warm_start->size() != K) throw std::invalid_argument("solve_feature_sign: warm start size");
        out.x = *warm_start;
    }
    Vec& x = out.x;
    Vec grad = P * x - q;

    const Scalar trace = P.trace();
    const Scalar jitter = Scalar(1e-9) * (trace > Scalar(0) ? trace / Scalar(K) : Scalar(1));

    std::vector<Index> active;
    auto rebuild_active = [&] {
        active.clear();
        for (Index i = 0; i < K; ++i) {
            if (x(i) != Scalar(0)) active.push_back(i);
        }
    };
    rebuild_active();
    Vec theta = x.unaryExpr([](Scalar v) { return sign_of(v); });

    auto active_optimal = [&] {
        for (Index i : active) {
            if (std::abs(grad(i) + lambda * sign_of(x(i))) > tol) return false;
        }
        return true;
    };

    // Objective restricted to the active coordinates (all others are zero).
    auto restricted_objective = [&](const Mat& Paa, const Vec& qa, const Vec& xa) {
        return Scalar(0.5) * xa.dot(Paa * xa) - qa.dot(xa) + lambda * xa.template lpNorm<1>();
    };

    auto feature_sign_step = [&] {
        const auto n = static_cast<Index>(active.size());
        Mat Paa(n, n);
        Vec qa(n), ta(n), xa(n);
        for (Index r = 0; r < n; ++r) {
            qa(r) = q(active[r]);
            ta(r) = theta(active[r]);
            xa(r) = x(active[r]);
            for (Index c = 0; c < n; ++c) Paa(r, c) = P(active[r], active[c]);
        }
        const Vec rhs = qa - lambda * ta;

        Vec x_new;
        Eigen::LDLT<Mat> ldlt(Paa);
        const bool singular = ldlt.info() != Eigen::Success || !(ldlt.rcond() > Scalar(1e-12));
        if (!singular) {
            x_new = ldlt.solve(rhs);
        }
        if (singular || !x_new.allFinite()) {
            Mat jittered = Paa;
            jittered.diagonal().array() += jitter;
            ldlt.compute(jittered);
            if (ldlt.info() != Eigen::Success) {
                throw SolverError("feature-sign: singular active-set system after jitter");
            }
            x_new = ldlt.solve(rhs);
            if (!x_new.allFinite()) {
                throw SolverError("feature-sign: non-finite active-set solution after jitter");
            }
        }

        // Candidates: the analytic point and every sign change along the segment.
        Scalar best_t = Scalar(1);
        Vec best = x_new;
        Scalar best_obj = restricted_objective(Paa, qa, x_new);
        for (Index r = 0; r < n; ++r) {
            if (xa(r) == Scalar(0) || sign_of(x_new(r)) == sign_of(xa(r))) continue;
            const Scalar t = xa(r) / (xa(r) - x_new(r));
            if (!(t > Scalar(0) && t < Scalar(1))) continue;
            Vec cand = xa + t * (x_new - xa);
            cand(r) = Scalar(0);
            const Scalar obj = restricted_objective(Paa, qa, cand);
            if (obj < best_obj || (obj == best_obj && t < best_t)) {
                best_obj = obj;
                best = std::move(cand);
                best_t = t;
            }
        }
        if (best_obj > restricted_objective(Paa, qa, xa)) {
            return false; // no descent available; numerical floor reached
        }
        for (Index r = 0; r < n; ++r) x(active[r]) = best(r);
        grad = P * x - q;
        rebuild_active();
        theta = x.unaryExpr([](Scalar v) { return sign_of(v); });
        return true;
    };

    int iter = 0;
    bool stalled = false;
    while (iter < max_iter && !stalled) {
        // A warm start may not be optimal on its own support; settle that
        // first, since activating on top of it can break the descent guarantee.
        while (!active_optimal() && iter < max_iter) {
            ++iter;
            if (!feature_sign_step()) {
                stalled = true;
                break;
            }
        }
        if (stalled || iter >= max_iter) break;

        // Activate the zero coordinate that violates optimality the most.
        Index pick = -1;
        Scalar pick_val = lambda + tol;
        for (Index i = 0; i < K; ++i) {
            if (x(i) == Scalar(0) && std::abs(grad(i)) > pick_val) {
                pick = i;
                pick_val = std::abs(grad(i));
            }
        }
        if (pick < 0) {
            out.converged = true;
            break;
        }
        theta(pick) = grad(pick) > Scalar(0) ? Scalar(-1) : Scalar(1);
        active.insert(std::upper_bound(active.begin(), active.end(), pick), pick);
        ++iter;
        if (!feature_sign_step()) stalled = true;
    }

    out.iterations = iter;
    out.objective = l1qp_objective(problem, x);
    out.kkt_residual = kkt_residual(problem, x);
    if (!out.converged && out.kkt_residual <= tol) out.converged = true;
    if (stalled && !out.converged && warm_start) {
        // Retry from zero, where every activation starts from an optimal support.
        auto cold = solve_feature_sign(problem, tol, max_iter);
        cold.iterations += iter;
        if (cold.objective <= out.objective) return cold;
    }
    return out;
}

/// Cyclic coordinate descent with exact soft-threshold updates. Used as an
/// independent reference for solve_feature_sign.
///
/// Stops when the largest coordinate change in a sweep falls below `tol`.
/// Throws SolverError when a coordinate with zero curvature has a gradient
/// exceeding lambda (the problem is unbounded along it).
template <class Scalar>
L1QPSolution<Scalar> solve_coordinate_descent_oracle(const L1QP<Scalar>& problem, Scalar tol,
                                                     int max_sweeps = 1'000'000) {
    using Vec = typename L1QP<Scalar>::Vec;
    using Eigen::Index;

    const Index K = problem.size();
    const auto& P = problem.P;
    const auto& q = problem.q;
    const Scalar lambda = problem.lambda;

    L1QPSolution<Scalar> out;
    out.x = Vec::Zero(K);
    Vec& x = out.x;
    Vec Px = Vec::Zero(K);

    int sweep = 0;
    while (sweep < max_sweeps) {
        ++sweep;
        Scalar max_change(0);
        for (Index i = 0; i < K; ++i) {
            const Scalar pii = P(i, i);
            if (!(pii > Scalar(0))) {
                if (std::abs(Px(i) - q(i)) > lambda) {
                    throw SolverError("coordinate descent: zero curvature with nonzero gradient");
                }
                continue;
            }
            const Scalar rho = q(i) - (Px(i) - pii * x(i));
            const Scalar shrunk = std::max(std::abs(rho) - lambda, Scalar(0));
            const Scalar updated = rho > Scalar(0) ? shrunk / pii : -shrunk / pii;
            const Scalar delta = updated - x(i);
            if (delta != Scalar(0)) {
                Px += P.col(i) * delta;
                x(i) = updated;
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        if (sweep % 64 == 0) Px = P * x;
        if (max_change < tol) {
            out.converged = true;
            break;
        }
    }
    out.iterations = sweep;
    out.objective = l1qp_objective(problem, x);
    out.kkt_residual = kkt_residual(problem, x);
    return out;
}

} // namespace stm
