#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "stm/errors.hpp"

namespace stm {

/// d x K dictionary of topic atoms with the Lagrange multipliers of the
/// per-atom constraints |D_k|^2 <= 1.
template <class Scalar>
struct TopicDictionary {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Mat D;
    Vec duals;

    Eigen::Index dim() const noexcept { return D.rows(); }
    Eigen::Index n_atoms() const noexcept { return D.cols(); }
};

template <class Scalar>
struct DictionaryUpdateOptions {
    int max_iter = 200;
    /// Stop once the projected dual gradient (1/2)(|D_k|^2 - 1) is below this.
    Scalar tol = Scalar(1e-11);
};

/// Thrown when the dual ascent exhausts its iteration budget. Carries the
/// best feasible dictionary seen (columns rescaled into the unit ball).
template <class Scalar>
class DictionaryUpdateError : public SolverError {
public:
    DictionaryUpdateError(const std::string& what, TopicDictionary<Scalar> best)
        : SolverError(what), best_(std::move(best)) {}
    const TopicDictionary<Scalar>& best() const noexcept { return best_; }

private:
    TopicDictionary<Scalar> best_;
};

template <class Scalar, class DX, class DV, class DD>
Scalar reconstruction_error(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DD>& D,
                            const Eigen::MatrixBase<DV>& V) {
    return Scalar(0.5) * (X - D * V).squaredNorm();
}

/// Rows of V with nonzero norm; atoms outside this set do not affect X ~ DV.
template <class DV>
std::vector<Eigen::Index> used_atoms(const Eigen::MatrixBase<DV>& V) {
    std::vector<Eigen::Index> live;
    for (Eigen::Index k = 0; k < V.rows(); ++k) {
        if (V.row(k).squaredNorm() > 0) live.push_back(k);
    }
    return live;
}

/// Solves   min_D 1/2 |X - DV|_F^2   s.t. |D_k|^2 <= 1
/// through its Lagrange dual. For multipliers lambda >= 0 the minimizer is
/// D = X V' (diag(lambda) + V V')^{-1}; the multipliers maximize the concave dual
///
///     g(lambda) = 1/2 [ tr(X'X) - tr(X V' (VV' + diag(lambda))^{-1} V X') - sum(lambda) ]
///
/// whose gradient is (|D_k|^2 - 1)/2 and Hessian -(D'D) .* (VV' + diag(lambda))^{-1}.
/// The ascent is a projected Newton method on lambda >= 0 with Armijo
/// backtracking, warm-started from `warm_duals` when given.
///
/// Atoms whose V row is zero are unused: their columns are returned as zero
/// with zero multiplier (see revive_dead_atoms). Throws std::invalid_argument
/// when every row of V is zero.
template <class Scalar, class DX, class DV>
TopicDictionary<Scalar> update_dictionary(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DV>& V,
                                          const std::optional<typename TopicDictionary<Scalar>::Vec>& warm_duals = std::nullopt,
                                          const DictionaryUpdateOptions<Scalar>& options = {}) {
    using Mat = typename TopicDictionary<Scalar>::Mat;
    using Vec = typename TopicDictionary<Scalar>::Vec;
    using Eigen::Index;

    if (X.cols() != V.cols()) throw std::invalid_argument("update_dictionary: X and V disagree on item count");
    const Index K = V.rows();
    const auto live = used_atoms(V);
    if (live.empty()) throw std::invalid_argument("update_dictionary: every atom is unused (V == 0)");
    const auto L = static_cast<Index>(live.size());

    Mat Vl(L, V.cols());
    for (Index r = 0; r < L; ++r) Vl.row(r) = V.row(live[r]);
    const Mat B = X * Vl.transpose();           // d x L
    const Mat G = Vl * Vl.transpose();          // L x L
    const Scalar xx = X.squaredNorm();
    const Scalar ridge_base = std::max(G.trace() / Scalar(L), Scalar(1e-300));

    Vec lambda = Vec::Zero(L);
    if (warm_duals && warm_duals->size() == K) {
        for (Index r = 0; r < L; ++r) lambda(r) = std::max(Scalar(0), (*warm_duals)(live[r]));
    }

    struct Eval {
        Mat D;
        Mat Minv;
        Vec grad;
        Scalar value;
    };
    auto evaluate = [&](const Vec& lam) {
        Mat M = G;
        M.diagonal() += lam;
        Eigen::LLT<Mat> llt(M);
        if (llt.info() != Eigen::Success || !(llt.rcond() > Scalar(1e-13))) {
            // Collinear atom usage with inactive constraints: the primal
            // minimizer is not unique, pick the one nearest the ridge limit.
            M.diagonal().array() += Scalar(1e-10) * ridge_base;
            llt.compute(M);
        }
        Eval e;
        e.Minv = llt.solve(Mat::Identity(L, L));
        e.D = B * e.Minv;
        e.grad = Scalar(0.5) * (e.D.colwise().squaredNorm().transpose().array() - Scalar(1)).matrix();
        e.value = Scalar(0.5) * (xx - B.cwiseProduct(e.D).sum() - lam.sum());
        return e;
    };
    auto projected_gradient = [&](const Vec& lam, const Vec& grad) {
        Scalar worst(0);
        for (Index r = 0; r < L; ++r) {
            worst = std::max(worst, lam(r) > Scalar(0) ? std::abs(grad(r)) : std::max(grad(r), Scalar(0)));
        }
        return worst;
    };

    Eval cur = evaluate(lambda);
    bool converged = projected_gradient(lambda, cur.grad) <= options.tol;
    for (int it = 0; it < options.max_iter && !converged; ++it) {
        // Free coordinates: positive multipliers, or zero ones the gradient pushes up.
        std::vector<Index> free;
        for (Index r = 0; r < L; ++r) {
            if (lambda(r) > Scalar(0) || cur.grad(r) > Scalar(0)) free.push_back(r);
        }
        const auto F = static_cast<Index>(free.size());
        Mat negH(F, F);
        Vec gF(F);
        for (Index a = 0; a < F; ++a) {
            gF(a) = cur.grad(free[a]);
            for (Index b = 0; b < F; ++b) {
                negH(a, b) = cur.D.col(free[a]).dot(cur.D.col(free[b])) * cur.Minv(free[a], free[b]);
            }
        }
        negH.diagonal().array() += Scalar(1e-14) * std::max(negH.diagonal().maxCoeff(), Scalar(1));
        Eigen::LDLT<Mat> ldlt(negH);
        Vec step = ldlt.solve(gF);
        if (!step.allFinite() || step.dot(gF) <= Scalar(0)) step = gF;  // fall back to gradient ascent

        Vec direction = Vec::Zero(L);
        for (Index a = 0; a < F; ++a) direction(free[a]) = step(a);

        Scalar t(1);
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt, t *= Scalar(0.5)) {
            const Vec trial = (lambda + t * direction).cwiseMax(Scalar(0));
            Eval next = evaluate(trial);
            if (next.value >= cur.value + Scalar(1e-4) * cur.grad.dot(trial - lambda)) {
                lambda = trial;
                cur = std::move(next);
                accepted = true;
                break;
            }
        }
        converged = projected_gradient(lambda, cur.grad) <= options.tol;
        if (!accepted) break;
    }

    TopicDictionary<Scalar> out;
    out.D = Mat::Zero(X.rows(), K);
    out.duals = Vec::Zero(K);
    for (Index r = 0; r < L; ++r) {
        auto col = cur.D.col(r);
        const Scalar norm2 = col.squaredNorm();
        if (norm2 > Scalar(1)) col /= std::sqrt(norm2);
        out.D.col(live[r]) = col;
        out.duals(live[r]) = lambda(r);
    }
    // Stalled line search at a point that already satisfies the constraints
    // to working precision is accepted; anything looser is an error.
    if (!converged && projected_gradient(lambda, cur.grad) > Scalar(1e-7)) {
        throw DictionaryUpdateError<Scalar>("update_dictionary: dual ascent did not converge", out);
    }
    return out;
}

/// Replaces every unused atom (zero row in V) with the normalized residual
/// X_j - D V_j of the worst-reconstructed items, taken in decreasing residual
/// order (lowest index on ties). Atoms whose residual is numerically zero get
/// a random unit vector drawn from `seed`. Multipliers of replaced atoms reset to 0.
template <class Scalar, class DX, class DV>
TopicDictionary<Scalar> revive_dead_atoms(TopicDictionary<Scalar> dict, const Eigen::MatrixBase<DX>& X,
                                          const Eigen::MatrixBase<DV>& V, std::uint64_t seed) {
    using Mat = typename TopicDictionary<Scalar>::Mat;
    using Vec = typename TopicDictionary<Scalar>::Vec;
    using Eigen::Index;

    std::vector<Index> dead;
    for (Index k = 0; k < V.rows(); ++k) {
        if (V.row(k).squaredNorm() == 0) dead.push_back(k);
    }
    if (dead.empty()) return dict;

    const Mat residual = X - dict.D * V;
    const Vec norms = residual.colwise().norm().transpose();
    std::vector<Index> order(static_cast<std::size_t>(norms.size()));
    for (Index j = 0; j < norms.size(); ++j) order[static_cast<std::size_t>(j)] = j;
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return norms(a) > norms(b); });

    const Scalar floor = Scalar(1e-12) * std::max(Scalar(1), X.cwiseAbs().maxCoeff());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::size_t next = 0;
    for (Index k : dead) {
        Vec atom;
        if (next < order.size() && norms(order[next]) > floor) {
            atom = residual.col(order[next]) / norms(order[next]);
            ++next;
        } else {
            atom = Vec(dict.D.rows());
            do {
                for (Index r = 0; r < atom.size(); ++r) atom(r) = static_cast<Scalar>(gauss(rng));
            } while (atom.norm() == Scalar(0));
            atom.normalize();
        }
        dict.D.col(k) = atom;
        if (dict.duals.size() == dict.D.cols()) dict.duals(k) = Scalar(0);
    }
    return dict;
}

} // namespace stm
