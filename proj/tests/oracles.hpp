#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. Nothing here calls the solvers under test.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "stm/baselines.hpp"
#include "stm/social_stm.hpp"
#include "stm/synthgen.hpp"

namespace oracle {

using stm::Index;
using stm::Matrix;
using stm::Vector;

inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> g(0.0, sd);
    Matrix m(rows, cols);
    for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < rows; ++r) m(r, c) = g(rng);
    return m;
}

/// Random L1QP with P = B'B/m, B of m >= K Gaussian rows (positive definite
/// almost surely); lambda a random share of |q|_inf so some coordinates stay zero.
inline stm::L1QP<double> random_l1qp(Index K, std::mt19937_64& rng) {
    std::uniform_int_distribution<Index> rows(K, 2 * K + 2);
    const Index m = rows(rng);
    const Matrix B = gaussian(m, K, rng);
    stm::L1QP<double> p;
    p.P = B.transpose() * B / static_cast<double>(m);
    p.P = 0.5 * (p.P + p.P.transpose()).eval();
    p.q = gaussian(K, 1, rng);
    std::uniform_real_distribution<double> share(0.05, 0.9);
    p.lambda = share(rng) * p.q.cwiseAbs().maxCoeff();
    return p;
}

inline double dictionary_objective(const Matrix& X, const Matrix& D, const Matrix& V) {
    double s = 0.0;
    for (Index j = 0; j < X.cols(); ++j)
        for (Index r = 0; r < X.rows(); ++r) {
            double pred = 0.0;
            for (Index k = 0; k < D.cols(); ++k) pred += D(r, k) * V(k, j);
            s += (X(r, j) - pred) * (X(r, j) - pred);
        }
    return 0.5 * s;
}

/// FISTA with gradient restart on min 1/2|X - DV|^2 s.t. |D_k| <= 1.
inline Matrix dictionary_projected_gradient(const Matrix& X, const Matrix& V, int max_iter = 400000,
                                            double step_tol = 1e-14) {
    const Matrix G = V * V.transpose();
    const Matrix B = X * V.transpose();
    const double L = std::max(Eigen::SelfAdjointEigenSolver<Matrix>(G).eigenvalues().maxCoeff(), 1e-12);
    auto project = [](Matrix D) {
        for (Index k = 0; k < D.cols(); ++k) {
            const double n = D.col(k).norm();
            if (n > 1.0) D.col(k) /= n;
        }
        return D;
    };
    Matrix D = Matrix::Zero(X.rows(), V.rows());
    Matrix Y = D;
    double t = 1.0;
    for (int it = 0; it < max_iter; ++it) {
        const Matrix next = project(Y - (Y * G - B) / L);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double change = (next - D).norm();
        // Restart momentum when it points uphill.
        if ((Y - next).cwiseProduct(next - D).sum() > 0.0) {
            Y = next;
            t = 1.0;
        } else {
            Y = next + ((t - 1.0) / t_next) * (next - D);
            t = t_next;
        }
        D = next;
        if (change < step_tol) break;
    }
    return D;
}

inline std::set<std::pair<Index, Index>> mask_set(const stm::Dataset& data, const std::vector<Index>& entries) {
    std::set<std::pair<Index, Index>> s;
    for (Index e : entries) s.insert({data.ratings[e].user, data.ratings[e].item});
    return s;
}

inline double rating_value(const stm::Dataset& data, Index i, Index j) {
    const auto e = data.ratings.find(i, j);
    return e ? data.ratings[*e].value : 0.0;
}

/// STM objective by explicit loops over every (user, item) pair.
inline double stm_objective(const stm::STMState& s, const stm::Dataset& data, const std::vector<Index>& train) {
    const auto mask = mask_set(data, train);
    const auto& h = s.hyper;
    double value = dictionary_objective(data.features.X, s.dictionary.D, s.V);
    for (Index i = 0; i < data.n_users(); ++i)
        for (Index j = 0; j < data.n_items(); ++j) {
            if (!mask.count({i, j})) continue;
            double pred = 0.0;
            for (Index k = 0; k < s.U.rows(); ++k) pred += s.U(k, i) * s.V(k, j);
            const double e = rating_value(data, i, j) - pred;
            value += 0.5 * h.lambda_r * e * e;
        }
    for (Index k = 0; k < s.U.size(); ++k) value += h.lambda_u * std::abs(s.U.data()[k]);
    for (Index k = 0; k < s.V.size(); ++k) value += h.lambda_v * std::abs(s.V.data()[k]);
    return value;
}

/// Dense N x N social matrix and its mask.
inline std::pair<Matrix, Matrix> dense_social(const stm::SocialGraph& g) {
    const Index N = g.n_users();
    Matrix S = Matrix::Zero(N, N), mask = Matrix::Zero(N, N);
    for (const auto& l : g.links()) {
        S(l.a, l.b) = S(l.b, l.a) = l.similarity;
        mask(l.a, l.b) = mask(l.b, l.a) = 1.0;
    }
    return {S, mask};
}

inline double sostm_objective(const stm::SoSTMState& s, const stm::Dataset& data, const std::vector<Index>& train) {
    const auto [S, mask] = dense_social(*data.social);
    double social = 0.0;
    for (Index i = 0; i < S.rows(); ++i)
        for (Index m = 0; m < S.cols(); ++m) {
            if (mask(i, m) == 0.0) continue;
            const double e = S(i, m) - s.U.col(i).dot(s.Z.col(m));
            social += e * e;
        }
    return stm_objective(s, data, train) + 0.5 * s.hyper.lambda_s * social +
           s.hyper.lambda_z * s.Z.squaredNorm();
}

/// Z_i from the normal equations of lambda_S/2 sum_m (S_mi - U_m'Z_i)^2 + lambda_Z |Z_i|^2, by full-pivot LU.
inline Vector z_update(const stm::SoSTMState& s, const stm::Dataset& data, Index i) {
    const auto [S, mask] = dense_social(*data.social);
    const Index K = s.U.rows();
    Matrix A = Matrix::Zero(K, K);
    Vector b = Vector::Zero(K);
    bool any = false;
    for (Index m = 0; m < S.rows(); ++m) {
        if (mask(m, i) == 0.0) continue;
        any = true;
        A += s.hyper.lambda_s * s.U.col(m) * s.U.col(m).transpose();
        b += s.hyper.lambda_s * S(m, i) * s.U.col(m);
    }
    if (!any) return Vector::Zero(K);
    A += 2.0 * s.hyper.lambda_z * Matrix::Identity(K, K);
    return A.fullPivLu().solve(b);
}

/// Minimizer over V_j of the CTR-I objective, by full-pivot LU.
inline Vector ctr_item(const stm::STMState& s, const stm::Dataset& data, const std::vector<Index>& train, Index j) {
    const auto mask = mask_set(data, train);
    const auto& h = s.hyper;
    const Matrix& D = s.dictionary.D;
    const Index K = D.cols();
    Matrix A = D.transpose() * D + h.lambda_v * Matrix::Identity(K, K);
    Vector b = D.transpose() * data.features.X.col(j);
    for (Index i = 0; i < data.n_users(); ++i) {
        if (!mask.count({i, j})) continue;
        A += h.lambda_r * s.U.col(i) * s.U.col(i).transpose();
        b += h.lambda_r * rating_value(data, i, j) * s.U.col(i);
    }
    return A.fullPivLu().solve(b);
}

inline Vector ctr_user(const stm::STMState& s, const stm::Dataset& data, const std::vector<Index>& train, Index i) {
    const auto mask = mask_set(data, train);
    const auto& h = s.hyper;
    const Index K = s.V.rows();
    Matrix A = 2.0 * h.lambda_u * Matrix::Identity(K, K);
    Vector b = Vector::Zero(K);
    for (Index j = 0; j < data.n_items(); ++j) {
        if (!mask.count({i, j})) continue;
        A += h.lambda_r * s.V.col(j) * s.V.col(j).transpose();
        b += h.lambda_r * rating_value(data, i, j) * s.V.col(j);
    }
    return A.fullPivLu().solve(b);
}

/// Central finite differences of FactorObjective::value over every parameter.
inline void factor_gradient_fd(const stm::FactorObjective& f, const Matrix& U, const Matrix& V, const Matrix& Z,
                               Matrix& gU, Matrix& gV, Matrix& gZ, double h = 1e-6) {
    auto diff = [&](Matrix& P, Matrix& g, int which) {
        g = Matrix::Zero(P.rows(), P.cols());
        for (Index k = 0; k < P.size(); ++k) {
            const double keep = P.data()[k];
            P.data()[k] = keep + h;
            Matrix Up = U, Vp = V, Zp = Z;
            (which == 0 ? Up : which == 1 ? Vp : Zp) = P;
            const double hi = f.value(Up, Vp, Zp);
            P.data()[k] = keep - h;
            (which == 0 ? Up : which == 1 ? Vp : Zp) = P;
            const double lo = f.value(Up, Vp, Zp);
            P.data()[k] = keep;
            g.data()[k] = (hi - lo) / (2.0 * h);
        }
    };
    Matrix Uc = U, Vc = V, Zc = Z;
    diff(Uc, gU, 0);
    diff(Vc, gV, 1);
    if (f.uses_social()) diff(Zc, gZ, 2);
}

/// Small planted dataset for property tests.
inline stm::PlantedModel tiny_planted(std::uint64_t seed, stm::Index N = 30, stm::Index M = 50) {
    stm::SynthConfig c;
    c.d = 12;
    c.K = 4;
    c.N = N;
    c.M = M;
    c.user_sparsity = 0.5;
    c.item_sparsity = 0.5;
    c.rating_density = 0.2;
    c.seed = seed;
    return stm::generate_planted(c);
}

} // namespace oracle
