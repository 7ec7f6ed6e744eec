#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "stm/dictionary.hpp"

using namespace stm;

TEST(Dictionary, MatchesProjectedGradientOracle) {
    std::mt19937_64 rng(11);
    for (int n = 0; n < 20; ++n) {
        const Index d = 3 + n % 7, K = 2 + n % 5, M = K + 4;
        const Matrix X = (n % 2 ? 4.0 : 0.3) * oracle::gaussian(d, M, rng);
        const Matrix V = oracle::gaussian(K, M, rng);
        const auto dict = update_dictionary<double>(X, V);
        const Matrix ref = oracle::dictionary_projected_gradient(X, V);
        EXPECT_NEAR(oracle::dictionary_objective(X, dict.D, V), oracle::dictionary_objective(X, ref, V), 1e-7);
        EXPECT_LE((dict.D - ref).cwiseAbs().maxCoeff(), 1e-4);
    }
}

TEST(Dictionary, UnconstrainedCaseIsLeastSquares) {
    // Small X: the least-squares solution already lies inside the unit ball.
    std::mt19937_64 rng(12);
    const Matrix V = oracle::gaussian(3, 20, rng);
    const Matrix X = 0.01 * oracle::gaussian(5, 20, rng);
    const auto dict = update_dictionary<double>(X, V);
    const Matrix ls = X * V.transpose() * (V * V.transpose()).inverse();
    EXPECT_LE((dict.D - ls).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(dict.duals.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Dictionary, KktConditions) {
    std::mt19937_64 rng(13);
    const Matrix V = oracle::gaussian(6, 30, rng);
    const Matrix X = 10.0 * oracle::gaussian(8, 30, rng);
    const auto dict = update_dictionary<double>(X, V);
    // Stationarity: (D V - X) V' + D diag(lambda) = 0.
    const Matrix stationarity = (dict.D * V - X) * V.transpose() + dict.D * dict.duals.asDiagonal();
    EXPECT_LE(stationarity.cwiseAbs().maxCoeff(), 1e-8 * X.squaredNorm());
    for (Index k = 0; k < 6; ++k) {
        const double n2 = dict.D.col(k).squaredNorm();
        EXPECT_LE(n2, 1.0 + 1e-10);
        EXPECT_GE(dict.duals(k), 0.0);
        EXPECT_LE(std::abs(dict.duals(k) * (n2 - 1.0)), 1e-8);
    }
}

TEST(Dictionary, WarmStartAgrees) {
    std::mt19937_64 rng(14);
    const Matrix V = oracle::gaussian(5, 25, rng);
    const Matrix X = 3.0 * oracle::gaussian(7, 25, rng);
    const auto cold = update_dictionary<double>(X, V);
    const auto warm = update_dictionary<double>(X, V, std::optional<Vector>(cold.duals));
    EXPECT_LE((cold.D - warm.D).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Dictionary, DeadAtomsExcludedAndRevived) {
    std::mt19937_64 rng(15);
    Matrix V = oracle::gaussian(4, 20, rng);
    V.row(2).setZero();
    const Matrix X = 2.0 * oracle::gaussian(6, 20, rng);
    const auto dict = update_dictionary<double>(X, V);
    EXPECT_EQ(dict.D.col(2).norm(), 0.0);
    EXPECT_EQ(used_atoms(V), (std::vector<Index>{0, 1, 3}));
    const auto revived = revive_dead_atoms(dict, X, V, 1);
    EXPECT_NEAR(revived.D.col(2).norm(), 1.0, 1e-12);
    EXPECT_EQ(revived.duals(2), 0.0);
    EXPECT_EQ(revived.D.col(0), dict.D.col(0));
    // The revived atom is the normalized residual of the worst-fit item.
    const Matrix R = X - dict.D * V;
    Index worst = 0;
    R.colwise().norm().maxCoeff(&worst);
    EXPECT_LE((revived.D.col(2) - R.col(worst).normalized()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dictionary, ErrorsOnAllZeroV) {
    const Matrix X = Matrix::Ones(3, 4);
    EXPECT_THROW(update_dictionary<double>(X, Matrix::Zero(2, 4)), std::invalid_argument);
    EXPECT_THROW(update_dictionary<double>(X, Matrix::Ones(2, 5)), std::invalid_argument);
}

TEST(Dictionary, CollinearUsageStaysFeasible) {
    std::mt19937_64 rng(16);
    Matrix V = oracle::gaussian(3, 10, rng);
    V.row(1) = V.row(0);
    const Matrix X = 5.0 * oracle::gaussian(4, 10, rng);
    const auto dict = update_dictionary<double>(X, V);
    for (Index k = 0; k < 3; ++k) EXPECT_LE(dict.D.col(k).squaredNorm(), 1.0 + 1e-8);
    const Matrix ref = oracle::dictionary_projected_gradient(X, V, 400000, 1e-15);
    EXPECT_NEAR(oracle::dictionary_objective(X, dict.D, V), oracle::dictionary_objective(X, ref, V), 1e-6);
}
