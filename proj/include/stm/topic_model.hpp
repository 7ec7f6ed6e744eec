#pragma once

#include <span>
#include <vector>

#include "stm/dictionary.hpp"
#include "stm/l1qp.hpp"
#include "stm/types.hpp"

namespace stm {

/// Trained sparse topic model: dictionary D (d x K), user profiles U (K x N),
/// item profiles V (K x M) and the objective after every outer iteration
/// (entry 0 is the value at initialization).
struct STMState {
    TopicDictionary<double> dictionary;
    Matrix U;
    Matrix V;
    Hyperparams hyper;
    std::vector<double> objective_trace;

    Index n_topics() const noexcept { return U.rows(); }
    double predict(Index user, Index item) const { return U.col(user).dot(V.col(item)); }
};

/// Settings for the inner L1QP solves.
struct SolverSettings {
    /// KKT tolerance, scaled by max(1, |q|_inf) per subproblem.
    double kkt_tol = 1e-9;
    int max_iter_base = 100;
};

/// 1/2 |X - DV|_F^2 + lambda_R/2 sum_obs (R_ij - U_i'V_j)^2 + lambda_U |U|_1 + lambda_V |V|_1,
/// with the rating term summed over `observed`.
double stm_objective(const STMState& state, const Dataset& data, const RatingIndex& observed);
/// Same, over every observed rating of `data`.
double stm_objective(const STMState& state, const Dataset& data);

/// SP_Vj in canonical form: P = D'D + lambda_R sum_i U_i U_i', q = D'X_j + lambda_R sum_i U_i R_ij
/// over the raters i of item j in `observed`; lambda = lambda_V.
L1QP<double> assemble_item_subproblem(Index item, const STMState& state, const Dataset& data,
                                      const RatingIndex& observed);

/// SP_Ui in canonical form: P = lambda_R sum_j V_j V_j', q = lambda_R sum_j V_j R_ij over the
/// items j rated by user i in `observed`; lambda = lambda_U. A user without
/// ratings yields P = 0, q = 0, whose solution is U_i = 0.
L1QP<double> assemble_user_subproblem(Index user, const STMState& state, const RatingIndex& observed);

/// Block-coordinate descent on the STM objective using only masks.train.
///
/// D starts as K seeded random unit columns, V as the sparse encodings of X,
/// U as zero. Each outer iteration updates D, then every V_j, then every U_i
/// (index order), and stops when the relative objective change drops below
/// hyper.tol or after hyper.max_iters iterations. Throws TrainingError if a
/// block becomes non-finite.
STMState train_stm(const Dataset& data, const SplitMasks& masks, const Hyperparams& hyper,
                   const SolverSettings& solver = {});

/// argmin_v 1/2 |x - Dv|^2 + lambda_v |v|_1, i.e. the L1QP with P = D'D, q = D'x.
Vector encode_cold_start(const TopicDictionary<double>& dict, const Vector& x_new, double lambda_v,
                         const SolverSettings& solver = {});

inline double predict(const STMState& state, Index user, Index item) {
    return state.predict(user, item);
}

/// Candidates ranked by predicted score, descending, ties by ascending item index; first n.
template <class Model>
std::vector<Index> recommend_top(const Model& model, Index user, std::span<const Index> candidates,
                                 Index n);

/// Seeded dictionary of K Gaussian columns normalized to unit length.
Matrix random_unit_columns(Index d, Index K, std::uint64_t seed);

} // namespace stm

#include "stm/detail/recommend_impl.hpp"
