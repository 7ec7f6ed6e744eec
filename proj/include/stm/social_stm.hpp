#pragma once

#include "stm/topic_model.hpp"

namespace stm {

/// STM extended with factor profiles Z (K x N); U'Z reconstructs the social matrix S.
struct SoSTMState : STMState {
    Matrix Z;
};

/// stm_objective + lambda_S/2 sum_{(i,m) in I^S} (S_im - U_i'Z_m)^2 + lambda_Z |Z|_F^2.
/// Every undirected link contributes both ordered pairs. Throws
/// std::invalid_argument when data has no social graph.
double sostm_objective(const SoSTMState& state, const Dataset& data, const RatingIndex& observed);
double sostm_objective(const SoSTMState& state, const Dataset& data);

/// SP_Ui with social hints: P = lambda_S sum_m Z_m Z_m' + lambda_R sum_j V_j V_j',
/// q = lambda_S sum_m Z_m S_im + lambda_R sum_j V_j R_ij; lambda = lambda_U.
L1QP<double> assemble_user_subproblem_social(Index user, const SoSTMState& state, const Dataset& data,
                                             const RatingIndex& observed);

/// Closed-form SP_Zi: (sum_m U_m U_m' + (2 lambda_Z / lambda_S) I)^{-1} sum_m U_m S_mi over the
/// users m linked to i. Returns zero when i has no links or lambda_S == 0.
Vector update_factor_profile(Index user, const SoSTMState& state, const Dataset& data);

/// Same schedule as train_stm with the social user subproblem and a fourth
/// phase updating every Z_i. Z starts at zero. With lambda_S == 0 the run is
/// identical to train_stm. Throws std::invalid_argument without a social graph.
SoSTMState train_sostm(const Dataset& data, const SplitMasks& masks, const Hyperparams& hyper,
                       const SolverSettings& solver = {});

} // namespace stm
