#pragma once

#include <cstdint>
#include <vector>

#include "stm/topic_model.hpp"
#include "stm/types.hpp"

namespace stm {

// ---------------------------------------------------------------------------
// PMF / SoRec
// ---------------------------------------------------------------------------

struct FactorConfig {
    Index latent_dim = 30;
    double reg = 0.1;
    /// Weight of the social reconstruction term; 0 gives plain PMF.
    double lambda_social = 0.0;
    /// Initial step size; halved whenever a step would increase the loss.
    double lr = 0.01;
    int iters = 200;
    std::uint64_t seed = 0;
};

/// Latent factor model: U (l x N), V (l x M) and, for SoRec, social factors Z (l x N).
struct FactorModel {
    Matrix U;
    Matrix V;
    Matrix Z;
    FactorConfig config;
    std::vector<double> loss_trace;

    Index latent_dim() const noexcept { return U.rows(); }
    double predict(Index user, Index item) const { return U.col(user).dot(V.col(item)); }
};

/// Loss and gradient of
///
///   sum_obs (r_ij - u_i'v_j)^2 + reg (|U|_F^2 + |V|_F^2)
///     + lambda_social [ sum_{(i,m) in I^S} (S_im - u_i'z_m)^2 + reg |Z|_F^2 ]
///
/// The bracketed term is present only when lambda_social > 0 and a social
/// graph is given; Z is then part of the parameters.
class FactorObjective {
public:
    FactorObjective(const RatingIndex& observed, const SocialGraph* social, double reg,
                    double lambda_social);

    bool uses_social() const noexcept { return social_ != nullptr; }
    double value(const Matrix& U, const Matrix& V, const Matrix& Z) const;
    /// Writes dL/dU, dL/dV, dL/dZ (gZ untouched when social is off).
    void gradient(const Matrix& U, const Matrix& V, const Matrix& Z, Matrix& gU, Matrix& gV,
                  Matrix& gZ) const;

private:
    const RatingIndex* observed_;
    const SocialGraph* social_;
    double reg_;
    double lambda_social_;
};

/// Full-batch gradient descent on the PMF loss over masks.train. Factors are
/// initialized N(0, 0.1^2) from config.seed. Throws TrainingError when the
/// loss cannot be decreased with any step size (divergence).
FactorModel train_pmf(const Dataset& data, const SplitMasks& masks, FactorConfig config);

/// PMF plus social reconstruction through factor profiles Z. Requires a
/// social graph. With lambda_social == 0 the result equals train_pmf.
FactorModel train_sorec(const Dataset& data, const SplitMasks& masks, FactorConfig config);

// ---------------------------------------------------------------------------
// CTR-I: STM with L2 instead of L1 profile penalties
// ---------------------------------------------------------------------------

/// 1/2 |X - DV|_F^2 + lambda_R/2 sum_obs (R_ij - U_i'V_j)^2 + lambda_U |U|_F^2 + lambda_V/2 |V|_F^2
double ctr_objective(const STMState& state, const Dataset& data, const RatingIndex& observed);

/// (D'D + lambda_R U^U^' + lambda_V I)^{-1} (D'X_j + lambda_R U^ R^_j)
Vector ctr_item_update(Index item, const STMState& state, const Dataset& data, const RatingIndex& observed);

/// (lambda_R V^V^' + 2 lambda_U I)^{-1} lambda_R V^ R^_i
Vector ctr_user_update(Index user, const STMState& state, const RatingIndex& observed);

/// Same schedule as train_stm (D, then V, then U) with closed-form ridge
/// profile updates. objective_trace holds ctr_objective values.
STMState train_ctr_i(const Dataset& data, const SplitMasks& masks, const Hyperparams& hyper);

} // namespace stm
