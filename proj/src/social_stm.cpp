#include "stm/social_stm.hpp"

#include "training_common.hpp"

namespace stm {

namespace {

const SocialGraph& require_social(const Dataset& data, const char* who) {
    if (!data.social) throw std::invalid_argument(std::string(who) + ": dataset has no social graph");
    return *data.social;
}

} // namespace

double sostm_objective(const SoSTMState& state, const Dataset& data, const RatingIndex& observed) {
    const auto& social = require_social(data, "sostm_objective");
    const auto& h = state.hyper;
    return stm_objective(state, data, observed) +
           (h.lambda_s * detail::social_term(state.U, state.Z, social) + h.lambda_z * state.Z.squaredNorm());
}

double sostm_objective(const SoSTMState& state, const Dataset& data) {
    const auto masks = all_train(data.ratings);
    return sostm_objective(state, data, RatingIndex(data.ratings, masks.train));
}

L1QP<double> assemble_user_subproblem_social(Index user, const SoSTMState& state, const Dataset& data,
                                             const RatingIndex& observed) {
    const auto& social = require_social(data, "assemble_user_subproblem_social");
    auto p = assemble_user_subproblem(user, state, observed);
    const double lambda_s = state.hyper.lambda_s;
    if (lambda_s == 0.0) return p;
    const auto links = social.neighbors(user);
    if (links.empty()) return p;
    const auto n = static_cast<Index>(links.size());
    Matrix Zh(state.Z.rows(), n);
    Vector s(n);
    for (Index k = 0; k < n; ++k) {
        Zh.col(k) = state.Z.col(links[static_cast<std::size_t>(k)].user);
        s(k) = links[static_cast<std::size_t>(k)].similarity;
    }
    p.P.noalias() += lambda_s * Zh * Zh.transpose();
    p.q.noalias() += lambda_s * Zh * s;
    return p;
}

Vector update_factor_profile(Index user, const SoSTMState& state, const Dataset& data) {
    const auto& social = require_social(data, "update_factor_profile");
    const Index K = state.U.rows();
    const double lambda_s = state.hyper.lambda_s;
    const auto links = social.neighbors(user);
    if (lambda_s <= 0.0 || links.empty()) return Vector::Zero(K);
    const auto n = static_cast<Index>(links.size());
    Matrix Uh(K, n);
    Vector s(n);
    for (Index k = 0; k < n; ++k) {
        Uh.col(k) = state.U.col(links[static_cast<std::size_t>(k)].user);
        s(k) = links[static_cast<std::size_t>(k)].similarity;
    }
    Matrix A = Uh * Uh.transpose();
    A.diagonal().array() += 2.0 * state.hyper.lambda_z / lambda_s;
    const Vector b = Uh * s;
    if (state.hyper.lambda_z > 0.0) return A.llt().solve(b);
    // Without the ridge term the system may be singular; take the minimum-norm solution.
    return A.completeOrthogonalDecomposition().solve(b);
}

SoSTMState train_sostm(const Dataset& data, const SplitMasks& masks, const Hyperparams& hyper,
                       const SolverSettings& solver) {
    require_social(data, "train_sostm");
    return detail::train_topic_model(data, masks, hyper, solver, true);
}

} // namespace stm
