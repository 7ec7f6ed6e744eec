#pragma once

// Pieces shared by the block-coordinate trainers (STM, SoSTM, CTR-I).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "stm/social_stm.hpp"

namespace stm::detail {

inline double feature_term(const Matrix& X, const Matrix& D, const Matrix& V) {
    return 0.5 * (X - D * V).squaredNorm();
}

/// 1/2 sum over observed (R_ij - U_i'V_j)^2.
double rating_term(const Matrix& U, const Matrix& V, const RatingIndex& observed);

/// 1/2 sum over ordered linked pairs (S_im - U_i'Z_m)^2.
double social_term(const Matrix& U, const Matrix& Z, const SocialGraph& social);

/// Minimizes the reconstruction term over D, keeps the incumbent if the
/// update does not improve it, then revives unused atoms.
void dictionary_phase(const Matrix& X, const Matrix& V, TopicDictionary<double>& dict,
                      std::uint64_t seed);

/// Solves `problem` warm-started at `incumbent`; returns the incumbent unless
/// the solution lowers the subproblem objective.
Vector solve_guarded(const L1QP<double>& problem, const Vector& incumbent,
                     const SolverSettings& solver);

void check_finite(const Matrix& block, const char* name, int iteration);

inline bool objective_settled(double previous, double current, double tol) {
    const double scale = std::max(std::abs(previous), 1e-300);
    return std::abs(previous - current) / scale < tol;
}

/// Shared STM/SoSTM trainer. `social` enables the social user subproblem and
/// the Z phase (both inert when lambda_S == 0).
SoSTMState train_topic_model(const Dataset& data, const SplitMasks& masks, const Hyperparams& hyper,
                             const SolverSettings& solver, bool social);

} // namespace stm::detail
