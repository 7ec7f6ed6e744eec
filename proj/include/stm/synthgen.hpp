#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "stm/types.hpp"

namespace stm {

struct SynthConfig {
    Index d = 32;
    Index K = 8;
    Index N = 100;
    Index M = 200;
    /// Fraction of the K topics active in each planted user / item profile.
    double user_sparsity = 0.25;
    double item_sparsity = 0.25;
    /// Likes per user as a fraction of M.
    double rating_density = 0.1;
    double feature_noise = 0.05;
    double rating_noise = 0.0;
    double social_noise = 0.05;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument for degenerate configurations.
    void validate() const;
};

/// Named configurations: "small" (K=8, N=100, M=200), "sparse" (planted
/// profile density 0.01), "flickr" (like density 8.025e-4). Throws
/// std::invalid_argument for unknown names.
SynthConfig synth_preset(const std::string& name);

struct PlantedModel {
    Dataset data;
    Matrix D; ///< d x K, unit columns
    Matrix U; ///< K x N, nonnegative, ceil(user_sparsity*K) nonzeros per column
    Matrix V; ///< K x M, nonnegative, ceil(item_sparsity*K) nonzeros per column
    /// mAPS of ranking all items by the planted affinity U'V against each user's likes.
    double oracle_maps = 0.0;
    Index likes_per_user = 0;

    double affinity(Index user, Index item) const { return U.col(user).dot(V.col(item)); }
};

/// Planted topic model. X = DV + feature_noise * N(0,1); each user likes the
/// round(rating_density*M) items with the highest affinity U_i'V_j (plus
/// rating_noise * N(0,1)), ties by index; social links join users whose profile
/// cosine, perturbed by social_noise * N(0,1) and clamped to [0,1], is >= 0.5.
/// Deterministic in config.seed.
PlantedModel generate_planted(const SynthConfig& config);

/// Writes the planted factors and the oracle mAPS as JSON.
void write_truth(const PlantedModel& model, const SynthConfig& config, const std::filesystem::path& file);

} // namespace stm
