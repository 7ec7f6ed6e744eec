#pragma once

#include <concepts>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "stm/topic_model.hpp"
#include "stm/types.hpp"

namespace stm {

/// Score of item `item` for user `user`; higher ranks first.
using Scorer = std::function<double(Index user, Index item)>;

template <class Model>
concept RankingModel = requires(const Model& m, Index i) {
    { m.predict(i, i) } -> std::convertible_to<double>;
};

template <RankingModel Model>
Scorer scorer_of(const Model& model) {
    return [&model](Index i, Index j) { return model.predict(i, j); };
}

/// Average percentile score. Items are ranked by descending score, ties share
/// their average (1-based) rank, and rank r maps to percentile 100 r / M.
/// Returns the mean percentile over `liked` (positions into `scores`).
/// Lower is better. Throws std::invalid_argument for an empty or out-of-range liked set.
double aps(std::span<const double> scores, std::span<const Index> liked);

/// Percentiles 100 r / M (average ranks for ties) of every position in `scores`.
std::vector<double> percentiles(std::span<const double> scores);

struct PpsPoint {
    int percentile;
    double cumulative_fraction;
};

struct RankingReport {
    std::vector<std::pair<Index, double>> user_aps; ///< (user, APS)
    double maps = 0.0;
    std::vector<PpsPoint> pps_curve;
    Index n_evaluated_users = 0;
    Index n_excluded_users = 0; ///< test-block users without test likes
    Index n_candidate_items = 0;
};

/// Ranks the test-block items (masks.test_items, or the items of masks.test
/// when that list is empty) for every user with at least one test like, and
/// averages the per-user APS. Also fills the P-PS curve over the pooled test
/// likes. Throws std::invalid_argument when no user can be evaluated.
RankingReport maps(const Scorer& scorer, const Dataset& data, const SplitMasks& masks);

template <RankingModel Model>
RankingReport maps(const Model& model, const Dataset& data, const SplitMasks& masks) {
    return maps(scorer_of(model), data, masks);
}

/// Cumulative fraction of all test likes whose percentile is <= p, for p = 1..100.
std::vector<PpsPoint> pps_curve(const Scorer& scorer, const Dataset& data, const SplitMasks& masks);

/// Fraction of entries with |value| > eps.
double profile_sparsity(const Matrix& profiles, double eps = 1e-8);

/// Items ordered by V(topic, j) descending, ties by index; first n.
std::vector<Index> topic_top_items(const Matrix& V, Index topic, Index n);

struct ColdStartPoint {
    double train_fraction;
    Index n_train_items;
    double maps;
    Index n_evaluated_users;
};

struct ColdStartReport {
    std::vector<Index> unseen_items;
    std::vector<ColdStartPoint> points;
    /// Ratings on unseen items that reached any training run (always 0).
    Index unseen_ratings_in_training = 0;
};

/// Holds out `unseen_fraction` of the items (features and ratings). For each
/// train fraction f, trains STM on the ratings and features of the first f
/// share of a seeded permutation of the remaining items (nested subsets),
/// encodes the unseen items with the learned dictionary, and reports mAPS of
/// ranking the unseen pool for every user who likes at least one unseen item.
/// Throws std::invalid_argument on invalid fractions or when too little data remains.
ColdStartReport cold_start_protocol(const Dataset& data, std::uint64_t seed, const Hyperparams& hyper,
                                    double unseen_fraction = 0.20,
                                    std::vector<double> train_fractions = {1.0, 0.8, 0.6, 0.4, 0.2});

} // namespace stm
