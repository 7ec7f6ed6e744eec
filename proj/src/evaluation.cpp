#include "stm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "stm/split.hpp"

namespace stm {

std::vector<double> percentiles(std::span<const double> scores) {
    const auto M = scores.size();
    std::vector<std::size_t> order(M);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<double> pct(M);
    std::size_t start = 0;
    while (start < M) {
        std::size_t end = start + 1;
        while (end < M && scores[order[end]] == scores[order[start]]) ++end;
        // Ranks start+1 .. end share their mean.
        const double rank = 0.5 * static_cast<double>(start + 1 + end);
        for (std::size_t k = start; k < end; ++k) {
            pct[order[k]] = 100.0 * rank / static_cast<double>(M);
        }
        start = end;
    }
    return pct;
}

double aps(std::span<const double> scores, std::span<const Index> liked) {
    if (liked.empty()) throw std::invalid_argument("aps: liked set is empty");
    for (Index j : liked) {
        if (j < 0 || static_cast<std::size_t>(j) >= scores.size()) {
            throw std::invalid_argument("aps: liked index outside the scored items");
        }
    }
    const auto pct = percentiles(scores);
    double sum = 0.0;
    for (Index j : liked) sum += pct[static_cast<std::size_t>(j)];
    return sum / static_cast<double>(liked.size());
}

namespace {

struct RankingInputs {
    std::vector<Index> candidates;
    std::vector<Index> users;                      // users with >= 1 test like
    std::vector<std::vector<Index>> liked_positions; // positions into candidates
    Index excluded = 0;
};

RankingInputs collect(const Dataset& data, const SplitMasks& masks) {
    RankingInputs in;
    in.candidates = masks.test_items;
    if (in.candidates.empty()) {
        for (Index e : masks.test) in.candidates.push_back(data.ratings[e].item);
        std::sort(in.candidates.begin(), in.candidates.end());
        in.candidates.erase(std::unique(in.candidates.begin(), in.candidates.end()), in.candidates.end());
    }
    std::vector<Index> position(static_cast<std::size_t>(data.n_items()), -1);
    for (std::size_t k = 0; k < in.candidates.size(); ++k) {
        position[static_cast<std::size_t>(in.candidates[k])] = static_cast<Index>(k);
    }
    std::vector<std::vector<Index>> likes(static_cast<std::size_t>(data.n_users()));
    for (Index e : masks.test) {
        const auto& r = data.ratings[e];
        const Index pos = position[static_cast<std::size_t>(r.item)];
        if (r.value > 0.0 && pos >= 0) likes[static_cast<std::size_t>(r.user)].push_back(pos);
    }
    std::vector<Index> block_users = masks.test_users;
    if (block_users.empty()) {
        for (Index e : masks.test) block_users.push_back(data.ratings[e].user);
        std::sort(block_users.begin(), block_users.end());
        block_users.erase(std::unique(block_users.begin(), block_users.end()), block_users.end());
    }
    for (Index u : block_users) {
        auto& l = likes[static_cast<std::size_t>(u)];
        if (l.empty()) {
            ++in.excluded;
            continue;
        }
        std::sort(l.begin(), l.end());
        in.users.push_back(u);
        in.liked_positions.push_back(std::move(l));
    }
    return in;
}

std::vector<double> score_candidates(const Scorer& scorer, Index user, const std::vector<Index>& items) {
    std::vector<double> s(items.size());
    for (std::size_t k = 0; k < items.size(); ++k) s[k] = scorer(user, items[k]);
    return s;
}

std::vector<PpsPoint> curve_from(const std::vector<double>& liked_pct) {
    std::vector<double> sorted = liked_pct;
    std::sort(sorted.begin(), sorted.end());
    std::vector<PpsPoint> curve;
    curve.reserve(100);
    for (int p = 1; p <= 100; ++p) {
        // Small slack so 100*r/M that should equal p exactly is not lost to rounding.
        const double bound = static_cast<double>(p) + 1e-9;
        const auto count = std::upper_bound(sorted.begin(), sorted.end(), bound) - sorted.begin();
        curve.push_back({p, sorted.empty() ? 0.0
                                           : static_cast<double>(count) / static_cast<double>(sorted.size())});
    }
    return curve;
}

} // namespace

RankingReport maps(const Scorer& scorer, const Dataset& data, const SplitMasks& masks) {
    const auto in = collect(data, masks);
    if (in.users.empty()) throw std::invalid_argument("maps: no user has a like in the test block");
    RankingReport report;
    report.n_candidate_items = static_cast<Index>(in.candidates.size());
    report.n_excluded_users = in.excluded;
    std::vector<double> pooled;
    double total = 0.0;
    for (std::size_t k = 0; k < in.users.size(); ++k) {
        const auto scores = score_candidates(scorer, in.users[k], in.candidates);
        const auto pct = percentiles(scores);
        double sum = 0.0;
        for (Index pos : in.liked_positions[k]) {
            sum += pct[static_cast<std::size_t>(pos)];
            pooled.push_back(pct[static_cast<std::size_t>(pos)]);
        }
        const double value = sum / static_cast<double>(in.liked_positions[k].size());
        report.user_aps.emplace_back(in.users[k], value);
        total += value;
    }
    report.n_evaluated_users = static_cast<Index>(in.users.size());
    report.maps = total / static_cast<double>(in.users.size());
    report.pps_curve = curve_from(pooled);
    return report;
}

std::vector<PpsPoint> pps_curve(const Scorer& scorer, const Dataset& data, const SplitMasks& masks) {
    return maps(scorer, data, masks).pps_curve;
}

double profile_sparsity(const Matrix& profiles, double eps) {
    if (!(eps >= 0.0)) throw std::invalid_argument("profile_sparsity: eps must be >= 0");
    if (profiles.size() == 0) return 0.0;
    const auto nnz = (profiles.array().abs() > eps).count();
    return static_cast<double>(nnz) / static_cast<double>(profiles.size());
}

std::vector<Index> topic_top_items(const Matrix& V, Index topic, Index n) {
    if (topic < 0 || topic >= V.rows()) throw std::out_of_range("topic_top_items: topic index");
    std::vector<Index> order(static_cast<std::size_t>(V.cols()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return V(topic, a) > V(topic, b); });
    order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max<Index>(n, 0))));
    return order;
}

namespace {

/// Restricts `data` to `items` (in the given order), dropping the social graph.
Dataset item_subset(const Dataset& data, const std::vector<Index>& items) {
    std::vector<Index> remap(static_cast<std::size_t>(data.n_items()), -1);
    for (std::size_t k = 0; k < items.size(); ++k) remap[static_cast<std::size_t>(items[k])] = static_cast<Index>(k);
    std::vector<Rating> kept;
    for (const auto& r : data.ratings.entries()) {
        const Index j = remap[static_cast<std::size_t>(r.item)];
        if (j >= 0) kept.push_back({r.user, j, r.value});
    }
    Dataset sub;
    const auto M = static_cast<Index>(items.size());
    sub.ratings = RatingMatrix(data.n_users(), M, std::move(kept));
    Matrix X(data.features.dim(), M);
    for (Index k = 0; k < M; ++k) X.col(k) = data.features.X.col(items[static_cast<std::size_t>(k)]);
    sub.features = FeatureMatrix(std::move(X));
    return sub;
}

} // namespace

ColdStartReport cold_start_protocol(const Dataset& data, std::uint64_t seed, const Hyperparams& hyper,
                                    double unseen_fraction, std::vector<double> train_fractions) {
    if (!(unseen_fraction > 0.0 && unseen_fraction < 1.0)) {
        throw std::invalid_argument("cold_start_protocol: unseen fraction must lie in (0,1)");
    }
    for (double f : train_fractions) {
        if (!(f > 0.0 && f <= 1.0)) {
            throw std::invalid_argument("cold_start_protocol: train fractions must lie in (0,1]");
        }
    }
    const Index M = data.n_items();
    const auto perm = seeded_permutation(M, seed);
    const auto n_unseen = static_cast<Index>(std::floor(unseen_fraction * static_cast<double>(M) + 0.5));
    if (n_unseen < 2 || M - n_unseen < 1) {
        throw std::invalid_argument("cold_start_protocol: too few items for the requested hold-out");
    }

    ColdStartReport report;
    report.unseen_items.assign(perm.end() - n_unseen, perm.end());
    std::sort(report.unseen_items.begin(), report.unseen_items.end());
    const std::vector<Index> seen(perm.begin(), perm.end() - n_unseen);

    // Evaluation split: every rating on an unseen item is a test like.
    std::vector<char> is_unseen(static_cast<std::size_t>(M), 0);
    for (Index j : report.unseen_items) is_unseen[static_cast<std::size_t>(j)] = 1;
    SplitMasks eval_masks;
    eval_masks.test_items = report.unseen_items;
    for (Index e = 0; e < data.ratings.size(); ++e) {
        if (is_unseen[static_cast<std::size_t>(data.ratings[e].item)]) eval_masks.test.push_back(e);
    }
    if (eval_masks.test.empty()) throw std::invalid_argument("cold_start_protocol: unseen items have no likes");

    for (double f : train_fractions) {
        const auto n_train = std::max<Index>(
            1, static_cast<Index>(std::floor(f * static_cast<double>(seen.size()) + 0.5)));
        std::vector<Index> train_items(seen.begin(), seen.begin() + n_train);
        std::sort(train_items.begin(), train_items.end());
        for (Index j : train_items) {
            if (is_unseen[static_cast<std::size_t>(j)]) ++report.unseen_ratings_in_training;
        }
        const Dataset sub = item_subset(data, train_items);
        if (sub.ratings.size() == 0) {
            throw std::invalid_argument("cold_start_protocol: no ratings left for train fraction " +
                                        std::to_string(f));
        }
        const auto model = train_stm(sub, all_train(sub.ratings), hyper);

        Matrix V = Matrix::Zero(hyper.K, M);
        for (Index j : report.unseen_items) {
            V.col(j) = encode_cold_start(model.dictionary, data.features.X.col(j), hyper.lambda_v);
        }
        const Matrix& U = model.U;
        const Scorer scorer = [&](Index i, Index j) { return U.col(i).dot(V.col(j)); };
        const auto ranked = maps(scorer, data, eval_masks);
        report.points.push_back({f, n_train, ranked.maps, ranked.n_evaluated_users});
    }
    return report;
}

} // namespace stm
