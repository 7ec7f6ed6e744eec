#include "stm/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace stm {

RatingMatrix::RatingMatrix(Index n_users, Index n_items, std::vector<Rating> entries)
    : n_users_(n_users), n_items_(n_items), entries_(std::move(entries)) {
    if (n_users < 0 || n_items < 0) {
        throw std::invalid_argument("RatingMatrix: negative dimension");
    }
    lookup_.reserve(entries_.size());
    for (std::size_t e = 0; e < entries_.size(); ++e) {
        const auto& r = entries_[e];
        if (r.user < 0 || r.user >= n_users || r.item < 0 || r.item >= n_items) {
            throw std::invalid_argument("RatingMatrix: entry " + std::to_string(e) +
                                        " has out-of-range index");
        }
        if (!std::isfinite(r.value)) {
            throw std::invalid_argument("RatingMatrix: entry " + std::to_string(e) +
                                        " is not finite");
        }
        if (!lookup_.emplace(key(r.user, r.item), static_cast<Index>(e)).second) {
            throw std::invalid_argument("RatingMatrix: duplicate entry (" +
                                        std::to_string(r.user) + ", " +
                                        std::to_string(r.item) + ")");
        }
    }
}

std::optional<Index> RatingMatrix::find(Index user, Index item) const {
    if (user < 0 || user >= n_users_ || item < 0 || item >= n_items_) return std::nullopt;
    const auto it = lookup_.find(key(user, item));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

bool RatingMatrix::is_binary() const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [](const Rating& r) { return r.value == 1.0; });
}

bool operator==(const RatingMatrix& a, const RatingMatrix& b) {
    if (a.n_users_ != b.n_users_ || a.n_items_ != b.n_items_ ||
        a.entries_.size() != b.entries_.size()) {
        return false;
    }
    for (std::size_t e = 0; e < a.entries_.size(); ++e) {
        const auto& x = a.entries_[e];
        const auto& y = b.entries_[e];
        if (x.user != y.user || x.item != y.item || x.value != y.value) return false;
    }
    return true;
}

FeatureMatrix::FeatureMatrix(Matrix x) : X(std::move(x)) {
    if (!X.allFinite()) throw std::invalid_argument("FeatureMatrix: non-finite value");
}

void standardize(FeatureMatrix& features) {
    auto& X = features.X;
    const Index M = X.cols();
    if (M == 0) return;
    for (Index r = 0; r < X.rows(); ++r) {
        const double mean = X.row(r).mean();
        X.row(r).array() -= mean;
        const double var = X.row(r).squaredNorm() / static_cast<double>(M);
        if (var > 1e-24) {
            X.row(r) /= std::sqrt(var);
        } else {
            X.row(r).setZero();
        }
    }
}

SocialGraph::SocialGraph(Index n_users, const std::vector<SocialLink>& links)
    : adjacency_(static_cast<std::size_t>(n_users)) {
    auto lookup = [this](Index a, Index b) -> const Neighbor* {
        for (const auto& n : adjacency_[static_cast<std::size_t>(a)]) {
            if (n.user == b) return &n;
        }
        return nullptr;
    };
    for (const auto& l : links) {
        if (l.a < 0 || l.a >= n_users || l.b < 0 || l.b >= n_users) {
            throw std::invalid_argument("SocialGraph: user index out of range");
        }
        if (l.a == l.b) {
            throw std::invalid_argument("SocialGraph: self-edge on user " + std::to_string(l.a));
        }
        if (!(l.similarity >= 0.0 && l.similarity <= 1.0)) {
            throw std::invalid_argument("SocialGraph: similarity outside [0,1]");
        }
        if (const auto* existing = lookup(l.a, l.b)) {
            if (existing->similarity != l.similarity) {
                throw std::invalid_argument("SocialGraph: asymmetric similarity for (" +
                                            std::to_string(l.a) + ", " + std::to_string(l.b) +
                                            ")");
            }
            continue;
        }
        adjacency_[static_cast<std::size_t>(l.a)].push_back({l.b, l.similarity});
        adjacency_[static_cast<std::size_t>(l.b)].push_back({l.a, l.similarity});
        ++n_links_;
    }
    for (auto& row : adjacency_) {
        std::sort(row.begin(), row.end(),
                  [](const Neighbor& x, const Neighbor& y) { return x.user < y.user; });
    }
}

std::vector<SocialLink> SocialGraph::links() const {
    std::vector<SocialLink> out;
    out.reserve(static_cast<std::size_t>(n_links_));
    for (Index a = 0; a < n_users(); ++a) {
        for (const auto& n : neighbors(a)) {
            if (a < n.user) out.push_back({a, n.user, n.similarity});
        }
    }
    return out;
}

std::optional<double> SocialGraph::similarity(Index a, Index b) const {
    if (a < 0 || a >= n_users()) return std::nullopt;
    const auto row = neighbors(a);
    const auto it = std::lower_bound(row.begin(), row.end(), b,
                                     [](const Neighbor& n, Index u) { return n.user < u; });
    if (it == row.end() || it->user != b) return std::nullopt;
    return it->similarity;
}

bool operator==(const SocialGraph& a, const SocialGraph& b) {
    if (a.n_users() != b.n_users() || a.n_links_ != b.n_links_) return false;
    for (Index u = 0; u < a.n_users(); ++u) {
        const auto x = a.neighbors(u);
        const auto y = b.neighbors(u);
        if (!std::equal(x.begin(), x.end(), y.begin(), y.end(),
                        [](const SocialGraph::Neighbor& p, const SocialGraph::Neighbor& q) {
                            return p.user == q.user && p.similarity == q.similarity;
                        })) {
            return false;
        }
    }
    return true;
}

void Dataset::validate() const {
    if (ratings.n_items() != features.n_items()) {
        throw SchemaError("ratings cover " + std::to_string(ratings.n_items()) +
                          " items but features cover " + std::to_string(features.n_items()));
    }
    if (social && social->n_users() != ratings.n_users()) {
        throw SchemaError("social graph covers " + std::to_string(social->n_users()) +
                          " users but ratings cover " + std::to_string(ratings.n_users()));
    }
    if (groups && groups->n_users() != ratings.n_users()) {
        throw SchemaError("group membership covers " + std::to_string(groups->n_users()) +
                          " users but ratings cover " + std::to_string(ratings.n_users()));
    }
    if (!user_ids.empty() && static_cast<Index>(user_ids.size()) != ratings.n_users()) {
        throw SchemaError("user id table does not match the user count");
    }
    if (!item_ids.empty() && static_cast<Index>(item_ids.size()) != ratings.n_items()) {
        throw SchemaError("item id table does not match the item count");
    }
}

SplitMasks all_train(const RatingMatrix& ratings) {
    SplitMasks masks;
    masks.train.resize(static_cast<std::size_t>(ratings.size()));
    for (Index e = 0; e < ratings.size(); ++e) masks.train[static_cast<std::size_t>(e)] = e;
    return masks;
}

void Hyperparams::validate() const {
    for (double l : {lambda_r, lambda_u, lambda_v, lambda_s, lambda_z}) {
        if (!(l >= 0.0) || !std::isfinite(l)) {
            throw std::invalid_argument("Hyperparams: regularization weights must be >= 0");
        }
    }
    if (K < 1) throw std::invalid_argument("Hyperparams: K must be >= 1");
    if (max_iters < 0) throw std::invalid_argument("Hyperparams: max_iters must be >= 0");
    if (!(tol > 0.0)) throw std::invalid_argument("Hyperparams: tol must be > 0");
}

RatingIndex::RatingIndex(const RatingMatrix& ratings, std::span<const Index> entries) {
    const auto N = static_cast<std::size_t>(ratings.n_users());
    const auto M = static_cast<std::size_t>(ratings.n_items());
    user_offsets_.assign(N + 1, 0);
    item_offsets_.assign(M + 1, 0);
    for (Index e : entries) {
        const auto& r = ratings[e];
        ++user_offsets_[static_cast<std::size_t>(r.user) + 1];
        ++item_offsets_[static_cast<std::size_t>(r.item) + 1];
    }
    for (std::size_t k = 0; k < N; ++k) user_offsets_[k + 1] += user_offsets_[k];
    for (std::size_t k = 0; k < M; ++k) item_offsets_[k + 1] += item_offsets_[k];
    user_cells_.resize(entries.size());
    item_cells_.resize(entries.size());
    auto ufill = std::vector<Index>(user_offsets_.begin(), user_offsets_.end() - 1);
    auto ifill = std::vector<Index>(item_offsets_.begin(), item_offsets_.end() - 1);
    // Entries are visited in the given order; sort each row afterwards so the
    // view does not depend on how the caller ordered the subset.
    for (Index e : entries) {
        const auto& r = ratings[e];
        user_cells_[static_cast<std::size_t>(ufill[static_cast<std::size_t>(r.user)]++)] =
            {r.item, r.value};
        item_cells_[static_cast<std::size_t>(ifill[static_cast<std::size_t>(r.item)]++)] =
            {r.user, r.value};
    }
    auto by_other = [](const Cell& a, const Cell& b) { return a.other < b.other; };
    for (std::size_t k = 0; k < N; ++k) {
        std::sort(user_cells_.begin() + user_offsets_[k], user_cells_.begin() + user_offsets_[k + 1],
                  by_other);
    }
    for (std::size_t k = 0; k < M; ++k) {
        std::sort(item_cells_.begin() + item_offsets_[k], item_cells_.begin() + item_offsets_[k + 1],
                  by_other);
    }
}

} // namespace stm
