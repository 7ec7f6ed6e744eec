#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "stm/errors.hpp"

namespace stm {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Rating {
    Index user;
    Index item;
    double value;
};

/// Sparse rating matrix R together with its observation mask I^R.
/// Absent entries are unobserved, never "disliked".
class RatingMatrix {
public:
    RatingMatrix() = default;
    /// Throws std::invalid_argument on out-of-range indices or duplicate (user, item) pairs.
    RatingMatrix(Index n_users, Index n_items, std::vector<Rating> entries);

    Index n_users() const noexcept { return n_users_; }
    Index n_items() const noexcept { return n_items_; }
    Index size() const noexcept { return static_cast<Index>(entries_.size()); }
    const std::vector<Rating>& entries() const noexcept { return entries_; }
    const Rating& operator[](Index e) const { return entries_[static_cast<std::size_t>(e)]; }

    bool observed(Index user, Index item) const { return find(user, item).has_value(); }
    /// Entry index of (user, item), if observed.
    std::optional<Index> find(Index user, Index item) const;
    bool is_binary() const;

    friend bool operator==(const RatingMatrix& a, const RatingMatrix& b);

private:
    std::uint64_t key(Index user, Index item) const {
        return static_cast<std::uint64_t>(user) * static_cast<std::uint64_t>(n_items_) +
               static_cast<std::uint64_t>(item);
    }

    Index n_users_ = 0;
    Index n_items_ = 0;
    std::vector<Rating> entries_;
    std::unordered_map<std::uint64_t, Index> lookup_;
};

/// Item content X (d x M), one column per item.
struct FeatureMatrix {
    Matrix X;

    FeatureMatrix() = default;
    explicit FeatureMatrix(Matrix x);

    Index dim() const noexcept { return X.rows(); }
    Index n_items() const noexcept { return X.cols(); }
    auto column(Index j) const { return X.col(j); }
};

/// Per-dimension zero mean / unit variance over items; constant dimensions become zero.
void standardize(FeatureMatrix& features);

struct SocialLink {
    Index a;
    Index b;
    double similarity;
};

/// Symmetric user-user similarity S with mask I^S. Stored as adjacency lists in both directions.
class SocialGraph {
public:
    struct Neighbor {
        Index user;
        double similarity;
    };

    SocialGraph() = default;
    /// Each undirected link is given once or as a consistent (a,b)/(b,a) pair.
    /// Throws std::invalid_argument on self-edges, out-of-range similarity or asymmetric values.
    SocialGraph(Index n_users, const std::vector<SocialLink>& links);

    Index n_users() const noexcept { return static_cast<Index>(adjacency_.size()); }
    std::span<const Neighbor> neighbors(Index user) const {
        return adjacency_[static_cast<std::size_t>(user)];
    }
    /// Undirected link count.
    Index n_links() const noexcept { return n_links_; }
    /// Each undirected link once, with a < b, sorted.
    std::vector<SocialLink> links() const;
    std::optional<double> similarity(Index a, Index b) const;

    friend bool operator==(const SocialGraph& a, const SocialGraph& b);

private:
    std::vector<std::vector<Neighbor>> adjacency_;
    Index n_links_ = 0;
};

/// Grp(U) for every user; group ids index into `universe`.
struct GroupMembership {
    std::vector<std::string> universe;
    std::vector<std::vector<Index>> groups;

    Index n_users() const noexcept { return static_cast<Index>(groups.size()); }
    friend bool operator==(const GroupMembership&, const GroupMembership&) = default;
};

struct Dataset {
    RatingMatrix ratings;
    FeatureMatrix features;
    std::optional<SocialGraph> social;
    std::optional<GroupMembership> groups;
    /// External identifiers, index-aligned with the dense ranges.
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;

    Index n_users() const noexcept { return ratings.n_users(); }
    Index n_items() const noexcept { return ratings.n_items(); }
    /// Throws SchemaError when the parts disagree on dimensions.
    void validate() const;
};

/// Train/test partition of observed entries, as entry indices into Dataset::ratings.
struct SplitMasks {
    std::vector<Index> train;
    std::vector<Index> test;
    /// The held-out block: candidate users and items for ranking evaluation.
    std::vector<Index> test_users;
    std::vector<Index> test_items;
};

/// Every observed entry in train; empty test block.
SplitMasks all_train(const RatingMatrix& ratings);

struct Hyperparams {
    double lambda_r = 1.90;
    double lambda_u = 0.35;
    double lambda_v = 0.60;
    double lambda_s = 1.0;
    double lambda_z = 0.3;
    Index K = 256;
    int max_iters = 10;
    double tol = 1e-4;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument.
    void validate() const;
};

/// Compressed row view of a subset of ratings, indexed by user and by item.
class RatingIndex {
public:
    struct Cell {
        Index other; ///< item for by_user, user for by_item
        double value;
    };

    RatingIndex() = default;
    RatingIndex(const RatingMatrix& ratings, std::span<const Index> entries);

    std::span<const Cell> by_user(Index i) const { return slice(user_offsets_, user_cells_, i); }
    std::span<const Cell> by_item(Index j) const { return slice(item_offsets_, item_cells_, j); }
    Index n_users() const noexcept { return static_cast<Index>(user_offsets_.size()) - 1; }
    Index n_items() const noexcept { return static_cast<Index>(item_offsets_.size()) - 1; }
    Index size() const noexcept { return static_cast<Index>(user_cells_.size()); }

private:
    static std::span<const Cell> slice(const std::vector<Index>& offsets,
                                       const std::vector<Cell>& cells, Index k) {
        const auto b = static_cast<std::size_t>(offsets[static_cast<std::size_t>(k)]);
        const auto e = static_cast<std::size_t>(offsets[static_cast<std::size_t>(k) + 1]);
        return std::span<const Cell>(cells.data() + b, e - b);
    }

    std::vector<Index> user_offsets_{0};
    std::vector<Cell> user_cells_;
    std::vector<Index> item_offsets_{0};
    std::vector<Cell> item_cells_;
};

} // namespace stm
