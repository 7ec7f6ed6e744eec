#pragma once

#include <Eigen/SparseCore>

#include "stm/types.hpp"

namespace stm {

/// Group co-membership similarity: |Grp(a) ∩ Grp(b)| / |Grp(a) ∪ Grp(b)|.
/// Pairs with no shared group are left out of the graph.
/// Throws std::invalid_argument when every group set is empty.
SocialGraph social_similarity_from_groups(const GroupMembership& groups);

using TagBag = Eigen::SparseVector<double>;

/// Cosine similarity of two bag-of-tag count vectors over the same dictionary.
/// Throws std::invalid_argument on a zero vector or mismatched sizes.
double tag_similarity(const TagBag& a, const TagBag& b);

} // namespace stm
