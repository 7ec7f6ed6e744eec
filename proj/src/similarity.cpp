#include "stm/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

namespace stm {

SocialGraph social_similarity_from_groups(const GroupMembership& groups) {
    const Index N = groups.n_users();
    std::vector<std::vector<Index>> sets(groups.groups);
    bool any = false;
    for (auto& s : sets) {
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        any = any || !s.empty();
    }
    if (!any) throw std::invalid_argument("social_similarity_from_groups: every group set is empty");

    // Users per group, so only pairs that share something are visited.
    std::vector<std::vector<Index>> members(groups.universe.size());
    for (Index u = 0; u < N; ++u) {
        for (Index g : sets[static_cast<std::size_t>(u)]) {
            if (g < 0 || g >= static_cast<Index>(groups.universe.size())) {
                throw std::invalid_argument("social_similarity_from_groups: group id outside universe");
            }
            members[static_cast<std::size_t>(g)].push_back(u);
        }
    }

    std::vector<SocialLink> links;
    std::vector<Index> partners;
    std::vector<Index> common;
    for (Index a = 0; a < N; ++a) {
        const auto& ga = sets[static_cast<std::size_t>(a)];
        partners.clear();
        for (Index g : ga) {
            for (Index b : members[static_cast<std::size_t>(g)]) {
                if (b > a) partners.push_back(b);
            }
        }
        std::sort(partners.begin(), partners.end());
        partners.erase(std::unique(partners.begin(), partners.end()), partners.end());
        for (Index b : partners) {
            const auto& gb = sets[static_cast<std::size_t>(b)];
            common.clear();
            std::set_intersection(ga.begin(), ga.end(), gb.begin(), gb.end(), std::back_inserter(common));
            const auto inter = static_cast<double>(common.size());
            const auto uni = static_cast<double>(ga.size() + gb.size()) - inter;
            links.push_back({a, b, inter / uni});
        }
    }
    return SocialGraph(N, links);
}

double tag_similarity(const TagBag& a, const TagBag& b) {
    if (a.size() != b.size()) throw std::invalid_argument("tag_similarity: dictionary size mismatch");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("tag_similarity: zero tag vector");
    return a.dot(b) / (na * nb);
}

} // namespace stm
