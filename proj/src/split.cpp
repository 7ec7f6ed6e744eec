#include "stm/split.hpp"

#include <algorithm>
#include <cmath>

namespace stm {

std::vector<Index> seeded_permutation(Index n, std::uint64_t seed) {
    std::vector<Index> perm(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) perm[static_cast<std::size_t>(k)] = k;
    std::mt19937_64 rng(seed);
    for (Index k = n - 1; k > 0; --k) {
        std::uniform_int_distribution<Index> pick(0, k);
        std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(pick(rng))]);
    }
    return perm;
}

namespace {

std::vector<Index> tail_block(Index n, double fraction, std::uint64_t seed) {
    const auto perm = seeded_permutation(n, seed);
    const auto count = static_cast<Index>(std::floor(fraction * static_cast<double>(n) + 0.5));
    std::vector<Index> tail(perm.end() - count, perm.end());
    std::sort(tail.begin(), tail.end());
    return tail;
}

} // namespace

SplitMasks block_split(const Dataset& data, std::uint64_t seed, double user_fraction,
                       double item_fraction) {
    for (double f : {user_fraction, item_fraction}) {
        if (!(f > 0.0 && f < 1.0)) {
            throw std::invalid_argument("block_split: fractions must lie in (0,1)");
        }
    }
    SplitMasks masks;
    // Users and items use decorrelated streams derived from the one seed.
    masks.test_users = tail_block(data.n_users(), user_fraction, seed);
    masks.test_items = tail_block(data.n_items(), item_fraction, seed ^ 0x9E3779B97F4A7C15ULL);

    std::vector<char> user_in(static_cast<std::size_t>(data.n_users()), 0);
    std::vector<char> item_in(static_cast<std::size_t>(data.n_items()), 0);
    for (Index u : masks.test_users) user_in[static_cast<std::size_t>(u)] = 1;
    for (Index j : masks.test_items) item_in[static_cast<std::size_t>(j)] = 1;

    const auto& entries = data.ratings.entries();
    for (std::size_t e = 0; e < entries.size(); ++e) {
        const bool test = user_in[static_cast<std::size_t>(entries[e].user)] &&
                          item_in[static_cast<std::size_t>(entries[e].item)];
        (test ? masks.test : masks.train).push_back(static_cast<Index>(e));
    }
    return masks;
}

} // namespace stm
