#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "stm/types.hpp"

namespace stm {

/// Seeded uniform permutation of 0..n-1 (Fisher-Yates over mt19937_64).
std::vector<Index> seeded_permutation(Index n, std::uint64_t seed);

/// Bottom-right block split. Users and items are permuted by `seed`; test
/// entries are observed pairs whose user lies in the last `user_fraction` of
/// the user permutation and whose item lies in the last `item_fraction` of the
/// item permutation. Everything else observed is train.
/// Throws std::invalid_argument for fractions outside (0,1).
SplitMasks block_split(const Dataset& data, std::uint64_t seed, double user_fraction = 0.5,
                       double item_fraction = 0.5);

} // namespace stm
