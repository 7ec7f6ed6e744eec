#pragma once

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace stm {

template <class Model>
std::vector<Index> recommend_top(const Model& model, Index user, std::span<const Index> candidates,
                                 Index n) {
    if (n < 1) throw std::invalid_argument("recommend_top: n must be >= 1");
    if (candidates.empty()) throw std::invalid_argument("recommend_top: no candidates");
    std::vector<std::pair<double, Index>> scored;
    scored.reserve(candidates.size());
    for (Index j : candidates) scored.emplace_back(model.predict(user, j), j);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const auto keep = std::min<std::size_t>(scored.size(), static_cast<std::size_t>(n));
    std::vector<Index> out;
    out.reserve(keep);
    for (std::size_t k = 0; k < keep; ++k) out.push_back(scored[k].second);
    return out;
}

} // namespace stm
