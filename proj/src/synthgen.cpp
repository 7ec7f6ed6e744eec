#include "stm/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "stm/evaluation.hpp"

namespace stm {

namespace {

Index active_count(double sparsity, Index K) {
    return static_cast<Index>(std::ceil(sparsity * static_cast<double>(K) - 1e-9));
}

Index like_count(double density, Index M) {
    return static_cast<Index>(std::floor(density * static_cast<double>(M) + 0.5));
}

/// Column-wise sparse nonnegative profiles with `nnz` entries drawn from [1, 2).
Matrix planted_profiles(Index K, Index cols, Index nnz, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> magnitude(1.0, 2.0);
    Matrix P = Matrix::Zero(K, cols);
    std::vector<Index> topics(static_cast<std::size_t>(K));
    for (Index c = 0; c < cols; ++c) {
        std::iota(topics.begin(), topics.end(), Index{0});
        for (Index k = 0; k < nnz; ++k) {
            std::uniform_int_distribution<Index> pick(k, K - 1);
            std::swap(topics[static_cast<std::size_t>(k)], topics[static_cast<std::size_t>(pick(rng))]);
            P(topics[static_cast<std::size_t>(k)], c) = magnitude(rng);
        }
    }
    return P;
}

nlohmann::json matrix_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()},
            {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

} // namespace

void SynthConfig::validate() const {
    if (d < 1 || K < 1 || N < 1 || M < 1) throw std::invalid_argument("SynthConfig: dimensions must be positive");
    for (double s : {user_sparsity, item_sparsity, rating_density}) {
        if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("SynthConfig: sparsities and density must lie in (0,1]");
    }
    if (active_count(user_sparsity, K) < 1 || active_count(item_sparsity, K) < 1) {
        throw std::invalid_argument("SynthConfig: sparsity yields no active topics");
    }
    if (like_count(rating_density, M) < 1) {
        throw std::invalid_argument("SynthConfig: rating density yields no likes per user");
    }
    for (double n : {feature_noise, rating_noise, social_noise}) {
        if (!(n >= 0.0)) throw std::invalid_argument("SynthConfig: noise levels must be >= 0");
    }
}

SynthConfig synth_preset(const std::string& name) {
    SynthConfig c;
    if (name == "small") return c;
    if (name == "sparse") {
        c.d = 64;
        c.K = 100;
        c.N = 300;
        c.M = 1000;
        c.user_sparsity = 0.01;
        c.item_sparsity = 0.01;
        c.rating_density = 0.005;
        return c;
    }
    if (name == "flickr") {
        c.d = 64;
        c.K = 32;
        c.N = 2000;
        c.M = 5000;
        c.user_sparsity = 2.0 / 32.0;
        c.item_sparsity = 2.0 / 32.0;
        c.rating_density = 0.0008025;
        return c;
    }
    throw std::invalid_argument("unknown synth preset '" + name + "' (expected small, sparse or flickr)");
}

PlantedModel generate_planted(const SynthConfig& config) {
    config.validate();
    const Index d = config.d;
    const Index K = config.K;
    const Index N = config.N;
    const Index M = config.M;
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    PlantedModel out;
    out.D = Matrix(d, K);
    for (Index k = 0; k < K; ++k) {
        do {
            for (Index r = 0; r < d; ++r) out.D(r, k) = gauss(rng);
        } while (out.D.col(k).norm() == 0.0);
        out.D.col(k).normalize();
    }
    out.V = planted_profiles(K, M, active_count(config.item_sparsity, K), rng);
    out.U = planted_profiles(K, N, active_count(config.user_sparsity, K), rng);

    Matrix X = out.D * out.V;
    if (config.feature_noise > 0.0) {
        for (Index j = 0; j < M; ++j) {
            for (Index r = 0; r < d; ++r) X(r, j) += config.feature_noise * gauss(rng);
        }
    }

    const Matrix affinity = out.U.transpose() * out.V; // N x M
    const Index L = like_count(config.rating_density, M);
    out.likes_per_user = L;
    std::vector<Rating> likes;
    likes.reserve(static_cast<std::size_t>(N * L));
    std::vector<Index> order(static_cast<std::size_t>(M));
    std::vector<double> noisy(static_cast<std::size_t>(M));
    for (Index i = 0; i < N; ++i) {
        for (Index j = 0; j < M; ++j) {
            noisy[static_cast<std::size_t>(j)] =
                affinity(i, j) + (config.rating_noise > 0.0 ? config.rating_noise * gauss(rng) : 0.0);
        }
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
            return noisy[static_cast<std::size_t>(a)] > noisy[static_cast<std::size_t>(b)];
        });
        std::vector<Index> top(order.begin(), order.begin() + L);
        std::sort(top.begin(), top.end());
        for (Index j : top) likes.push_back({i, j, 1.0});
    }

    std::vector<SocialLink> links;
    const Vector norms = out.U.colwise().norm().transpose();
    for (Index a = 0; a < N; ++a) {
        for (Index b = a + 1; b < N; ++b) {
            const double cosine = out.U.col(a).dot(out.U.col(b)) / (norms(a) * norms(b));
            const double noise = config.social_noise > 0.0 ? config.social_noise * gauss(rng) : 0.0;
            const double s = std::clamp(cosine + noise, 0.0, 1.0);
            if (s >= 0.5) links.push_back({a, b, s});
        }
    }

    auto& data = out.data;
    data.ratings = RatingMatrix(N, M, std::move(likes));
    data.features = FeatureMatrix(std::move(X));
    data.social = SocialGraph(N, links);
    for (Index i = 0; i < N; ++i) data.user_ids.push_back(std::to_string(i));
    for (Index j = 0; j < M; ++j) data.item_ids.push_back(std::to_string(j));

    // Oracle: rank every item by the noiseless affinity.
    double total = 0.0;
    std::vector<double> row(static_cast<std::size_t>(M));
    for (Index i = 0; i < N; ++i) {
        for (Index j = 0; j < M; ++j) row[static_cast<std::size_t>(j)] = affinity(i, j);
        std::vector<Index> liked;
        for (Index j = 0; j < M; ++j) {
            if (data.ratings.observed(i, j)) liked.push_back(j);
        }
        total += aps(row, liked);
    }
    out.oracle_maps = total / static_cast<double>(N);
    return out;
}

void write_truth(const PlantedModel& model, const SynthConfig& config, const std::filesystem::path& file) {
    nlohmann::json j;
    j["format"] = "stm-planted-truth";
    j["version"] = 1;
    j["config"] = {{"d", config.d},
                   {"K", config.K},
                   {"N", config.N},
                   {"M", config.M},
                   {"user_sparsity", config.user_sparsity},
                   {"item_sparsity", config.item_sparsity},
                   {"rating_density", config.rating_density},
                   {"feature_noise", config.feature_noise},
                   {"rating_noise", config.rating_noise},
                   {"social_noise", config.social_noise},
                   {"seed", config.seed}};
    j["oracle_maps"] = model.oracle_maps;
    j["likes_per_user"] = model.likes_per_user;
    j["D"] = matrix_json(model.D);
    j["U"] = matrix_json(model.U);
    j["V"] = matrix_json(model.V);
    std::ofstream out(file);
    if (!out) throw FileError("cannot write " + file.string());
    out << j.dump() << '\n';
}

} // namespace stm
