#include "stm/baselines.hpp"

#include <cmath>
#include <random>
#include <string>

#include "stm/parallel.hpp"
#include "training_common.hpp"

namespace stm {

FactorObjective::FactorObjective(const RatingIndex& observed, const SocialGraph* social, double reg,
                                 double lambda_social)
    : observed_(&observed),
      social_(lambda_social > 0.0 ? social : nullptr),
      reg_(reg),
      lambda_social_(lambda_social) {}

double FactorObjective::value(const Matrix& U, const Matrix& V, const Matrix& Z) const {
    double loss = 2.0 * detail::rating_term(U, V, *observed_);
    loss += reg_ * (U.squaredNorm() + V.squaredNorm());
    if (social_) {
        loss += lambda_social_ * (2.0 * detail::social_term(U, Z, *social_) + reg_ * Z.squaredNorm());
    }
    return loss;
}

void FactorObjective::gradient(const Matrix& U, const Matrix& V, const Matrix& Z, Matrix& gU,
                               Matrix& gV, Matrix& gZ) const {
    gU = 2.0 * reg_ * U;
    gV = 2.0 * reg_ * V;
    for (Index i = 0; i < observed_->n_users(); ++i) {
        for (const auto& cell : observed_->by_user(i)) {
            const Index j = cell.other;
            const double e = cell.value - U.col(i).dot(V.col(j));
            gU.col(i) -= 2.0 * e * V.col(j);
            gV.col(j) -= 2.0 * e * U.col(i);
        }
    }
    if (!social_) return;
    gZ = 2.0 * lambda_social_ * reg_ * Z;
    for (Index i = 0; i < social_->n_users(); ++i) {
        for (const auto& n : social_->neighbors(i)) {
            const double e = n.similarity - U.col(i).dot(Z.col(n.user));
            gU.col(i) -= 2.0 * lambda_social_ * e * Z.col(n.user);
            gZ.col(n.user) -= 2.0 * lambda_social_ * e * U.col(i);
        }
    }
}

namespace {

Matrix gaussian_matrix(Index rows, Index cols, double sd, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, sd);
    Matrix m(rows, cols);
    for (Index c = 0; c < cols; ++c) {
        for (Index r = 0; r < rows; ++r) m(r, c) = gauss(rng);
    }
    return m;
}

FactorModel train_factor_model(const Dataset& data, const SplitMasks& masks, FactorConfig config,
                               const SocialGraph* social) {
    if (config.latent_dim < 1) throw std::invalid_argument("latent dimension must be >= 1");
    if (!(config.lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
    if (!(config.reg >= 0.0) || !(config.lambda_social >= 0.0)) {
        throw std::invalid_argument("regularization weights must be >= 0");
    }
    if (masks.train.empty()) throw std::invalid_argument("training mask is empty");

    const RatingIndex observed(data.ratings, masks.train);
    const FactorObjective objective(observed, social, config.reg, config.lambda_social);

    FactorModel model;
    model.config = config;
    std::mt19937_64 rng(config.seed);
    model.U = gaussian_matrix(config.latent_dim, data.n_users(), 0.1, rng);
    model.V = gaussian_matrix(config.latent_dim, data.n_items(), 0.1, rng);
    if (objective.uses_social()) model.Z = gaussian_matrix(config.latent_dim, data.n_users(), 0.1, rng);

    double loss = objective.value(model.U, model.V, model.Z);
    if (!std::isfinite(loss)) throw TrainingError("initial loss is not finite");
    model.loss_trace.push_back(loss);

    double lr = config.lr;
    Matrix gU, gV, gZ;
    for (int it = 0; it < config.iters; ++it) {
        objective.gradient(model.U, model.V, model.Z, gU, gV, gZ);
        bool accepted = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            Matrix U = model.U - lr * gU;
            Matrix V = model.V - lr * gV;
            Matrix Z = objective.uses_social() ? Matrix(model.Z - lr * gZ) : model.Z;
            const double trial = objective.value(U, V, Z);
            if (std::isfinite(trial) && trial <= loss) {
                model.U = std::move(U);
                model.V = std::move(V);
                model.Z = std::move(Z);
                loss = trial;
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if (!accepted) {
            throw TrainingError("gradient descent diverged at epoch " + std::to_string(it + 1) +
                                "; retry with a smaller learning rate");
        }
        model.loss_trace.push_back(loss);
    }
    return model;
}

} // namespace

FactorModel train_pmf(const Dataset& data, const SplitMasks& masks, FactorConfig config) {
    config.lambda_social = 0.0;
    return train_factor_model(data, masks, config, nullptr);
}

FactorModel train_sorec(const Dataset& data, const SplitMasks& masks, FactorConfig config) {
    if (!data.social) throw std::invalid_argument("train_sorec: dataset has no social graph");
    return train_factor_model(data, masks, config, &*data.social);
}

double ctr_objective(const STMState& state, const Dataset& data, const RatingIndex& observed) {
    const auto& h = state.hyper;
    return detail::feature_term(data.features.X, state.dictionary.D, state.V) +
           h.lambda_r * detail::rating_term(state.U, state.V, observed) +
           h.lambda_u * state.U.squaredNorm() + 0.5 * h.lambda_v * state.V.squaredNorm();
}

namespace {

Vector ridge_item(Index j, const Matrix& DtD, const Vector& DtXj, const Matrix& U,
                  const RatingIndex& observed, const Hyperparams& h) {
    Matrix A = DtD;
    Vector b = DtXj;
    const auto raters = observed.by_item(j);
    for (const auto& cell : raters) {
        A.noalias() += h.lambda_r * U.col(cell.other) * U.col(cell.other).transpose();
        b.noalias() += h.lambda_r * cell.value * U.col(cell.other);
    }
    A.diagonal().array() += h.lambda_v;
    return A.ldlt().solve(b);
}

Vector ridge_user(Index i, const Matrix& V, const RatingIndex& observed, const Hyperparams& h) {
    const Index K = V.rows();
    Matrix A = Matrix::Zero(K, K);
    Vector b = Vector::Zero(K);
    for (const auto& cell : observed.by_user(i)) {
        A.noalias() += h.lambda_r * V.col(cell.other) * V.col(cell.other).transpose();
        b.noalias() += h.lambda_r * cell.value * V.col(cell.other);
    }
    if (observed.by_user(i).empty()) return b;
    A.diagonal().array() += 2.0 * h.lambda_u;
    if (h.lambda_u > 0.0) return A.ldlt().solve(b);
    return A.completeOrthogonalDecomposition().solve(b);
}

} // namespace

Vector ctr_item_update(Index item, const STMState& state, const Dataset& data, const RatingIndex& observed) {
    const auto& D = state.dictionary.D;
    return ridge_item(item, D.transpose() * D, D.transpose() * data.features.X.col(item), state.U,
                      observed, state.hyper);
}

Vector ctr_user_update(Index user, const STMState& state, const RatingIndex& observed) {
    return ridge_user(user, state.V, observed, state.hyper);
}

STMState train_ctr_i(const Dataset& data, const SplitMasks& masks, const Hyperparams& hyper) {
    hyper.validate();
    data.validate();
    if (masks.train.empty()) throw std::invalid_argument("training mask is empty");
    const Matrix& X = data.features.X;
    const Index K = hyper.K;
    const Index N = data.n_users();
    const Index M = data.n_items();
    const RatingIndex observed(data.ratings, masks.train);

    STMState state;
    state.hyper = hyper;
    state.dictionary.D = random_unit_columns(X.rows(), K, hyper.seed);
    state.dictionary.duals = Vector::Zero(K);
    state.U = Matrix::Zero(K, N);
    state.V = Matrix::Zero(K, M);

    auto item_phase = [&] {
        const Matrix DtD = state.dictionary.D.transpose() * state.dictionary.D;
        const Matrix DtX = state.dictionary.D.transpose() * X;
        parallel_for(M, [&](Index j) {
            state.V.col(j) = ridge_item(j, DtD, DtX.col(j), state.U, observed, hyper);
        });
    };
    item_phase();

    state.objective_trace.push_back(ctr_objective(state, data, observed));
    for (int it = 1; it <= hyper.max_iters; ++it) {
        detail::dictionary_phase(X, state.V, state.dictionary, hyper.seed + static_cast<std::uint64_t>(it));
        detail::check_finite(state.dictionary.D, "dictionary D", it);
        item_phase();
        detail::check_finite(state.V, "item profiles V", it);
        parallel_for(N, [&](Index i) { state.U.col(i) = ridge_user(i, state.V, observed, hyper); });
        detail::check_finite(state.U, "user profiles U", it);

        const double value = ctr_objective(state, data, observed);
        if (!std::isfinite(value)) {
            throw TrainingError("objective became non-finite at outer iteration " + std::to_string(it));
        }
        const double previous = state.objective_trace.back();
        state.objective_trace.push_back(value);
        if (detail::objective_settled(previous, value, hyper.tol)) break;
    }
    return state;
}

} // namespace stm
