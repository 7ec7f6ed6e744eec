#include "stm/topic_model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "stm/parallel.hpp"
#include "training_common.hpp"

namespace stm {
namespace detail {

double rating_term(const Matrix& U, const Matrix& V, const RatingIndex& observed) {
    double sum = 0.0;
    for (Index i = 0; i < observed.n_users(); ++i) {
        for (const auto& cell : observed.by_user(i)) {
            const double r = cell.value - U.col(i).dot(V.col(cell.other));
            sum += r * r;
        }
    }
    return 0.5 * sum;
}

double social_term(const Matrix& U, const Matrix& Z, const SocialGraph& social) {
    double sum = 0.0;
    for (Index i = 0; i < social.n_users(); ++i) {
        for (const auto& n : social.neighbors(i)) {
            const double r = n.similarity - U.col(i).dot(Z.col(n.user));
            sum += r * r;
        }
    }
    return 0.5 * sum;
}

void dictionary_phase(const Matrix& X, const Matrix& V, TopicDictionary<double>& dict,
                      std::uint64_t seed) {
    if (used_atoms(V).empty()) return;
    TopicDictionary<double> candidate;
    try {
        candidate = update_dictionary<double>(X, V, dict.duals);
    } catch (const DictionaryUpdateError<double>& e) {
        candidate = e.best();
    }
    if (feature_term(X, candidate.D, V) <= feature_term(X, dict.D, V)) {
        dict = std::move(candidate);
    }
    dict = revive_dead_atoms(std::move(dict), X, V, seed);
}

Vector solve_guarded(const L1QP<double>& problem, const Vector& incumbent,
                     const SolverSettings& solver) {
    const double scale = std::max(1.0, problem.q.cwiseAbs().maxCoeff());
    const int max_iter = solver.max_iter_base + 10 * static_cast<int>(problem.size());
    auto sol = solve_feature_sign<double>(problem, solver.kkt_tol * scale, max_iter, incumbent);
    if (sol.objective <= l1qp_objective(problem, incumbent)) return std::move(sol.x);
    return incumbent;
}

void check_finite(const Matrix& block, const char* name, int iteration) {
    if (!block.allFinite()) {
        throw TrainingError(std::string("non-finite values in ") + name + " at outer iteration " +
                            std::to_string(iteration));
    }
}

namespace {

L1QP<double> item_problem(Index j, const Matrix& DtD, const Vector& DtXj, const Matrix& U,
                          const RatingIndex& observed, const Hyperparams& hyper) {
    L1QP<double> p;
    p.P = DtD;
    p.q = DtXj;
    p.lambda = hyper.lambda_v;
    const auto raters = observed.by_item(j);
    if (!raters.empty()) {
        const auto n = static_cast<Index>(raters.size());
        Matrix Uh(U.rows(), n);
        Vector r(n);
        for (Index k = 0; k < n; ++k) {
            Uh.col(k) = U.col(raters[static_cast<std::size_t>(k)].other);
            r(k) = raters[static_cast<std::size_t>(k)].value;
        }
        p.P.noalias() += hyper.lambda_r * Uh * Uh.transpose();
        p.q.noalias() += hyper.lambda_r * Uh * r;
    }
    return p;
}

L1QP<double> user_problem(Index i, const Matrix& V, const RatingIndex& observed,
                          const Hyperparams& hyper) {
    const Index K = V.rows();
    L1QP<double> p;
    p.P = Matrix::Zero(K, K);
    p.q = Vector::Zero(K);
    p.lambda = hyper.lambda_u;
    const auto rated = observed.by_user(i);
    if (!rated.empty()) {
        const auto n = static_cast<Index>(rated.size());
        Matrix Vh(K, n);
        Vector r(n);
        for (Index k = 0; k < n; ++k) {
            Vh.col(k) = V.col(rated[static_cast<std::size_t>(k)].other);
            r(k) = rated[static_cast<std::size_t>(k)].value;
        }
        p.P.noalias() += hyper.lambda_r * Vh * Vh.transpose();
        p.q.noalias() += hyper.lambda_r * Vh * r;
    }
    return p;
}

} // namespace

SoSTMState train_topic_model(const Dataset& data, const SplitMasks& masks, const Hyperparams& hyper,
                             const SolverSettings& solver, bool social) {
    hyper.validate();
    data.validate();
    if (masks.train.empty()) throw std::invalid_argument("training mask is empty");
    if (social && !data.social) throw std::invalid_argument("SoSTM requires a social graph");

    const Matrix& X = data.features.X;
    const Index K = hyper.K;
    const Index N = data.n_users();
    const Index M = data.n_items();
    const RatingIndex observed(data.ratings, masks.train);
    const bool use_social = social && hyper.lambda_s > 0.0;

    SoSTMState state;
    state.hyper = hyper;
    state.dictionary.D = random_unit_columns(X.rows(), K, hyper.seed);
    state.dictionary.duals = Vector::Zero(K);
    state.U = Matrix::Zero(K, N);
    state.V = Matrix::Zero(K, M);
    state.Z = Matrix::Zero(K, N);
    {
        const Matrix DtD = state.dictionary.D.transpose() * state.dictionary.D;
        const Matrix DtX = state.dictionary.D.transpose() * X;
        const Vector zero = Vector::Zero(K);
        parallel_for(M, [&](Index j) {
            L1QP<double> p{DtD, DtX.col(j), hyper.lambda_v};
            state.V.col(j) = solve_guarded(p, zero, solver);
        });
    }

    auto objective = [&] {
        const double base = stm_objective(state, data, observed);
        if (!social) return base;
        return base + (hyper.lambda_s * social_term(state.U, state.Z, *data.social) +
                       hyper.lambda_z * state.Z.squaredNorm());
    };

    state.objective_trace.push_back(objective());
    for (int it = 1; it <= hyper.max_iters; ++it) {
        dictionary_phase(X, state.V, state.dictionary, hyper.seed + static_cast<std::uint64_t>(it));
        check_finite(state.dictionary.D, "dictionary D", it);

        {
            const Matrix DtD = state.dictionary.D.transpose() * state.dictionary.D;
            const Matrix DtX = state.dictionary.D.transpose() * X;
            parallel_for(M, [&](Index j) {
                const auto p = item_problem(j, DtD, DtX.col(j), state.U, observed, hyper);
                state.V.col(j) = solve_guarded(p, state.V.col(j), solver);
            });
        }
        check_finite(state.V, "item profiles V", it);

        parallel_for(N, [&](Index i) {
            if (use_social) {
                const auto p = assemble_user_subproblem_social(i, state, data, observed);
                state.U.col(i) = solve_guarded(p, state.U.col(i), solver);
            } else if (!observed.by_user(i).empty()) {
                const auto p = user_problem(i, state.V, observed, hyper);
                state.U.col(i) = solve_guarded(p, state.U.col(i), solver);
            }
        });
        check_finite(state.U, "user profiles U", it);

        if (use_social) {
            Matrix Znew(K, N);
            parallel_for(N, [&](Index i) { Znew.col(i) = update_factor_profile(i, state, data); });
            state.Z = std::move(Znew);
            check_finite(state.Z, "factor profiles Z", it);
        }

        const double value = objective();
        if (!std::isfinite(value)) {
            throw TrainingError("objective became non-finite at outer iteration " + std::to_string(it));
        }
        const double previous = state.objective_trace.back();
        state.objective_trace.push_back(value);
        if (objective_settled(previous, value, hyper.tol)) break;
    }
    return state;
}

} // namespace detail

Matrix random_unit_columns(Index d, Index K, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix D(d, K);
    for (Index k = 0; k < K; ++k) {
        do {
            for (Index r = 0; r < d; ++r) D(r, k) = gauss(rng);
        } while (D.col(k).norm() == 0.0);
        D.col(k).normalize();
    }
    return D;
}

double stm_objective(const STMState& state, const Dataset& data, const RatingIndex& observed) {
    const auto& h = state.hyper;
    return detail::feature_term(data.features.X, state.dictionary.D, state.V) +
           h.lambda_r * detail::rating_term(state.U, state.V, observed) +
           h.lambda_u * state.U.lpNorm<1>() + h.lambda_v * state.V.lpNorm<1>();
}

double stm_objective(const STMState& state, const Dataset& data) {
    const auto masks = all_train(data.ratings);
    return stm_objective(state, data, RatingIndex(data.ratings, masks.train));
}

L1QP<double> assemble_item_subproblem(Index item, const STMState& state, const Dataset& data,
                                      const RatingIndex& observed) {
    if (item < 0 || item >= data.n_items()) throw std::out_of_range("assemble_item_subproblem: item");
    const auto& D = state.dictionary.D;
    const Matrix DtD = D.transpose() * D;
    const Vector DtXj = D.transpose() * data.features.X.col(item);
    return detail::item_problem(item, DtD, DtXj, state.U, observed, state.hyper);
}

L1QP<double> assemble_user_subproblem(Index user, const STMState& state, const RatingIndex& observed) {
    if (user < 0 || user >= state.U.cols()) throw std::out_of_range("assemble_user_subproblem: user");
    return detail::user_problem(user, state.V, observed, state.hyper);
}

STMState train_stm(const Dataset& data, const SplitMasks& masks, const Hyperparams& hyper,
                   const SolverSettings& solver) {
    return static_cast<STMState>(detail::train_topic_model(data, masks, hyper, solver, false));
}

Vector encode_cold_start(const TopicDictionary<double>& dict, const Vector& x_new, double lambda_v,
                         const SolverSettings& solver) {
    if (x_new.size() != dict.D.rows()) {
        throw std::invalid_argument("encode_cold_start: feature vector has length " +
                                    std::to_string(x_new.size()) + ", dictionary expects " +
                                    std::to_string(dict.D.rows()));
    }
    if (!(lambda_v >= 0.0)) throw std::invalid_argument("encode_cold_start: lambda_v must be >= 0");
    L1QP<double> p{dict.D.transpose() * dict.D, dict.D.transpose() * x_new, lambda_v};
    return detail::solve_guarded(p, Vector::Zero(dict.D.cols()), solver);
}

} // namespace stm
