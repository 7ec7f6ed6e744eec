// Acceptance suite: one line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "stm/evaluation.hpp"
#include "stm/split.hpp"

using namespace stm;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome solver_correctness() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<Index> dim(1, 20);
    double worst_gap = 0.0, worst_kkt = 0.0;
    for (int n = 0; n < 200; ++n) {
        const auto p = oracle::random_l1qp(dim(rng), rng);
        const auto fs = solve_feature_sign(p, 1e-12, 1000);
        const auto cd = solve_coordinate_descent_oracle(p, 1e-13);
        worst_gap = std::max(worst_gap, std::abs(fs.objective - cd.objective));
        worst_kkt = std::max({worst_kkt, fs.kkt_residual, cd.kkt_residual});
    }
    const double secs = since(t0);
    return {worst_gap <= 1e-8 && worst_kkt <= 1e-6 && secs < 5.0,
            fmt("max |f_fs - f_cd| = %.2e, max KKT = %.2e, %.2f s", worst_gap, worst_kkt, secs)};
}

Outcome dictionary_update() {
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<Index> dim(1, 32);
    const double scales[] = {0.1, 1.0, 5.0};
    double worst_gap = 0.0, worst_norm = 0.0, worst_cs = 0.0;
    for (int n = 0; n < 50; ++n) {
        const Index d = dim(rng), K = dim(rng);
        const Index M = std::uniform_int_distribution<Index>(K, 32)(rng);
        const Matrix X = scales[n % 3] * oracle::gaussian(d, M, rng);
        const Matrix V = oracle::gaussian(K, M, rng);
        const auto dict = update_dictionary<double>(X, V);
        const Matrix Dref = oracle::dictionary_projected_gradient(X, V);
        worst_gap = std::max(worst_gap, std::abs(oracle::dictionary_objective(X, dict.D, V) -
                                                 oracle::dictionary_objective(X, Dref, V)));
        for (Index k = 0; k < K; ++k) {
            const double n2 = dict.D.col(k).squaredNorm();
            worst_norm = std::max(worst_norm, n2 - 1.0);
            worst_cs = std::max(worst_cs, std::abs(dict.duals(k) * (n2 - 1.0)));
        }
    }
    return {worst_gap <= 1e-6 && worst_norm <= 1e-8 && worst_cs <= 1e-6,
            fmt("max objective gap %.2e, max |D_k|^2-1 = %.2e, max slackness %.2e", worst_gap, worst_norm,
                worst_cs)};
}

bool non_increasing(const std::vector<double>& trace, double& worst) {
    bool ok = true;
    for (std::size_t t = 1; t < trace.size(); ++t) {
        const double rise = (trace[t] - trace[t - 1]) / std::max(std::abs(trace[t - 1]), 1e-300);
        worst = std::max(worst, rise);
        ok = ok && trace[t] <= trace[t - 1] + 1e-9 * std::abs(trace[t - 1]);
    }
    return ok;
}

Outcome monotonicity() {
    bool ok = true;
    double worst = -1.0;
    int sweeps = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto pm = oracle::tiny_planted(seed);
        const auto masks = block_split(pm.data, seed);
        Hyperparams h;
        h.K = 6;
        h.max_iters = 8;
        h.tol = 1e-12;
        h.seed = seed;
        const auto a = train_stm(pm.data, masks, h);
        const auto b = train_sostm(pm.data, masks, h);
        const auto c = train_ctr_i(pm.data, masks, h);
        ok = non_increasing(a.objective_trace, worst) && ok;
        ok = non_increasing(b.objective_trace, worst) && ok;
        ok = non_increasing(c.objective_trace, worst) && ok;
        sweeps += static_cast<int>(a.objective_trace.size() + b.objective_trace.size() + c.objective_trace.size() - 3);
    }
    return {ok, fmt("%d sweeps over 30 runs, largest relative rise %.2e", sweeps, worst)};
}

Outcome reductions() {
    const auto pm = oracle::tiny_planted(7);
    const auto masks = block_split(pm.data, 7);
    Hyperparams h;
    h.K = 6;
    h.lambda_s = 0.0;
    h.seed = 3;
    const auto a = train_stm(pm.data, masks, h);
    const auto b = train_sostm(pm.data, masks, h);
    const bool stm_same = a.U == b.U && a.V == b.V && a.dictionary.D == b.dictionary.D &&
                          a.objective_trace == b.objective_trace;
    FactorConfig f;
    f.latent_dim = 5;
    f.iters = 50;
    f.seed = 3;
    const auto p = train_pmf(pm.data, masks, f);
    const auto s = train_sorec(pm.data, masks, f);
    const bool pmf_same = p.U == s.U && p.V == s.V && p.loss_trace == s.loss_trace;
    return {stm_same && pmf_same, fmt("SoSTM(lambda_S=0) == STM: %s, SoRec(lambda_social=0) == PMF: %s",
                                      stm_same ? "bitwise" : "differs", pmf_same ? "bitwise" : "differs")};
}

Outcome closed_forms() {
    std::mt19937_64 rng(505);
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto pm = oracle::tiny_planted(seed);
        const auto masks = block_split(pm.data, seed);
        const RatingIndex observed(pm.data.ratings, masks.train);
        SoSTMState s;
        s.hyper.K = 5;
        s.hyper.lambda_z = 0.1 * static_cast<double>(seed);
        s.hyper.lambda_s = 0.5 * static_cast<double>(seed);
        s.dictionary.D = oracle::gaussian(pm.data.features.dim(), 5, rng);
        s.U = oracle::gaussian(5, pm.data.n_users(), rng);
        s.V = oracle::gaussian(5, pm.data.n_items(), rng);
        s.Z = oracle::gaussian(5, pm.data.n_users(), rng);
        for (Index i = 0; i < pm.data.n_users(); ++i) {
            worst = std::max(worst, (update_factor_profile(i, s, pm.data) - oracle::z_update(s, pm.data, i))
                                        .cwiseAbs().maxCoeff());
            worst = std::max(worst, (ctr_user_update(i, s, observed) - oracle::ctr_user(s, pm.data, masks.train, i))
                                        .cwiseAbs().maxCoeff());
        }
        for (Index j = 0; j < pm.data.n_items(); ++j) {
            worst = std::max(worst, (ctr_item_update(j, s, pm.data, observed) -
                                     oracle::ctr_item(s, pm.data, masks.train, j))
                                        .cwiseAbs().maxCoeff());
        }
    }
    return {worst <= 1e-10, fmt("max deviation from dense solves %.2e", worst)};
}

Outcome gradient_checks() {
    std::mt19937_64 rng(606);
    double worst = 0.0;
    for (int point = 0; point < 10; ++point) {
        const auto pm = oracle::tiny_planted(100 + point, 8, 10);
        const auto masks = all_train(pm.data.ratings);
        const RatingIndex observed(pm.data.ratings, masks.train);
        const double lambda_social = point % 2 == 0 ? 0.0 : 0.7;
        const FactorObjective f(observed, &*pm.data.social, 0.3, lambda_social);
        const Matrix U = oracle::gaussian(3, 8, rng), V = oracle::gaussian(3, 10, rng), Z = oracle::gaussian(3, 8, rng);
        Matrix gU, gV, gZ, fU, fV, fZ;
        f.gradient(U, V, Z, gU, gV, gZ);
        oracle::factor_gradient_fd(f, U, V, Z, fU, fV, fZ);
        auto rel = [](const Matrix& g, const Matrix& fd) {
            return (g - fd).cwiseAbs().maxCoeff() / std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
        };
        worst = std::max({worst, rel(gU, fU), rel(gV, fV)});
        if (f.uses_social()) worst = std::max(worst, rel(gZ, fZ));
    }
    return {worst <= 1e-5, fmt("max relative deviation %.2e (PMF and SoRec, 10 points)", worst)};
}

Outcome metric_sanity() {
    const Index M = 1000;
    std::mt19937_64 rng(707);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> scores(M);
    std::vector<Index> items(M);
    std::iota(items.begin(), items.end(), Index{0});
    double total = 0.0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        for (auto& s : scores) s = unif(rng);
        std::shuffle(items.begin(), items.end(), rng);
        std::vector<Index> liked(items.begin(), items.begin() + 10);
        total += aps(scores, liked);
    }
    const double random_maps = total / trials;

    const std::vector<double> flat(M, 1.0);
    std::vector<Index> liked(items.begin(), items.begin() + 10);
    const double constant_maps = aps(flat, liked);

    const std::vector<double> four{0.9, 0.5, 0.3, 0.1};
    const std::vector<Index> top{0}, all{0, 1, 2, 3};
    const double a = aps(four, top), b = aps(four, all);

    const bool ok = std::abs(random_maps - 50.0) <= 2.0 && std::abs(constant_maps - 50.0) <= 0.1 &&
                    a == 25.0 && b == 62.5;
    return {ok, fmt("random %.3f, constant %.3f, unit examples %.1f / %.1f", random_maps, constant_maps, a, b)};
}

Hyperparams planted_hyper() {
    Hyperparams h; // default weights
    h.K = 8;
    h.seed = 1;
    return h;
}

Outcome recommendation_quality() {
    const auto t0 = Clock::now();
    const auto pm = generate_planted(synth_preset("small"));
    const auto masks = block_split(pm.data, 1);
    const auto h = planted_hyper();
    const double m_stm = maps(train_stm(pm.data, masks, h), pm.data, masks).maps;
    const double m_sostm = maps(train_sostm(pm.data, masks, h), pm.data, masks).maps;
    FactorConfig f;
    f.latent_dim = 8;
    f.seed = 1;
    const double m_pmf = maps(train_pmf(pm.data, masks, f), pm.data, masks).maps;
    const double secs = since(t0);
    return {m_stm <= 35.0 && m_sostm <= m_stm && m_stm < m_pmf && secs <= 120.0,
            fmt("mAPS SoSTM %.2f <= STM %.2f < PMF %.2f (oracle %.2f, random 50), %.1f s", m_sostm, m_stm, m_pmf,
                pm.oracle_maps, secs)};
}

Outcome cold_start() {
    const auto pm = generate_planted(synth_preset("small"));
    const auto report = cold_start_protocol(pm.data, 1, planted_hyper());
    bool ok = report.points.front().train_fraction == 1.0 && report.points.front().maps < 45.0 &&
              report.points.back().maps < 50.0 && report.unseen_ratings_in_training == 0;
    std::ostringstream d;
    for (std::size_t k = 0; k < report.points.size(); ++k) {
        const auto& p = report.points[k];
        if (k > 0) ok = ok && p.maps >= report.points[k - 1].maps - 3.0;
        d << (k ? ", " : "") << fmt("%.1f: %.2f", p.train_fraction, p.maps);
    }
    return {ok, "mAPS by train fraction " + d.str()};
}

Outcome sparsity_behavior() {
    const auto pm = generate_planted(synth_preset("sparse"));
    const double planted = 0.5 * (profile_sparsity(pm.U) + profile_sparsity(pm.V));
    const auto masks = block_split(pm.data, 1);
    Hyperparams h;
    h.K = pm.D.cols();
    h.seed = 1;
    const auto s = train_stm(pm.data, masks, h);
    const auto c = train_ctr_i(pm.data, masks, h);
    const double su = profile_sparsity(s.U), sv = profile_sparsity(s.V);
    const double cu = profile_sparsity(c.U), cv = profile_sparsity(c.V);
    return {su < 5.0 * planted && sv < 5.0 * planted && cu > 0.9 && cv > 0.9,
            fmt("planted %.4f; STM U %.4f V %.4f; CTR-I U %.4f V %.4f", planted, su, sv, cu, cv)};
}

Outcome convergence_horizon() {
    const auto pm = generate_planted(synth_preset("small"));
    const auto masks = block_split(pm.data, 1);
    auto h = planted_hyper();
    h.max_iters = 100;
    h.tol = 1e-10;
    const auto s = train_stm(pm.data, masks, h);
    const double final_value = s.objective_trace.back();
    std::size_t reached = s.objective_trace.size();
    for (std::size_t t = 0; t < s.objective_trace.size(); ++t) {
        if (std::abs(s.objective_trace[t] - final_value) <= 0.01 * std::abs(final_value)) {
            reached = t;
            break;
        }
    }
    return {reached <= 10, fmt("within 1%% of the final objective %.4f after %zu of %zu iterations", final_value,
                               reached, s.objective_trace.size() - 1)};
}

} // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"solver correctness", solver_correctness},
        {"dictionary update", dictionary_update},
        {"monotone objectives", monotonicity},
        {"reductions", reductions},
        {"closed forms", closed_forms},
        {"gradient checks", gradient_checks},
        {"metric sanity", metric_sanity},
        {"recommendation quality", recommendation_quality},
        {"cold start", cold_start},
        {"sparsity behavior", sparsity_behavior},
        {"convergence horizon", convergence_horizon},
    };
    int failed = 0, n = 0;
    for (const auto& [name, run] : criteria) {
        ++n;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("[%s] %2d. %s: %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", n - failed, n);
    return failed == 0 ? 0 : 1;
}
