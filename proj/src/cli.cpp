#include "stm/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stm/dataset_io.hpp"
#include "stm/evaluation.hpp"
#include "stm/parallel.hpp"
#include "stm/similarity.hpp"
#include "stm/split.hpp"
#include "stm/synthgen.hpp"

namespace stm {

namespace {

using nlohmann::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flag values; unset flags leave the config-file/default value alone.
struct Overrides {
    std::optional<std::string> config_file;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> data_dir;

    std::optional<double> lambda_r, lambda_u, lambda_v, lambda_s, lambda_z, tol;
    std::optional<Index> K;
    std::optional<int> max_iters;

    std::optional<Index> latent_dim;
    std::optional<double> reg, lambda_social, lr;
    std::optional<int> epochs;

    std::optional<std::uint64_t> split_seed;
    std::optional<double> user_fraction, item_fraction;
};

json to_json(const Hyperparams& h) {
    return {{"lambda_r", h.lambda_r}, {"lambda_u", h.lambda_u}, {"lambda_v", h.lambda_v},
            {"lambda_s", h.lambda_s}, {"lambda_z", h.lambda_z}, {"K", h.K},
            {"max_iters", h.max_iters}, {"tol", h.tol},       {"seed", h.seed}};
}

json to_json(const FactorConfig& f) {
    return {{"latent_dim", f.latent_dim}, {"reg", f.reg}, {"lambda_social", f.lambda_social},
            {"lr", f.lr}, {"iters", f.iters}, {"seed", f.seed}};
}

json to_json(const SplitSpec& s) {
    return {{"seed", s.seed}, {"user_fraction", s.user_fraction}, {"item_fraction", s.item_fraction}};
}

json to_json(const RunConfig& c) {
    json j{{"command", c.command},
           {"data_dir", c.data_dir.string()},
           {"model", to_string(c.kind)},
           {"seed", c.seed},
           {"threads", c.threads},
           {"hyper", to_json(c.hyper)},
           {"factor", to_json(c.factor)},
           {"split", to_json(c.split)}};
    if (c.model_file) j["model_file"] = c.model_file->string();
    if (c.out) j["out"] = c.out->string();
    return j;
}

template <class T>
void take(const json& section, const char* key, T& target, const std::string& where) {
    if (!section.contains(key)) return;
    try {
        target = section.at(key).get<T>();
    } catch (const json::exception&) {
        throw UsageError("config file: '" + where + "." + key + "' has the wrong type");
    }
}

void check_keys(const json& section, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!section.is_object()) throw UsageError("config file: '" + where + "' must be an object");
    for (const auto& [key, value] : section.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) throw UsageError("config file: unknown key '" + where + "." + key + "'");
    }
}

/// Config file layout:
///   {"seed": 3, "threads": 2, "model": "stm", "data": "dir",
///    "hyper": {...}, "factor": {...}, "split": {...}}
/// with the key names used in reports.
void apply_config_file(const std::filesystem::path& file, RunConfig& cfg, std::optional<std::uint64_t>& split_seed) {
    std::ifstream in(file);
    if (!in) throw FileError("cannot open config file " + file.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw stm::ParseError(file.string(), 0, std::string("invalid JSON: ") + e.what());
    }
    check_keys(j, {"seed", "threads", "model", "data", "hyper", "factor", "split"}, "config");
    take(j, "seed", cfg.seed, "config");
    take(j, "threads", cfg.threads, "config");
    if (j.contains("model")) {
        std::string kind;
        take(j, "model", kind, "config");
        cfg.kind = parse_model_kind(kind);
    }
    if (j.contains("data")) {
        std::string dir;
        take(j, "data", dir, "config");
        cfg.data_dir = dir;
    }
    if (j.contains("hyper")) {
        const auto& h = j["hyper"];
        check_keys(h, {"lambda_r", "lambda_u", "lambda_v", "lambda_s", "lambda_z", "K", "max_iters", "tol"},
                   "hyper");
        take(h, "lambda_r", cfg.hyper.lambda_r, "hyper");
        take(h, "lambda_u", cfg.hyper.lambda_u, "hyper");
        take(h, "lambda_v", cfg.hyper.lambda_v, "hyper");
        take(h, "lambda_s", cfg.hyper.lambda_s, "hyper");
        take(h, "lambda_z", cfg.hyper.lambda_z, "hyper");
        take(h, "K", cfg.hyper.K, "hyper");
        take(h, "max_iters", cfg.hyper.max_iters, "hyper");
        take(h, "tol", cfg.hyper.tol, "hyper");
    }
    if (j.contains("factor")) {
        const auto& f = j["factor"];
        check_keys(f, {"latent_dim", "reg", "lambda_social", "lr", "iters"}, "factor");
        take(f, "latent_dim", cfg.factor.latent_dim, "factor");
        take(f, "reg", cfg.factor.reg, "factor");
        take(f, "lambda_social", cfg.factor.lambda_social, "factor");
        take(f, "lr", cfg.factor.lr, "factor");
        take(f, "iters", cfg.factor.iters, "factor");
    }
    if (j.contains("split")) {
        const auto& s = j["split"];
        check_keys(s, {"seed", "user_fraction", "item_fraction"}, "split");
        if (s.contains("seed")) {
            std::uint64_t v = 0;
            take(s, "seed", v, "split");
            split_seed = v;
        }
        take(s, "user_fraction", cfg.split.user_fraction, "split");
        take(s, "item_fraction", cfg.split.item_fraction, "split");
    }
}

RunConfig resolve(const std::string& command, const Overrides& o) {
    RunConfig cfg;
    cfg.command = command;
    std::optional<std::uint64_t> split_seed;
    if (o.config_file) apply_config_file(*o.config_file, cfg, split_seed);

    if (o.seed) cfg.seed = *o.seed;
    if (o.threads) cfg.threads = *o.threads;
    if (o.data_dir) cfg.data_dir = *o.data_dir;
    auto set = [](const auto& flag, auto& target) {
        if (flag) target = *flag;
    };
    set(o.lambda_r, cfg.hyper.lambda_r);
    set(o.lambda_u, cfg.hyper.lambda_u);
    set(o.lambda_v, cfg.hyper.lambda_v);
    set(o.lambda_s, cfg.hyper.lambda_s);
    set(o.lambda_z, cfg.hyper.lambda_z);
    set(o.K, cfg.hyper.K);
    set(o.max_iters, cfg.hyper.max_iters);
    set(o.tol, cfg.hyper.tol);
    set(o.latent_dim, cfg.factor.latent_dim);
    set(o.reg, cfg.factor.reg);
    set(o.lambda_social, cfg.factor.lambda_social);
    set(o.lr, cfg.factor.lr);
    set(o.epochs, cfg.factor.iters);
    set(o.split_seed, split_seed);
    set(o.user_fraction, cfg.split.user_fraction);
    set(o.item_fraction, cfg.split.item_fraction);

    cfg.hyper.seed = cfg.seed;
    cfg.factor.seed = cfg.seed;
    cfg.split.seed = split_seed.value_or(cfg.seed);
    if (cfg.threads < 0) throw UsageError("--threads must be >= 0");
    return cfg;
}

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_file, "JSON config file; flags override it");
    cmd->add_option("--seed", o.seed, "Seed for initialization and splits");
    cmd->add_option("--threads", o.threads, "Worker thread cap (0 = hardware)");
}

void add_data(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--data", o.data_dir, "Data directory")->envname("STM_DATA_DIR");
}

void add_hyper(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--lambda-r", o.lambda_r, "Rating weight");
    cmd->add_option("--lambda-u", o.lambda_u, "User profile L1 weight");
    cmd->add_option("--lambda-v", o.lambda_v, "Item profile L1 weight");
    cmd->add_option("--lambda-s", o.lambda_s, "Social weight (sostm)");
    cmd->add_option("--lambda-z", o.lambda_z, "Factor profile ridge (sostm)");
    cmd->add_option("--topics,-K", o.K, "Dictionary size");
    cmd->add_option("--iters", o.max_iters, "Outer iterations");
    cmd->add_option("--tol", o.tol, "Relative objective tolerance");
}

void add_factor(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--latent-dim", o.latent_dim, "Latent dimension (pmf, sorec)");
    cmd->add_option("--reg", o.reg, "Ridge weight (pmf, sorec)");
    cmd->add_option("--lambda-social", o.lambda_social, "Social weight (sorec)");
    cmd->add_option("--lr", o.lr, "Initial step size (pmf, sorec)");
    cmd->add_option("--epochs", o.epochs, "Gradient steps (pmf, sorec)");
}

void add_split(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--split-seed", o.split_seed, "Split seed (defaults to --seed)");
    cmd->add_option("--user-fraction", o.user_fraction, "Share of users in the test block");
    cmd->add_option("--item-fraction", o.item_fraction, "Share of items in the test block");
}

Dataset load_data(const RunConfig& cfg) {
    if (cfg.data_dir.empty()) throw UsageError("no data directory: pass --data or set STM_DATA_DIR");
    if (!std::filesystem::is_directory(cfg.data_dir)) {
        throw FileError("data directory " + cfg.data_dir.string() + " does not exist");
    }
    // A data directory is ingest's output: features were already normalized
    // there (or deliberately left raw), so read them verbatim.
    IngestOptions opt;
    opt.standardize = false;
    return load_data_dir(cfg.data_dir, opt);
}

bool needs_social(ModelKind kind) { return kind == ModelKind::sostm || kind == ModelKind::sorec; }

void require_social(const Dataset& data, const RunConfig& cfg, ModelKind kind) {
    if (needs_social(kind) && !data.social) {
        throw FileError("model " + to_string(kind) + " needs social input: neither " +
                        std::string(DataDirLayout::social) + " nor " + DataDirLayout::groups + " found in " +
                        cfg.data_dir.string());
    }
}

StoredModel fit(ModelKind kind, const Dataset& data, const SplitMasks& masks, const RunConfig& cfg) {
    switch (kind) {
    case ModelKind::stm: return stored_from(train_stm(data, masks, cfg.hyper), kind);
    case ModelKind::sostm: return stored_from(train_sostm(data, masks, cfg.hyper));
    case ModelKind::ctr_i: return stored_from(train_ctr_i(data, masks, cfg.hyper), kind);
    case ModelKind::pmf: return stored_from(train_pmf(data, masks, cfg.factor), kind);
    case ModelKind::sorec: return stored_from(train_sorec(data, masks, cfg.factor), kind);
    }
    throw std::logic_error("unhandled model kind");
}

void check_model_fits(const StoredModel& m, const Dataset& data) {
    if (m.U.cols() != data.n_users() || m.V.cols() != data.n_items()) {
        throw SchemaError("model has " + std::to_string(m.U.cols()) + " users x " + std::to_string(m.V.cols()) +
                          " items but the data has " + std::to_string(data.n_users()) + " x " +
                          std::to_string(data.n_items()));
    }
}

json ranking_json(const RankingReport& r) {
    json curve = json::array();
    for (const auto& p : r.pps_curve) curve.push_back({p.percentile, p.cumulative_fraction});
    return {{"maps", r.maps},
            {"n_evaluated_users", r.n_evaluated_users},
            {"n_excluded_users", r.n_excluded_users},
            {"n_candidate_items", r.n_candidate_items},
            {"pps_curve", curve}};
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream f(file);
    if (!f) throw FileError("cannot write " + file.string());
    f << text;
}

void emit(const json& report, const std::optional<std::string>& file, std::ostream& out) {
    const auto text = report.dump(2) + "\n";
    if (file) write_text(*file, text);
    out << text;
}

void write_curve(const std::vector<PpsPoint>& curve, const std::filesystem::path& file) {
    std::ostringstream s;
    s << "percentile,cumulative_fraction\n";
    s.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& p : curve) s << p.percentile << ',' << p.cumulative_fraction << '\n';
    write_text(file, s.str());
}

/// FNV-1a over entry indices, for auditing that runs share a split.
std::string digest(const std::vector<Index>& entries) {
    std::uint64_t h = 1469598103934665603ULL;
    for (Index e : entries) {
        auto v = static_cast<std::uint64_t>(e);
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xFF;
            h *= 1099511628211ULL;
        }
    }
    std::ostringstream s;
    s << std::hex << h;
    return s.str();
}

json split_audit(const SplitMasks& masks, const SplitSpec& spec) {
    return {{"seed", spec.seed},
            {"user_fraction", spec.user_fraction},
            {"item_fraction", spec.item_fraction},
            {"n_train", masks.train.size()},
            {"n_test", masks.test.size()},
            {"train_digest", digest(masks.train)},
            {"test_digest", digest(masks.test)}};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string ratings, features, out;
    std::optional<std::string> social, groups, users;
    bool raw = false;
    bool binary = false;
};

int cmd_ingest(const IngestArgs& a, const RunConfig&, std::ostream& out) {
    IngestOptions opt;
    opt.standardize = !a.raw;
    if (a.users) opt.users_file = *a.users;
    auto opt_path = [](const std::optional<std::string>& s) -> std::optional<std::filesystem::path> {
        if (s) return std::filesystem::path(*s);
        return std::nullopt;
    };
    const auto data = ingest_dataset(a.ratings, a.features, opt_path(a.social), opt_path(a.groups), opt);
    write_data_dir(data, a.out, a.binary ? FeatureFormat::binary : FeatureFormat::csv);
    // Report the graph later loads will see, which falls back to shared groups.
    Index links = data.social ? data.social->n_links() : 0;
    if (!data.social && data.groups) links = social_similarity_from_groups(*data.groups).n_links();
    json r{{"out", a.out},
           {"n_users", data.n_users()},
           {"n_items", data.n_items()},
           {"n_ratings", data.ratings.size()},
           {"feature_dim", data.features.dim()},
           {"n_social_links", links}};
    out << r.dump(2) << '\n';
    return kExitOk;
}

struct SynthArgs {
    std::string preset = "small";
    std::string out;
    bool binary = false;
};

int cmd_synth(const SynthArgs& a, const Overrides& o, std::ostream& out) {
    auto config = synth_preset(a.preset);
    if (o.seed) config.seed = *o.seed;
    const auto planted = generate_planted(config);
    write_data_dir(planted.data, a.out, a.binary ? FeatureFormat::binary : FeatureFormat::csv);
    write_truth(planted, config, std::filesystem::path(a.out) / DataDirLayout::truth);
    json r{{"preset", a.preset},
           {"out", a.out},
           {"seed", config.seed},
           {"n_users", config.N},
           {"n_items", config.M},
           {"n_ratings", planted.data.ratings.size()},
           {"n_social_links", planted.data.social->n_links()},
           {"oracle_maps", planted.oracle_maps}};
    out << r.dump(2) << '\n';
    return kExitOk;
}

struct TrainArgs {
    std::string model = "stm";
    std::string out;
    std::optional<std::string> trace;
};

int cmd_train(const TrainArgs& a, RunConfig cfg, std::ostream& out) {
    cfg.kind = parse_model_kind(a.model);
    cfg.out = a.out;
    const auto data = load_data(cfg);
    require_social(data, cfg, cfg.kind);
    const auto masks = block_split(data, cfg.split.seed, cfg.split.user_fraction, cfg.split.item_fraction);
    const auto t0 = std::chrono::steady_clock::now();
    auto model = fit(cfg.kind, data, masks, cfg);
    const double secs = seconds_since(t0);
    model.split = cfg.split;
    model.run_config = to_json(cfg).dump();
    save_model(model, a.out);

    const std::filesystem::path trace_file = a.trace ? std::filesystem::path(*a.trace)
                                                     : std::filesystem::path(a.out + ".trace.csv");
    std::ostringstream t;
    t.precision(std::numeric_limits<double>::max_digits10);
    t << "iteration,objective\n";
    for (std::size_t k = 0; k < model.trace.size(); ++k) t << k << ',' << model.trace[k] << '\n';
    write_text(trace_file, t.str());

    json r{{"model", to_string(cfg.kind)},
           {"out", a.out},
           {"trace", trace_file.string()},
           {"iterations", model.trace.empty() ? 0 : model.trace.size() - 1},
           {"final_objective", model.trace.empty() ? 0.0 : model.trace.back()},
           {"seconds", secs},
           {"split", split_audit(masks, cfg.split)},
           {"config", to_json(cfg)}};
    out << r.dump(2) << '\n';
    return kExitOk;
}

struct EvalArgs {
    std::string model;
    std::optional<std::string> report, curve;
};

int cmd_eval(const EvalArgs& a, RunConfig cfg, std::ostream& out) {
    const auto model = load_model(a.model);
    cfg.model_file = a.model;
    cfg.kind = model.kind;
    cfg.split = model.split;
    const auto data = load_data(cfg);
    check_model_fits(model, data);
    const auto masks = block_split(data, model.split.seed, model.split.user_fraction, model.split.item_fraction);
    const auto ranked = maps(model, data, masks);
    if (a.curve) write_curve(ranked.pps_curve, *a.curve);
    json r = ranking_json(ranked);
    r["model"] = to_string(model.kind);
    r["profile_density"] = {{"U", profile_sparsity(model.U)}, {"V", profile_sparsity(model.V)}};
    r["split"] = split_audit(masks, model.split);
    r["config"] = to_json(cfg);
    r["training_config"] = json::parse(model.run_config);
    emit(r, a.report, out);
    return kExitOk;
}

struct ColdStartArgs {
    double unseen = 0.2;
    std::vector<double> fractions{1.0, 0.8, 0.6, 0.4, 0.2};
    std::optional<std::string> report;
};

int cmd_coldstart(const ColdStartArgs& a, RunConfig cfg, std::ostream& out) {
    const auto data = load_data(cfg);
    const auto report = cold_start_protocol(data, cfg.split.seed, cfg.hyper, a.unseen, a.fractions);
    json points = json::array();
    for (const auto& p : report.points) {
        points.push_back({{"train_fraction", p.train_fraction},
                          {"n_train_items", p.n_train_items},
                          {"maps", p.maps},
                          {"n_evaluated_users", p.n_evaluated_users}});
    }
    json r{{"unseen_fraction", a.unseen},
           {"n_unseen_items", report.unseen_items.size()},
           {"unseen_ratings_in_training", report.unseen_ratings_in_training},
           {"points", points},
           {"config", to_json(cfg)}};
    emit(r, a.report, out);
    return kExitOk;
}

struct CompareArgs {
    std::vector<std::string> models{"stm", "sostm", "ctr-i", "pmf", "sorec"};
    std::optional<std::string> report;
};

int cmd_compare(const CompareArgs& a, RunConfig cfg, std::ostream& out) {
    std::vector<ModelKind> kinds;
    for (const auto& m : a.models) kinds.push_back(parse_model_kind(m));
    const auto data = load_data(cfg);
    for (auto k : kinds) require_social(data, cfg, k);
    const auto masks = block_split(data, cfg.split.seed, cfg.split.user_fraction, cfg.split.item_fraction);

    json rows = json::array();
    for (auto kind : kinds) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto model = fit(kind, data, masks, cfg);
        const double secs = seconds_since(t0);
        const auto ranked = maps(model, data, masks);
        rows.push_back({{"model", to_string(kind)},
                        {"maps", ranked.maps},
                        {"n_evaluated_users", ranked.n_evaluated_users},
                        {"profile_density", {{"U", profile_sparsity(model.U)}, {"V", profile_sparsity(model.V)}}},
                        {"seconds", secs},
                        {"test_digest", digest(masks.test)}});
    }
    json r{{"models", rows}, {"split", split_audit(masks, cfg.split)}, {"config", to_json(cfg)}};
    emit(r, a.report, out);
    return kExitOk;
}

struct InspectArgs {
    std::string model;
    Index top = 10;
    std::vector<Index> topics;
};

int cmd_inspect(const InspectArgs& a, RunConfig cfg, std::ostream& out) {
    const auto model = load_model(a.model);
    cfg.model_file = a.model;
    cfg.kind = model.kind;
    std::vector<std::string> ids;
    if (!cfg.data_dir.empty()) {
        const auto data = load_data(cfg);
        check_model_fits(model, data);
        ids = data.item_ids;
    }
    std::vector<Index> topics = a.topics;
    if (topics.empty()) {
        for (Index k = 0; k < model.V.rows(); ++k) topics.push_back(k);
    }
    json rows = json::array();
    for (Index k : topics) {
        if (k < 0 || k >= model.V.rows()) {
            throw UsageError("topic " + std::to_string(k) + " outside 0.." + std::to_string(model.V.rows() - 1));
        }
        json items = json::array();
        for (Index j : topic_top_items(model.V, k, a.top)) {
            if (model.V(k, j) <= 0.0) break;
            items.push_back({{"item", ids.empty() ? std::to_string(j) : ids[static_cast<std::size_t>(j)]},
                             {"weight", model.V(k, j)}});
        }
        rows.push_back({{"topic", k}, {"items", items}});
    }
    out << json{{"model", to_string(model.kind)}, {"topics", rows}, {"config", to_json(cfg)}}.dump(2) << '\n';
    return kExitOk;
}

std::string first_unknown_flag(CLI::App& app, const std::vector<std::string>& args) {
    CLI::App* scope = &app;
    for (const auto& a : args) {
        if (a.empty() || a[0] != '-') {
            if (scope == &app) {
                if (auto* sub = app.get_subcommand_no_throw(a)) scope = sub;
            }
            continue;
        }
        if (a == "--") break;
        const auto name = a.substr(0, a.find('='));
        if (!scope->get_option_no_throw(name) && !app.get_option_no_throw(name)) return name;
    }
    return {};
}

} // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sparse topic model recommender", "stm"};
    app.require_subcommand(1);

    Overrides o;
    IngestArgs ingest;
    SynthArgs synth;
    TrainArgs train;
    EvalArgs eval;
    ColdStartArgs cold;
    CompareArgs compare;
    InspectArgs inspect;

    auto* c_ingest = app.add_subcommand("ingest", "Normalize raw CSV/binary inputs into a data directory");
    c_ingest->add_option("--ratings", ingest.ratings, "user,item,value CSV")->required();
    c_ingest->add_option("--features", ingest.features, "item,f1..fd CSV or binary container")->required();
    c_ingest->add_option("--social", ingest.social, "user_a,user_b,similarity CSV");
    c_ingest->add_option("--groups", ingest.groups, "user,group CSV");
    c_ingest->add_option("--users", ingest.users, "user CSV fixing the user order");
    c_ingest->add_flag("--raw", ingest.raw, "Keep features unstandardized");
    c_ingest->add_option("--out", ingest.out, "Output directory")->required();
    c_ingest->add_flag("--binary", ingest.binary, "Write features.bin instead of features.csv");
    add_common(c_ingest, o);

    auto* c_synth = app.add_subcommand("synth", "Generate a planted-model dataset");
    c_synth->add_option("--preset", synth.preset, "small, sparse or flickr")->capture_default_str();
    c_synth->add_option("--out", synth.out, "Output directory")->required();
    c_synth->add_flag("--binary", synth.binary, "Write features.bin instead of features.csv");
    add_common(c_synth, o);

    auto* c_train = app.add_subcommand("train", "Fit a model on the training block");
    c_train->add_option("--model", train.model, "stm, sostm, ctr-i, pmf or sorec")->capture_default_str();
    c_train->add_option("--out", train.out, "Model file")->required();
    c_train->add_option("--trace", train.trace, "Objective trace CSV (default <out>.trace.csv)");
    add_common(c_train, o);
    add_data(c_train, o);
    add_hyper(c_train, o);
    add_factor(c_train, o);
    add_split(c_train, o);

    auto* c_eval = app.add_subcommand("eval", "Rank the test block with a saved model");
    c_eval->add_option("--model", eval.model, "Model file")->required();
    c_eval->add_option("--report", eval.report, "Also write the JSON report here");
    c_eval->add_option("--curve", eval.curve, "P-PS curve CSV");
    add_common(c_eval, o);
    add_data(c_eval, o);

    auto* c_cold = app.add_subcommand("coldstart", "Cold-start protocol over shrinking training sets");
    c_cold->add_option("--unseen", cold.unseen, "Share of items held out")->capture_default_str();
    c_cold->add_option("--fractions", cold.fractions, "Training fractions of the remaining items")
        ->delimiter(',');
    c_cold->add_option("--report", cold.report, "Also write the JSON report here");
    add_common(c_cold, o);
    add_data(c_cold, o);
    add_hyper(c_cold, o);
    add_split(c_cold, o);

    auto* c_compare = app.add_subcommand("compare", "Train and rank several models on one split");
    c_compare->add_option("--models", compare.models, "Model kinds")->delimiter(',');
    c_compare->add_option("--report", compare.report, "Also write the JSON report here");
    add_common(c_compare, o);
    add_data(c_compare, o);
    add_hyper(c_compare, o);
    add_factor(c_compare, o);
    add_split(c_compare, o);

    auto* c_inspect = app.add_subcommand("inspect-topics", "List the top items of each topic");
    c_inspect->add_option("--model", inspect.model, "Model file")->required();
    c_inspect->add_option("--top", inspect.top, "Items per topic")->capture_default_str();
    c_inspect->add_option("--topics", inspect.topics, "Topic indices")->delimiter(',');
    add_common(c_inspect, o);
    add_data(c_inspect, o);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        // CLI11 checks required options before extras; name the stray flag first.
        const auto unknown = first_unknown_flag(app, args);
        err << "error: " << (unknown.empty() ? std::string(e.what()) : "unknown option " + unknown) << "\n\n"
            << app.help();
        return kExitUsage;
    }

    auto* cmd = app.get_subcommands().front();
    try {
        const RunConfig cfg = resolve(cmd->get_name(), o);
        if (cfg.threads > 0) set_thread_limit(cfg.threads);
        if (cmd == c_ingest) return cmd_ingest(ingest, cfg, out);
        if (cmd == c_synth) return cmd_synth(synth, o, out);
        if (cmd == c_train) return cmd_train(train, cfg, out);
        if (cmd == c_eval) return cmd_eval(eval, cfg, out);
        if (cmd == c_cold) return cmd_coldstart(cold, cfg, out);
        if (cmd == c_compare) return cmd_compare(compare, cfg, out);
        if (cmd == c_inspect) return cmd_inspect(inspect, cfg, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const FileError& e) {
        err << "error: " << e.what() << '\n';
        return kExitFile;
    } catch (const stm::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitFile;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << '\n';
        return kExitFile;
    } catch (const TrainingError& e) {
        err << "training aborted: " << e.what() << '\n';
        return kExitTraining;
    } catch (const SolverError& e) {
        err << "training aborted: " << e.what() << '\n';
        return kExitTraining;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}

int run_command(const std::vector<std::string>& args) { return run_command(args, std::cout, std::cerr); }

} // namespace stm
