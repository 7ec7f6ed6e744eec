#include "stm/model_io.hpp"

#include <fstream>

#include <json.hpp>

namespace stm {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()},
            {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Index>();
    const auto cols = j.at("cols").get<Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Index>(data.size()) != rows * cols) throw SchemaError("matrix payload size mismatch");
    return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

} // namespace

std::string to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::stm: return "stm";
    case ModelKind::sostm: return "sostm";
    case ModelKind::pmf: return "pmf";
    case ModelKind::sorec: return "sorec";
    case ModelKind::ctr_i: return "ctr-i";
    }
    return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
    for (auto k : {ModelKind::stm, ModelKind::sostm, ModelKind::pmf, ModelKind::sorec, ModelKind::ctr_i}) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("unknown model kind '" + name + "' (expected stm, sostm, pmf, sorec, ctr-i)");
}

StoredModel stored_from(const STMState& state, ModelKind kind) {
    StoredModel m;
    m.kind = kind;
    m.hyper = state.hyper;
    m.D = state.dictionary.D;
    m.duals = state.dictionary.duals;
    m.U = state.U;
    m.V = state.V;
    m.trace = state.objective_trace;
    return m;
}

StoredModel stored_from(const SoSTMState& state) {
    auto m = stored_from(static_cast<const STMState&>(state), ModelKind::sostm);
    m.Z = state.Z;
    return m;
}

StoredModel stored_from(const FactorModel& model, ModelKind kind) {
    StoredModel m;
    m.kind = kind;
    m.factor = model.config;
    m.U = model.U;
    m.V = model.V;
    m.Z = model.Z;
    m.trace = model.loss_trace;
    return m;
}

STMState to_stm_state(const StoredModel& model) {
    STMState s;
    s.hyper = model.hyper;
    s.dictionary.D = model.D;
    s.dictionary.duals = model.duals;
    s.U = model.U;
    s.V = model.V;
    s.objective_trace = model.trace;
    return s;
}

void save_model(const StoredModel& model, const std::filesystem::path& file) {
    json j;
    j["format"] = "stm-model";
    j["version"] = StoredModel::kFormatVersion;
    j["kind"] = to_string(model.kind);
    const auto& h = model.hyper;
    j["hyper"] = {{"lambda_r", h.lambda_r}, {"lambda_u", h.lambda_u}, {"lambda_v", h.lambda_v},
                  {"lambda_s", h.lambda_s}, {"lambda_z", h.lambda_z}, {"K", h.K},
                  {"max_iters", h.max_iters}, {"tol", h.tol},       {"seed", h.seed}};
    const auto& f = model.factor;
    j["factor"] = {{"latent_dim", f.latent_dim}, {"reg", f.reg}, {"lambda_social", f.lambda_social},
                   {"lr", f.lr}, {"iters", f.iters}, {"seed", f.seed}};
    j["split"] = {{"seed", model.split.seed},
                  {"user_fraction", model.split.user_fraction},
                  {"item_fraction", model.split.item_fraction}};
    j["D"] = matrix_to_json(model.D);
    j["duals"] = std::vector<double>(model.duals.data(), model.duals.data() + model.duals.size());
    j["U"] = matrix_to_json(model.U);
    j["V"] = matrix_to_json(model.V);
    j["Z"] = matrix_to_json(model.Z);
    j["trace"] = model.trace;
    j["run_config"] = json::parse(model.run_config);
    std::ofstream out(file);
    if (!out) throw FileError("cannot write model file " + file.string());
    out << j.dump() << '\n';
}

StoredModel load_model(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw FileError("cannot open model file " + file.string());
    StoredModel m;
    try {
        const json j = json::parse(in);
        if (j.at("format") != "stm-model") throw SchemaError("not an stm-model container");
        if (j.at("version").get<int>() != StoredModel::kFormatVersion) {
            throw SchemaError("unsupported model container version");
        }
        m.kind = parse_model_kind(j.at("kind").get<std::string>());
        const auto& h = j.at("hyper");
        m.hyper.lambda_r = h.at("lambda_r");
        m.hyper.lambda_u = h.at("lambda_u");
        m.hyper.lambda_v = h.at("lambda_v");
        m.hyper.lambda_s = h.at("lambda_s");
        m.hyper.lambda_z = h.at("lambda_z");
        m.hyper.K = h.at("K");
        m.hyper.max_iters = h.at("max_iters");
        m.hyper.tol = h.at("tol");
        m.hyper.seed = h.at("seed");
        const auto& f = j.at("factor");
        m.factor.latent_dim = f.at("latent_dim");
        m.factor.reg = f.at("reg");
        m.factor.lambda_social = f.at("lambda_social");
        m.factor.lr = f.at("lr");
        m.factor.iters = f.at("iters");
        m.factor.seed = f.at("seed");
        const auto& s = j.at("split");
        m.split.seed = s.at("seed");
        m.split.user_fraction = s.at("user_fraction");
        m.split.item_fraction = s.at("item_fraction");
        m.D = matrix_from_json(j.at("D"));
        const auto duals = j.at("duals").get<std::vector<double>>();
        m.duals = Eigen::Map<const Vector>(duals.data(), static_cast<Index>(duals.size()));
        m.U = matrix_from_json(j.at("U"));
        m.V = matrix_from_json(j.at("V"));
        m.Z = matrix_from_json(j.at("Z"));
        m.trace = j.at("trace").get<std::vector<double>>();
        m.run_config = j.at("run_config").dump();
    } catch (const json::exception& e) {
        throw SchemaError("malformed model file " + file.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw SchemaError("malformed model file " + file.string() + ": " + e.what());
    }
    if (m.U.rows() != m.V.rows()) throw SchemaError("model file: U and V disagree on latent dimension");
    return m;
}

} // namespace stm
