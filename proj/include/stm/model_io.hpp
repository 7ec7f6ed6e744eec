#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stm/baselines.hpp"
#include "stm/social_stm.hpp"

namespace stm {

enum class ModelKind { stm, sostm, pmf, sorec, ctr_i };

std::string to_string(ModelKind kind);
/// Accepts stm, sostm, pmf, sorec, ctr-i. Throws std::invalid_argument otherwise.
ModelKind parse_model_kind(const std::string& name);

struct SplitSpec {
    std::uint64_t seed = 0;
    double user_fraction = 0.5;
    double item_fraction = 0.5;
};

/// Model container shared by every model kind. Topic models fill D/duals;
/// SoSTM and SoRec fill Z. Predictions are always U_i'V_j.
struct StoredModel {
    static constexpr int kFormatVersion = 1;

    ModelKind kind = ModelKind::stm;
    Hyperparams hyper;
    FactorConfig factor;
    SplitSpec split;
    Matrix D;
    Vector duals;
    Matrix U;
    Matrix V;
    Matrix Z;
    std::vector<double> trace;
    /// Resolved run configuration, serialized JSON text.
    std::string run_config = "{}";

    double predict(Index user, Index item) const { return U.col(user).dot(V.col(item)); }
};

StoredModel stored_from(const STMState& state, ModelKind kind);
StoredModel stored_from(const SoSTMState& state);
StoredModel stored_from(const FactorModel& model, ModelKind kind);
STMState to_stm_state(const StoredModel& model);

/// JSON container with a "format"/"version" header. Doubles are written with
/// round-trip precision.
void save_model(const StoredModel& model, const std::filesystem::path& file);
/// Throws FileError when missing, SchemaError on a malformed container.
StoredModel load_model(const std::filesystem::path& file);

} // namespace stm
