#pragma once

#include <filesystem>
#include <optional>

#include "stm/types.hpp"

namespace stm {

struct IngestOptions {
    /// Standardize feature dimensions over items. Disable for raw features.
    bool standardize = true;
    /// Optional `user` list fixing the user index order. Users listed here but
    /// absent from every other file are kept with no ratings.
    std::optional<std::filesystem::path> users_file;
};

/// Reads the CSV/binary inputs into a consistent, 0-based Dataset.
///
/// Item indices follow the row (CSV) or column (binary) order of the features
/// file; a binary container names its items "0".."M-1". User indices follow
/// the users file when given, otherwise first appearance across ratings,
/// social and groups files in that order.
///
/// Throws ParseError (with line number) on malformed rows or duplicate rating
/// pairs, SchemaError when files disagree, FileError when a file is missing.
Dataset ingest_dataset(const std::filesystem::path& ratings_file,
                       const std::filesystem::path& features_file,
                       const std::optional<std::filesystem::path>& social_file = std::nullopt,
                       const std::optional<std::filesystem::path>& groups_file = std::nullopt,
                       const IngestOptions& options = {});

/// Standard file names inside a data directory.
struct DataDirLayout {
    static constexpr const char* ratings = "ratings.csv";
    static constexpr const char* features_csv = "features.csv";
    static constexpr const char* features_bin = "features.bin";
    static constexpr const char* social = "social.csv";
    static constexpr const char* groups = "groups.csv";
    static constexpr const char* users = "users.csv";
    static constexpr const char* truth = "truth.json";
};

/// Ingests `dir` using the DataDirLayout names. Prefers features.bin over
/// features.csv when both exist. When groups.csv exists but social.csv does
/// not, the social graph is derived from group co-membership.
Dataset load_data_dir(const std::filesystem::path& dir, IngestOptions options = {});

enum class FeatureFormat { csv, binary };

/// Writes `data` in the layout read by load_data_dir (including users.csv).
void write_data_dir(const Dataset& data, const std::filesystem::path& dir,
                    FeatureFormat format = FeatureFormat::csv);

void write_features_binary(const FeatureMatrix& features, const std::filesystem::path& file);
FeatureMatrix read_features_binary(const std::filesystem::path& file);

} // namespace stm
