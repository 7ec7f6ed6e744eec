#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stm/model_io.hpp"

namespace stm {

/// Exit statuses of run_command.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitUsage = 2,
    kExitFile = 3,
    kExitTraining = 4,
};

/// Fully resolved settings of one command: defaults, then the --config file,
/// then flags.
struct RunConfig {
    std::string command;
    std::filesystem::path data_dir;
    std::optional<std::filesystem::path> model_file;
    std::optional<std::filesystem::path> out;
    ModelKind kind = ModelKind::stm;
    Hyperparams hyper;
    FactorConfig factor;
    SplitSpec split;
    std::uint64_t seed = 0;
    int threads = 0;
};

/// Runs one command (`ingest`, `synth`, `train`, `eval`, `coldstart`,
/// `compare`, `inspect-topics`); `args` excludes the program name.
/// Unknown flags give exit 2, unreadable inputs exit 3, aborted training exit 4.
/// The default data directory comes from STM_DATA_DIR.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_command(const std::vector<std::string>& args);

} // namespace stm
