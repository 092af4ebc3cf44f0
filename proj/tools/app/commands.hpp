#pragma once

#include "config.hpp"

#include "ninepatch/eval.hpp"

#include <optional>
#include <string>

namespace ninepatch::app {

/// Process exit codes.
enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_data = 2,
    exit_diverged = 3,
    /// gradcheck ran but the error bound was exceeded.
    exit_check_failed = 4,
};

/// Command-line values that override the config file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> folds;
    std::optional<int> test_fold;
    std::optional<int> jobs;
};

void apply_overrides(ExperimentConfig& config, const Overrides& o);

struct ExtractStats {
    std::size_t images = 0;
    std::size_t unreadable = 0;
    std::size_t patches = 0;
    double mean_patches_per_image() const { return images ? static_cast<double>(patches) / images : 0.0; }
};

/// Writes <out>/patches/*.nppatch and <out>/stats.txt.
ExtractStats cmd_extract(const ExperimentConfig& config);

/// Trains the method's networks on every fold except test_fold (all data when
/// test_fold is -1). Writes <out>/<network>.npmlp, <network>.log.csv and config.ini.
void cmd_train(const ExperimentConfig& config);

/// Evaluates models from model_dir (or the [models] section) on test_fold
/// (all data when -1). Writes report files and predictions.csv to <out>.
eval::EvalReport cmd_eval(const ExperimentConfig& config, const std::string& model_dir);

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t entries = 0;
    bool passed = false;
};

GradCheckResult cmd_gradcheck(std::uint64_t seed, bool corrupt_bias_grad);

/// Full k-fold pipeline. Writes config.ini, corpus.txt, report.txt,
/// report.csv, per_slot.csv and fold<i>/ artifacts under <out>.
eval::CvSummary cmd_experiment(const ExperimentConfig& config);

/// Parses argv and dispatches; returns the process exit code. Errors are
/// reported on stderr.
int run_cli(int argc, const char* const* argv);

}  // namespace ninepatch::app
