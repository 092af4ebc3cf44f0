#pragma once

#include "ninepatch/dataset.hpp"
#include "ninepatch/ensemble.hpp"
#include "ninepatch/imageproc.hpp"
#include "ninepatch/mlp.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ninepatch::app {

enum class Task { gender, age, age_given_gender };
enum class Method { nine_patch, edge_patch, rows, whole_image, combination, cascade };
enum class EdgeDetector { sobel, canny };
enum class Balance { none, discard };

std::string to_string(Task t);
std::string to_string(Method m);

/// One network of a combination, named after its input ("nine_patch",
/// "whole_image", "row2", ...).
struct MemberSpec {
    std::string name;
    ensemble::InputSource source;
    double weight = 1.0;
};

struct EdgeSpec {
    EdgeDetector detector = EdgeDetector::sobel;
    int gaussian_size = 9;
    double gaussian_sigma = 2.0;
    double threshold = 0.2;
    double canny_low = 0.1;
    double canny_high = 0.2;
    int patch_side = 13;
};

/// Everything an extract/train/eval/experiment run needs. Loaded from an INI
/// file whose every key is checked against a fixed schema.
struct ExperimentConfig {
    Task task = Task::gender;
    Method method = Method::nine_patch;
    std::uint64_t seed = 0;
    /// 0: infer from the manifest (max fold + 1).
    int folds = 0;
    /// -1: every fold in turn.
    int test_fold = -1;
    /// >= 0 selects the restricted protocol: train on this fold only.
    int train_fold = -1;
    int jobs = 1;
    std::string output_dir = "out";

    std::string manifest;
    /// Image paths in the manifest are relative to this directory; defaults
    /// to the manifest's own directory.
    std::string image_root;
    std::optional<imageproc::CropBox> crop;
    int image_side = 60;
    Balance balance = Balance::none;
    double keep_fraction = 1.0 / 3.0;
    /// -1: the most frequent class of each training set.
    int majority_class = -1;
    /// Gender filters for age_given_gender; unknown means any.
    dataset::Gender train_gender = dataset::Gender::unknown;
    dataset::Gender test_gender = dataset::Gender::unknown;

    ensemble::Geometry geometry{};
    /// rows method: 0 trains and fuses every row, i > 0 uses row i alone.
    int row = 0;
    EdgeSpec edge{};
    std::vector<MemberSpec> members;
    ensemble::Routing routing = ensemble::Routing::per_patch;

    int hidden_layers = 2;
    int hidden_units = 512;
    /// Training recipe; dims and seed are filled in per network.
    mlp::MlpConfig mlp{};

    /// [models] section: network name -> model file.
    std::map<std::string, std::string> models;

    /// Class count of the task (2 for gender, 8 for age).
    int classes() const;
    std::vector<std::string> class_names() const;

    /// Resolved configuration as INI text, loadable by parse_config. Omits
    /// jobs and output_dir, which do not affect results.
    std::string echo() const;
};

/// Parses INI text. Relative paths are resolved against base_dir. Throws
/// ConfigError on unknown sections or keys, malformed values and
/// inconsistent settings.
ExperimentConfig parse_config(std::istream& in, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

/// Cross-field checks (also run by parse_config); call again after applying
/// command-line overrides.
void validate(const ExperimentConfig& config);

/// "nine_patch:1/9, whole_image:1, row2:1"
std::vector<MemberSpec> parse_members(const std::string& text);

/// Decimal number or simple fraction such as "1/3".
double parse_real(const std::string& key, const std::string& text);

}  // namespace ninepatch::app
