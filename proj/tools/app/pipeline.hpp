#pragma once

#include "config.hpp"

#include "ninepatch/eval.hpp"
#include "ninepatch/mlp.hpp"
#include "ninepatch/patchgen.hpp"

#include <map>
#include <string>
#include <vector>

namespace ninepatch::app {

/// A preprocessed, labelled image.
struct Sample {
    std::string image_id;
    dataset::Gender gender = dataset::Gender::unknown;
    /// Zero-based age class, -1 when unknown.
    int age_class = -1;
    /// Class index for the configured task.
    int label = -1;
    int fold = 0;
    imageproc::GrayImage image;
};

struct Corpus {
    std::vector<Sample> samples;
    int folds = 0;
    std::size_t records = 0;
    /// Manifest rows whose image could not be read or preprocessed.
    std::size_t unreadable = 0;
    dataset::SubsetCounts counts;
};

/// Grayscale image -> optional crop -> resize to image_side x image_side.
imageproc::GrayImage preprocess(const imageproc::GrayImage& raw, const ExperimentConfig& config);

/// Reads the manifest, selects the subset the task needs and loads every
/// image. Unreadable images are logged, skipped and counted.
Corpus load_corpus(const ExperimentConfig& config);

/// Same, from records already in memory.
Corpus load_corpus(const ExperimentConfig& config, const std::vector<dataset::RawRecord>& records);

/// Edge mask used by the edge_patch method: detector response, Gaussian
/// low-pass, then threshold.
imageproc::BinaryMask edge_mask(const imageproc::GrayImage& img, const EdgeSpec& spec);

/// Names of the networks a method trains ("nine_patch", "row3", "gender", ...).
std::vector<std::string> network_names(const ExperimentConfig& config);

/// Input units network `name` sees for one sample, labelled for that network.
std::vector<patchgen::Patch> network_units(const ExperimentConfig& config, const std::string& name, const Sample& s);

/// Feature length and class count of network `name`.
int network_input_dim(const ExperimentConfig& config, const std::string& name);
int network_classes(const ExperimentConfig& config, const std::string& name);

struct TrainedNetwork {
    mlp::Mlp model;
    std::string log_csv;
    std::size_t units = 0;
};

/// Trains every network of the method on `train`. Each network's seed is
/// derived from (config.seed, tag, name), so results do not depend on which
/// thread runs the fold. Throws eval::FoldSkipped when a network's training
/// set lacks a class.
std::map<std::string, TrainedNetwork> train_networks(const ExperimentConfig& config, const std::vector<const Sample*>& train,
                                                     const std::string& tag);

struct Evaluation {
    eval::EvalReport report;
    std::vector<eval::ImagePrediction> predictions;
    /// Test images that produced no input units (edge_patch only).
    std::size_t images_without_units = 0;
};

/// Evaluates trained networks on `test`. Throws ConfigError when a network is
/// missing or its shape does not fit the task.
Evaluation evaluate_networks(const ExperimentConfig& config, const std::map<std::string, const mlp::Mlp*>& nets,
                             const std::vector<const Sample*>& test);

/// Train/test sample views for one fold, honouring train_fold and the
/// gender filters of age_given_gender.
struct FoldData {
    std::vector<const Sample*> train;
    std::vector<const Sample*> test;
};
FoldData fold_data(const ExperimentConfig& config, const Corpus& corpus, int test_fold);

/// One line per image: image_id,true,predicted,p0,p1,...
std::string predictions_csv(const std::vector<eval::ImagePrediction>& predictions);

}  // namespace ninepatch::app
