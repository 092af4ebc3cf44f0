#pragma once

#include "ninepatch/posterior.hpp"
#include "ninepatch/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ninepatch::mlp {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class MomentumStyle {
    /// v <- mu v - lr g
    classical,
    /// v <- mu v - (1 - mu) lr g
    dampened,
};

/// Network shape and the training recipe. Defaults reproduce the published
/// recipe: two 512-unit ReLU layers, retain probabilities 0.8 (input) and
/// 0.5 (hidden), lr 3 decayed by 0.998 per epoch, momentum 0.5 -> 0.99 over
/// the first 500 epochs.
struct MlpConfig {
    /// (input, hidden..., output)
    std::vector<int> dims{900, 512, 512, 2};
    double dropout_keep_input = 0.8;
    double dropout_keep_hidden = 0.5;
    double lr0 = 3.0;
    double lr_decay = 0.998;
    double momentum0 = 0.5;
    double momentum_final = 0.99;
    int momentum_ramp_epochs = 500;
    MomentumStyle momentum_style = MomentumStyle::classical;
    /// Upper bound on the L2 norm of each unit's incoming weight vector,
    /// enforced after every update; 0 disables the constraint.
    double max_norm = 0.0;
    int epochs = 1000;
    int batch_size = 128;
    std::uint64_t seed = 0;

    /// dims = {input, hidden_units x hidden_count, classes}
    static MlpConfig standard(int input_dim, int classes, int hidden_count = 2, int hidden_units = 512);

    int input_dim() const { return dims.front(); }
    int classes() const { return dims.back(); }
    /// Throws ConfigError on any violated range.
    void validate() const;

    /// Stable key = value text used in model metadata and logs.
    std::string echo() const;
};

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    double lr = 0.0;
    double momentum = 0.0;
    /// Negative when no validation set was given.
    double validation_accuracy = -1.0;
};

/// Parameters plus optimizer state. weights[l] is dims[l+1] x dims[l].
struct Mlp {
    MlpConfig config;
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    std::vector<Matrix> weight_velocity;
    std::vector<Vector> bias_velocity;
    int epoch = 0;
    Rng rng;
    std::vector<std::string> class_names;
    /// FNV-1a digest of the formatted training log.
    std::uint64_t log_digest = 0;

    std::size_t layer_count() const { return weights.size(); }
    bool parameters_finite() const;
};

/// He initialization: weights ~ N(0, 2 / fan_in), biases and velocities zero.
/// Deterministic in config.seed.
Mlp init(const MlpConfig& config);

/// Inverted-dropout scale factors (0 or 1/keep) for each layer input, one row
/// per sample. Entry 0 masks the network input, entry l > 0 the l-th hidden layer.
struct DropoutMasks {
    std::vector<Matrix> layer_inputs;
};

DropoutMasks draw_masks(const MlpConfig& config, Eigen::Index batch, Rng& rng);

/// Inference-mode forward pass for one feature vector.
Posterior forward(const Mlp& m, std::span<const double> x);

/// Inference-mode posteriors for a batch, one row per sample.
Matrix forward_batch(const Mlp& m, const Matrix& x);

/// Train-mode forward pass; posteriors plus cached activations.
struct ForwardTrace {
    /// activations[0] is the (masked) input; activations[l] the (masked)
    /// output of layer l-1 as fed into layer l.
    std::vector<Matrix> activations;
    std::vector<Matrix> pre_activations;
    Matrix probs;
};

ForwardTrace forward_train(const Mlp& m, const Matrix& x, const DropoutMasks* masks);

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

struct LossAndGrads {
    double loss = 0.0;
    Gradients grads;
};

/// Mean softmax cross-entropy over the batch and its exact gradients. masks
/// may be null (no dropout).
LossAndGrads loss_and_grads(const Mlp& m, const Matrix& x, std::span<const int> labels, const DropoutMasks* masks);

/// velocity <- momentum * velocity - lr * grad; param <- param + velocity.
void apply_update(Mlp& m, const Gradients& g, double lr, double momentum);

/// One mini-batch step with dropout masks drawn from m.rng. Returns the batch
/// loss. Throws TrainingDiverged on a non-finite loss or parameter.
double train_step(Mlp& m, const Matrix& x, std::span<const int> labels, double lr, double momentum);

struct Schedule {
    double lr = 0.0;
    double momentum = 0.0;
};

/// lr = lr0 * decay^epoch; momentum rises linearly from momentum0 to
/// momentum_final over momentum_ramp_epochs and stays there.
Schedule schedule(int epoch, const MlpConfig& config);

/// Feature rows with class labels.
struct TrainingSet {
    Matrix features;
    std::vector<int> labels;

    Eigen::Index size() const { return features.rows(); }
};

struct FitResult {
    Mlp model;
    std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains a freshly initialized network for config.epochs epochs: per epoch,
/// reshuffle, run train_step over mini-batches (the last may be partial),
/// then log. Requires at least one sample of every class.
FitResult fit(const MlpConfig& config, const TrainingSet& train, const TrainingSet* validation = nullptr,
              const EpochCallback& on_epoch = {});

/// Fraction of rows whose argmax posterior equals the label.
double accuracy(const Mlp& m, const TrainingSet& data);

std::string format_log(const std::vector<EpochLog>& log);

struct GradCheckOptions {
    std::vector<int> dims{12, 7, 5, 2};
    int batches = 5;
    int batch_size = 8;
    double step = 1e-5;
    std::uint64_t seed = 7;
    /// Applied to the analytic gradients before comparison; used to confirm
    /// that the check detects a broken backward pass.
    std::function<void(Gradients&)> mutate;
};

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t entries_checked = 0;
    bool passed(double tolerance) const { return max_relative_error < tolerance; }
};

/// Compares analytic gradients against central finite differences on random
/// networks with dropout off. Inputs are redrawn until every hidden
/// pre-activation sits at least 1e-3 away from the ReLU kink.
///
/// Relative error per entry is |a - n| / max(|a| + |n|, 1e-8).
GradCheckReport gradient_check(const GradCheckOptions& options = {});

/// Model file ("NPMLP1", little-endian):
///   magic | u32 layer count L | (L+1) x u32 dims
///   | per layer: dims[l+1]*dims[l] f64 weights (row-major), dims[l+1] f64 biases
///   | u32 length + UTF-8 metadata (config echo, classes, epoch, log digest)
void save_model(const Mlp& m, std::ostream& out);
Mlp load_model(std::istream& in);
void save_model_file(const Mlp& m, const std::string& path);
Mlp load_model_file(const std::string& path);

}  // namespace ninepatch::mlp
