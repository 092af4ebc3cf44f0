#pragma once

#include "ninepatch/mlp.hpp"
#include "ninepatch/patchgen.hpp"
#include "ninepatch/posterior.hpp"

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ninepatch::eval {

struct ImagePrediction {
    std::string image_id;
    Posterior averaged;
    int predicted_class = -1;
    int true_class = -1;
};

struct WeightedPosterior {
    Posterior posterior;
    double weight = 1.0;
};

/// sum(w_i p_i) / sum(w_i). Throws InvalidInput for an empty set, negative
/// weights, all-zero weights or mismatched class counts.
Posterior average_posteriors(std::span<const WeightedPosterior> parts);

/// Averages the weighted posteriors and takes the argmax (lowest index on ties).
ImagePrediction predict_image(std::span<const WeightedPosterior> parts, std::string image_id = {},
                              int true_class = -1);

/// Classifies every patch with `net` and averages with equal weights. All
/// patches must come from the same image; the first patch's id and label are used.
ImagePrediction predict_image(const mlp::Mlp& net, std::span<const patchgen::Patch> patches);

/// Per-patch posteriors, one per patch, in input order.
std::vector<Posterior> classify_patches(const mlp::Mlp& net, std::span<const patchgen::Patch> patches);

/// Individual patch decision, kept for per-slot tables.
struct PatchOutcome {
    int slot = 0;
    int predicted = -1;
    int truth = -1;
};

std::vector<PatchOutcome> patch_outcomes(const mlp::Mlp& net, std::span<const patchgen::Patch> patches);

/// Fraction of patches whose own argmax equals their label.
double patch_level_accuracy(const mlp::Mlp& net, std::span<const patchgen::Patch> patches);
double patch_level_accuracy(std::span<const PatchOutcome> outcomes);

/// Fraction of predictions within one merged age group of the truth. Only
/// defined for 8-class predictions; anything else throws InvalidInput.
double one_off_accuracy(std::span<const ImagePrediction> predictions);

double image_level_accuracy(std::span<const ImagePrediction> predictions);

std::map<int, double> per_slot_accuracy(const mlp::Mlp& net, std::span<const patchgen::Patch> patches);
std::map<int, double> per_slot_accuracy(std::span<const PatchOutcome> outcomes);

struct EvalReport {
    double patch_level = 0.0;
    double image_level = 0.0;
    std::optional<double> one_off;
    std::map<int, double> per_slot;
    /// confusion[true][predicted], image level
    std::vector<std::vector<std::size_t>> confusion;
    std::size_t n_images = 0;
    std::size_t n_patches = 0;
};

/// Builds a report from image predictions and the patch decisions behind them.
/// one_off is filled iff classes == 8.
EvalReport make_report(std::span<const ImagePrediction> predictions, std::span<const PatchOutcome> patches,
                       int classes);

/// Evaluates a single network on patches grouped by image_id (order of first
/// appearance).
EvalReport evaluate(const mlp::Mlp& net, std::span<const patchgen::Patch> test_patches);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population
};

MeanStd mean_std(std::span<const double> values);

/// "86.8±1.4%" style, values given as fractions.
std::string format_pm(const MeanStd& ms, int decimals = 2);

struct FoldResult {
    int fold = 0;
    EvalReport report;
};

struct CvSummary {
    std::vector<FoldResult> folds;
    std::vector<int> skipped_folds;
    MeanStd patch_level;
    MeanStd image_level;
    std::optional<MeanStd> one_off;
};

/// Thrown by a fold runner when the fold cannot be evaluated (for example a
/// class is missing from its training data). cross_validate skips such folds.
class FoldSkipped : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using FoldRunner = std::function<EvalReport(int fold)>;

/// Runs `runner` on each fold in `folds` (jobs > 1 runs folds concurrently)
/// and aggregates in fold order, so results do not depend on scheduling.
CvSummary cross_validate(const std::vector<int>& folds, const FoldRunner& runner, int jobs = 1);

/// Human-readable summary table.
void write_report_text(std::ostream& out, const CvSummary& summary, const std::vector<std::string>& class_names);
/// fold,n_images,n_patches,patch_level,image_level,one_off rows plus mean/std rows.
void write_report_csv(std::ostream& out, const CvSummary& summary);
/// slot,accuracy rows averaged over folds.
void write_per_slot_csv(std::ostream& out, const CvSummary& summary);

}  // namespace ninepatch::eval
