#include "ninepatch/eval.hpp"

#include "ninepatch/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace ninepatch::eval {

namespace {

std::string pct(double fraction, int decimals = 2) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(decimals) << fraction * 100.0;
    return os.str();
}

std::string num(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

mlp::Matrix stack_features(std::span<const patchgen::Patch> patches) {
    if (patches.empty()) return {};
    const auto dim = static_cast<Eigen::Index>(patches.front().features.size());
    mlp::Matrix x(static_cast<Eigen::Index>(patches.size()), dim);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        if (static_cast<Eigen::Index>(patches[i].features.size()) != dim) {
            throw ShapeError("patches have differing feature lengths");
        }
        std::copy(patches[i].features.begin(), patches[i].features.end(), x.row(static_cast<Eigen::Index>(i)).data());
    }
    return x;
}

}  // namespace

Posterior average_posteriors(std::span<const WeightedPosterior> parts) {
    if (parts.empty()) throw InvalidInput("average_posteriors: no posteriors");
    const std::size_t classes = parts.front().posterior.classes();
    std::vector<double> acc(classes, 0.0);
    double total = 0.0;
    for (const auto& part : parts) {
        if (part.posterior.classes() != classes) throw InvalidInput("average_posteriors: class counts differ");
        if (!(part.weight >= 0.0) || !std::isfinite(part.weight)) {
            throw InvalidInput("average_posteriors: weights must be finite and non-negative");
        }
        for (std::size_t c = 0; c < classes; ++c) acc[c] += part.weight * part.posterior.probs[c];
        total += part.weight;
    }
    if (total <= 0.0) throw InvalidInput("average_posteriors: all weights are zero");
    for (double& v : acc) v /= total;
    return Posterior{std::move(acc)};
}

ImagePrediction predict_image(std::span<const WeightedPosterior> parts, std::string image_id, int true_class) {
    ImagePrediction p;
    p.image_id = std::move(image_id);
    p.averaged = average_posteriors(parts);
    p.predicted_class = p.averaged.argmax();
    p.true_class = true_class;
    return p;
}

std::vector<Posterior> classify_patches(const mlp::Mlp& net, std::span<const patchgen::Patch> patches) {
    std::vector<Posterior> out;
    if (patches.empty()) return out;
    const mlp::Matrix probs = mlp::forward_batch(net, stack_features(patches));
    out.reserve(patches.size());
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        const auto row = probs.row(r);
        out.push_back(Posterior{std::vector<double>(row.data(), row.data() + row.size())});
    }
    return out;
}

ImagePrediction predict_image(const mlp::Mlp& net, std::span<const patchgen::Patch> patches) {
    if (patches.empty()) throw InvalidInput("predict_image: empty patch set");
    std::vector<WeightedPosterior> parts;
    for (auto& post : classify_patches(net, patches)) parts.push_back({std::move(post), 1.0});
    return predict_image(parts, patches.front().image_id, patches.front().label);
}

std::vector<PatchOutcome> patch_outcomes(const mlp::Mlp& net, std::span<const patchgen::Patch> patches) {
    const auto posts = classify_patches(net, patches);
    std::vector<PatchOutcome> out;
    out.reserve(patches.size());
    for (std::size_t i = 0; i < patches.size(); ++i) {
        out.push_back({patches[i].slot, posts[i].argmax(), patches[i].label});
    }
    return out;
}

double patch_level_accuracy(std::span<const PatchOutcome> outcomes) {
    if (outcomes.empty()) return 0.0;
    const auto hits = std::count_if(outcomes.begin(), outcomes.end(),
                                    [](const PatchOutcome& o) { return o.predicted == o.truth; });
    return static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

double patch_level_accuracy(const mlp::Mlp& net, std::span<const patchgen::Patch> patches) {
    if (patches.empty()) throw InvalidInput("patch_level_accuracy: no patches");
    return patch_level_accuracy(patch_outcomes(net, patches));
}

double image_level_accuracy(std::span<const ImagePrediction> predictions) {
    if (predictions.empty()) return 0.0;
    const auto hits = std::count_if(predictions.begin(), predictions.end(),
                                    [](const ImagePrediction& p) { return p.predicted_class == p.true_class; });
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double one_off_accuracy(std::span<const ImagePrediction> predictions) {
    if (predictions.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& p : predictions) {
        if (p.averaged.classes() != 8) {
            throw InvalidInput("one_off_accuracy: defined only for the 8 merged age groups");
        }
        if (std::abs(p.predicted_class - p.true_class) <= 1) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::map<int, double> per_slot_accuracy(std::span<const PatchOutcome> outcomes) {
    std::map<int, std::pair<std::size_t, std::size_t>> tally;  // slot -> (hits, total)
    for (const auto& o : outcomes) {
        auto& [hits, total] = tally[o.slot];
        hits += o.predicted == o.truth ? 1 : 0;
        ++total;
    }
    std::map<int, double> out;
    for (const auto& [slot, ht] : tally) out[slot] = static_cast<double>(ht.first) / static_cast<double>(ht.second);
    return out;
}

std::map<int, double> per_slot_accuracy(const mlp::Mlp& net, std::span<const patchgen::Patch> patches) {
    return per_slot_accuracy(patch_outcomes(net, patches));
}

EvalReport make_report(std::span<const ImagePrediction> predictions, std::span<const PatchOutcome> patches,
                       int classes) {
    EvalReport r;
    r.n_images = predictions.size();
    r.n_patches = patches.size();
    r.image_level = image_level_accuracy(predictions);
    r.patch_level = patch_level_accuracy(patches);
    r.per_slot = per_slot_accuracy(patches);
    if (classes == 8) r.one_off = one_off_accuracy(predictions);
    r.confusion.assign(static_cast<std::size_t>(classes), std::vector<std::size_t>(static_cast<std::size_t>(classes), 0));
    for (const auto& p : predictions) {
        if (p.true_class < 0 || p.true_class >= classes || p.predicted_class < 0 || p.predicted_class >= classes) {
            throw InvalidInput("make_report: class index out of range");
        }
        ++r.confusion[static_cast<std::size_t>(p.true_class)][static_cast<std::size_t>(p.predicted_class)];
    }
    return r;
}

EvalReport evaluate(const mlp::Mlp& net, std::span<const patchgen::Patch> test_patches) {
    const auto outcomes = patch_outcomes(net, test_patches);
    const auto posts = classify_patches(net, test_patches);

    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<std::size_t>> by_image;
    for (std::size_t i = 0; i < test_patches.size(); ++i) {
        auto [it, inserted] = by_image.try_emplace(test_patches[i].image_id);
        if (inserted) order.push_back(test_patches[i].image_id);
        it->second.push_back(i);
    }
    std::vector<ImagePrediction> predictions;
    predictions.reserve(order.size());
    for (const auto& id : order) {
        std::vector<WeightedPosterior> parts;
        const auto& idx = by_image[id];
        for (std::size_t i : idx) parts.push_back({posts[i], 1.0});
        predictions.push_back(predict_image(parts, id, test_patches[idx.front()].label));
    }
    return make_report(predictions, outcomes, net.config.classes());
}

MeanStd mean_std(std::span<const double> values) {
    MeanStd ms;
    if (values.empty()) return ms;
    double sum = 0.0;
    for (double v : values) sum += v;
    ms.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - ms.mean) * (v - ms.mean);
    ms.std = std::sqrt(ss / static_cast<double>(values.size()));
    return ms;
}

std::string format_pm(const MeanStd& ms, int decimals) {
    return pct(ms.mean, decimals) + "\xC2\xB1" + pct(ms.std, decimals) + "%";
}

CvSummary cross_validate(const std::vector<int>& folds, const FoldRunner& runner, int jobs) {
    std::vector<std::optional<EvalReport>> results(folds.size());
    std::vector<std::exception_ptr> errors(folds.size());
    std::vector<std::string> skip_reasons(folds.size());

    auto run_one = [&](std::size_t i) {
        try {
            results[i] = runner(folds[i]);
        } catch (const FoldSkipped& e) {
            skip_reasons[i] = e.what();
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, folds.size() ? folds.size() : 1);
    if (workers <= 1) {
        for (std::size_t i = 0; i < folds.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < folds.size(); i = next++) run_one(i);
            });
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    CvSummary s;
    std::vector<double> patch, image, one_off;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        if (!results[i]) {
            spdlog::warn("fold {} skipped: {}", folds[i], skip_reasons[i]);
            s.skipped_folds.push_back(folds[i]);
            continue;
        }
        patch.push_back(results[i]->patch_level);
        image.push_back(results[i]->image_level);
        if (results[i]->one_off) one_off.push_back(*results[i]->one_off);
        s.folds.push_back({folds[i], std::move(*results[i])});
    }
    s.patch_level = mean_std(patch);
    s.image_level = mean_std(image);
    if (!one_off.empty()) s.one_off = mean_std(one_off);
    return s;
}

void write_report_text(std::ostream& out, const CvSummary& summary, const std::vector<std::string>& class_names) {
    out << "fold  images  patches  patch-level  image-level";
    const bool age = summary.one_off.has_value();
    if (age) out << "  one-off";
    out << "\n";
    for (const auto& f : summary.folds) {
        out << std::setw(4) << f.fold << "  " << std::setw(6) << f.report.n_images << "  " << std::setw(7)
            << f.report.n_patches << "  " << std::setw(10) << pct(f.report.patch_level) << "%  " << std::setw(10)
            << pct(f.report.image_level) << "%";
        if (age) out << "  " << std::setw(6) << pct(f.report.one_off.value_or(0.0)) << "%";
        out << "\n";
    }
    for (int fold : summary.skipped_folds) out << std::setw(4) << fold << "  skipped\n";
    out << "\npatch-level  " << format_pm(summary.patch_level) << "\n";
    out << "image-level  " << format_pm(summary.image_level) << "\n";
    if (age) {
        out << "exact        " << format_pm(summary.image_level) << "\n";
        out << "one-off      " << format_pm(*summary.one_off) << "\n";
    }

    if (!summary.folds.empty()) {
        out << "\nper-slot patch accuracy (mean over folds)\n";
        std::map<int, std::vector<double>> slots;
        for (const auto& f : summary.folds) {
            for (const auto& [slot, acc] : f.report.per_slot) slots[slot].push_back(acc);
        }
        for (const auto& [slot, accs] : slots) {
            out << "  slot " << std::setw(2) << slot << "  " << pct(mean_std(accs).mean) << "%\n";
        }

        out << "\nconfusion (rows true, columns predicted; all folds)\n";
        const auto& first = summary.folds.front().report.confusion;
        std::vector<std::vector<std::size_t>> total(first.size(), std::vector<std::size_t>(first.size(), 0));
        for (const auto& f : summary.folds) {
            for (std::size_t i = 0; i < total.size(); ++i) {
                for (std::size_t j = 0; j < total.size(); ++j) total[i][j] += f.report.confusion[i][j];
            }
        }
        for (std::size_t i = 0; i < total.size(); ++i) {
            out << "  " << std::setw(8) << (i < class_names.size() ? class_names[i] : std::to_string(i));
            for (std::size_t v : total[i]) out << std::setw(8) << v;
            out << "\n";
        }
    }
}

void write_report_csv(std::ostream& out, const CvSummary& summary) {
    out << "fold,n_images,n_patches,patch_level,image_level,one_off\n";
    for (const auto& f : summary.folds) {
        out << f.fold << ',' << f.report.n_images << ',' << f.report.n_patches << ',' << num(f.report.patch_level)
            << ',' << num(f.report.image_level) << ',' << (f.report.one_off ? num(*f.report.one_off) : "") << '\n';
    }
    out << "mean,,," << num(summary.patch_level.mean) << ',' << num(summary.image_level.mean) << ','
        << (summary.one_off ? num(summary.one_off->mean) : "") << '\n';
    out << "std,,," << num(summary.patch_level.std) << ',' << num(summary.image_level.std) << ','
        << (summary.one_off ? num(summary.one_off->std) : "") << '\n';
}

void write_per_slot_csv(std::ostream& out, const CvSummary& summary) {
    std::map<int, std::vector<double>> slots;
    for (const auto& f : summary.folds) {
        for (const auto& [slot, acc] : f.report.per_slot) slots[slot].push_back(acc);
    }
    out << "slot,accuracy\n";
    for (const auto& [slot, accs] : slots) out << slot << ',' << num(mean_std(accs).mean) << '\n';
}

}  // namespace ninepatch::eval
