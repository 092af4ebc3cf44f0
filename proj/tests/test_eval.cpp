#include "net_stubs.hpp"

#include "ninepatch/error.hpp"
#include "ninepatch/eval.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

using namespace ninepatch;
using namespace ninepatch::eval;
using ninepatch::test::constant_net;
using ninepatch::test::sign_net;

namespace {

patchgen::Patch make_patch(std::string id, double x0, int label, int slot) {
    patchgen::Patch p;
    p.features = {x0, 0.0};
    p.image_id = std::move(id);
    p.label = label;
    p.slot = slot;
    return p;
}

ImagePrediction pred(int truth, int predicted, int classes = 8) {
    ImagePrediction p;
    p.true_class = truth;
    p.predicted_class = predicted;
    p.averaged.probs.assign(static_cast<std::size_t>(classes), 1.0 / classes);
    return p;
}

}  // namespace

TEST(PredictImage, FiveNineFourNine) {
    std::vector<WeightedPosterior> parts;
    for (int i = 0; i < 5; ++i) parts.push_back({Posterior{{0.9, 0.1}}, 1.0});
    for (int i = 0; i < 4; ++i) parts.push_back({Posterior{{0.1, 0.9}}, 1.0});
    const ImagePrediction p = predict_image(parts, "x", 0);
    EXPECT_NEAR(p.averaged[0], (5 * 0.9 + 4 * 0.1) / 9.0, 1e-15);
    EXPECT_NEAR(p.averaged[1], (5 * 0.1 + 4 * 0.9) / 9.0, 1e-15);
    EXPECT_EQ(p.predicted_class, 0);
    EXPECT_EQ(p.image_id, "x");
}

TEST(PredictImage, TieGoesToLowestIndex) {
    const std::vector<WeightedPosterior> parts{{Posterior{{0.7, 0.3}}, 1.0}, {Posterior{{0.3, 0.7}}, 1.0}};
    EXPECT_EQ(predict_image(parts).predicted_class, 0);
    EXPECT_EQ(argmax_lowest(std::vector<double>{0.2, 0.4, 0.4}), 1);
    EXPECT_EQ(argmax_lowest(std::vector<double>{}), -1);
}

TEST(PredictImage, AverageIsPosterior) {
    Rng rng(5);
    std::vector<WeightedPosterior> parts;
    for (int i = 0; i < 7; ++i) {
        std::vector<double> p(4);
        double s = 0.0;
        for (auto& v : p) s += (v = rng.uniform() + 0.01);
        for (auto& v : p) v /= s;
        parts.push_back({Posterior{p}, rng.uniform() + 0.1});
    }
    const Posterior avg = average_posteriors(parts);
    double total = 0.0;
    for (double v : avg.probs) {
        EXPECT_GE(v, 0.0);
        total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(PredictImage, WeightScalingInvariance) {
    const std::vector<WeightedPosterior> a{{Posterior{{0.2, 0.8}}, 1.0}, {Posterior{{0.6, 0.4}}, 3.0}};
    const std::vector<WeightedPosterior> b{{Posterior{{0.2, 0.8}}, 2.5}, {Posterior{{0.6, 0.4}}, 7.5}};
    const Posterior pa = average_posteriors(a), pb = average_posteriors(b);
    EXPECT_NEAR(pa[0], pb[0], 1e-15);
    EXPECT_NEAR(pa[0], 0.5, 1e-15);
}

TEST(PredictImage, PermutationInvariance) {
    std::vector<WeightedPosterior> parts{{Posterior{{0.2, 0.8}}, 1.0}, {Posterior{{0.6, 0.4}}, 2.0},
                                         {Posterior{{0.55, 0.45}}, 0.5}};
    const Posterior ref = average_posteriors(parts);
    std::sort(parts.begin(), parts.end(), [](const auto& x, const auto& y) { return x.weight < y.weight; });
    do {
        const Posterior p = average_posteriors(parts);
        EXPECT_NEAR(p[0], ref[0], 1e-15);
    } while (std::next_permutation(parts.begin(), parts.end(),
                                   [](const auto& x, const auto& y) { return x.weight < y.weight; }));
}

TEST(PredictImage, InvalidWeights) {
    const std::vector<WeightedPosterior> empty;
    EXPECT_THROW(average_posteriors(empty), InvalidInput);
    const std::vector<WeightedPosterior> neg{{Posterior{{0.5, 0.5}}, -1.0}};
    EXPECT_THROW(average_posteriors(neg), InvalidInput);
    const std::vector<WeightedPosterior> zero{{Posterior{{0.5, 0.5}}, 0.0}};
    EXPECT_THROW(average_posteriors(zero), InvalidInput);
    const std::vector<WeightedPosterior> mixed{{Posterior{{0.5, 0.5}}, 1.0}, {Posterior{{0.2, 0.3, 0.5}}, 1.0}};
    EXPECT_THROW(average_posteriors(mixed), InvalidInput);
}

TEST(PredictImage, NetworkOverPatches) {
    const mlp::Mlp net = sign_net(2);
    std::vector<patchgen::Patch> patches;
    for (int i = 0; i < 5; ++i) patches.push_back(make_patch("img", 1.0, 0, i + 1));
    for (int i = 0; i < 4; ++i) patches.push_back(make_patch("img", -1.0, 0, i + 6));
    const ImagePrediction p = predict_image(net, patches);
    EXPECT_EQ(p.predicted_class, 0);
    EXPECT_EQ(p.true_class, 0);
    EXPECT_EQ(p.image_id, "img");
    EXPECT_NEAR(p.averaged[0], 5.0 / 9.0, 1e-9);
    EXPECT_NEAR(patch_level_accuracy(net, patches), 5.0 / 9.0, 1e-15);
}

TEST(OneOff, AllPairs) {
    for (int t = 0; t < 8; ++t) {
        for (int p = 0; p < 8; ++p) {
            const std::vector<ImagePrediction> v{pred(t, p)};
            EXPECT_EQ(one_off_accuracy(v), std::abs(t - p) <= 1 ? 1.0 : 0.0) << t << " " << p;
        }
    }
}

TEST(OneOff, AtLeastExactAndRejectsOtherClassCounts) {
    Rng rng(3);
    std::vector<ImagePrediction> v;
    for (int i = 0; i < 100; ++i) v.push_back(pred(static_cast<int>(rng.below(8)), static_cast<int>(rng.below(8))));
    EXPECT_GE(one_off_accuracy(v), image_level_accuracy(v));
    const std::vector<ImagePrediction> two{pred(0, 1, 2)};
    EXPECT_THROW(one_off_accuracy(two), InvalidInput);
}

TEST(PerSlot, RecombinesToPatchLevel) {
    Rng rng(8);
    std::vector<PatchOutcome> outcomes;
    for (int i = 0; i < 90; ++i) {
        outcomes.push_back({1 + i % 9, static_cast<int>(rng.below(2)), static_cast<int>(rng.below(2))});
    }
    const auto slots = per_slot_accuracy(outcomes);
    ASSERT_EQ(slots.size(), 9u);
    double mean = 0.0;
    for (const auto& [slot, acc] : slots) mean += acc / 9.0;
    EXPECT_NEAR(mean, patch_level_accuracy(outcomes), 1e-12);
}

TEST(Report, MatchesBruteForce) {
    // A sign network over random patches of up to 20 images, checked against
    // a direct recount.
    const mlp::Mlp net = sign_net(2);
    Rng rng(21);
    std::vector<patchgen::Patch> patches;
    for (int img = 0; img < 20; ++img) {
        const int label = static_cast<int>(rng.below(2));
        const int n = 1 + static_cast<int>(rng.below(9));
        for (int k = 0; k < n; ++k) {
            patches.push_back(make_patch("i" + std::to_string(img), rng.uniform() - 0.45, label, k + 1));
        }
    }
    const EvalReport r = evaluate(net, patches);

    std::size_t patch_hits = 0;
    std::map<std::string, std::pair<int, int>> votes;  // id -> (class-0 patches, total)
    std::map<std::string, int> truth;
    for (const auto& p : patches) {
        const int predicted = p.features[0] > 0.0 ? 0 : 1;
        patch_hits += predicted == p.label;
        votes[p.image_id].first += predicted == 0;
        votes[p.image_id].second += 1;
        truth[p.image_id] = p.label;
    }
    std::size_t image_hits = 0;
    for (const auto& [id, v] : votes) {
        const int predicted = 2 * v.first >= v.second ? 0 : 1;
        image_hits += predicted == truth[id];
    }
    EXPECT_EQ(r.n_images, 20u);
    EXPECT_EQ(r.n_patches, patches.size());
    EXPECT_NEAR(r.patch_level, static_cast<double>(patch_hits) / patches.size(), 1e-12);
    EXPECT_NEAR(r.image_level, image_hits / 20.0, 1e-12);
    EXPECT_FALSE(r.one_off.has_value());

    std::size_t trace = 0, total = 0;
    for (std::size_t t = 0; t < r.confusion.size(); ++t) {
        for (std::size_t p = 0; p < r.confusion[t].size(); ++p) {
            total += r.confusion[t][p];
            if (t == p) trace += r.confusion[t][p];
        }
    }
    EXPECT_EQ(total, 20u);
    EXPECT_NEAR(static_cast<double>(trace) / total, r.image_level, 1e-12);
}

TEST(Report, OneOffOnlyForAge) {
    const std::vector<ImagePrediction> v{pred(3, 4), pred(2, 2)};
    const std::vector<PatchOutcome> o{{1, 4, 3}, {1, 2, 2}};
    const EvalReport r = make_report(v, o, 8);
    ASSERT_TRUE(r.one_off.has_value());
    EXPECT_DOUBLE_EQ(*r.one_off, 1.0);
    EXPECT_DOUBLE_EQ(r.image_level, 0.5);
}

TEST(Summary, MeanStdAndFormatting) {
    const std::vector<double> same{0.8, 0.8, 0.8};
    EXPECT_NEAR(mean_std(same).std, 0.0, 1e-15);
    const std::vector<double> two{0.8, 0.9};
    EXPECT_NEAR(mean_std(two).mean, 0.85, 1e-15);
    EXPECT_NEAR(mean_std(two).std, 0.05, 1e-15);
    EXPECT_EQ(format_pm({0.868, 0.014}, 1), "86.8\xC2\xB1" "1.4%");
}

TEST(CrossValidate, IdenticalFoldsHaveZeroSpread) {
    auto runner = [](int) {
        EvalReport r;
        r.patch_level = 0.7;
        r.image_level = 0.9;
        r.n_images = 10;
        return r;
    };
    const CvSummary s = cross_validate({0, 1, 2, 3, 4}, runner, 1);
    EXPECT_EQ(s.folds.size(), 5u);
    EXPECT_DOUBLE_EQ(s.image_level.mean, 0.9);
    EXPECT_DOUBLE_EQ(s.image_level.std, 0.0);
}

TEST(CrossValidate, SkipsFoldsAndKeepsOrderAcrossJobs) {
    auto runner = [](int fold) {
        if (fold == 2) throw FoldSkipped("class missing");
        EvalReport r;
        r.image_level = 0.1 * fold;
        return r;
    };
    const CvSummary a = cross_validate({0, 1, 2, 3}, runner, 1);
    const CvSummary b = cross_validate({0, 1, 2, 3}, runner, 3);
    EXPECT_EQ(a.skipped_folds, std::vector<int>{2});
    ASSERT_EQ(a.folds.size(), 3u);
    ASSERT_EQ(b.folds.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(a.folds[i].fold, b.folds[i].fold);
        EXPECT_EQ(a.folds[i].report.image_level, b.folds[i].report.image_level);
    }
    EXPECT_NEAR(a.image_level.mean, (0.0 + 0.1 + 0.3) / 3.0, 1e-15);
}

TEST(CrossValidate, OtherErrorsPropagate) {
    auto runner = [](int fold) -> EvalReport {
        if (fold == 1) throw DataError("broken");
        return {};
    };
    EXPECT_THROW(cross_validate({0, 1}, runner, 2), DataError);
}
