#pragma once

#include "ninepatch/eval.hpp"
#include "ninepatch/mlp.hpp"
#include "ninepatch/patchgen.hpp"

#include <span>
#include <vector>

namespace ninepatch::ensemble {

using imageproc::GrayImage;

/// Where a combination member takes its input from.
struct InputSource {
    enum class Kind { nine_patch, whole_image, row };
    Kind kind = Kind::nine_patch;
    /// 1-based row index, used when kind == row.
    int row = 0;

    static InputSource nine_patch() { return {Kind::nine_patch, 0}; }
    static InputSource whole_image() { return {Kind::whole_image, 0}; }
    static InputSource row_strip(int index) { return {Kind::row, index}; }
};

/// Patch geometry shared by every member of a combination.
struct Geometry {
    patchgen::GridSpec grid{};
    int whole_image_side = 32;
    int row_count = 5;
    int row_height = 20;
};

struct Member {
    const mlp::Mlp* model = nullptr;
    InputSource source{};
    /// Applied to every posterior the member emits. A nine-patch member at
    /// 1/9 weighs as much in total as one whole-image posterior at 1.
    double weight = 1.0;
};

struct CombinationSpec {
    std::vector<Member> members;
    Geometry geometry{};
};

/// The input units a member sees for `img`.
std::vector<patchgen::Patch> member_inputs(const InputSource& source, const Geometry& geometry, const GrayImage& img);

/// Weighted fusion of all member posteriors: final = sum(w p) / sum(w).
eval::ImagePrediction combine_predict(const CombinationSpec& spec, const GrayImage& img, int true_class = -1);

/// Equal-weight average of the five row networks, each applied to its own row.
eval::ImagePrediction five_row_predict(std::span<const mlp::Mlp* const> row_nets, const GrayImage& img,
                                       int row_height = 20, int true_class = -1);

enum class Routing { per_patch, per_image };

/// Gender network A routes each patch to the male (B) or female (C) age
/// network; the routed 8-class posteriors are averaged.
struct CascadeSpec {
    const mlp::Mlp* gender_net = nullptr;
    const mlp::Mlp* male_age_net = nullptr;
    const mlp::Mlp* female_age_net = nullptr;
    Routing routing = Routing::per_patch;
    patchgen::GridSpec grid{};
};

struct CascadeTrace {
    /// 0 = routed to the male network, 1 = female, per patch.
    std::vector<int> routes;
    std::vector<Posterior> routed_posteriors;
};

/// Cascade on already-extracted patches. `trace` is optional.
eval::ImagePrediction cascade_predict(const CascadeSpec& spec, std::span<const patchgen::Patch> patches,
                                      int true_class = -1, CascadeTrace* trace = nullptr);

eval::ImagePrediction cascade_predict(const CascadeSpec& spec, const GrayImage& img, int true_class = -1,
                                      CascadeTrace* trace = nullptr);

}  // namespace ninepatch::ensemble
