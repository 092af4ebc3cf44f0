#include "ninepatch/ensemble.hpp"

#include "ninepatch/error.hpp"

#include <string>

namespace ninepatch::ensemble {

std::vector<patchgen::Patch> member_inputs(const InputSource& source, const Geometry& geometry, const GrayImage& img) {
    switch (source.kind) {
        case InputSource::Kind::nine_patch:
            return patchgen::grid_patches(img, geometry.grid);
        case InputSource::Kind::whole_image:
            return {patchgen::whole_image_vector(img, geometry.whole_image_side)};
        case InputSource::Kind::row: {
            if (source.row < 1 || source.row > geometry.row_count) {
                throw ConfigError("row member index " + std::to_string(source.row) + " outside 1.." +
                                  std::to_string(geometry.row_count));
            }
            auto rows = patchgen::row_patches(img, geometry.row_count, geometry.row_height);
            return {std::move(rows[static_cast<std::size_t>(source.row - 1)])};
        }
    }
    throw ConfigError("unknown input source");
}

eval::ImagePrediction combine_predict(const CombinationSpec& spec, const GrayImage& img, int true_class) {
    if (spec.members.empty()) throw ConfigError("combination has no members");
    const int classes = spec.members.front().model ? spec.members.front().model->config.classes() : 0;
    std::vector<eval::WeightedPosterior> parts;
    for (const auto& member : spec.members) {
        if (member.model == nullptr) throw ConfigError("combination member has no model");
        if (member.model->config.classes() != classes) throw ConfigError("combination members disagree on class count");
        if (!(member.weight > 0.0)) throw ConfigError("combination weights must be positive");
        const auto inputs = member_inputs(member.source, spec.geometry, img);
        for (auto& post : eval::classify_patches(*member.model, inputs)) {
            parts.push_back({std::move(post), member.weight});
        }
    }
    return eval::predict_image(parts, {}, true_class);
}

eval::ImagePrediction five_row_predict(std::span<const mlp::Mlp* const> row_nets, const GrayImage& img,
                                       int row_height, int true_class) {
    if (row_nets.empty()) throw ConfigError("five_row_predict: no row networks");
    for (std::size_t i = 0; i < row_nets.size(); ++i) {
        if (row_nets[i] == nullptr) throw ConfigError("five_row_predict: missing network for row " + std::to_string(i + 1));
    }
    const auto rows = patchgen::row_patches(img, static_cast<int>(row_nets.size()), row_height);
    std::vector<eval::WeightedPosterior> parts;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        parts.push_back({mlp::forward(*row_nets[i], rows[i].features), 1.0});
    }
    return eval::predict_image(parts, {}, true_class);
}

eval::ImagePrediction cascade_predict(const CascadeSpec& spec, std::span<const patchgen::Patch> patches,
                                      int true_class, CascadeTrace* trace) {
    if (!spec.gender_net || !spec.male_age_net || !spec.female_age_net) {
        throw ConfigError("cascade needs gender, male-age and female-age networks");
    }
    if (spec.gender_net->config.classes() != 2) throw ConfigError("cascade gender network must have 2 classes");
    if (spec.male_age_net->config.classes() != 8 || spec.female_age_net->config.classes() != 8) {
        throw ConfigError("cascade age networks must have 8 classes");
    }
    if (patches.empty()) throw InvalidInput("cascade_predict: no patches");

    const auto gender_posts = eval::classify_patches(*spec.gender_net, patches);
    std::vector<int> routes(patches.size());
    if (spec.routing == Routing::per_patch) {
        for (std::size_t i = 0; i < patches.size(); ++i) routes[i] = gender_posts[i].argmax();
    } else {
        std::vector<eval::WeightedPosterior> parts;
        for (const auto& p : gender_posts) parts.push_back({p, 1.0});
        const int image_route = eval::average_posteriors(parts).argmax();
        std::fill(routes.begin(), routes.end(), image_route);
    }

    std::vector<patchgen::Patch> to_male, to_female;
    for (std::size_t i = 0; i < patches.size(); ++i) (routes[i] == 0 ? to_male : to_female).push_back(patches[i]);
    const auto male_posts = eval::classify_patches(*spec.male_age_net, to_male);
    const auto female_posts = eval::classify_patches(*spec.female_age_net, to_female);

    std::vector<eval::WeightedPosterior> parts;
    std::size_t mi = 0, fi = 0;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        parts.push_back({routes[i] == 0 ? male_posts[mi++] : female_posts[fi++], 1.0});
    }
    if (trace) {
        trace->routes = routes;
        trace->routed_posteriors.clear();
        for (const auto& p : parts) trace->routed_posteriors.push_back(p.posterior);
    }
    return eval::predict_image(parts, patches.front().image_id, true_class);
}

eval::ImagePrediction cascade_predict(const CascadeSpec& spec, const GrayImage& img, int true_class,
                                      CascadeTrace* trace) {
    const auto patches = patchgen::grid_patches(img, spec.grid);
    return cascade_predict(spec, patches, true_class, trace);
}

}  // namespace ninepatch::ensemble
