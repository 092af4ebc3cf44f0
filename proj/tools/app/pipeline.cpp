#include "pipeline.hpp"

#include "image_io.hpp"

#include "ninepatch/ensemble.hpp"
#include "ninepatch/error.hpp"
#include "ninepatch/imageproc.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <set>
#include <sstream>

namespace ninepatch::app {

namespace {

namespace fs = std::filesystem;
using imageproc::GrayImage;

bool is_age_network(const std::string& name) { return name == "male_age" || name == "female_age"; }

int row_index(const std::string& name) {
    return name.size() == 4 && name.starts_with("row") ? name[3] - '0' : 0;
}

std::string fmt_real(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::vector<std::string> network_class_names(const ExperimentConfig& config, const std::string& name) {
    if (name == "gender") {
        ExperimentConfig g;
        g.task = Task::gender;
        return g.class_names();
    }
    if (is_age_network(name)) {
        ExperimentConfig a;
        a.task = Task::age;
        return a.class_names();
    }
    return config.class_names();
}

const mlp::Mlp& require(const ExperimentConfig& config, const std::map<std::string, const mlp::Mlp*>& nets,
                        const std::string& name) {
    const auto it = nets.find(name);
    if (it == nets.end() || it->second == nullptr) throw ConfigError("no model for network '" + name + "'");
    const mlp::Mlp& m = *it->second;
    if (m.config.classes() != network_classes(config, name)) {
        throw ConfigError("model '" + name + "' has " + std::to_string(m.config.classes()) + " classes, task needs " +
                          std::to_string(network_classes(config, name)));
    }
    if (m.config.input_dim() != network_input_dim(config, name)) {
        throw ConfigError("model '" + name + "' expects " + std::to_string(m.config.input_dim()) +
                          " inputs, configured geometry gives " + std::to_string(network_input_dim(config, name)));
    }
    return m;
}

}  // namespace

GrayImage preprocess(const GrayImage& raw, const ExperimentConfig& config) {
    const GrayImage cropped = config.crop ? imageproc::crop(raw, *config.crop) : raw;
    return imageproc::resize_bilinear(cropped, config.image_side, config.image_side);
}

Corpus load_corpus(const ExperimentConfig& config) {
    if (config.manifest.empty()) throw ConfigError("config: data.manifest is required");
    return load_corpus(config, dataset::read_manifest_file(config.manifest));
}

Corpus load_corpus(const ExperimentConfig& config, const std::vector<dataset::RawRecord>& records) {
    Corpus corpus;
    corpus.records = records.size();
    corpus.folds = config.folds > 0 ? config.folds : dataset::fold_count(records);
    const dataset::Subsets subsets = dataset::build_subsets(records);
    corpus.counts = subsets.counts;

    const bool need_both = config.task == Task::age_given_gender || config.method == Method::cascade;
    const auto& chosen = need_both ? subsets.both : (config.task == Task::gender ? subsets.gender : subsets.age);

    std::set<std::string> seen;
    for (const auto& ls : chosen) {
        if (ls.fold < 0 || ls.fold >= corpus.folds) {
            throw DataError("image '" + ls.image_id + "' has fold " + std::to_string(ls.fold) + " outside 0.." +
                            std::to_string(corpus.folds - 1));
        }
        if (!seen.insert(ls.image_id).second) throw DataError("duplicate image_id '" + ls.image_id + "' in manifest");
        Sample s;
        s.image_id = ls.image_id;
        s.gender = ls.gender.value_or(dataset::Gender::unknown);
        s.age_class = ls.age ? ls.age->class_index() : -1;
        s.label = config.task == Task::gender ? dataset::gender_class(s.gender) : s.age_class;
        s.fold = ls.fold;
        const std::string path = (fs::path(config.image_root) / ls.path).string();
        try {
            s.image = preprocess(read_gray_image(path), config);
        } catch (const Error& e) {
            spdlog::warn("skipping image '{}': {}", ls.image_id, e.what());
            ++corpus.unreadable;
            continue;
        }
        corpus.samples.push_back(std::move(s));
    }
    spdlog::info("corpus: {} manifest rows, {} usable images, {} unreadable, {} folds", corpus.records,
                 corpus.samples.size(), corpus.unreadable, corpus.folds);
    return corpus;
}

imageproc::BinaryMask edge_mask(const GrayImage& img, const EdgeSpec& spec) {
    GrayImage response;
    if (spec.detector == EdgeDetector::sobel) {
        response = imageproc::sobel_magnitude(img);
    } else {
        const auto edges = imageproc::canny(img, spec.canny_low, spec.canny_high);
        response = GrayImage(img.width, img.height);
        for (std::size_t i = 0; i < edges.bits.size(); ++i) response.data[i] = edges.bits[i] ? 1.0 : 0.0;
    }
    const auto blurred = imageproc::convolve(response, imageproc::gaussian_kernel(spec.gaussian_size, spec.gaussian_sigma));
    return imageproc::threshold_mask(blurred, spec.threshold);
}

std::vector<std::string> network_names(const ExperimentConfig& config) {
    switch (config.method) {
        case Method::nine_patch: return {"nine_patch"};
        case Method::edge_patch: return {"edge_patch"};
        case Method::whole_image: return {"whole_image"};
        case Method::rows: {
            if (config.row > 0) return {"row" + std::to_string(config.row)};
            std::vector<std::string> names;
            for (int i = 1; i <= config.geometry.row_count; ++i) names.push_back("row" + std::to_string(i));
            return names;
        }
        case Method::combination: {
            std::vector<std::string> names;
            for (const auto& m : config.members) names.push_back(m.name);
            return names;
        }
        case Method::cascade: return {"gender", "male_age", "female_age"};
    }
    return {};
}

std::vector<patchgen::Patch> network_units(const ExperimentConfig& config, const std::string& name, const Sample& s) {
    std::vector<patchgen::Patch> units;
    if (name == "nine_patch" || name == "gender" || is_age_network(name)) {
        units = patchgen::grid_patches(s.image, config.geometry.grid, s.image_id);
    } else if (name == "edge_patch") {
        units = patchgen::edge_patches(s.image, edge_mask(s.image, config.edge), config.edge.patch_side, s.image_id);
    } else if (name == "whole_image") {
        units.push_back(patchgen::whole_image_vector(s.image, config.geometry.whole_image_side, s.image_id));
    } else if (const int r = row_index(name); r > 0) {
        auto rows = patchgen::row_patches(s.image, config.geometry.row_count, config.geometry.row_height, s.image_id);
        if (r > static_cast<int>(rows.size())) throw ConfigError("network '" + name + "' exceeds rows.count");
        units.push_back(std::move(rows[static_cast<std::size_t>(r - 1)]));
    } else {
        throw ConfigError("unknown network '" + name + "'");
    }
    const int label = name == "gender" ? dataset::gender_class(s.gender) : (is_age_network(name) ? s.age_class : s.label);
    for (auto& u : units) u.label = label;
    return units;
}

int network_input_dim(const ExperimentConfig& config, const std::string& name) {
    if (name == "edge_patch") return config.edge.patch_side * config.edge.patch_side;
    if (name == "whole_image") return config.geometry.whole_image_side * config.geometry.whole_image_side;
    if (row_index(name) > 0) return config.geometry.row_height * config.image_side;
    return config.geometry.grid.patch_h * config.geometry.grid.patch_w;
}

int network_classes(const ExperimentConfig& config, const std::string& name) {
    if (name == "gender") return 2;
    if (is_age_network(name)) return dataset::kAgeGroups;
    return config.classes();
}

std::map<std::string, TrainedNetwork> train_networks(const ExperimentConfig& config,
                                                     const std::vector<const Sample*>& train, const std::string& tag) {
    std::map<std::string, TrainedNetwork> out;
    for (const auto& name : network_names(config)) {
        std::vector<patchgen::Patch> units;
        for (const Sample* s : train) {
            if (name == "male_age" && s->gender != dataset::Gender::male) continue;
            if (name == "female_age" && s->gender != dataset::Gender::female) continue;
            auto u = network_units(config, name, *s);
            units.insert(units.end(), std::make_move_iterator(u.begin()), std::make_move_iterator(u.end()));
        }
        const int classes = network_classes(config, name);
        if (config.balance == Balance::discard && !units.empty()) {
            int majority = config.majority_class;
            if (majority < 0 || name == "gender" || is_age_network(name)) {
                std::vector<std::size_t> count(static_cast<std::size_t>(classes), 0);
                for (const auto& u : units) ++count[static_cast<std::size_t>(u.label)];
                majority = static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
            }
            const std::size_t before = units.size();
            units = dataset::balance_by_discard(units, majority, config.keep_fraction,
                                                derive_seed(config.seed, tag + "/" + name + "/balance"));
            spdlog::debug("{} {}: balancing kept {} of {} units (majority class {})", tag, name, units.size(), before,
                          majority);
        }

        mlp::TrainingSet ts;
        const int dim = network_input_dim(config, name);
        ts.features.resize(static_cast<Eigen::Index>(units.size()), dim);
        ts.labels.reserve(units.size());
        std::vector<std::size_t> per_class(static_cast<std::size_t>(classes), 0);
        for (std::size_t i = 0; i < units.size(); ++i) {
            std::copy(units[i].features.begin(), units[i].features.end(), ts.features.row(static_cast<Eigen::Index>(i)).data());
            ts.labels.push_back(units[i].label);
            ++per_class[static_cast<std::size_t>(units[i].label)];
        }
        for (std::size_t c = 0; c < per_class.size(); ++c) {
            if (per_class[c] == 0) {
                throw eval::FoldSkipped(tag + ": network '" + name + "' has no training units of class " +
                                        network_class_names(config, name)[c]);
            }
        }
        units.clear();
        units.shrink_to_fit();

        mlp::MlpConfig mc = config.mlp;
        mc.dims = mlp::MlpConfig::standard(dim, classes, config.hidden_layers, config.hidden_units).dims;
        mc.seed = derive_seed(config.seed, tag + "/" + name);
        spdlog::info("{} {}: training on {} units ({} epochs)", tag, name, ts.size(), mc.epochs);
        auto result = mlp::fit(mc, ts, nullptr, [&](const mlp::EpochLog& e) {
            spdlog::debug("{} {} epoch {} loss {:.6f} lr {:.6g} momentum {:.4f}", tag, name, e.epoch, e.loss, e.lr,
                          e.momentum);
        });
        result.model.class_names = network_class_names(config, name);
        TrainedNetwork tn{std::move(result.model), mlp::format_log(result.log), static_cast<std::size_t>(ts.size())};
        out.emplace(name, std::move(tn));
    }
    return out;
}

Evaluation evaluate_networks(const ExperimentConfig& config, const std::map<std::string, const mlp::Mlp*>& nets,
                             const std::vector<const Sample*>& test) {
    Evaluation ev;
    std::vector<eval::PatchOutcome> outcomes;
    const int classes = config.classes();
    const auto names = network_names(config);

    auto record_units = [&](const mlp::Mlp& net, const std::vector<patchgen::Patch>& units) {
        const auto o = eval::patch_outcomes(net, units);
        outcomes.insert(outcomes.end(), o.begin(), o.end());
    };

    switch (config.method) {
        case Method::nine_patch:
        case Method::edge_patch:
        case Method::whole_image:
        case Method::rows: {
            if (config.method == Method::rows && config.row == 0) {
                std::vector<const mlp::Mlp*> row_nets;
                for (const auto& name : names) row_nets.push_back(&require(config, nets, name));
                for (const Sample* s : test) {
                    auto pred = ensemble::five_row_predict(row_nets, s->image, config.geometry.row_height, s->label);
                    pred.image_id = s->image_id;
                    ev.predictions.push_back(std::move(pred));
                    for (std::size_t i = 0; i < names.size(); ++i) record_units(*row_nets[i], network_units(config, names[i], *s));
                }
                break;
            }
            const mlp::Mlp& net = require(config, nets, names.front());
            for (const Sample* s : test) {
                const auto units = network_units(config, names.front(), *s);
                if (units.empty()) {
                    ++ev.images_without_units;
                    continue;
                }
                ev.predictions.push_back(eval::predict_image(net, units));
                record_units(net, units);
            }
            break;
        }
        case Method::combination: {
            ensemble::CombinationSpec spec;
            spec.geometry = config.geometry;
            for (const auto& m : config.members) spec.members.push_back({&require(config, nets, m.name), m.source, m.weight});
            const auto& first = config.members.front();
            for (const Sample* s : test) {
                auto pred = ensemble::combine_predict(spec, s->image, s->label);
                pred.image_id = s->image_id;
                ev.predictions.push_back(std::move(pred));
                record_units(*spec.members.front().model, network_units(config, first.name, *s));
            }
            break;
        }
        case Method::cascade: {
            ensemble::CascadeSpec spec;
            spec.gender_net = &require(config, nets, "gender");
            spec.male_age_net = &require(config, nets, "male_age");
            spec.female_age_net = &require(config, nets, "female_age");
            spec.routing = config.routing;
            spec.grid = config.geometry.grid;
            for (const Sample* s : test) {
                const auto patches = patchgen::grid_patches(s->image, config.geometry.grid, s->image_id);
                ensemble::CascadeTrace trace;
                auto pred = ensemble::cascade_predict(spec, patches, s->label, &trace);
                pred.image_id = s->image_id;
                ev.predictions.push_back(std::move(pred));
                for (std::size_t i = 0; i < patches.size(); ++i) {
                    outcomes.push_back({patches[i].slot, trace.routed_posteriors[i].argmax(), s->label});
                }
            }
            break;
        }
    }
    if (ev.images_without_units > 0) {
        spdlog::warn("{} test image(s) produced no input units and were not classified", ev.images_without_units);
    }
    ev.report = eval::make_report(ev.predictions, outcomes, classes);
    return ev;
}

FoldData fold_data(const ExperimentConfig& config, const Corpus& corpus, int test_fold) {
    FoldData fd;
    const bool filter = config.task == Task::age_given_gender;
    for (const auto& s : corpus.samples) {
        const bool in_train = config.train_fold >= 0 ? s.fold == config.train_fold : s.fold != test_fold;
        if (in_train && (!filter || config.train_gender == dataset::Gender::unknown || s.gender == config.train_gender)) {
            fd.train.push_back(&s);
        }
        if (s.fold == test_fold &&
            (!filter || config.test_gender == dataset::Gender::unknown || s.gender == config.test_gender)) {
            fd.test.push_back(&s);
        }
    }
    return fd;
}

std::string predictions_csv(const std::vector<eval::ImagePrediction>& predictions) {
    std::ostringstream os;
    const std::size_t classes = predictions.empty() ? 0 : predictions.front().averaged.probs.size();
    os << "image_id,true,predicted";
    for (std::size_t c = 0; c < classes; ++c) os << ",p" << c;
    os << '\n';
    for (const auto& p : predictions) {
        os << csv_field(p.image_id) << ',' << p.true_class << ',' << p.predicted_class;
        for (double v : p.averaged.probs) os << ',' << fmt_real(v);
        os << '\n';
    }
    return os.str();
}

}  // namespace ninepatch::app
