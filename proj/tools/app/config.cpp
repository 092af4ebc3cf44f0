#include "config.hpp"

#include "ninepatch/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <regex>
#include <sstream>

namespace ninepatch::app {

namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt_real(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <typename T>
T parse_int(const std::string& key, const std::string& text) {
    T v{};
    const auto t = trim(text);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
        throw ConfigError("config: '" + key + "' expects an integer, got '" + text + "'");
    }
    return v;
}

template <typename E>
E parse_enum(const std::string& key, const std::string& text, const std::vector<std::pair<std::string, E>>& choices) {
    const auto t = trim(text);
    std::string options;
    for (const auto& [name, value] : choices) {
        if (name == t) return value;
        options += (options.empty() ? "" : ", ") + name;
    }
    throw ConfigError("config: '" + key + "' must be one of {" + options + "}, got '" + text + "'");
}

const std::vector<std::pair<std::string, Task>> kTasks{
    {"gender", Task::gender}, {"age", Task::age}, {"age_given_gender", Task::age_given_gender}};
const std::vector<std::pair<std::string, Method>> kMethods{
    {"nine_patch", Method::nine_patch}, {"edge_patch", Method::edge_patch},   {"rows", Method::rows},
    {"whole_image", Method::whole_image}, {"combination", Method::combination}, {"cascade", Method::cascade}};
const std::vector<std::pair<std::string, dataset::Gender>> kGenders{
    {"any", dataset::Gender::unknown}, {"m", dataset::Gender::male}, {"f", dataset::Gender::female}};

std::string gender_filter_name(dataset::Gender g) {
    return g == dataset::Gender::unknown ? "any" : std::string(dataset::gender_code(g));
}

std::string resolve(const std::string& base_dir, const std::string& path) {
    if (path.empty()) return path;
    const fs::path p(path);
    return p.is_absolute() ? path : (fs::path(base_dir) / p).lexically_normal().string();
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;
using Schema = std::map<std::string, std::map<std::string, Setter>>;

template <typename T>
Setter int_field(T ExperimentConfig::*field) {
    return [field](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*field = parse_int<T>(k, v); };
}

const Schema& schema() {
    static const Schema s = [] {
        Schema s;
        auto& ex = s["experiment"];
        ex["task"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.task = parse_enum(k, v, kTasks); };
        ex["method"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.method = parse_enum(k, v, kMethods);
        };
        ex["seed"] = int_field(&ExperimentConfig::seed);
        ex["folds"] = int_field(&ExperimentConfig::folds);
        ex["test_fold"] = int_field(&ExperimentConfig::test_fold);
        ex["train_fold"] = int_field(&ExperimentConfig::train_fold);
        ex["jobs"] = int_field(&ExperimentConfig::jobs);
        ex["output_dir"] = [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output_dir = trim(v); };

        auto& data = s["data"];
        data["manifest"] = [](ExperimentConfig& c, const std::string&, const std::string& v) { c.manifest = trim(v); };
        data["image_root"] = [](ExperimentConfig& c, const std::string&, const std::string& v) { c.image_root = trim(v); };
        data["crop"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            const auto t = trim(v);
            if (t == "none" || t.empty()) {
                c.crop.reset();
                return;
            }
            std::istringstream is(t);
            std::string a, b, h, w, extra;
            if (!(is >> a >> b >> h >> w) || (is >> extra)) {
                throw ConfigError("config: '" + k + "' expects 'top left height width' or 'none'");
            }
            c.crop = imageproc::CropBox{parse_int<int>(k, a), parse_int<int>(k, b), parse_int<int>(k, h),
                                        parse_int<int>(k, w)};
        };
        data["image_side"] = int_field(&ExperimentConfig::image_side);
        data["balance"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.balance = parse_enum<Balance>(k, v, {{"none", Balance::none}, {"discard", Balance::discard}});
        };
        data["keep_fraction"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.keep_fraction = parse_real(k, v);
        };
        data["majority_class"] = int_field(&ExperimentConfig::majority_class);
        data["train_gender"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.train_gender = parse_enum(k, v, kGenders);
        };
        data["test_gender"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.test_gender = parse_enum(k, v, kGenders);
        };

        auto& grid = s["grid"];
        grid["patch"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.geometry.grid.patch_h = c.geometry.grid.patch_w = parse_int<int>(k, v);
        };
        grid["patch_h"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.geometry.grid.patch_h = parse_int<int>(k, v);
        };
        grid["patch_w"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.geometry.grid.patch_w = parse_int<int>(k, v);
        };
        grid["overlap"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.geometry.grid.overlap = parse_real(k, v);
        };

        auto& edge = s["edge"];
        edge["detector"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.edge.detector =
                parse_enum<EdgeDetector>(k, v, {{"sobel", EdgeDetector::sobel}, {"canny", EdgeDetector::canny}});
        };
        edge["gaussian_size"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.edge.gaussian_size = parse_int<int>(k, v);
        };
        edge["gaussian_sigma"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.edge.gaussian_sigma = parse_real(k, v);
        };
        edge["threshold"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.edge.threshold = parse_real(k, v);
        };
        edge["canny_low"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.edge.canny_low = parse_real(k, v);
        };
        edge["canny_high"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.edge.canny_high = parse_real(k, v);
        };
        edge["patch_side"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.edge.patch_side = parse_int<int>(k, v);
        };

        auto& rows = s["rows"];
        rows["count"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.geometry.row_count = parse_int<int>(k, v);
        };
        rows["height"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.geometry.row_height = parse_int<int>(k, v);
        };
        rows["row"] = int_field(&ExperimentConfig::row);

        s["whole_image"]["side"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.geometry.whole_image_side = parse_int<int>(k, v);
        };
        s["combination"]["members"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
            c.members = parse_members(v);
        };
        s["cascade"]["routing"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.routing = parse_enum<ensemble::Routing>(
                k, v, {{"per_patch", ensemble::Routing::per_patch}, {"per_image", ensemble::Routing::per_image}});
        };

        auto& m = s["mlp"];
        m["hidden_layers"] = int_field(&ExperimentConfig::hidden_layers);
        m["hidden_units"] = int_field(&ExperimentConfig::hidden_units);
        auto real = [](double mlp::MlpConfig::*field) -> Setter {
            return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.mlp.*field = parse_real(k, v);
            };
        };
        auto integer = [](int mlp::MlpConfig::*field) -> Setter {
            return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.mlp.*field = parse_int<int>(k, v);
            };
        };
        m["dropout_keep_input"] = real(&mlp::MlpConfig::dropout_keep_input);
        m["dropout_keep_hidden"] = real(&mlp::MlpConfig::dropout_keep_hidden);
        m["lr0"] = real(&mlp::MlpConfig::lr0);
        m["lr_decay"] = real(&mlp::MlpConfig::lr_decay);
        m["momentum0"] = real(&mlp::MlpConfig::momentum0);
        m["momentum_final"] = real(&mlp::MlpConfig::momentum_final);
        m["momentum_ramp_epochs"] = integer(&mlp::MlpConfig::momentum_ramp_epochs);
        m["momentum_style"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.mlp.momentum_style = parse_enum<mlp::MomentumStyle>(
                k, v, {{"classical", mlp::MomentumStyle::classical}, {"dampened", mlp::MomentumStyle::dampened}});
        };
        m["max_norm"] = real(&mlp::MlpConfig::max_norm);
        m["epochs"] = integer(&mlp::MlpConfig::epochs);
        m["batch_size"] = integer(&mlp::MlpConfig::batch_size);
        return s;
    }();
    return s;
}

bool valid_model_name(const std::string& name) {
    static const std::regex re("nine_patch|edge_patch|whole_image|row[1-9]|gender|male_age|female_age");
    return std::regex_match(name, re);
}

std::string source_name(const ensemble::InputSource& src) {
    switch (src.kind) {
        case ensemble::InputSource::Kind::nine_patch: return "nine_patch";
        case ensemble::InputSource::Kind::whole_image: return "whole_image";
        case ensemble::InputSource::Kind::row: return "row" + std::to_string(src.row);
    }
    return "?";
}

}  // namespace

std::string to_string(Task t) {
    for (const auto& [name, value] : kTasks) {
        if (value == t) return name;
    }
    return "?";
}

std::string to_string(Method m) {
    for (const auto& [name, value] : kMethods) {
        if (value == m) return name;
    }
    return "?";
}

double parse_real(const std::string& key, const std::string& text) {
    const auto t = trim(text);
    auto number = [&](const std::string& s) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
            throw ConfigError("config: '" + key + "' expects a number, got '" + text + "'");
        }
        return v;
    };
    const auto slash = t.find('/');
    if (slash == std::string::npos) return number(t);
    const double den = number(trim(t.substr(slash + 1)));
    if (den == 0.0) throw ConfigError("config: '" + key + "' divides by zero");
    return number(trim(t.substr(0, slash))) / den;
}

std::vector<MemberSpec> parse_members(const std::string& text) {
    std::vector<MemberSpec> out;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto colon = item.find(':');
        MemberSpec m;
        m.name = trim(item.substr(0, colon));
        m.weight = colon == std::string::npos ? 1.0 : parse_real("combination.members", item.substr(colon + 1));
        if (m.name == "nine_patch") {
            m.source = ensemble::InputSource::nine_patch();
        } else if (m.name == "whole_image") {
            m.source = ensemble::InputSource::whole_image();
        } else if (m.name.size() == 4 && m.name.starts_with("row") && m.name[3] >= '1' && m.name[3] <= '9') {
            m.source = ensemble::InputSource::row_strip(m.name[3] - '0');
        } else {
            throw ConfigError("config: unknown combination member '" + m.name +
                              "' (expected nine_patch, whole_image or rowN)");
        }
        for (const auto& prev : out) {
            if (prev.name == m.name) throw ConfigError("config: combination member '" + m.name + "' listed twice");
        }
        out.push_back(m);
    }
    return out;
}

int ExperimentConfig::classes() const { return task == Task::gender ? 2 : dataset::kAgeGroups; }

std::vector<std::string> ExperimentConfig::class_names() const {
    if (task == Task::gender) return {"male", "female"};
    return {"0-2", "4-6", "8-13", "15-20", "25-32", "38-43", "48-53", "60+"};
}

std::string ExperimentConfig::echo() const {
    std::ostringstream os;
    os << "[experiment]\ntask = " << to_string(task) << "\nmethod = " << to_string(method) << "\nseed = " << seed
       << "\nfolds = " << folds << "\ntest_fold = " << test_fold << "\ntrain_fold = " << train_fold << "\n";
    os << "\n[data]\nmanifest = " << manifest << "\nimage_root = " << image_root << "\ncrop = ";
    if (crop) {
        os << crop->top << ' ' << crop->left << ' ' << crop->height << ' ' << crop->width;
    } else {
        os << "none";
    }
    os << "\nimage_side = " << image_side << "\nbalance = " << (balance == Balance::discard ? "discard" : "none")
       << "\nkeep_fraction = " << fmt_real(keep_fraction) << "\nmajority_class = " << majority_class
       << "\ntrain_gender = " << gender_filter_name(train_gender) << "\ntest_gender = " << gender_filter_name(test_gender)
       << "\n";
    os << "\n[grid]\npatch_h = " << geometry.grid.patch_h << "\npatch_w = " << geometry.grid.patch_w
       << "\noverlap = " << fmt_real(geometry.grid.overlap) << "\n";
    os << "\n[edge]\ndetector = " << (edge.detector == EdgeDetector::canny ? "canny" : "sobel")
       << "\ngaussian_size = " << edge.gaussian_size << "\ngaussian_sigma = " << fmt_real(edge.gaussian_sigma)
       << "\nthreshold = " << fmt_real(edge.threshold) << "\ncanny_low = " << fmt_real(edge.canny_low)
       << "\ncanny_high = " << fmt_real(edge.canny_high) << "\npatch_side = " << edge.patch_side << "\n";
    os << "\n[rows]\ncount = " << geometry.row_count << "\nheight = " << geometry.row_height << "\nrow = " << row
       << "\n";
    os << "\n[whole_image]\nside = " << geometry.whole_image_side << "\n";
    os << "\n[combination]\nmembers = ";
    for (std::size_t i = 0; i < members.size(); ++i) {
        os << (i ? ", " : "") << source_name(members[i].source) << ':' << fmt_real(members[i].weight);
    }
    os << "\n\n[cascade]\nrouting = " << (routing == ensemble::Routing::per_image ? "per_image" : "per_patch")
       << "\n";
    os << "\n[mlp]\nhidden_layers = " << hidden_layers << "\nhidden_units = " << hidden_units;
    // The recipe echo minus the per-network fields (dims, seed).
    std::istringstream recipe(mlp.echo());
    std::string line;
    while (std::getline(recipe, line)) {
        if (line.starts_with("dims ") || line.starts_with("seed ")) continue;
        os << '\n' << line;
    }
    os << "\n";
    if (!models.empty()) {
        os << "\n[models]\n";
        for (const auto& [name, path] : models) os << name << " = " << path << "\n";
    }
    return os.str();
}

void validate(const ExperimentConfig& c) {
    if (c.folds < 0 || c.folds == 1) throw ConfigError("config: folds must be 0 (infer) or >= 2");
    if (c.test_fold < -1 || (c.folds > 0 && c.test_fold >= c.folds)) {
        throw ConfigError("config: test_fold " + std::to_string(c.test_fold) + " out of range");
    }
    if (c.train_fold >= 0) {
        if (c.test_fold < 0) throw ConfigError("config: train_fold requires an explicit test_fold");
        if (c.train_fold == c.test_fold) throw ConfigError("config: train_fold and test_fold must differ");
        if (c.folds > 0 && c.train_fold >= c.folds) throw ConfigError("config: train_fold out of range");
    } else if (c.train_fold != -1) {
        throw ConfigError("config: train_fold must be -1 or a fold index");
    }
    if (c.jobs < 1) throw ConfigError("config: jobs must be >= 1");
    if (c.output_dir.empty()) throw ConfigError("config: output_dir must not be empty");
    if (c.image_side < 3) throw ConfigError("config: image_side must be >= 3");
    if (c.crop && (c.crop->top < 0 || c.crop->left < 0 || c.crop->height < 1 || c.crop->width < 1)) {
        throw ConfigError("config: crop box must have a non-negative origin and positive size");
    }
    if (!(c.keep_fraction > 0.0 && c.keep_fraction <= 1.0)) throw ConfigError("config: keep_fraction must be in (0, 1]");
    if (c.majority_class < -1 || c.majority_class >= c.classes()) throw ConfigError("config: majority_class out of range");
    if (c.task != Task::age_given_gender &&
        (c.train_gender != dataset::Gender::unknown || c.test_gender != dataset::Gender::unknown)) {
        throw ConfigError("config: train_gender/test_gender apply only to task age_given_gender");
    }
    if (c.method == Method::cascade && c.task != Task::age) throw ConfigError("config: cascade requires task = age");

    const auto& g = c.geometry.grid;
    if (g.patch_h < 1 || g.patch_w < 1 || g.patch_h > c.image_side || g.patch_w > c.image_side) {
        throw ConfigError("config: grid patch must fit the " + std::to_string(c.image_side) + "-pixel image");
    }
    if (!(g.overlap >= 0.0 && g.overlap < 1.0)) throw ConfigError("config: grid overlap must be in [0, 1)");
    if (std::lround(g.patch_h * (1.0 - g.overlap)) < 1 || std::lround(g.patch_w * (1.0 - g.overlap)) < 1) {
        throw ConfigError("config: grid stride rounds to zero");
    }

    const auto& e = c.edge;
    if (e.gaussian_size < 1 || e.gaussian_size % 2 == 0) throw ConfigError("config: edge.gaussian_size must be odd");
    if (!(e.gaussian_sigma > 0.0)) throw ConfigError("config: edge.gaussian_sigma must be positive");
    if (!(e.threshold >= 0.0 && e.threshold <= 1.0)) throw ConfigError("config: edge.threshold must be in [0, 1]");
    if (!(e.canny_low >= 0.0 && e.canny_low <= e.canny_high && e.canny_high <= 1.0)) {
        throw ConfigError("config: need 0 <= canny_low <= canny_high <= 1");
    }
    if (e.patch_side < 1 || e.patch_side % 2 == 0 || e.patch_side > c.image_side) {
        throw ConfigError("config: edge.patch_side must be odd and fit the image");
    }

    const int rc = c.geometry.row_count;
    const int rh = c.geometry.row_height;
    if (rc < 1 || rc > 9 || rh < 1 || rh > c.image_side) throw ConfigError("config: rows need 1..9 rows that fit the image");
    if (rc > 1 && (c.image_side - rh) % (rc - 1) != 0) {
        throw ConfigError("config: (image_side - rows.height) must be divisible by rows.count - 1");
    }
    if (rc == 1 && rh != c.image_side) throw ConfigError("config: a single row must span the image height");
    if (c.row < 0 || c.row > rc) throw ConfigError("config: rows.row must be 0 (all) or a row index");
    if (c.geometry.whole_image_side < 1) throw ConfigError("config: whole_image.side must be positive");

    if (c.method == Method::combination && c.members.empty()) throw ConfigError("config: combination has no members");
    for (const auto& m : c.members) {
        if (!(m.weight > 0.0)) throw ConfigError("config: combination weights must be positive");
        if (m.source.kind == ensemble::InputSource::Kind::row && m.source.row > rc) {
            throw ConfigError("config: combination member " + m.name + " exceeds rows.count");
        }
    }

    if (c.hidden_layers < 0 || c.hidden_units < 1) throw ConfigError("config: bad hidden layer shape");
    mlp::MlpConfig probe = c.mlp;
    probe.dims = {1, 2};
    probe.validate();
    for (const auto& [name, path] : c.models) {
        if (!valid_model_name(name)) throw ConfigError("config: unknown model name '" + name + "' in [models]");
        if (path.empty()) throw ConfigError("config: empty model path for '" + name + "'");
    }
}

ExperimentConfig parse_config(std::istream& in, const std::string& base_dir) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config: " + std::string(e.what()));
    }

    ExperimentConfig c;
    c.members = parse_members("nine_patch:1/9, whole_image:1, row2:1");
    const auto& sch = schema();
    for (const auto& [section, body] : tree) {
        if (!body.data().empty()) throw ConfigError("config: key '" + section + "' is outside any section");
        if (section == "models") {
            for (const auto& [key, value] : body) c.models[key] = resolve(base_dir, trim(value.data()));
            continue;
        }
        const auto sec = sch.find(section);
        if (sec == sch.end()) throw ConfigError("config: unknown section or top-level key '" + section + "'");
        for (const auto& [key, value] : body) {
            const auto field = sec->second.find(key);
            if (field == sec->second.end()) throw ConfigError("config: unknown key '" + section + "." + key + "'");
            field->second(c, section + "." + key, value.data());
        }
    }
    c.manifest = resolve(base_dir, c.manifest);
    c.image_root = resolve(base_dir, c.image_root);
    if (c.image_root.empty() && !c.manifest.empty()) c.image_root = fs::path(c.manifest).parent_path().string();
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    auto base = fs::path(path).parent_path().string();
    return parse_config(in, base.empty() ? "." : base);
}

}  // namespace ninepatch::app
