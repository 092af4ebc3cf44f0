#include "commands.hpp"

#include "pipeline.hpp"
#include "synth.hpp"

#include "ninepatch/error.hpp"
#include "ninepatch/mlp.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

namespace ninepatch::app {

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw DataError("failed to write '" + path.string() + "'");
}

std::string safe_name(const std::string& id) {
    std::string s = id;
    for (char& ch : s) {
        const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.';
        if (!ok) ch = '_';
    }
    return s;
}

std::string corpus_text(const Corpus& corpus) {
    std::ostringstream os;
    os << "manifest_rows = " << corpus.records << "\nusable_images = " << corpus.samples.size()
       << "\nunreadable_images = " << corpus.unreadable << "\nfolds = " << corpus.folds
       << "\ngender_known = " << corpus.counts.gender_known << "\ngender_unknown = " << corpus.counts.gender_unknown
       << "\nage_known = " << corpus.counts.age_known << "\nage_missing = " << corpus.counts.age_missing << "\n";
    for (const auto& [label, n] : corpus.counts.unknown_age_labels) {
        os << "unknown_age_label \"" << label << "\" = " << n << "\n";
    }
    return os.str();
}

std::string summary_text(const eval::CvSummary& summary, const ExperimentConfig& config) {
    std::ostringstream os;
    os << "task " << to_string(config.task) << ", method " << to_string(config.method) << ", seed " << config.seed
       << "\n\n";
    eval::write_report_text(os, summary, config.class_names());
    return os.str();
}

void write_reports(const fs::path& dir, const eval::CvSummary& summary, const ExperimentConfig& config) {
    write_text(dir / "report.txt", summary_text(summary, config));
    std::ostringstream csv, slots;
    eval::write_report_csv(csv, summary);
    eval::write_per_slot_csv(slots, summary);
    write_text(dir / "report.csv", csv.str());
    write_text(dir / "per_slot.csv", slots.str());
}

void save_networks(const fs::path& dir, const std::map<std::string, TrainedNetwork>& nets) {
    fs::create_directories(dir);
    for (const auto& [name, tn] : nets) {
        mlp::save_model_file(tn.model, (dir / (name + ".npmlp")).string());
        write_text(dir / (name + ".log.csv"), tn.log_csv);
    }
}

spdlog::level::level_enum log_level_from_env() {
    const char* v = std::getenv("NINEPATCH_LOG");
    const std::string s = v ? v : "info";
    if (s == "error") return spdlog::level::err;
    if (s == "debug") return spdlog::level::debug;
    if (s != "info") std::cerr << "NINEPATCH_LOG='" << s << "' not recognised (error, info, debug); using info\n";
    return spdlog::level::info;
}

void setup_logging() {
    static std::once_flag once;
    std::call_once(once, [] {
        auto logger = spdlog::stderr_color_mt("ninepatch");
        logger->set_pattern("[%l] %v");
        spdlog::set_default_logger(logger);
    });
    spdlog::set_level(log_level_from_env());
}

}  // namespace

void apply_overrides(ExperimentConfig& config, const Overrides& o) {
    if (o.seed) config.seed = *o.seed;
    if (o.out) config.output_dir = *o.out;
    if (o.folds) config.folds = *o.folds;
    if (o.test_fold) config.test_fold = *o.test_fold;
    if (o.jobs) config.jobs = *o.jobs;
    validate(config);
}

ExtractStats cmd_extract(const ExperimentConfig& config) {
    if (config.method == Method::combination || config.method == Method::cascade) {
        throw ConfigError("extract supports nine_patch, edge_patch, rows and whole_image");
    }
    const Corpus corpus = load_corpus(config);
    const fs::path dir = fs::path(config.output_dir) / "patches";
    fs::create_directories(dir);
    const auto names = network_names(config);

    ExtractStats stats;
    stats.unreadable = corpus.unreadable;
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
        const Sample& s = corpus.samples[i];
        std::vector<patchgen::Patch> units;
        for (const auto& name : names) {
            auto u = network_units(config, name, s);
            units.insert(units.end(), u.begin(), u.end());
        }
        char prefix[16];
        std::snprintf(prefix, sizeof prefix, "%06zu_", i);
        std::ofstream out(dir / (prefix + safe_name(s.image_id) + ".nppatch"), std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write patch dump in '" + dir.string() + "'");
        patchgen::write_patch_dump(out, s.image_id, units);
        ++stats.images;
        stats.patches += units.size();
    }
    std::ostringstream os;
    os << "method = " << to_string(config.method) << "\nimages = " << stats.images
       << "\nunreadable_images = " << stats.unreadable << "\npatches = " << stats.patches
       << "\nmean_patches_per_image = " << stats.mean_patches_per_image() << "\n";
    write_text(fs::path(config.output_dir) / "stats.txt", os.str());
    return stats;
}

void cmd_train(const ExperimentConfig& config) {
    const Corpus corpus = load_corpus(config);
    std::vector<const Sample*> train;
    if (config.test_fold >= 0) {
        train = fold_data(config, corpus, config.test_fold).train;
    } else {
        for (const auto& s : corpus.samples) {
            if (config.task == Task::age_given_gender && config.train_gender != dataset::Gender::unknown &&
                s.gender != config.train_gender) {
                continue;
            }
            train.push_back(&s);
        }
    }
    const fs::path out(config.output_dir);
    fs::create_directories(out);
    std::map<std::string, TrainedNetwork> nets;
    try {
        nets = train_networks(config, train, "train");
    } catch (const eval::FoldSkipped& e) {
        throw DataError(e.what());
    }
    save_networks(out, nets);
    write_text(out / "config.ini", config.echo());
}

eval::EvalReport cmd_eval(const ExperimentConfig& config, const std::string& model_dir) {
    std::map<std::string, mlp::Mlp> loaded;
    for (const auto& name : network_names(config)) {
        const auto it = config.models.find(name);
        const std::string path =
            it != config.models.end() ? it->second : (fs::path(model_dir) / (name + ".npmlp")).string();
        loaded.emplace(name, mlp::load_model_file(path));
    }
    std::map<std::string, const mlp::Mlp*> nets;
    for (const auto& [name, m] : loaded) nets[name] = &m;

    const Corpus corpus = load_corpus(config);
    std::vector<const Sample*> test;
    if (config.test_fold >= 0) {
        test = fold_data(config, corpus, config.test_fold).test;
    } else {
        for (const auto& s : corpus.samples) {
            if (config.task == Task::age_given_gender && config.test_gender != dataset::Gender::unknown &&
                s.gender != config.test_gender) {
                continue;
            }
            test.push_back(&s);
        }
    }
    if (test.empty()) throw DataError("no test images selected");
    Evaluation ev = evaluate_networks(config, nets, test);

    eval::CvSummary summary;
    summary.folds.push_back({config.test_fold, ev.report});
    summary.patch_level = {ev.report.patch_level, 0.0};
    summary.image_level = {ev.report.image_level, 0.0};
    if (ev.report.one_off) summary.one_off = eval::MeanStd{*ev.report.one_off, 0.0};
    const fs::path out(config.output_dir);
    fs::create_directories(out);
    write_reports(out, summary, config);
    write_text(out / "predictions.csv", predictions_csv(ev.predictions));
    return ev.report;
}

GradCheckResult cmd_gradcheck(std::uint64_t seed, bool corrupt_bias_grad) {
    mlp::GradCheckOptions opt;
    opt.seed = seed;
    if (corrupt_bias_grad) {
        opt.mutate = [](mlp::Gradients& g) {
            for (auto& b : g.biases) b *= 2.0;
        };
    }
    const auto report = mlp::gradient_check(opt);
    return {report.max_relative_error, report.entries_checked, report.passed(1e-6)};
}

eval::CvSummary cmd_experiment(const ExperimentConfig& config) {
    const Corpus corpus = load_corpus(config);
    if (corpus.folds < 2) throw DataError("experiment needs at least two folds, manifest has " + std::to_string(corpus.folds));
    if (config.train_fold >= corpus.folds || config.test_fold >= corpus.folds) {
        throw ConfigError("fold index out of range for " + std::to_string(corpus.folds) + " folds");
    }
    const fs::path out(config.output_dir);
    fs::create_directories(out);
    write_text(out / "config.ini", config.echo());
    write_text(out / "corpus.txt", corpus_text(corpus));

    std::vector<int> folds;
    if (config.test_fold >= 0) {
        folds.push_back(config.test_fold);
    } else {
        for (int f = 0; f < corpus.folds; ++f) folds.push_back(f);
    }

    auto runner = [&](int fold) {
        const std::string tag = "fold" + std::to_string(fold);
        const FoldData fd = fold_data(config, corpus, fold);
        if (fd.test.empty()) throw eval::FoldSkipped(tag + " has no test images");
        const auto trained = train_networks(config, fd.train, tag);
        std::map<std::string, const mlp::Mlp*> nets;
        for (const auto& [name, tn] : trained) nets[name] = &tn.model;
        const Evaluation ev = evaluate_networks(config, nets, fd.test);

        const fs::path dir = out / tag;
        save_networks(dir, trained);
        write_text(dir / "predictions.csv", predictions_csv(ev.predictions));
        spdlog::info("{}: patch-level {:.2f}%, image-level {:.2f}%", tag, 100.0 * ev.report.patch_level,
                     100.0 * ev.report.image_level);
        return ev.report;
    };
    eval::CvSummary summary = eval::cross_validate(folds, runner, config.jobs);
    write_reports(out, summary, config);
    if (summary.folds.empty()) throw DataError("every fold was skipped; see the warnings above");
    return summary;
}

int run_cli(int argc, const char* const* argv) {
    setup_logging();
    CLI::App app{"Nine-patch local neural networks for face gender and age classification", "ninepatch"};
    app.require_subcommand(1);

    std::string config_path, model_dir;
    Overrides ov;
    auto add_common = [&](CLI::App* sub, bool with_folds) {
        sub->add_option("--config", config_path, "Experiment INI file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", ov.seed, "Top-level seed (overrides experiment.seed)");
        sub->add_option("--out", ov.out, "Output directory (overrides experiment.output_dir)");
        sub->add_option("--jobs", ov.jobs, "Folds trained concurrently")->check(CLI::PositiveNumber);
        if (with_folds) {
            sub->add_option("--folds", ov.folds, "Fold count (default: from the manifest)");
            sub->add_option("--test-fold", ov.test_fold, "Held-out fold (-1: all)");
        }
    };

    auto* extract = app.add_subcommand("extract", "Cut patches for every image and write patch dumps + stats");
    add_common(extract, false);
    auto* train = app.add_subcommand("train", "Train the configured method's networks");
    add_common(train, true);
    auto* evalc = app.add_subcommand("eval", "Evaluate trained networks and write reports");
    add_common(evalc, true);
    evalc->add_option("--model-dir", model_dir, "Directory holding <network>.npmlp files (default: --out)");
    auto* experiment = app.add_subcommand("experiment", "Run the full k-fold train/evaluate pipeline");
    add_common(experiment, true);

    auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
    std::uint64_t gc_seed = 7;
    bool corrupt = false;
    gradcheck->add_option("--seed", gc_seed, "Seed for the random test networks");
    gradcheck->add_flag("--corrupt-bias-grad", corrupt, "Double the bias gradients first (the check must fail)");

    auto* synth = app.add_subcommand("synth", "Write the synthetic two-class stripe corpus");
    SynthSpec sspec;
    std::string synth_out;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--images", sspec.images, "Image count")->check(CLI::NonNegativeNumber);
    synth->add_option("--folds", sspec.folds, "Fold count")->check(CLI::PositiveNumber);
    synth->add_option("--seed", sspec.seed, "Generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (gradcheck->parsed()) {
            const auto r = cmd_gradcheck(gc_seed, corrupt);
            std::cout << "gradcheck: max relative error " << r.max_relative_error << " over " << r.entries
                      << " entries (tolerance 1e-6): " << (r.passed ? "PASS" : "FAIL") << "\n";
            return r.passed ? exit_ok : exit_check_failed;
        }
        if (synth->parsed()) {
            const auto manifest = write_synthetic_corpus(synth_out, sspec);
            std::cout << "wrote " << sspec.images << " images and " << manifest << "\n";
            return exit_ok;
        }

        ExperimentConfig config = load_config(config_path);
        apply_overrides(config, ov);
        if (extract->parsed()) {
            const auto st = cmd_extract(config);
            std::cout << "extracted " << st.patches << " patches from " << st.images << " images (" << st.unreadable
                      << " unreadable), " << st.mean_patches_per_image() << " per image\n";
        } else if (train->parsed()) {
            cmd_train(config);
            std::cout << "models written to " << config.output_dir << "\n";
        } else if (evalc->parsed()) {
            const auto r = cmd_eval(config, model_dir.empty() ? config.output_dir : model_dir);
            std::cout << "patch-level " << 100.0 * r.patch_level << "%, image-level " << 100.0 * r.image_level << "%";
            if (r.one_off) std::cout << ", one-off " << 100.0 * *r.one_off << "%";
            std::cout << " over " << r.n_images << " images\n";
        } else if (experiment->parsed()) {
            const auto start = std::chrono::steady_clock::now();
            const auto summary = cmd_experiment(config);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::cout << summary_text(summary, config) << "\nelapsed " << secs << " s; reports in "
                      << config.output_dir << "\n";
        }
        return exit_ok;
    } catch (const TrainingDiverged& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_diverged;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_data;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_data;
    }
}

}  // namespace ninepatch::app
