#include "synth.hpp"

#include "image_io.hpp"

#include "ninepatch/error.hpp"
#include "ninepatch/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

namespace ninepatch::app {

std::vector<SynthImage> make_synthetic_corpus(const SynthSpec& spec) {
    if (spec.images < 0 || spec.folds < 1 || spec.side < 2) throw InvalidInput("synthetic corpus: bad size");
    Rng rng(derive_seed(spec.seed, "synthetic"));
    std::vector<SynthImage> out;
    out.reserve(static_cast<std::size_t>(spec.images));
    for (int i = 0; i < spec.images; ++i) {
        const int fold = i % spec.folds;
        const int cls = (i / spec.folds) % 2;
        const double period = 5.0 + 4.0 * rng.uniform();
        const double phase = 2.0 * std::numbers::pi * rng.uniform();
        const double amplitude = 0.12 + 0.13 * rng.uniform();

        SynthImage s;
        s.image = imageproc::GrayImage(spec.side, spec.side);
        for (int r = 0; r < spec.side; ++r) {
            for (int c = 0; c < spec.side; ++c) {
                double v = 0.5 + spec.noise * rng.normal();
                if (r < spec.side / 2) {
                    const double t = cls == 0 ? r : c;
                    v += amplitude * std::sin(2.0 * std::numbers::pi * t / period + phase);
                }
                s.image.at(r, c) = std::clamp(v, 0.0, 1.0);
            }
        }
        char id[16];
        std::snprintf(id, sizeof id, "%04d", i);
        s.record.image_id = id;
        s.record.path = std::string("images/") + id + ".png";
        s.record.gender = cls == 0 ? dataset::Gender::male : dataset::Gender::female;
        s.record.raw_age = "u";
        s.record.fold = fold;
        out.push_back(std::move(s));
    }
    return out;
}

std::string write_synthetic_corpus(const std::string& dir, const SynthSpec& spec) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "images");
    const auto corpus = make_synthetic_corpus(spec);
    std::vector<dataset::RawRecord> records;
    for (const auto& s : corpus) {
        write_png((fs::path(dir) / s.record.path).string(), s.image);
        records.push_back(s.record);
    }
    const std::string manifest = (fs::path(dir) / "manifest.csv").string();
    std::ofstream out(manifest, std::ios::trunc);
    if (!out) throw DataError("cannot write '" + manifest + "'");
    dataset::write_manifest(out, records);
    return manifest;
}

}  // namespace ninepatch::app
