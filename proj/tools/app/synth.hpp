#pragma once

#include "ninepatch/dataset.hpp"
#include "ninepatch/imageproc.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ninepatch::app {

/// Two-class corpus with a known signal: the upper half of every image carries
/// a sinusoidal stripe texture, horizontal for class 0 and vertical for class
/// 1, with random period, phase and contrast; the whole image has Gaussian
/// noise. The lower half carries no class information.
struct SynthSpec {
    int images = 1000;
    int folds = 5;
    int side = 60;
    double noise = 0.08;
    std::uint64_t seed = 1;
};

struct SynthImage {
    dataset::RawRecord record;
    imageproc::GrayImage image;
};

/// Classes alternate within every fold, so folds are balanced. Class 0 is
/// recorded as gender "m", class 1 as "f".
std::vector<SynthImage> make_synthetic_corpus(const SynthSpec& spec);

/// Writes <dir>/images/NNNN.png and <dir>/manifest.csv; returns the manifest path.
std::string write_synthetic_corpus(const std::string& dir, const SynthSpec& spec);

}  // namespace ninepatch::app
