#include "support.hpp"

#include "ninepatch/error.hpp"
#include "ninepatch/patchgen.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace ninepatch;
using namespace ninepatch::patchgen;
using ninepatch::testing::random_image;

namespace {

std::vector<std::pair<int, int>> origins(const std::vector<Patch>& patches) {
    std::vector<std::pair<int, int>> out;
    for (const auto& p : patches) out.emplace_back(p.top, p.left);
    return out;
}

void expect_standardized(const std::vector<double>& v) {
    double mean = 0.0, var = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / v.size());
    EXPECT_NEAR(mean, 0.0, 1e-9);
    if (sd > 0.0) EXPECT_NEAR(sd, 1.0, 1e-9);
}

}  // namespace

TEST(WindowOffsets, HalfPatchHalfOverlap) { EXPECT_EQ(window_offsets(60, 30, 0.5), (std::vector<int>{0, 15, 30})); }

TEST(WindowOffsets, Tilings) {
    EXPECT_EQ(window_offsets(60, 30, 0.0), (std::vector<int>{0, 30}));
    EXPECT_EQ(window_offsets(60, 20, 0.0), (std::vector<int>{0, 20, 40}));
    EXPECT_EQ(window_offsets(60, 15, 0.0), (std::vector<int>{0, 15, 30, 45}));
    EXPECT_EQ(window_offsets(60, 60, 0.5), (std::vector<int>{0}));
}

TEST(WindowOffsets, NonIntegerStrideEndsFlush) {
    const auto o = window_offsets(60, 30, 0.75);
    EXPECT_EQ(o.front(), 0);
    EXPECT_EQ(o.back(), 30);
    for (std::size_t i = 1; i < o.size(); ++i) EXPECT_GT(o[i], o[i - 1]);
}

TEST(GridPatches, NinePatchOffsetsAndSlots) {
    Rng rng(1);
    const auto patches = grid_patches(random_image(60, 60, rng), {30, 30, 0.5}, "img");
    const std::vector<std::pair<int, int>> expected{{0, 0},  {0, 15},  {0, 30},  {15, 0}, {15, 15},
                                                    {15, 30}, {30, 0}, {30, 15}, {30, 30}};
    EXPECT_EQ(origins(patches), expected);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        EXPECT_EQ(patches[i].slot, static_cast<int>(i) + 1);
        EXPECT_EQ(patches[i].features.size(), 900u);
        EXPECT_EQ(patches[i].image_id, "img");
        expect_standardized(patches[i].features);
    }
}

TEST(GridPatches, FeaturesAreStandardizedWindowPixels) {
    Rng rng(2);
    const auto img = random_image(60, 60, rng);
    const auto patches = grid_patches(img, {30, 30, 0.5});
    const Patch& p = patches[4];
    std::vector<double> raw;
    for (int r = 15; r < 45; ++r) {
        for (int c = 15; c < 45; ++c) raw.push_back(img.at(r, c));
    }
    const auto expected = imageproc::standardize(raw);
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_DOUBLE_EQ(p.features[i], expected[i]);
}

TEST(GridPatches, CountsForOtherSizes) {
    const imageproc::GrayImage img(60, 60, 0.5);
    EXPECT_EQ(grid_patches(img, {30, 30, 0.0}).size(), 4u);
    EXPECT_EQ(grid_patches(img, {20, 20, 0.0}).size(), 9u);
    EXPECT_EQ(grid_patches(img, {15, 15, 0.0}).size(), 16u);
}

TEST(GridPatches, CoverageAndCountProperty) {
    Rng rng(3);
    for (int trial = 0; trial < 60; ++trial) {
        const int side = 8 + static_cast<int>(rng.below(60));
        const int ph = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(side)));
        const int pw = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(side)));
        const double overlap = 0.9 * rng.uniform();
        if (std::lround(ph * (1 - overlap)) < 1 || std::lround(pw * (1 - overlap)) < 1) continue;
        const GridSpec spec{ph, pw, overlap};
        const imageproc::GrayImage img(side, side, 0.0);
        const auto patches = grid_patches(img, spec);
        EXPECT_EQ(patches.size(), window_offsets(side, ph, overlap).size() * window_offsets(side, pw, overlap).size());
        std::vector<int> covered(static_cast<std::size_t>(side) * side, 0);
        for (const auto& p : patches) {
            EXPECT_EQ(p.features.size(), static_cast<std::size_t>(ph) * pw);
            for (int r = p.top; r < p.top + ph; ++r) {
                for (int c = p.left; c < p.left + pw; ++c) covered[static_cast<std::size_t>(r) * side + c] = 1;
            }
        }
        for (int v : covered) ASSERT_EQ(v, 1) << side << " " << ph << "x" << pw << " overlap " << overlap;
    }
}

TEST(GridPatches, PatchLargerThanImageThrows) {
    EXPECT_THROW(grid_patches(imageproc::GrayImage(20, 20), {30, 30, 0.5}), InvalidInput);
}

TEST(EdgePatches, EmptyMask) {
    const imageproc::GrayImage img(30, 30, 0.1);
    EXPECT_TRUE(edge_patches(img, imageproc::BinaryMask(30, 30), 13).empty());
}

TEST(EdgePatches, SingleCentrePixel) {
    Rng rng(4);
    const auto img = random_image(60, 60, rng);
    imageproc::BinaryMask mask(60, 60);
    mask.set(30, 30);
    const auto patches = edge_patches(img, mask, 13);
    ASSERT_EQ(patches.size(), 1u);
    EXPECT_EQ(patches[0].features.size(), 169u);
    EXPECT_EQ(patches[0].top, 24);
    EXPECT_EQ(patches[0].left, 24);
    EXPECT_EQ(patches[0].slot, 0);
}

TEST(EdgePatches, CountEqualsInteriorSetPixels) {
    Rng rng(5);
    const auto img = random_image(40, 30, rng);
    imageproc::BinaryMask mask(40, 30);
    std::size_t interior = 0;
    for (int r = 0; r < 30; ++r) {
        for (int c = 0; c < 40; ++c) {
            if (rng.uniform() < 0.2) {
                mask.set(r, c);
                if (r >= 6 && r < 24 && c >= 6 && c < 34) ++interior;
            }
        }
    }
    const auto patches = edge_patches(img, mask, 13);
    EXPECT_EQ(patches.size(), interior);
    for (const auto& p : patches) expect_standardized(p.features);
}

TEST(EdgePatches, EvenSideThrows) {
    EXPECT_THROW(edge_patches(imageproc::GrayImage(20, 20), imageproc::BinaryMask(20, 20), 12), InvalidInput);
}

TEST(RowPatches, FiveRowsOfTwenty) {
    const imageproc::GrayImage img(60, 60, 0.5);
    const auto rows = row_patches(img, 5, 20);
    ASSERT_EQ(rows.size(), 5u);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].top, static_cast<int>(i) * 10);
        EXPECT_EQ(rows[i].slot, static_cast<int>(i) + 1);
        EXPECT_EQ(rows[i].features.size(), 1200u);
    }
}

TEST(RowPatches, SingleRowIsWholeImage) {
    Rng rng(6);
    const auto img = random_image(60, 60, rng);
    const auto rows = row_patches(img, 1, 60);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].features, imageproc::standardize(img.data));
}

TEST(RowPatches, TwoRowsTile) {
    const auto rows = row_patches(imageproc::GrayImage(60, 60), 2, 30);
    EXPECT_EQ(rows[0].top, 0);
    EXPECT_EQ(rows[1].top, 30);
}

TEST(RowPatches, NonIntegerStrideThrows) { EXPECT_THROW(row_patches(imageproc::GrayImage(60, 60), 4, 20), InvalidInput); }

TEST(WholeImage, ConstantGivesZeroVector) {
    const Patch p = whole_image_vector(imageproc::GrayImage(60, 60, 0.4), 32);
    EXPECT_EQ(p.features, std::vector<double>(1024, 0.0));
}

TEST(WholeImage, NoResampleAtNativeSize) {
    Rng rng(7);
    const auto img = random_image(32, 32, rng);
    EXPECT_EQ(whole_image_vector(img, 32).features, imageproc::standardize(img.data));
}

TEST(PatchDump, RoundTrip) {
    Rng rng(8);
    const auto patches = grid_patches(random_image(60, 60, rng), {30, 30, 0.5}, "face 01");
    std::stringstream buf;
    write_patch_dump(buf, "face 01", patches);
    const auto back = read_patch_dump(buf);
    ASSERT_EQ(back.size(), patches.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].features, patches[i].features);
        EXPECT_EQ(back[i].slot, patches[i].slot);
        EXPECT_EQ(back[i].top, patches[i].top);
        EXPECT_EQ(back[i].left, patches[i].left);
        EXPECT_EQ(back[i].image_id, "face 01");
    }
}

TEST(PatchDump, EmptyAndCorrupt) {
    std::stringstream buf;
    write_patch_dump(buf, "none", {});
    EXPECT_TRUE(read_patch_dump(buf).empty());
    std::stringstream bad("NOTADUMP....");
    EXPECT_THROW(read_patch_dump(bad), DataError);
}
