#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ninepatch {

/// Normalized class-probability vector.
struct Posterior {
    std::vector<double> probs;

    std::size_t classes() const { return probs.size(); }
    double operator[](std::size_t i) const { return probs[i]; }

    /// Index of the largest entry; ties go to the lowest index.
    int argmax() const;

    bool operator==(const Posterior&) const = default;
};

/// Lowest index among the maximal entries. Returns -1 for an empty range.
int argmax_lowest(std::span<const double> values);

}  // namespace ninepatch
