#pragma once

#include "ninepatch/error.hpp"

#include <string>

namespace ninepatch::dataset {

template <typename T>
Split<T> cv_split(const std::vector<T>& items, int k, int test_fold) {
    if (k < 1 || test_fold < 0 || test_fold >= k) {
        throw InvalidInput("cv_split: fold index " + std::to_string(test_fold) + " out of range for k=" +
                           std::to_string(k));
    }
    Split<T> s;
    for (const auto& item : items) {
        (item.fold == test_fold ? s.test : s.train).push_back(item);
    }
    return s;
}

template <typename T>
Split<T> single_fold_split(const std::vector<T>& items, int k, int train_fold, int test_fold) {
    if (k < 2 || train_fold < 0 || train_fold >= k || test_fold < 0 || test_fold >= k || train_fold == test_fold) {
        throw InvalidInput("single_fold_split: need distinct train/test folds in [0, k)");
    }
    Split<T> s;
    for (const auto& item : items) {
        if (item.fold == train_fold) s.train.push_back(item);
        if (item.fold == test_fold) s.test.push_back(item);
    }
    return s;
}

}  // namespace ninepatch::dataset
