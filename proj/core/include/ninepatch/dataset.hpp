#pragma once

#include "ninepatch/patchgen.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ninepatch::dataset {

enum class Gender { male, female, unknown };

/// Class index used for gender tasks: male = 0, female = 1.
int gender_class(Gender g);
Gender parse_gender(std::string_view s);
std::string_view gender_code(Gender g);

inline constexpr int kAgeGroups = 8;

/// One of the eight merged age groups, 1-based.
class AgeGroup {
public:
    explicit AgeGroup(int index);

    int index() const noexcept { return index_; }
    /// Zero-based class index for age tasks.
    int class_index() const noexcept { return index_ - 1; }
    bool adjacent_or_equal(AgeGroup other) const noexcept;

    auto operator<=>(const AgeGroup&) const = default;

private:
    int index_;
};

/// Maps one of the 28 raw age labels found in the Adience annotations onto the
/// eight merged groups. Throws UnknownLabel for anything else. Matching is
/// exact after trimming outer whitespace.
AgeGroup merge_age_label(std::string_view raw);

/// All recognised raw labels, in merged-group order.
const std::vector<std::pair<std::string, int>>& age_label_table();

struct RawRecord {
    std::string image_id;
    std::string path;
    Gender gender = Gender::unknown;
    std::string raw_age;  // "u" or empty when unknown
    int fold = 0;
};

struct LabeledSample {
    std::string image_id;
    std::string path;
    std::optional<Gender> gender;
    std::optional<AgeGroup> age;
    int fold = 0;
};

struct SubsetCounts {
    std::size_t records = 0;
    std::size_t gender_known = 0;
    std::size_t gender_unknown = 0;
    std::size_t age_known = 0;
    std::size_t age_missing = 0;
    /// Unrecognised raw age strings and how often each occurred.
    std::map<std::string, std::size_t> unknown_age_labels;
    /// both-subset counts indexed [fold][group - 1]
    std::map<int, std::array<std::size_t, kAgeGroups>> both_by_fold;
    /// both-subset counts per gender (0 male, 1 female) and group
    std::array<std::array<std::size_t, kAgeGroups>, 2> both_by_gender{};
};

struct Subsets {
    std::vector<LabeledSample> gender;
    std::vector<LabeledSample> age;
    std::vector<LabeledSample> both;
    SubsetCounts counts;
};

/// Splits records into the gender-labelled, age-labelled and doubly-labelled
/// subsets. Unknown age strings are excluded (and counted) rather than fatal.
Subsets build_subsets(const std::vector<RawRecord>& records);

/// Keeps each patch whose label equals majority_class with probability
/// keep_fraction; every other patch is kept. Deterministic for a seed.
std::vector<patchgen::Patch> balance_by_discard(const std::vector<patchgen::Patch>& patches, int majority_class,
                                                double keep_fraction, std::uint64_t seed);

template <typename T>
struct Split {
    std::vector<T> train;
    std::vector<T> test;
};

/// test = items in test_fold, train = everything else. T needs a `fold` member.
template <typename T>
Split<T> cv_split(const std::vector<T>& items, int k, int test_fold);

/// Restricted protocol: train on exactly one fold, test on another.
template <typename T>
Split<T> single_fold_split(const std::vector<T>& items, int k, int train_fold, int test_fold);

/// Reads the manifest CSV `image_id,relative_path,gender,raw_age,fold`
/// (header required; fields containing commas must be double-quoted).
std::vector<RawRecord> read_manifest(std::istream& in);
std::vector<RawRecord> read_manifest_file(const std::string& path);
void write_manifest(std::ostream& out, const std::vector<RawRecord>& records);

/// max fold index + 1, or 0 for no records.
int fold_count(const std::vector<RawRecord>& records);

}  // namespace ninepatch::dataset

#include "ninepatch/detail/dataset_impl.hpp"
