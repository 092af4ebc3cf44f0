#include "ninepatch/dataset.hpp"

#include "ninepatch/error.hpp"
#include "ninepatch/rng.hpp"

#include <boost/tokenizer.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

namespace ninepatch::dataset {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool is_unknown_age(std::string_view s) { return s.empty() || s == "u" || s == "None"; }

}  // namespace

int gender_class(Gender g) {
    switch (g) {
        case Gender::male: return 0;
        case Gender::female: return 1;
        case Gender::unknown: break;
    }
    throw InvalidInput("gender_class: unknown gender has no class index");
}

Gender parse_gender(std::string_view s) {
    s = trim(s);
    if (s == "m" || s == "M") return Gender::male;
    if (s == "f" || s == "F") return Gender::female;
    if (s == "u" || s == "U" || s.empty()) return Gender::unknown;
    throw DataError("bad gender code '" + std::string(s) + "' (expected m, f or u)");
}

std::string_view gender_code(Gender g) {
    switch (g) {
        case Gender::male: return "m";
        case Gender::female: return "f";
        case Gender::unknown: return "u";
    }
    return "u";
}

AgeGroup::AgeGroup(int index) : index_(index) {
    if (index < 1 || index > kAgeGroups) {
        throw InvalidInput("age group index must be in 1..8, got " + std::to_string(index));
    }
}

bool AgeGroup::adjacent_or_equal(AgeGroup other) const noexcept {
    return std::abs(index_ - other.index_) <= 1;
}

const std::vector<std::pair<std::string, int>>& age_label_table() {
    static const std::vector<std::pair<std::string, int>> table = {
        {"(0, 2)", 1},   {"2", 1},
        {"(4, 6)", 2},   {"3", 2},
        {"(8, 12)", 3},  {"13", 3},
        {"(15, 20)", 4}, {"(8, 23)", 4},  {"22", 4},
        {"(25, 32)", 5}, {"(27, 32)", 5}, {"23", 5},       {"29", 5},       {"34", 5},
        {"(38, 43)", 6}, {"(38, 48)", 6}, {"(32, 43)", 6}, {"(38, 42)", 6}, {"35", 6}, {"36", 6}, {"42", 6},
        {"45", 6},
        {"(48, 53)", 7}, {"55", 7},       {"56", 7},
        {"(60, 100)", 8}, {"57", 8},      {"58", 8},
    };
    return table;
}

AgeGroup merge_age_label(std::string_view raw) {
    static const auto lookup = [] {
        std::unordered_map<std::string, int> m;
        for (const auto& [label, group] : age_label_table()) m.emplace(label, group);
        return m;
    }();
    const std::string key(trim(raw));
    if (auto it = lookup.find(key); it != lookup.end()) return AgeGroup(it->second);
    throw UnknownLabel(key);
}

Subsets build_subsets(const std::vector<RawRecord>& records) {
    Subsets out;
    auto& counts = out.counts;
    counts.records = records.size();

    for (const auto& rec : records) {
        LabeledSample s{rec.image_id, rec.path, std::nullopt, std::nullopt, rec.fold};
        if (rec.gender != Gender::unknown) {
            s.gender = rec.gender;
            ++counts.gender_known;
        } else {
            ++counts.gender_unknown;
        }
        if (is_unknown_age(trim(rec.raw_age))) {
            ++counts.age_missing;
        } else {
            try {
                s.age = merge_age_label(rec.raw_age);
                ++counts.age_known;
            } catch (const UnknownLabel& e) {
                ++counts.unknown_age_labels[e.label()];
            }
        }

        if (s.gender) out.gender.push_back(s);
        if (s.age) out.age.push_back(s);
        if (s.gender && s.age) {
            const auto g = static_cast<std::size_t>(s.age->class_index());
            ++counts.both_by_fold[s.fold][g];
            ++counts.both_by_gender[static_cast<std::size_t>(gender_class(*s.gender))][g];
            out.both.push_back(std::move(s));
        }
    }

    for (const auto& [label, n] : counts.unknown_age_labels) {
        spdlog::warn("excluded {} record(s) with unrecognised age label '{}'", n, label);
    }
    return out;
}

std::vector<patchgen::Patch> balance_by_discard(const std::vector<patchgen::Patch>& patches, int majority_class,
                                                double keep_fraction, std::uint64_t seed) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
        throw InvalidInput("balance_by_discard: keep_fraction must be in (0, 1]");
    }
    Rng rng(seed);
    std::vector<patchgen::Patch> out;
    out.reserve(patches.size());
    for (const auto& p : patches) {
        if (p.label != majority_class || rng.uniform() < keep_fraction) out.push_back(p);
    }
    return out;
}

std::vector<RawRecord> read_manifest(std::istream& in) {
    using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
    std::string line;
    if (!std::getline(in, line)) throw DataError("manifest is empty (header row required)");

    std::vector<RawRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> fields;
        try {
            Tokenizer tok(line);
            fields.assign(tok.begin(), tok.end());
        } catch (const boost::escaped_list_error& e) {
            throw DataError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        if (fields.size() != 5) {
            throw DataError("manifest line " + std::to_string(line_no) + ": expected 5 fields, got " +
                            std::to_string(fields.size()));
        }
        RawRecord r;
        r.image_id = std::string(trim(fields[0]));
        r.path = std::string(trim(fields[1]));
        r.gender = parse_gender(fields[2]);
        r.raw_age = std::string(trim(fields[3]));
        const auto fold_text = trim(fields[4]);
        auto [ptr, ec] = std::from_chars(fold_text.data(), fold_text.data() + fold_text.size(), r.fold);
        if (ec != std::errc{} || ptr != fold_text.data() + fold_text.size() || r.fold < 0) {
            throw DataError("manifest line " + std::to_string(line_no) + ": bad fold '" + std::string(fold_text) + "'");
        }
        if (r.image_id.empty() || r.path.empty()) {
            throw DataError("manifest line " + std::to_string(line_no) + ": empty image_id or path");
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<RawRecord> read_manifest_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest '" + path + "'");
    return read_manifest(in);
}

void write_manifest(std::ostream& out, const std::vector<RawRecord>& records) {
    auto quoted = [](const std::string& s) {
        if (s.find_first_of(",\"") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"' || c == '\\') q += '\\';
            q += c;
        }
        return q + "\"";
    };
    out << "image_id,relative_path,gender,raw_age,fold\n";
    for (const auto& r : records) {
        out << quoted(r.image_id) << ',' << quoted(r.path) << ',' << gender_code(r.gender) << ','
            << quoted(r.raw_age.empty() ? "u" : r.raw_age) << ',' << r.fold << '\n';
    }
}

int fold_count(const std::vector<RawRecord>& records) {
    int k = 0;
    for (const auto& r : records) k = std::max(k, r.fold + 1);
    return k;
}

}  // namespace ninepatch::dataset
