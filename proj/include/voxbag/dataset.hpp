#ifndef VOXBAG_DATASET_HPP_
#define VOXBAG_DATASET_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "voxbag/error.hpp"
#include "voxbag/rng.hpp"
#include "voxbag/tensor.hpp"

namespace voxbag {

// The two classes; SCZ is the positive class everywhere downstream.
enum class ClassLabel : int { CN = 0, SCZ = 1 };

inline const char* label_name(ClassLabel l) { return l == ClassLabel::CN ? "CN" : "SCZ"; }
inline int label_index(ClassLabel l) { return static_cast<int>(l); }

struct ManifestRecord {
    std::string subject_id;
    std::string path;
    ClassLabel label = ClassLabel::CN;
    std::optional<double> tr_ms;
    std::optional<double> te_ms;
    std::optional<double> flip_angle_deg;
    std::optional<double> slice_thickness_mm;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;

    std::size_t count(ClassLabel l) const {
        std::size_t n = 0;
        for (const auto& r : records)
            if (r.label == l) ++n;
        return n;
    }
};

/// One training/evaluation sample: either a volume or an extracted
/// feature vector, with its class index and originating subject.
struct LabeledSample {
    Tensor features;
    int label = 0;  // 0=CN, 1=SCZ
    std::string subject_id;
};

inline const std::string kManifestHeader =
    "subject_id,path,label,tr_ms,te_ms,flip_angle_deg,slice_thickness_mm";

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::optional<double> parse_optional_double(const std::string& s, const char* field) {
    if (s.empty()) return std::nullopt;
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(Errc::data, std::string("manifest: bad numeric value for ") + field + ": '" + s + "'");
    }
}

}  // namespace detail

/// Parses the manifest CSV. Relative volume paths resolve against the
/// manifest's own directory.
inline DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::data, "cannot open manifest: " + path);

    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::data, "empty manifest: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kManifestHeader)
        throw Error(Errc::data, "manifest header mismatch, expected '" + kManifestHeader + "'");

    const auto base = std::filesystem::path(path).parent_path();
    DatasetManifest m;
    std::set<std::string> seen;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 7)
            throw Error(Errc::data, "manifest line " + std::to_string(lineno) + ": expected 7 fields, got " +
                                        std::to_string(f.size()));
        ManifestRecord r;
        r.subject_id = f[0];
        if (r.subject_id.empty())
            throw Error(Errc::data, "manifest line " + std::to_string(lineno) + ": empty subject_id");
        if (!seen.insert(r.subject_id).second)
            throw Error(Errc::data, "manifest: duplicate subject_id '" + r.subject_id + "'");
        std::filesystem::path p(f[1]);
        r.path = p.is_absolute() ? p.string() : (base / p).string();
        if (f[2] == "CN")
            r.label = ClassLabel::CN;
        else if (f[2] == "SCZ")
            r.label = ClassLabel::SCZ;
        else
            throw Error(Errc::data, "manifest line " + std::to_string(lineno) + ": label must be CN or SCZ, got '" +
                                        f[2] + "'");
        r.tr_ms = detail::parse_optional_double(f[3], "tr_ms");
        r.te_ms = detail::parse_optional_double(f[4], "te_ms");
        r.flip_angle_deg = detail::parse_optional_double(f[5], "flip_angle_deg");
        r.slice_thickness_mm = detail::parse_optional_double(f[6], "slice_thickness_mm");
        m.records.push_back(std::move(r));
    }
    return m;
}

inline void write_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::data, "cannot open manifest for writing: " + path);
    out << kManifestHeader << "\n";
    auto opt = [](const std::optional<double>& v) {
        if (!v) return std::string();
        std::ostringstream os;
        os << *v;
        return os.str();
    };
    for (const auto& r : m.records) {
        out << r.subject_id << "," << r.path << "," << label_name(r.label) << "," << opt(r.tr_ms) << ","
            << opt(r.te_ms) << "," << opt(r.flip_angle_deg) << "," << opt(r.slice_thickness_mm) << "\n";
    }
    if (!out) throw Error(Errc::data, "manifest write failure: " + path);
}

/// Stratified 70:30-style split. Per class the train count is
/// round(fraction * class_count); the shuffle is seeded per class, so the
/// same seed always yields the same partition. Output partitions keep the
/// original manifest order.
inline std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                                 double train_fraction,
                                                                 std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw Error(Errc::config, "split: train_fraction must be in (0,1)");

    Rng rng(seed);
    std::vector<bool> in_train(manifest.records.size(), false);
    for (int cls = 0; cls < 2; ++cls) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < manifest.records.size(); ++i)
            if (label_index(manifest.records[i].label) == cls) idx.push_back(i);
        if (idx.size() < 2)
            throw Error(Errc::data, std::string("split: class ") +
                                        label_name(static_cast<ClassLabel>(cls)) +
                                        " has fewer than 2 records");
        Rng cls_rng = rng.derive(static_cast<std::uint64_t>(cls));
        // Fisher-Yates
        for (std::size_t i = idx.size(); i-- > 1;) {
            const std::size_t j = static_cast<std::size_t>(cls_rng.next_below(i + 1));
            std::swap(idx[i], idx[j]);
        }
        const auto n_train = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < n_train && i < idx.size(); ++i) in_train[idx[i]] = true;
    }

    DatasetManifest train, test;
    for (std::size_t i = 0; i < manifest.records.size(); ++i)
        (in_train[i] ? train : test).records.push_back(manifest.records[i]);
    return {std::move(train), std::move(test)};
}

}  // namespace voxbag

#endif  // VOXBAG_DATASET_HPP_
