#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "image.hpp"
#include "network.hpp"

namespace solewear {

class DatasetError : public std::runtime_error {
public:
    explicit DatasetError(const std::string& what) : std::runtime_error(what) {}
};

enum class Side { Left, Right };

inline char side_char(Side s) { return s == Side::Left ? 'L' : 'R'; }

inline Side side_from(const std::string& s) {
    if (s == "L" || s == "l" || s == "left") return Side::Left;
    if (s == "R" || s == "r" || s == "right") return Side::Right;
    throw DatasetError("unknown side '" + s + "'");
}

struct ImpressionRecord {
    int week = 0;
    Side side = Side::Left;
    Image image;
    bool denoised = false;
    std::string file;
};

// One JSON object per line: {"week": 0, "side": "L", "file": "...", "denoised": false}.
// File paths resolve relative to the manifest location. Week gaps are allowed.
inline std::vector<ImpressionRecord> load_manifest(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw IoError("cannot open manifest: " + manifest_path);
    std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();

    std::vector<ImpressionRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(manifest_path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        ImpressionRecord r;
        try {
            r.week = j.at("week").get<int>();
            r.side = side_from(j.at("side").get<std::string>());
            r.file = j.at("file").get<std::string>();
            r.denoised = j.value("denoised", false);
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(manifest_path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (r.week < 0 || r.week % 2 != 0)
            throw DatasetError(manifest_path + ":" + std::to_string(line_no) +
                               ": week must be a non-negative even integer");
        r.image = read_pgm((base / r.file).string());
        records.push_back(std::move(r));
    }
    std::stable_sort(records.begin(), records.end(),
                     [](const ImpressionRecord& a, const ImpressionRecord& b) {
                         if (a.week != b.week) return a.week < b.week;
                         return side_char(a.side) < side_char(b.side);
                     });
    return records;
}

inline void append_manifest_line(std::ostream& os, int week, Side side, const std::string& file,
                                 bool denoised) {
    nlohmann::json j;
    j["week"] = week;
    j["side"] = std::string(1, side_char(side));
    j["file"] = file;
    j["denoised"] = denoised;
    os << j.dump() << "\n";
}

struct DatasetSplit {
    std::vector<ImpressionRecord> train;
    std::vector<ImpressionRecord> test;
};

// 80/20 split along the timeline, cutting on week boundaries. Forward: the
// earliest weeks train; backward: the split is reversed and the latest weeks
// train. Both sides of a week always land in the same partition.
inline DatasetSplit split_dataset(const std::vector<ImpressionRecord>& records, Variant variant) {
    if (records.empty()) throw DatasetError("split: no records");

    std::vector<int> weeks;
    for (const auto& r : records) weeks.push_back(r.week);
    std::sort(weeks.begin(), weeks.end());
    weeks.erase(std::unique(weeks.begin(), weeks.end()), weeks.end());
    if (weeks.size() < 2) throw DatasetError("split: need at least two distinct weeks");

    if (variant == Variant::Backward) std::reverse(weeks.begin(), weeks.end());

    std::map<int, int> per_week;
    for (const auto& r : records) per_week[r.week] += 1;

    long long target = std::llround(0.8 * static_cast<double>(records.size()));
    long long taken = 0;
    std::vector<bool> in_train_week(weeks.size(), false);
    std::size_t cut = 0;
    while (cut < weeks.size() && taken < target) {
        taken += per_week[weeks[cut]];
        in_train_week[cut] = true;
        ++cut;
    }

    DatasetSplit split;
    for (const auto& r : records) {
        bool train = false;
        for (std::size_t i = 0; i < cut; ++i)
            if (weeks[i] == r.week) {
                train = true;
                break;
            }
        (train ? split.train : split.test).push_back(r);
    }
    if (split.train.empty() || split.test.empty())
        throw DatasetError("split: a partition came out empty (" +
                           std::to_string(split.train.size()) + " train / " +
                           std::to_string(split.test.size()) + " test)");
    return split;
}

// A sample references records by index so images are not duplicated.
struct TrainingSample {
    int x = 0;
    int y = 0;
    DeltaEncoding delta;
};

struct SampleSet {
    const std::vector<ImpressionRecord>* records = nullptr;
    std::vector<TrainingSample> samples;

    const Image& X(std::size_t i) const { return (*records)[samples[i].x].image; }
    const Image& Y(std::size_t i) const { return (*records)[samples[i].y].image; }
    const DeltaEncoding& delta(std::size_t i) const { return samples[i].delta; }
    std::size_t size() const { return samples.size(); }
};

// Forward: every ordered same-side pair with week_x <= week_y, conditioned on
// the elapsed weeks (so identity pairs anchor delta = 0). Backward: every
// same-side pair in both directions, conditioned on the target week.
inline SampleSet make_samples(const std::vector<ImpressionRecord>& records, Variant variant) {
    if (records.empty()) throw DatasetError("make_samples: no records");
    SampleSet set;
    set.records = &records;
    for (Side side : {Side::Left, Side::Right}) {
        std::vector<int> idx;
        for (int i = 0; i < static_cast<int>(records.size()); ++i)
            if (records[i].side == side) idx.push_back(i);
        std::sort(idx.begin(), idx.end(),
                  [&](int a, int b) { return records[a].week < records[b].week; });
        for (int a : idx) {
            for (int b : idx) {
                if (variant == Variant::Forward) {
                    int dt = records[b].week - records[a].week;
                    if (dt < 0) continue;
                    set.samples.push_back({a, b, DeltaEncoding::scalar(dt)});
                } else {
                    set.samples.push_back({a, b, DeltaEncoding::one_hot_week(records[b].week)});
                }
            }
        }
    }
    return set;
}

// Cross pairs for evaluation: X drawn from the training partition, Y from the
// held-out partition, same side. The returned set references `all`, which
// must outlive it and contain both partitions' records.
inline SampleSet make_eval_samples(const std::vector<ImpressionRecord>& all,
                                   const DatasetSplit& split, Variant variant) {
    SampleSet set;
    set.records = &all;
    auto find_index = [&](const ImpressionRecord& r) {
        for (int i = 0; i < static_cast<int>(all.size()); ++i)
            if (all[i].week == r.week && all[i].side == r.side &&
                all[i].denoised == r.denoised && all[i].file == r.file)
                return i;
        throw DatasetError("evaluation records must come from the loaded manifest");
    };
    for (const auto& tr : split.train) {
        for (const auto& te : split.test) {
            if (tr.side != te.side) continue;
            if (variant == Variant::Forward) {
                int dt = te.week - tr.week;
                if (dt < 0) continue;
                set.samples.push_back({find_index(tr), find_index(te), DeltaEncoding::scalar(dt)});
            } else {
                set.samples.push_back(
                    {find_index(tr), find_index(te), DeltaEncoding::one_hot_week(te.week)});
            }
        }
    }
    if (set.samples.empty()) throw DatasetError("no evaluation pairs could be formed");
    return set;
}

} // namespace solewear
