#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "anomalycd/core.hpp"
#include "anomalycd/image_io.hpp"

namespace anomalycd {

enum class Category { explosion, collapse, landslide, fire, dam_break, others };

inline constexpr std::array<std::string_view, 6> kCategoryNames = {"explosion", "collapse",  "landslide",
                                                                   "fire",      "dam_break", "others"};

inline std::string_view to_string(Category c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

inline Category parse_category(std::string_view s) {
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i)
        if (kCategoryNames[i] == s) return static_cast<Category>(i);
    throw ConfigError("category", "unknown category: " + std::string(s));
}

/// Pixel-aligned stack ordered oldest (T_n) to newest (X = steps.back()).
struct TimeSeriesScene {
    std::vector<Raster> steps;
    std::vector<std::string> timestamps;
    std::string event_id;
    Category category = Category::others;
    std::optional<BinaryMap> gt_mask;

    int height() const { return steps.empty() ? 0 : steps.front().height; }
    int width() const { return steps.empty() ? 0 : steps.front().width; }
    int channels() const { return steps.empty() ? 0 : steps.front().channels; }

    const Raster& current() const { return steps.back(); }
    /// Historical step T_i, i = 1 is the most recent.
    const Raster& history(int i) const { return steps[steps.size() - 1 - static_cast<std::size_t>(i)]; }
    int history_count() const { return static_cast<int>(steps.size()) - 1; }

    void validate() const {
        if (steps.size() < 2) throw Error("insufficient time steps");
        for (const auto& s : steps) {
            if (!s.same_shape(steps.front())) throw Error("dimension mismatch");
            s.validate();
        }
        if (gt_mask && (gt_mask->height != height() || gt_mask->width != width()))
            throw Error("dimension mismatch: ground-truth mask");
    }

    /// Copy with the k oldest history steps dropped.
    TimeSeriesScene without_oldest(int k) const {
        if (k < 0 || k > history_count() - 1) throw Error("insufficient time steps");
        TimeSeriesScene s = *this;
        s.steps.erase(s.steps.begin(), s.steps.begin() + k);
        if (!s.timestamps.empty()) s.timestamps.erase(s.timestamps.begin(), s.timestamps.begin() + k);
        return s;
    }
};

/// Reads `<dir>/manifest.json` ({event_id, category, steps:[{timestamp, file}], gt_mask?}).
/// Without a manifest, every PNG whose stem is not "gt"/"gt_mask" is a step named by its stem.
inline TimeSeriesScene load_scene(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error("scene directory not found: " + dir.string());

    struct Entry {
        std::string timestamp;
        fs::path file;
    };
    std::vector<Entry> entries;
    std::optional<fs::path> gt_path;
    TimeSeriesScene scene;

    const fs::path manifest = dir / "manifest.json";
    if (fs::exists(manifest)) {
        std::ifstream in(manifest);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("malformed manifest: ") + e.what());
        }
        scene.event_id = j.value("event_id", dir.filename().string());
        scene.category = parse_category(j.value("category", std::string("others")));
        for (const auto& s : j.at("steps"))
            entries.push_back({s.at("timestamp").get<std::string>(), dir / s.at("file").get<std::string>()});
        if (j.contains("gt_mask") && !j["gt_mask"].is_null()) gt_path = dir / j["gt_mask"].get<std::string>();
    } else {
        scene.event_id = dir.filename().string();
        for (const auto& de : fs::directory_iterator(dir)) {
            if (de.path().extension() != ".png") continue;
            const auto stem = de.path().stem().string();
            if (stem == "gt" || stem == "gt_mask") {
                gt_path = de.path();
                continue;
            }
            entries.push_back({stem, de.path()});
        }
    }

    if (entries.size() < 2) throw Error("insufficient time steps");
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.timestamp < b.timestamp; });
    for (const auto& e : entries) {
        if (!fs::exists(e.file)) throw Error("unreadable image: " + e.file.string());
        scene.steps.push_back(io::read_raster(e.file));
        scene.timestamps.push_back(e.timestamp);
    }
    if (gt_path) scene.gt_mask = io::read_mask(*gt_path);
    scene.validate();
    return scene;
}

/// Writes the directory layout that load_scene reads back.
inline void write_scene(const std::filesystem::path& dir, const TimeSeriesScene& scene) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json j;
    j["event_id"] = scene.event_id;
    j["category"] = std::string(to_string(scene.category));
    j["steps"] = nlohmann::json::array();
    for (std::size_t i = 0; i < scene.steps.size(); ++i) {
        const std::string ts = i < scene.timestamps.size() ? scene.timestamps[i] : "t" + std::to_string(i);
        const std::string file = ts + ".png";
        io::write_raster(dir / file, scene.steps[i]);
        j["steps"].push_back({{"timestamp", ts}, {"file", file}});
    }
    if (scene.gt_mask) {
        io::write_mask(dir / "gt_mask.png", *scene.gt_mask);
        j["gt_mask"] = "gt_mask.png";
    }
    std::ofstream(dir / "manifest.json") << j.dump(2) << '\n';
}

}  // namespace anomalycd
