#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "anomalycd/core.hpp"
#include "anomalycd/scene.hpp"

namespace anomalycd {

struct Confusion {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

    Confusion& operator+=(const Confusion& o) noexcept {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    friend bool operator==(const Confusion&, const Confusion&) = default;
};

inline Confusion confusion(const BinaryMap& pred, const BinaryMap& gt) {
    if (!pred.same_shape(gt)) throw Error("dimension mismatch");
    Confusion c;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
        if (p && g) ++c.tp;
        else if (p) ++c.fp;
        else if (g) ++c.fn;
        else ++c.tn;
    }
    return c;
}

/// Recall, weighted precision and F1, in points (0..100).
struct Scores {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
};

inline double f1_from(double recall, double precision) {
    return recall + precision > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

/// P_w = tp / (tp + beta * fp): false alarms count beta as much as hits (beta = 0.1 is the 1:10 weighting).
inline Scores scores(const Confusion& c, double beta = 0.1) {
    if (!(beta > 0)) throw ConfigError("beta", "must be > 0");
    Scores s;
    const double tp = static_cast<double>(c.tp);
    const double rd = tp + static_cast<double>(c.fn);
    const double pd = tp + beta * static_cast<double>(c.fp);
    const double r = rd > 0 ? tp / rd : 0.0;
    const double p = pd > 0 ? tp / pd : 0.0;
    s.recall = 100.0 * r;
    s.precision = 100.0 * p;
    s.f1 = 100.0 * f1_from(r, p);
    return s;
}

struct EventScores {
    std::string event_id;
    Category category = Category::others;
    Scores scores;
};

/// Per-event rows, per-category means and two overall means: over categories (the headline
/// "average" column) and over events. Each metric is averaged independently.
struct EvalReport {
    std::vector<EventScores> events;
    std::map<Category, Scores> categories;
    Scores overall;         ///< mean of category means
    Scores overall_events;  ///< mean of event values
    nlohmann::json config = nlohmann::json::object();
};

namespace detail {
inline Scores mean_of(const std::vector<Scores>& v) {
    Scores m;
    if (v.empty()) return m;
    for (const auto& s : v) {
        m.recall += s.recall;
        m.precision += s.precision;
        m.f1 += s.f1;
    }
    const double n = static_cast<double>(v.size());
    m.recall /= n;
    m.precision /= n;
    m.f1 /= n;
    return m;
}
}  // namespace detail

inline EvalReport aggregate(std::vector<EventScores> events, nlohmann::json config = nlohmann::json::object()) {
    if (events.empty()) throw Error("aggregate needs at least one event");
    EvalReport r;
    // Sorted so that summation order (and therefore the last bit) does not depend on input order.
    std::sort(events.begin(), events.end(), [](const EventScores& a, const EventScores& b) {
        return std::tie(a.category, a.event_id) < std::tie(b.category, b.event_id);
    });
    std::map<Category, std::vector<Scores>> by_cat;
    std::vector<Scores> all;
    for (const auto& e : events) {
        by_cat[e.category].push_back(e.scores);
        all.push_back(e.scores);
    }
    std::vector<Scores> cat_means;
    for (const auto& [cat, v] : by_cat) {
        r.categories[cat] = detail::mean_of(v);
        cat_means.push_back(r.categories[cat]);
    }
    r.overall = detail::mean_of(cat_means);
    r.overall_events = detail::mean_of(all);
    r.events = std::move(events);
    r.config = std::move(config);
    return r;
}

inline nlohmann::json to_json(const Scores& s) { return {{"R", s.recall}, {"P", s.precision}, {"F1", s.f1}}; }

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j;
    j["config"] = r.config;
    j["events"] = nlohmann::json::array();
    for (const auto& e : r.events)
        j["events"].push_back({{"event_id", e.event_id},
                               {"category", std::string(to_string(e.category))},
                               {"scores", to_json(e.scores)}});
    j["categories"] = nlohmann::json::object();
    for (const auto& [c, s] : r.categories) j["categories"][std::string(to_string(c))] = to_json(s);
    j["overall"] = to_json(r.overall);
    j["overall_events"] = to_json(r.overall_events);
    return j;
}

/// Aligned text table: one column group (R P F1) per category present, then the average.
inline std::string format_table(const EvalReport& r, const std::string& row_label = "result") {
    std::string head1 = "               ", head2 = "               ", row;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-15.15s", row_label.c_str());
    row = buf;
    auto add = [&](const std::string& name, const Scores& s) {
        std::snprintf(buf, sizeof buf, "%-24.24s", name.c_str());
        head1 += buf;
        head2 += "R       P       F1      ";
        std::snprintf(buf, sizeof buf, "%-8.2f%-8.2f%-8.2f", s.recall, s.precision, s.f1);
        row += buf;
    };
    for (const auto& [c, s] : r.categories) add(std::string(to_string(c)), s);
    add("average", r.overall);
    return head1 + "\n" + head2 + "\n" + row + "\n";
}

}  // namespace anomalycd
