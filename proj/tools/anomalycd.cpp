// anomalycd: detect | eval | sweep | synth
//
// Exit codes: 0 success, 1 runtime error, 2 usage or configuration error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "anomalycd/image_io.hpp"
#include "anomalycd/metrics.hpp"
#include "anomalycd/pipeline.hpp"
#include "anomalycd/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace anomalycd;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonFlags {
    std::string config;
    std::string out;
    std::optional<int> workers;
    std::optional<std::string> embedder;
    std::optional<std::string> metric;
    std::optional<double> quantile;
    std::optional<int> tile;
    std::optional<double> keep;
    std::optional<double> beta;
    std::optional<std::string> cache_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "JSON file with run configuration");
    cmd->add_option("--workers", f.workers, "worker threads (default: available parallelism)");
    cmd->add_option("--embedder", f.embedder, "reference | cache");
    cmd->add_option("--cache-dir", f.cache_dir, "directory of .aecd files for --embedder cache");
    cmd->add_option("--metric", f.metric, "cosine | l1 | l2");
    cmd->add_option("--quantile", f.quantile, "binarization quantile in (0, 1)");
    cmd->add_option("--tile", f.tile, "tile size in px");
    cmd->add_option("--keep", f.keep, "fraction of Stage-1 candidates passed to Stage 2");
    cmd->add_option("--beta", f.beta, "false-alarm weight in precision");
}

/// Defaults, then the --config file, then explicit flags.
RunConfig build_config(const CommonFlags& f) {
    RunConfig cfg;
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw ConfigError("config", "cannot open " + f.config);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("config", std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
        cfg.merge_json(j);
    }
    json overlay = json::object();
    if (f.workers) overlay["workers"] = *f.workers;
    if (f.embedder) overlay["embedder"] = *f.embedder;
    if (f.cache_dir) overlay["cache_dir"] = *f.cache_dir;
    if (f.metric) overlay["metric"] = *f.metric;
    if (f.quantile) overlay["quantile"] = *f.quantile;
    if (f.tile) overlay["tile_size"] = *f.tile;
    if (f.keep) overlay["keep_fraction"] = *f.keep;
    if (f.beta) overlay["beta"] = *f.beta;
    cfg.merge_json(overlay);
    cfg.validate();
    return cfg;
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    out << j.dump(2) << '\n';
}

void write_jsonl(const fs::path& p, const std::vector<json>& rows) {
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    for (const auto& r : rows) out << r.dump() << '\n';
}

fs::path prepare_out(const std::string& out) {
    if (out.empty()) throw ConfigError("out", "output directory required");
    fs::create_directories(out);
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- detect ---------------------------------------------------------------

struct DetectArgs {
    CommonFlags common;
    std::string scene;
    std::string baseline;
    int drop_oldest = 0;
};

int cmd_detect(const DetectArgs& a) {
    const RunConfig cfg = build_config(a.common);
    const auto out = prepare_out(a.common.out);
    const auto scene = load_scene(a.scene);
    json run = {{"config", cfg.to_json()}, {"scene", a.scene}, {"event_id", scene.event_id}};

    if (!a.baseline.empty()) {
        const auto kind = parse_baseline(a.baseline);
        const auto t0 = std::chrono::steady_clock::now();
        const auto density = run_baseline(scene, kind, cfg);
        const auto map = quantile_binarize(density.values, cfg.quantile);
        io::write_bitmap(out / "baseline_map.png", map);
        run["baseline"] = a.baseline;
        run["timing"] = {{"total_ms", 1000.0 * seconds_since(t0)}};
        if (scene.gt_mask) run["scores"] = to_json(evaluate_event(scene, map, cfg.beta).scores);
        write_json(out / "config.json", cfg.to_json());
        write_json(out / "run.json", run);
        std::cout << run.dump(2) << '\n';
        return 0;
    }

    auto r = detect(scene, cfg);
    if (a.drop_oldest > 0) {
        if (a.drop_oldest > scene.history_count() - 1) throw ConfigError("drop-oldest", "must leave at least one history step");
        run_stage2(r, scene, cfg, a.drop_oldest);
    }
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';

    io::write_bitmap(out / "change_map.png", r.change_map);
    io::write_bitmap(out / "anomaly_map.png", r.anomaly_map);

    std::set<std::tuple<int, int, int>> selected;
    for (const auto& c : r.selected) selected.insert({c.tile, c.instance, static_cast<int>(c.direction)});
    std::vector<json> cand_rows, score_rows;
    for (const auto& c : r.all_candidates) {
        auto j = to_json(c);
        j["selected"] = selected.count({c.tile, c.instance, static_cast<int>(c.direction)}) > 0;
        cand_rows.push_back(std::move(j));
    }
    for (const auto& rec : r.records) score_rows.push_back(to_json(rec));
    write_jsonl(out / "candidates.jsonl", cand_rows);
    write_jsonl(out / "anomaly_scores.jsonl", score_rows);

    const json timing = {{"stage1_ms", r.timings.stage1_ms},
                         {"stage2_ms", r.timings.stage2_ms},
                         {"total_ms", r.timings.total_ms},
                         {"tiles", r.tiles.size()},
                         {"workers", cfg.workers}};
    run["timing"] = timing;
    run["warnings"] = r.warnings;
    run["drop_oldest"] = a.drop_oldest;
    run["candidates"] = {{"total", r.all_candidates.size()}, {"selected", r.selected.size()}};
    if (scene.gt_mask) {
        run["scores"] = {{"stage1", to_json(evaluate_event(scene, r.change_map, cfg.beta).scores)},
                         {"stage2", to_json(evaluate_event(scene, r.anomaly_map, cfg.beta).scores)}};
    }
    write_json(out / "config.json", cfg.to_json());
    write_json(out / "timing.json", timing);
    write_json(out / "run.json", run);
    std::cout << run.dump(2) << '\n';
    return 0;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
    std::vector<std::string> preds;
    std::vector<std::string> gts;
    std::vector<std::string> scenes;
    std::string category = "others";
    std::optional<double> beta;
    std::string format = "both";
    std::string out;
};

int cmd_eval(const EvalArgs& a) {
    const double beta = a.beta.value_or(0.1);
    if (!(beta > 0)) throw ConfigError("beta", "must be > 0");
    const bool with_scenes = !a.scenes.empty();
    if (with_scenes == !a.gts.empty()) throw ConfigError("gt", "give either --gt or --scene for every --pred");
    const auto& refs = with_scenes ? a.scenes : a.gts;
    if (refs.size() != a.preds.size()) throw ConfigError("pred", "need one --pred per reference");

    std::vector<EventScores> events;
    for (std::size_t i = 0; i < a.preds.size(); ++i) {
        const auto pred = io::read_mask(a.preds[i]);
        if (with_scenes) {
            const auto scene = load_scene(refs[i]);
            events.push_back(evaluate_event(scene, pred, beta));
        } else {
            const auto gt = io::read_mask(refs[i]);
            events.push_back({fs::path(a.preds[i]).stem().string(), parse_category(a.category),
                              scores(confusion(pred, gt), beta)});
        }
    }
    const auto report = aggregate(events, {{"beta", beta}});
    const auto j = to_json(report);
    if (!a.out.empty()) {
        const auto out = prepare_out(a.out);
        write_json(out / "report.json", j);
        std::ofstream(out / "report.txt") << format_table(report);
    }
    if (a.format == "table" || a.format == "both") std::cout << format_table(report);
    if (a.format == "json" || a.format == "both") std::cout << j.dump(2) << '\n';
    return 0;
}

// ---- sweep ----------------------------------------------------------------

struct SweepArgs {
    CommonFlags common;
    std::string param;
    std::vector<std::string> values;
    std::vector<std::string> scenes;
};

int cmd_sweep(const SweepArgs& a) {
    static const std::set<std::string> kParams = {"quantile", "tile_size", "metric", "timesteps"};
    if (!kParams.count(a.param)) throw ConfigError("param", "expected quantile, tile_size, metric or timesteps");
    if (a.values.empty()) throw ConfigError("values", "at least one value required");
    const RunConfig base = build_config(a.common);
    std::vector<TimeSeriesScene> scenes;
    for (const auto& s : a.scenes) scenes.push_back(load_scene(s));

    // timesteps reuses one detection per scene and only re-runs Stage 2.
    std::vector<DetectResult> cached;
    if (a.param == "timesteps")
        for (const auto& s : scenes) cached.push_back(detect(s, base));

    json series = json::array();
    for (const auto& v : a.values) {
        RunConfig cfg = base;
        int drop = 0;
        try {
            if (a.param == "quantile") cfg.quantile = std::stod(v);
            else if (a.param == "tile_size") cfg.tile_size = std::stoi(v);
            else if (a.param == "metric") cfg.metric = parse_metric(v);
            else drop = std::stoi(v);
        } catch (const std::logic_error&) {
            throw ConfigError("values", "cannot parse '" + v + "'");
        }
        cfg.validate();
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<EventScores> s1, s2;
        for (std::size_t i = 0; i < scenes.size(); ++i) {
            DetectResult r;
            if (a.param == "timesteps") {
                if (drop < 0 || drop > scenes[i].history_count() - 1)
                    throw ConfigError("values", "timesteps value leaves no history for " + scenes[i].event_id);
                r = cached[i];
                run_stage2(r, scenes[i], cfg, drop);
            } else {
                r = detect(scenes[i], cfg);
            }
            s1.push_back(evaluate_event(scenes[i], r.change_map, cfg.beta));
            s2.push_back(evaluate_event(scenes[i], r.anomaly_map, cfg.beta));
        }
        const double secs = seconds_since(t0);
        auto cj = cfg.to_json();
        cj["drop_oldest"] = drop;
        const auto rep2 = aggregate(s2, cj);
        const auto rep1 = aggregate(s1, cj);
        std::cout << format_table(rep2, a.param + "=" + v);
        std::printf("  stage1 F1 %.2f  wall %.3f s\n", rep1.overall.f1, secs);
        series.push_back({{"param", a.param},
                          {"value", v},
                          {"seconds", secs},
                          {"stage1", to_json(rep1)},
                          {"stage2", to_json(rep2)}});
    }
    if (!a.common.out.empty()) write_json(prepare_out(a.common.out) / "sweep.json", series);
    return 0;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
    synth::SynthConfig cfg;
    std::string category = "others";
    std::string out;
};

int cmd_synth(SynthArgs a) {
    a.cfg.category = parse_category(a.category);
    const auto g = synth::generate(a.cfg);
    const auto out = prepare_out(a.out);
    synth::write(out, g);
    if (a.cfg.stage2_degenerate())
        std::cerr << "warning: only one history step; Stage 2 is degenerate for this scene\n";
    std::cout << json{{"out", out.string()},
                      {"event_id", g.scene.event_id},
                      {"steps", a.cfg.steps},
                      {"stage2_degenerate", a.cfg.stage2_degenerate()}}
                     .dump()
              << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot anomaly change detection on time-series imagery"};
    app.require_subcommand(1);

    DetectArgs da;
    auto* det = app.add_subcommand("detect", "two-stage detection on a scene directory");
    det->add_option("scene", da.scene, "scene directory")->required();
    det->add_option("--out", da.common.out, "output directory")->required();
    det->add_option("--baseline", da.baseline, "run a baseline instead: id | cva | ts_cva | embed_diff");
    det->add_option("--drop-oldest", da.drop_oldest, "ignore the k oldest history steps in Stage 2");
    add_common(det, da.common);

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "score binary maps against ground truth");
    ev->add_option("--pred", ea.preds, "predicted mask PNG (repeatable)")->required();
    ev->add_option("--gt", ea.gts, "ground-truth mask PNG, paired with --pred by position");
    ev->add_option("--scene", ea.scenes, "scene directory providing gt and category, paired with --pred");
    ev->add_option("--category", ea.category, "category for --gt pairs");
    ev->add_option("--beta", ea.beta, "false-alarm weight in precision");
    ev->add_option("--format", ea.format, "table | json | both")->check(CLI::IsMember({"table", "json", "both"}));
    ev->add_option("--out", ea.out, "also write report.json and report.txt here");

    SweepArgs sa;
    auto* sw = app.add_subcommand("sweep", "evaluate a parameter series on scenes with ground truth");
    sw->add_option("--param", sa.param, "quantile | tile_size | metric | timesteps")->required();
    sw->add_option("--values", sa.values, "comma-separated values")->required()->delimiter(',');
    sw->add_option("scenes", sa.scenes, "scene directories")->required();
    sw->add_option("--out", sa.common.out, "write sweep.json here");
    add_common(sw, sa.common);

    SynthArgs ya;
    auto* sy = app.add_subcommand("synth", "generate a synthetic scene");
    sy->add_option("--out", ya.out, "output scene directory")->required();
    sy->add_option("--seed", ya.cfg.seed, "random seed");
    sy->add_option("--size", ya.cfg.size, "scene side in px");
    sy->add_option("--steps", ya.cfg.steps, "number of time steps");
    sy->add_option("--movers", ya.cfg.movers, "number of periodic movers");
    sy->add_option("--noise", ya.cfg.noise_sigma, "Gaussian noise sigma");
    sy->add_option("--jitter", ya.cfg.brightness_jitter, "per-step brightness offset half-range");
    sy->add_option("--category", ya.category, "event category recorded in the manifest");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*det) return cmd_detect(da);
        if (*ev) return cmd_eval(ea);
        if (*sw) return cmd_sweep(sa);
        if (*sy) return cmd_synth(ya);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
