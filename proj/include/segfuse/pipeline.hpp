#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "segfuse/class_weights.hpp"
#include "segfuse/core.hpp"
#include "segfuse/digest.hpp"
#include "segfuse/fixtures.hpp"
#include "segfuse/fusion.hpp"
#include "segfuse/io/class_table.hpp"
#include "segfuse/io/logits.hpp"
#include "segfuse/io/manifest.hpp"
#include "segfuse/io/png.hpp"
#include "segfuse/io/weights_file.hpp"
#include "segfuse/metrics.hpp"
#include "segfuse/palette.hpp"
#include "segfuse/parallel.hpp"
#include "segfuse/synthesis.hpp"

namespace segfuse {

constexpr const char* kStampFileName = "run_stamp.json";
constexpr const char* kWeightsFileName = "weights.tsv";
constexpr const char* kMetricsTextName = "metrics.txt";
constexpr const char* kMetricsJsonName = "metrics.json";
constexpr const char* kFixtureManifestName = "manifest.jsonl";

struct RecordFailure {
    std::string id;
    std::string message;
};

struct CommandResult {
    std::vector<RecordFailure> failures;
    bool ok() const { return failures.empty(); }
};

namespace detail {

/// The stamp captures everything that determines output bytes: command,
/// class table, semantic config, seed, and a digest of every input file.
/// Worker count, timestamps, and output location are deliberately absent so
/// reruns that must produce identical trees produce identical stamps too.
inline nlohmann::ordered_json stamp_base(const char* command, const ClassTable& table,
                                         uint64_t seed) {
    nlohmann::ordered_json stamp;
    stamp["format"] = "segfuse-stamp/1";
    stamp["command"] = command;
    stamp["seed"] = seed;
    stamp["class_table"] = class_table_json(table);
    return stamp;
}

inline nlohmann::ordered_json input_file_entry(const char* role,
                                               const std::filesystem::path& path) {
    nlohmann::ordered_json e;
    e["role"] = role;
    e["path"] = path.generic_string();
    e["sha256"] = sha256_hex_file(path);
    return e;
}

inline void add_failures(nlohmann::ordered_json& stamp,
                         const std::vector<RecordFailure>& failures) {
    stamp["failures"] = nlohmann::ordered_json::array();
    for (const RecordFailure& f : failures) {
        nlohmann::ordered_json e;
        e["id"] = f.id;
        e["error"] = f.message;
        stamp["failures"].push_back(std::move(e));
    }
}

inline void write_stamp(const std::filesystem::path& out_dir,
                        const nlohmann::ordered_json& stamp) {
    write_text_atomic(out_dir / kStampFileName, stamp.dump(2) + "\n");
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec && std::filesystem::is_directory(dir),
            "cannot create directory '" + dir.string() + "'");
}

inline std::vector<RecordFailure> map_failures(const std::vector<TaskFailure>& tasks,
                                               const std::vector<std::string>& ids) {
    std::vector<RecordFailure> out;
    out.reserve(tasks.size());
    for (const TaskFailure& t : tasks)
        out.push_back({ids[t.index], t.message});
    return out;
}

} // namespace detail

/// Manifest record loaded into memory, validated against the table.
inline SceneSample load_scene_record(const ManifestRecord& rec, const ClassTable& table,
                                     double depth_scale, bool with_label, bool with_logits) {
    SceneSample s;
    s.id = rec.id;
    s.image = read_image_png(rec.image_path);
    s.depth = read_depth_png(rec.depth_path, depth_scale);
    if (with_label) {
        detail::require(rec.label_path.has_value(), "record '" + rec.id + "' has no label");
        s.label = read_label_png(*rec.label_path, table);
    }
    if (with_logits) {
        detail::require(rec.logits_dep_path.has_value() && rec.logits_uda_path.has_value(),
                        "record '" + rec.id + "' is missing a logits branch");
        s.logits_dep = read_logits(*rec.logits_dep_path);
        s.logits_uda = read_logits(*rec.logits_uda_path);
    }
    const auto violations = validate_sample(s, table);
    if (!violations.empty())
        detail::fail("record '" + rec.id + "': " + violations.front().message);
    return s;
}

struct WeightsCmd {
    std::filesystem::path manifest;
    std::string classes = "cityscapes19";
    double delta = 1.02;
    bool raw_weights = false;
    int workers = 1;
    std::filesystem::path out;
};

/// Frequency statistics over the manifest's labels, then the weights file.
/// Any failing record aborts the write: weights from a silently reduced
/// dataset would be wrong in a way nobody would notice.
inline CommandResult cmd_weights(const WeightsCmd& cfg) {
    const ClassTable table = resolve_class_table(cfg.classes);
    const auto records = load_manifest(cfg.manifest);
    detail::require(!records.empty(), "manifest is empty");
    for (const auto& r : records)
        detail::require(r.label_path.has_value(), "record '" + r.id + "' has no label");

    std::vector<FrequencyAccumulator> accs(records.size(), FrequencyAccumulator(table));
    std::vector<nlohmann::ordered_json> inputs(records.size());
    const auto task_failures = run_parallel(records.size(), cfg.workers, [&](size_t i) {
        accs[i].add(read_label_png(*records[i].label_path, table));
        nlohmann::ordered_json entry;
        entry["id"] = records[i].id;
        entry["files"] = nlohmann::ordered_json::array(
            {detail::input_file_entry("label", *records[i].label_path)});
        inputs[i] = std::move(entry);
    });

    CommandResult result;
    std::vector<std::string> ids;
    for (const auto& r : records)
        ids.push_back(r.id);
    result.failures = detail::map_failures(task_failures, ids);
    if (!result.ok())
        return result;

    FrequencyAccumulator merged(table);
    for (const auto& acc : accs)
        merged.merge(acc);
    const FrequencyStats stats = merged.finalize();
    const ClassWeights weights = compute_class_weights(stats, cfg.delta, !cfg.raw_weights);

    detail::ensure_dir(cfg.out);
    write_weights_file(cfg.out / kWeightsFileName, table, stats, weights);

    auto stamp = detail::stamp_base("weights", table, 0);
    stamp["config"] = {{"delta", cfg.delta}, {"mode", cfg.raw_weights ? "raw" : "normalized"}};
    stamp["manifest_sha256"] = sha256_hex_file(cfg.manifest);
    stamp["inputs"] = inputs;
    detail::add_failures(stamp, result.failures);
    detail::write_stamp(cfg.out, stamp);
    return result;
}

struct FuseCmd {
    std::filesystem::path manifest;
    std::string classes = "cityscapes19";
    std::filesystem::path weights;
    double temperature = 6.0;
    int workers = 1;
    std::filesystem::path out;
    bool write_scores = false;
    bool colorize = false;
};

/// Per record: temperature softmax on both logit branches, class-weighted
/// sum, argmax, one label PNG. Records fail independently.
inline CommandResult cmd_fuse(const FuseCmd& cfg) {
    const ClassTable table = resolve_class_table(cfg.classes);
    const WeightsFile wf = load_weights_file(cfg.weights);
    check_weights_match(wf, table);
    FusionConfig fusion{cfg.temperature, wf.weights};

    const auto records = load_manifest(cfg.manifest);
    detail::require(!records.empty(), "manifest is empty");
    for (const auto& r : records)
        detail::require(r.logits_dep_path.has_value() && r.logits_uda_path.has_value(),
                        "record '" + r.id + "' is missing a logits branch");

    detail::ensure_dir(cfg.out / "labels");
    if (cfg.write_scores)
        detail::ensure_dir(cfg.out / "scores");
    if (cfg.colorize)
        detail::ensure_dir(cfg.out / "color");

    std::vector<nlohmann::ordered_json> inputs(records.size());
    const auto task_failures = run_parallel(records.size(), cfg.workers, [&](size_t i) {
        const ManifestRecord& rec = records[i];
        nlohmann::ordered_json entry;
        entry["id"] = rec.id;
        entry["files"] = nlohmann::ordered_json::array(
            {detail::input_file_entry("logits_dep", *rec.logits_dep_path),
             detail::input_file_entry("logits_uda", *rec.logits_uda_path)});
        const LogitTensor dep = read_logits(*rec.logits_dep_path);
        const LogitTensor uda = read_logits(*rec.logits_uda_path);
        detail::require(dep.channels() == static_cast<int>(table.size()),
                        "record '" + rec.id + "': logits have " +
                            std::to_string(dep.channels()) + " channels but the class table has " +
                            std::to_string(table.size()) + " classes");
        LabelMap labels;
        if (cfg.write_scores) {
            const ScoreTensor scores = fuse(dep, uda, fusion);
            labels = decide_labels(scores);
            write_scores(cfg.out / "scores" / (rec.id + ".lgt"), scores);
        } else {
            labels = fuse_labels(dep, uda, fusion);
        }
        write_label_png(cfg.out / "labels" / (rec.id + ".png"), labels);
        if (cfg.colorize)
            write_image_png(cfg.out / "color" / (rec.id + ".png"),
                            colorize_labels(labels, table));
        inputs[i] = std::move(entry);
    });

    CommandResult result;
    std::vector<std::string> ids;
    for (const auto& r : records)
        ids.push_back(r.id);
    result.failures = detail::map_failures(task_failures, ids);
    std::vector<nlohmann::ordered_json> ok_inputs;
    for (const auto& entry : inputs)
        if (!entry.is_null())
            ok_inputs.push_back(entry);

    auto stamp = detail::stamp_base("fuse", table, 0);
    stamp["config"] = {{"temperature", cfg.temperature},
                       {"weights_sha256", sha256_hex_file(cfg.weights)},
                       {"weights_mode", wf.normalized ? "normalized" : "raw"},
                       {"write_scores", cfg.write_scores},
                       {"colorize", cfg.colorize}};
    stamp["manifest_sha256"] = sha256_hex_file(cfg.manifest);
    stamp["inputs"] = ok_inputs;
    detail::add_failures(stamp, result.failures);
    detail::write_stamp(cfg.out, stamp);
    return result;
}

struct SynthCmd {
    std::filesystem::path manifest;
    std::string classes = "cityscapes19";
    int n_images = 2;
    double percentile = 0.8;
    int samples_per_base = 4;
    uint64_t seed = 0;
    int workers = 1;
    std::filesystem::path out;
    bool exclude_base = false;
    bool no_augment = false;
    double scale_lo = 0.75;
    double scale_hi = 1.5;
    int crop_w = 1024;
    int crop_h = 512;
    JitterConfig jitter;
    std::vector<int> things_override;
    double depth_scale = kDefaultDepthScale;
    bool colorize = false;
};

/// Depth-composited self-training samples: samples_per_base outputs per
/// manifest record, each deterministic in (seed, base index, replica index).
inline CommandResult cmd_synth(const SynthCmd& cfg) {
    const ClassTable table = resolve_class_table(cfg.classes);
    const auto records = load_manifest(cfg.manifest);
    detail::require(!records.empty(), "manifest is empty");
    for (const auto& r : records)
        detail::require(r.label_path.has_value(), "record '" + r.id + "' has no label");

    SynthConfig synth;
    synth.n_images = cfg.n_images;
    synth.percentile = cfg.percentile;
    synth.samples_per_base = cfg.samples_per_base;
    synth.seed = cfg.seed;
    synth.include_base = !cfg.exclude_base;
    synth.augment.scale_lo = cfg.scale_lo;
    synth.augment.scale_hi = cfg.scale_hi;
    synth.augment.crop_w = cfg.crop_w;
    synth.augment.crop_h = cfg.crop_h;
    synth.augment.jitter = cfg.jitter;
    synth.augment.enabled = !cfg.no_augment;
    if (cfg.things_override.empty()) {
        synth.things = table.thing_ids();
    } else {
        for (int id : cfg.things_override)
            detail::require(table.contains(id),
                            "things override id " + std::to_string(id) +
                                " is outside the class table");
        synth.things = cfg.things_override;
    }
    detail::check_synth(synth);
    detail::require(records.size() >= static_cast<size_t>(synth.n_images),
                    "manifest has " + std::to_string(records.size()) +
                        " records but n_images is " + std::to_string(synth.n_images));

    detail::ensure_dir(cfg.out / "images");
    detail::ensure_dir(cfg.out / "labels");
    if (cfg.colorize)
        detail::ensure_dir(cfg.out / "color");

    // An unreadable record also fails every output that samples it, so hash
    // failures here only drop the stamp entry; the tasks report the details.
    std::vector<nlohmann::ordered_json> inputs;
    for (const ManifestRecord& rec : records) {
        try {
            nlohmann::ordered_json entry;
            entry["id"] = rec.id;
            entry["files"] = nlohmann::ordered_json::array(
                {detail::input_file_entry("image", rec.image_path),
                 detail::input_file_entry("depth", rec.depth_path),
                 detail::input_file_entry("label", *rec.label_path)});
            inputs.push_back(std::move(entry));
        } catch (const std::exception&) {
        }
    }

    const SampleLoader loader = [&](size_t index) {
        return load_scene_record(records[index], table, cfg.depth_scale, true, false);
    };

    const size_t n_outputs = records.size() * static_cast<size_t>(cfg.samples_per_base);
    std::vector<std::string> output_ids(n_outputs);
    for (size_t i = 0; i < n_outputs; ++i)
        output_ids[i] =
            synth_output_id(records[i / static_cast<size_t>(cfg.samples_per_base)].id,
                            static_cast<int>(i % static_cast<size_t>(cfg.samples_per_base)));

    const auto task_failures = run_parallel(n_outputs, cfg.workers, [&](size_t i) {
        const size_t base = i / static_cast<size_t>(cfg.samples_per_base);
        const int replica = static_cast<int>(i % static_cast<size_t>(cfg.samples_per_base));
        SynthOutput out = synthesize_sample(records.size(), base, replica, synth, loader);
        write_image_png(cfg.out / "images" / (out.id + ".png"), out.image);
        write_label_png(cfg.out / "labels" / (out.id + ".png"), out.label);
        if (cfg.colorize)
            write_image_png(cfg.out / "color" / (out.id + ".png"),
                            colorize_labels(out.label, table));
    });

    CommandResult result;
    result.failures = detail::map_failures(task_failures, output_ids);

    auto stamp = detail::stamp_base("synth", table, cfg.seed);
    stamp["config"] = {{"n_images", cfg.n_images},
                       {"percentile", cfg.percentile},
                       {"samples_per_base", cfg.samples_per_base},
                       {"include_base", synth.include_base},
                       {"things", synth.things},
                       {"depth_scale", cfg.depth_scale},
                       {"augment",
                        {{"enabled", synth.augment.enabled},
                         {"scale_range", {cfg.scale_lo, cfg.scale_hi}},
                         {"crop", {cfg.crop_w, cfg.crop_h}},
                         {"jitter",
                          {{"brightness", cfg.jitter.brightness},
                           {"contrast", cfg.jitter.contrast},
                           {"saturation", cfg.jitter.saturation},
                           {"hue", cfg.jitter.hue}}}}},
                       {"colorize", cfg.colorize}};
    stamp["manifest_sha256"] = sha256_hex_file(cfg.manifest);
    stamp["inputs"] = inputs;
    detail::add_failures(stamp, result.failures);
    detail::write_stamp(cfg.out, stamp);
    return result;
}

struct EvalCmd {
    std::filesystem::path manifest;
    std::string classes = "cityscapes19";
    std::filesystem::path pred_dir;
    int workers = 1;
    std::filesystem::path out;
};

struct EvalResult {
    CommandResult result;
    MetricsSummary summary{};
    std::vector<std::optional<double>> per_class_iou;
    size_t evaluated = 0;
};

namespace detail {

inline std::string format_metrics_text(const ClassTable& table,
                                       const std::vector<std::optional<double>>& iou,
                                       const MetricsSummary& summary, size_t evaluated,
                                       size_t failed) {
    std::string out;
    char buf[160];
    if (failed > 0) {
        std::snprintf(buf, sizeof(buf),
                      "WARNING: %zu of %zu records failed; metrics cover the remaining %zu.\n",
                      failed, evaluated + failed, evaluated);
        out += buf;
    }
    out += "per-class IoU\n";
    for (size_t i = 0; i < table.size(); ++i) {
        if (iou[i])
            std::snprintf(buf, sizeof(buf), "%4zu  %-16s %.6f\n", i,
                          table.classes()[i].name.c_str(), *iou[i]);
        else
            std::snprintf(buf, sizeof(buf), "%4zu  %-16s (undefined)\n", i,
                          table.classes()[i].name.c_str());
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "mIoU %.6f over %zu classes\n", summary.miou,
                  summary.classes_in_mean);
    out += buf;
    std::snprintf(buf, sizeof(buf), "Acc  %.6f\n", summary.accuracy);
    out += buf;
    std::snprintf(buf, sizeof(buf), "records evaluated: %zu\n", evaluated);
    out += buf;
    return out;
}

inline nlohmann::ordered_json metrics_json(const ClassTable& table,
                                           const std::vector<std::optional<double>>& iou,
                                           const MetricsSummary& summary, size_t evaluated,
                                           size_t failed) {
    nlohmann::ordered_json doc;
    doc["per_class"] = nlohmann::ordered_json::array();
    for (size_t i = 0; i < table.size(); ++i) {
        nlohmann::ordered_json e;
        e["id"] = i;
        e["name"] = table.classes()[i].name;
        if (iou[i])
            e["iou"] = *iou[i];
        else
            e["iou"] = nullptr;
        doc["per_class"].push_back(std::move(e));
    }
    doc["miou"] = summary.miou;
    doc["accuracy"] = summary.accuracy;
    doc["classes_in_mean"] = summary.classes_in_mean;
    doc["records_evaluated"] = evaluated;
    doc["records_failed"] = failed;
    return doc;
}

} // namespace detail

/// Confusion-matrix evaluation of predicted label PNGs (named <id>.png in
/// pred_dir) against the manifest's labels.
inline EvalResult cmd_eval(const EvalCmd& cfg) {
    const ClassTable table = resolve_class_table(cfg.classes);
    const auto records = load_manifest(cfg.manifest);
    detail::require(!records.empty(), "manifest is empty");
    for (const auto& r : records)
        detail::require(r.label_path.has_value(), "record '" + r.id + "' has no label");
    detail::require(std::filesystem::is_directory(cfg.pred_dir),
                    "prediction directory '" + cfg.pred_dir.string() + "' does not exist");

    std::vector<ConfusionMatrix> cms(records.size(), ConfusionMatrix(table.size()));
    std::vector<nlohmann::ordered_json> inputs(records.size());
    const auto task_failures = run_parallel(records.size(), cfg.workers, [&](size_t i) {
        const ManifestRecord& rec = records[i];
        const std::filesystem::path pred_path = cfg.pred_dir / (rec.id + ".png");
        const LabelMap gt = read_label_png(*rec.label_path, table);
        const LabelMap pred = read_label_png(pred_path, table);
        cms[i].accumulate(gt, pred, table);
        nlohmann::ordered_json entry;
        entry["id"] = rec.id;
        entry["files"] = nlohmann::ordered_json::array(
            {detail::input_file_entry("label", *rec.label_path),
             detail::input_file_entry("pred", pred_path)});
        inputs[i] = std::move(entry);
    });

    EvalResult out;
    std::vector<std::string> ids;
    for (const auto& r : records)
        ids.push_back(r.id);
    out.result.failures = detail::map_failures(task_failures, ids);
    out.evaluated = records.size() - out.result.failures.size();
    detail::require(out.evaluated > 0,
                    out.result.failures.empty()
                        ? "eval: no records"
                        : "eval: every record failed; first error: " +
                              out.result.failures.front().message);

    std::vector<bool> failed(records.size(), false);
    for (const auto& f : task_failures)
        failed[f.index] = true;
    ConfusionMatrix merged(table.size());
    std::vector<nlohmann::ordered_json> ok_inputs;
    for (size_t i = 0; i < records.size(); ++i) {
        if (failed[i])
            continue;
        merged.merge(cms[i]);
        ok_inputs.push_back(inputs[i]);
    }

    out.per_class_iou = iou_per_class(merged);
    out.summary = miou_and_acc(merged);

    detail::ensure_dir(cfg.out);
    write_text_atomic(cfg.out / kMetricsTextName,
                      detail::format_metrics_text(table, out.per_class_iou, out.summary,
                                                  out.evaluated, out.result.failures.size()));
    write_text_atomic(cfg.out / kMetricsJsonName,
                      detail::metrics_json(table, out.per_class_iou, out.summary, out.evaluated,
                                           out.result.failures.size())
                              .dump(2) +
                          "\n");

    auto stamp = detail::stamp_base("eval", table, 0);
    stamp["config"] = {{"pred_dir", cfg.pred_dir.generic_string()}};
    stamp["manifest_sha256"] = sha256_hex_file(cfg.manifest);
    stamp["inputs"] = ok_inputs;
    detail::add_failures(stamp, out.result.failures);
    detail::write_stamp(cfg.out, stamp);
    return out;
}

struct FixturesCmd {
    std::string classes = "cityscapes19";
    FixtureSpec spec;
    int workers = 1;
    std::filesystem::path out;
};

/// Synthetic scene set plus a manifest wired for every other subcommand.
inline CommandResult cmd_fixtures(const FixturesCmd& cfg) {
    const ClassTable table = resolve_class_table(cfg.classes);
    detail::check_fixture_spec(cfg.spec);
    detail::ensure_dir(cfg.out / "scenes");

    std::vector<std::string> ids(static_cast<size_t>(cfg.spec.count));
    for (int i = 0; i < cfg.spec.count; ++i)
        ids[static_cast<size_t>(i)] = fixture_scene_id(i);

    const auto task_failures =
        run_parallel(static_cast<size_t>(cfg.spec.count), cfg.workers, [&](size_t i) {
            const SceneSample s = generate_fixture_scene(table, cfg.spec, static_cast<int>(i));
            const std::filesystem::path dir = cfg.out / "scenes";
            write_image_png(dir / (s.id + "_image.png"), s.image);
            write_depth_png(dir / (s.id + "_depth.png"), s.depth);
            write_label_png(dir / (s.id + "_label.png"), *s.label);
            write_logits(dir / (s.id + "_dep.lgt"), *s.logits_dep);
            write_logits(dir / (s.id + "_uda.lgt"), *s.logits_uda);
        });

    CommandResult result;
    result.failures = detail::map_failures(task_failures, ids);

    std::vector<bool> failed(ids.size(), false);
    for (const auto& f : task_failures)
        failed[f.index] = true;
    std::vector<ManifestRecord> records;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (failed[i])
            continue;
        ManifestRecord r;
        r.id = ids[i];
        r.image_path = "scenes/" + ids[i] + "_image.png";
        r.depth_path = "scenes/" + ids[i] + "_depth.png";
        r.label_path = "scenes/" + ids[i] + "_label.png";
        r.logits_dep_path = "scenes/" + ids[i] + "_dep.lgt";
        r.logits_uda_path = "scenes/" + ids[i] + "_uda.lgt";
        records.push_back(std::move(r));
    }
    write_manifest(cfg.out / kFixtureManifestName, records);

    auto stamp = detail::stamp_base("fixtures", table, cfg.spec.seed);
    stamp["config"] = {{"count", cfg.spec.count},
                       {"width", cfg.spec.width},
                       {"height", cfg.spec.height},
                       {"corrupt_dep", cfg.spec.corrupt_dep},
                       {"corrupt_uda", cfg.spec.corrupt_uda},
                       {"sprites", cfg.spec.sprites}};
    stamp["inputs"] = nlohmann::ordered_json::array();
    detail::add_failures(stamp, result.failures);
    detail::write_stamp(cfg.out, stamp);
    return result;
}

} // namespace segfuse
