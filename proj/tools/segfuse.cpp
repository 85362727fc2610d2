#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "segfuse/segfuse.hpp"

namespace {

using segfuse::Error;

std::pair<double, double> parse_range(const std::string& s) {
    const auto sep = s.find(':');
    if (sep == std::string::npos)
        throw Error("--scale-range expects lo:hi, got '" + s + "'");
    try {
        return {std::stod(s.substr(0, sep)), std::stod(s.substr(sep + 1))};
    } catch (const std::exception&) {
        throw Error("--scale-range expects lo:hi, got '" + s + "'");
    }
}

std::pair<int, int> parse_size(const std::string& s, const char* flag) {
    const auto sep = s.find('x');
    try {
        if (sep != std::string::npos) {
            const int w = std::stoi(s.substr(0, sep));
            const int h = std::stoi(s.substr(sep + 1));
            if (w > 0 && h > 0)
                return {w, h};
        }
    } catch (const std::exception&) {
    }
    throw Error(std::string(flag) + " expects WxH, got '" + s + "'");
}

segfuse::JitterConfig parse_jitter(const std::string& s) {
    std::vector<double> v;
    std::string::size_type pos = 0;
    try {
        while (pos <= s.size()) {
            const auto next = s.find(',', pos);
            v.push_back(std::stod(s.substr(pos, next - pos)));
            if (next == std::string::npos)
                break;
            pos = next + 1;
        }
    } catch (const std::exception&) {
        v.clear();
    }
    if (v.size() != 4)
        throw Error("--jitter expects brightness,contrast,saturation,hue, got '" + s + "'");
    return {v[0], v[1], v[2], v[3]};
}

std::vector<int> parse_ids(const std::string& s) {
    std::vector<int> v;
    std::string::size_type pos = 0;
    try {
        while (pos <= s.size()) {
            const auto next = s.find(',', pos);
            v.push_back(std::stoi(s.substr(pos, next - pos)));
            if (next == std::string::npos)
                break;
            pos = next + 1;
        }
    } catch (const std::exception&) {
        throw Error("--things expects a comma-separated id list, got '" + s + "'");
    }
    return v;
}

int report(const segfuse::CommandResult& result) {
    for (const auto& f : result.failures)
        std::fprintf(stderr, "record %s: %s\n", f.id.c_str(), f.message.c_str());
    return result.ok() ? 0 : 1;
}

int run_guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"segfuse: class-weighted segmentation fusion and depth-ordered "
                 "self-training synthesis"};
    app.require_subcommand(1);

    segfuse::WeightsCmd weights;
    auto* w = app.add_subcommand("weights", "compute class frequencies and fusion weights");
    w->add_option("--manifest", weights.manifest, "input manifest (JSONL)")->required();
    w->add_option("--classes", weights.classes, "class table preset or JSON file");
    w->add_option("--delta", weights.delta, "weight formula offset");
    w->add_flag("--raw-weights", weights.raw_weights, "skip max-normalization");
    w->add_option("--workers", weights.workers, "worker threads");
    w->add_option("--out", weights.out, "output directory")->required();

    segfuse::FuseCmd fuse;
    bool fuse_colorize = false;
    auto* f = app.add_subcommand("fuse", "fuse two logit branches into label maps");
    f->add_option("--manifest", fuse.manifest, "input manifest (JSONL)")->required();
    f->add_option("--classes", fuse.classes, "class table preset or JSON file");
    f->add_option("--weights", fuse.weights, "weights file from the weights command")->required();
    f->add_option("--temperature", fuse.temperature, "softmax temperature");
    f->add_option("--workers", fuse.workers, "worker threads");
    f->add_option("--out", fuse.out, "output directory")->required();
    f->add_flag("--write-scores", fuse.write_scores, "also write fused score tensors");
    f->add_flag("--colorize", fuse_colorize, "also write palette PNGs");

    segfuse::SynthCmd synth;
    std::string scale_range = "0.75:1.5";
    std::string crop = "1024x512";
    std::string jitter = "0.2,0.2,0.2,0.05";
    std::string things;
    bool synth_colorize = false;
    auto* s = app.add_subcommand("synth", "synthesize depth-composited training samples");
    s->add_option("--manifest", synth.manifest, "input manifest (JSONL)")->required();
    s->add_option("--classes", synth.classes, "class table preset or JSON file");
    s->add_option("--n-images", synth.n_images, "images composited per output");
    s->add_option("--percentile", synth.percentile, "near-depth percentile");
    s->add_option("--samples-per-base", synth.samples_per_base, "outputs per base image");
    s->add_option("--scale-range", scale_range, "augment scale range lo:hi");
    s->add_option("--crop", crop, "augment crop WxH");
    s->add_option("--jitter", jitter, "color jitter brightness,contrast,saturation,hue");
    s->add_option("--seed", synth.seed, "master seed");
    s->add_option("--workers", synth.workers, "worker threads");
    s->add_option("--out", synth.out, "output directory")->required();
    s->add_flag("--exclude-base", synth.exclude_base, "exclude the base image's own pixels");
    s->add_flag("--no-augment", synth.no_augment, "disable scale/crop/jitter");
    s->add_option("--things", things, "override things class ids (comma-separated)");
    s->add_option("--depth-scale", synth.depth_scale, "depth PNG scale divisor");
    s->add_flag("--colorize", synth_colorize, "also write palette PNGs");

    segfuse::EvalCmd eval;
    auto* e = app.add_subcommand("eval", "evaluate predicted labels against the manifest");
    e->add_option("--manifest", eval.manifest, "input manifest (JSONL)")->required();
    e->add_option("--classes", eval.classes, "class table preset or JSON file");
    e->add_option("--pred", eval.pred_dir, "directory of predicted <id>.png labels")->required();
    e->add_option("--workers", eval.workers, "worker threads");
    e->add_option("--out", eval.out, "output directory")->required();

    segfuse::FixturesCmd fixtures;
    std::string size = "128x64";
    auto* x = app.add_subcommand("fixtures", "generate a synthetic scene set with manifest");
    x->add_option("--classes", fixtures.classes, "class table preset or JSON file");
    x->add_option("--count", fixtures.spec.count, "number of scenes");
    x->add_option("--size", size, "scene WxH");
    x->add_option("--corrupt-dep", fixtures.spec.corrupt_dep,
                  "depth-branch corruption rate on things pixels");
    x->add_option("--corrupt-uda", fixtures.spec.corrupt_uda,
                  "UDA-branch corruption rate on stuff pixels");
    x->add_option("--sprites", fixtures.spec.sprites, "things sprites per scene");
    x->add_option("--seed", fixtures.spec.seed, "master seed");
    x->add_option("--workers", fixtures.workers, "worker threads");
    x->add_option("--out", fixtures.out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (w->parsed())
        return run_guarded([&] { return report(segfuse::cmd_weights(weights)); });
    if (f->parsed())
        return run_guarded([&] {
            fuse.colorize = fuse_colorize;
            return report(segfuse::cmd_fuse(fuse));
        });
    if (s->parsed())
        return run_guarded([&] {
            const auto range = parse_range(scale_range);
            synth.scale_lo = range.first;
            synth.scale_hi = range.second;
            const auto wh = parse_size(crop, "--crop");
            synth.crop_w = wh.first;
            synth.crop_h = wh.second;
            synth.jitter = parse_jitter(jitter);
            if (!things.empty())
                synth.things_override = parse_ids(things);
            synth.colorize = synth_colorize;
            return report(segfuse::cmd_synth(synth));
        });
    if (e->parsed())
        return run_guarded([&] {
            const segfuse::EvalResult r = segfuse::cmd_eval(eval);
            std::printf("mIoU %.6f over %zu classes\n", r.summary.miou,
                        r.summary.classes_in_mean);
            std::printf("Acc  %.6f\n", r.summary.accuracy);
            return report(r.result);
        });
    if (x->parsed())
        return run_guarded([&] {
            const auto wh = parse_size(size, "--size");
            fixtures.spec.width = wh.first;
            fixtures.spec.height = wh.second;
            return report(segfuse::cmd_fixtures(fixtures));
        });
    return 2;
}
