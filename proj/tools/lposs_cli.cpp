// lposs: command-line front end.
//
//   lposs synth <scenario> [--seed N] [--out DIR]
//   lposs propagate|refine|run <manifest> [--out DIR] [overrides]
//   lposs evaluate <manifest> [--pred DIR] [--json FILE]
//   lposs oracle <manifest> --patch P [--json FILE]
//   lposs render <labels.lpt> <out.png>
//
// Exit codes: 0 ok, 2 invalid input, 3 solver did not converge.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lposs/config.hpp"
#include "lposs/error.hpp"
#include "lposs/io.hpp"
#include "lposs/manifest.hpp"
#include "lposs/metrics.hpp"
#include "lposs/pipeline.hpp"
#include "lposs/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lposs;

namespace {

struct Overrides {
    std::string config;
    std::optional<double> alpha, gamma, sigma, tau;
    std::optional<Index> k, r, win, stride, short_side;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "JSON file with config overrides")->check(CLI::ExistingFile);
        app->add_option("--alpha", alpha, "propagation strength (default 0.95)");
        app->add_option("--k", k, "nearest neighbours per patch (default 400)");
        app->add_option("--gamma", gamma, "appearance exponent (default 3.0)");
        app->add_option("--sigma", sigma, "spatial bandwidth in pixels^2 (default 100)");
        app->add_option("--r", r, "pixel neighbourhood size (default 13)");
        app->add_option("--tau", tau, "color bandwidth (default 0.01)");
        app->add_option("--win", win, "window size (default 224)");
        app->add_option("--stride", stride, "window stride (default 112)");
        app->add_option("--short-side", short_side, "resize target for the shorter side, 0 keeps size (default 448)");
    }

    PipelineConfig resolve(const json& manifest_config) const {
        PipelineConfig cfg = apply_config(PipelineConfig{}, manifest_config);
        if (!config.empty())
            cfg = apply_config(cfg, load_json(config));
        json flags = json::object();
        if (alpha) flags["alpha"] = *alpha;
        if (k) flags["k"] = *k;
        if (gamma) flags["gamma"] = *gamma;
        if (sigma) flags["sigma"] = *sigma;
        if (r) flags["r"] = *r;
        if (tau) flags["tau"] = *tau;
        if (win) flags["win"] = *win;
        if (stride) flags["stride"] = *stride;
        if (short_side) flags["short_side"] = *short_side;
        return apply_config(cfg, flags);
    }
};

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

json per_class_json(const IouReport& r) {
    json a = json::array();
    for (const auto& v : r.per_class)
        a.push_back(v ? json(*v) : json(nullptr));
    return a;
}

void write_report(const json& report, const std::string& path) {
    if (path.empty())
        return;
    std::ofstream f(path);
    if (!f)
        throw IoError(IoErrorKind::open_failed, path);
    f << report.dump(2) << '\n';
}

Index class_count(const RunManifest& m) {
    return m.num_classes() > 0 ? m.num_classes() : load_class_embeddings(m).classes();
}

fs::path scores_path(const fs::path& dir, const std::string& id, const std::string& method) {
    return dir / (id + "." + method + ".lpt");
}

fs::path labels_path(const fs::path& dir, const std::string& id, const std::string& method) {
    return dir / (id + "." + method + ".labels.lpt");
}

void save_stage(const fs::path& dir, const std::string& id, const std::string& method, const ScoreGrid& working,
                const RgbImage& rgb, std::int32_t ignore) {
    write_tensor(to_tensor(working), scores_path(dir, id, method));
    LabelMap labels = argmax_labels(bilinear_resize(working, rgb.height, rgb.width), ignore);
    write_tensor(to_tensor(labels), labels_path(dir, id, method));
}

int cmd_pipeline(const std::string& stage, const std::string& manifest_path, const std::string& out,
                 const Overrides& ov) {
    const RunManifest m = load_manifest(manifest_path);
    const PipelineConfig cfg = ov.resolve(m.config);
    const ClassEmbeddings classes = load_class_embeddings(m);
    if (!classes.normalized())
        std::cerr << "warning: class embeddings are not unit norm\n";
    fs::create_directories(out);

    for (const auto& entry : m.images) {
        ScoreGrid working;
        RgbImage rgb;
        if (stage == "refine") {
            rgb = load_rgb(entry.rgb);
            working = score_grid_from(read_tensor(scores_path(out, entry.id, "lposs")));
        } else {
            const ImageInputs in = load_image_inputs(m, entry, cfg);
            rgb = in.rgb;
            working = score_grid_from(to_tensor(propagate_image(in, classes, cfg)));
            save_stage(out, entry.id, "lposs", working, rgb, m.ignore_label);
        }
        if (stage != "propagate")
            save_stage(out, entry.id, "lposs_plus", refine_image(working, rgb, cfg), rgb, m.ignore_label);
        std::cout << entry.id << " " << stage << " ok\n";
    }
    write_report(to_json(cfg), (fs::path(out) / "config.json").string());
    return 0;
}

int cmd_evaluate(const std::string& manifest_path, const std::string& pred_dir, const std::string& json_out) {
    const RunManifest m = load_manifest(manifest_path);
    const Index c = class_count(m);
    json report{{"classes", m.class_names}, {"methods", json::object()}};

    std::printf("%-12s %8s %8s\n", "method", "mIoU", "BIoU");
    for (const std::string method : {"lposs", "lposs_plus"}) {
        ConfusionAccumulator conf(c, m.ignore_label);
        BoundaryAccumulator band(c);
        bool any = false;
        for (const auto& entry : m.images) {
            const fs::path p = labels_path(pred_dir, entry.id, method);
            if (!fs::exists(p))
                continue;
            const LabelMap gt = load_ground_truth(m, entry);
            const LabelMap pred = label_map_from(read_tensor(p), m.ignore_label);
            conf.accumulate(pred, gt);
            band.accumulate(pred, gt);
            any = true;
        }
        if (!any)
            continue;
        const IouReport iou = miou(conf);
        const IouReport biou = band.report();
        std::printf("%-12s %8s %8s\n", method.c_str(), fixed2(iou.mean).c_str(), fixed2(biou.mean).c_str());
        report["methods"][method] = {{"miou", iou.mean},
                                     {"boundary_iou", biou.mean},
                                     {"per_class_iou", per_class_json(iou)},
                                     {"per_class_boundary_iou", per_class_json(biou)}};
    }
    if (report["methods"].empty())
        throw ValidationError("no predictions found in " + pred_dir);
    write_report(report, json_out);
    return 0;
}

int cmd_oracle(const std::string& manifest_path, Index patch, const std::string& json_out) {
    const RunManifest m = load_manifest(manifest_path);
    const Index c = class_count(m);
    ConfusionAccumulator conf(c, m.ignore_label);
    BoundaryAccumulator band(c);
    for (const auto& entry : m.images) {
        const LabelMap gt = load_ground_truth(m, entry);
        const LabelMap pred = patch_resolution_roundtrip(gt, patch);
        conf.accumulate(pred, gt);
        band.accumulate(pred, gt);
    }
    const IouReport iou = miou(conf);
    const IouReport biou = band.report();
    std::printf("patch %ld\nmIoU %s\nBoundary IoU %s\n", static_cast<long>(patch), fixed2(iou.mean).c_str(),
                fixed2(biou.mean).c_str());
    write_report({{"patch", patch},
                  {"miou", iou.mean},
                  {"boundary_iou", biou.mean},
                  {"per_class_iou", per_class_json(iou)},
                  {"per_class_boundary_iou", per_class_json(biou)}},
                 json_out);
    return 0;
}

int cmd_synth(const std::string& scenario, std::uint64_t seed, const std::string& out) {
    const SynthScene scene = make_scene(scenario, seed);
    std::cout << write_scene(scene, out).string() << '\n';
    return 0;
}

int cmd_render(const std::string& labels, const std::string& png) {
    write_label_png(label_map_from(read_tensor(labels)), png);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Label propagation over patch and pixel graphs for open-vocabulary segmentation"};
    app.require_subcommand(1);

    Overrides ov;
    std::string manifest, out = "out", pred_dir = "out", json_out, scenario, labels, png;
    std::uint64_t seed = 7;
    Index patch = 16;

    std::string stage;
    auto stage_command = [&](const std::string& name, const std::string& help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("manifest", manifest, "run manifest")->required();
        sub->add_option("--out", out, "output directory");
        ov.attach(sub);
        sub->callback([&stage, name] { stage = name; });
    };
    stage_command("propagate", "patch-level propagation across windows");
    stage_command("refine", "pixel-level refinement of propagate output");
    stage_command("run", "propagate then refine");

    CLI::App* evaluate = app.add_subcommand("evaluate", "mIoU and Boundary IoU of stored predictions");
    evaluate->add_option("manifest", manifest, "run manifest")->required();
    evaluate->add_option("--pred", pred_dir, "directory with <id>.<method>.labels.lpt");
    evaluate->add_option("--json", json_out, "write a JSON report");

    CLI::App* oracle = app.add_subcommand("oracle", "score ground truth reduced to patch resolution");
    oracle->add_option("manifest", manifest, "run manifest")->required();
    oracle->add_option("--patch", patch, "patch size")->check(CLI::PositiveNumber);
    oracle->add_option("--json", json_out, "write a JSON report");

    CLI::App* synth = app.add_subcommand("synth", "write a synthetic scene");
    synth->add_option("scenario", scenario, "scenario name")->required()->check(CLI::IsMember(synth_scenarios()));
    synth->add_option("--seed", seed, "random seed");
    synth->add_option("--out", out, "output directory");

    CLI::App* render = app.add_subcommand("render", "label map to indexed PNG");
    render->add_option("labels", labels, "label tensor")->required();
    render->add_option("png", png, "output PNG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (!stage.empty())
            return cmd_pipeline(stage, manifest, out, ov);
        if (evaluate->parsed())
            return cmd_evaluate(manifest, pred_dir, json_out);
        if (oracle->parsed())
            return cmd_oracle(manifest, patch, json_out);
        if (synth->parsed())
            return cmd_synth(scenario, seed, out);
        if (render->parsed())
            return cmd_render(labels, png);
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
