#include "lposs/manifest.hpp"

#include <fstream>

#include "lposs/config.hpp"
#include "lposs/io.hpp"

namespace lposs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const json& j, const std::string& key) {
    if (!j.contains(key) || !j.at(key).is_string())
        throw ValidationError("manifest entry is missing string field '" + key + "'");
    fs::path p = j.at(key).get<std::string>();
    if (p.is_relative())
        p = base / p;
    if (!fs::exists(p))
        throw IoError(IoErrorKind::open_failed, "manifest references missing file " + p.string());
    return p;
}

std::optional<fs::path> resolve_optional(const fs::path& base, const json& j, const std::string& key) {
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    return resolve(base, j, key);
}

FeatureSource parse_source(const fs::path& base, const json& j) {
    FeatureSource s;
    s.vlm = resolve(base, j, "vlm");
    s.vm = resolve(base, j, "vm");
    s.scores = resolve_optional(base, j, "scores");
    const std::string layout = j.value("feature_layout", "windows");
    if (layout == "windows")
        s.layout = FeatureLayout::windows;
    else if (layout == "image")
        s.layout = FeatureLayout::image;
    else
        throw ValidationError("unknown feature_layout '" + layout + "'");
    return s;
}

std::string relative_to(const fs::path& p, const fs::path& base) {
    return fs::relative(p, base).generic_string();
}

json source_json(const FeatureSource& s, const fs::path& base) {
    json j{{"vlm", relative_to(s.vlm, base)},
           {"vm", relative_to(s.vm, base)},
           {"feature_layout", s.layout == FeatureLayout::windows ? "windows" : "image"}};
    if (s.scores)
        j["scores"] = relative_to(*s.scores, base);
    return j;
}

} // namespace

RunManifest load_manifest(const fs::path& path) {
    const json j = load_json(path);
    if (!j.is_object() || !j.contains("images") || !j.at("images").is_array())
        throw ValidationError(path.string() + ": manifest needs an 'images' array");

    RunManifest m;
    m.base_dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    try {
        m.class_embeddings = resolve(m.base_dir, j, "class_embeddings");
        m.class_names = j.value("class_names", std::vector<std::string>{});
        m.ignore_label = j.value("ignore_label", kDefaultIgnoreLabel);
        if (j.contains("config"))
            m.config = j.at("config");
        for (const auto& e : j.at("images")) {
            ImageEntry entry;
            entry.id = e.value("id", std::to_string(m.images.size()));
            entry.rgb = resolve(m.base_dir, e, "rgb");
            entry.gt = resolve_optional(m.base_dir, e, "gt");
            entry.primary = parse_source(m.base_dir, e);
            if (e.contains("ensemble") && !e.at("ensemble").is_null())
                entry.secondary = parse_source(m.base_dir, e.at("ensemble"));
            m.images.push_back(std::move(entry));
        }
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return m;
}

void save_manifest(const RunManifest& m, const fs::path& path) {
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    json images = json::array();
    for (const auto& e : m.images) {
        json j = source_json(e.primary, base);
        j["id"] = e.id;
        j["rgb"] = relative_to(e.rgb, base);
        if (e.gt)
            j["gt"] = relative_to(*e.gt, base);
        if (e.secondary)
            j["ensemble"] = source_json(*e.secondary, base);
        images.push_back(std::move(j));
    }
    json doc{{"class_embeddings", relative_to(m.class_embeddings, base)},
             {"class_names", m.class_names},
             {"ignore_label", m.ignore_label},
             {"config", m.config},
             {"images", std::move(images)}};
    std::ofstream f(path);
    if (!f)
        throw IoError(IoErrorKind::open_failed, path.string());
    f << doc.dump(2) << '\n';
}

ClassEmbeddings load_class_embeddings(const RunManifest& manifest) {
    ClassEmbeddings ce = class_embeddings_from(read_tensor(manifest.class_embeddings));
    ce.names = manifest.class_names;
    if (!ce.names.empty() && static_cast<Index>(ce.names.size()) != ce.classes())
        throw ValidationError("manifest lists " + std::to_string(ce.names.size()) + " class names but " +
                              std::to_string(ce.classes()) + " embeddings");
    return ce;
}

RgbImage load_rgb(const fs::path& path) {
    if (path.extension() == ".png")
        return read_rgb_png(path);
    return rgb_image_from(read_tensor(path));
}

LabelMap load_ground_truth(const RunManifest& manifest, const ImageEntry& entry) {
    if (!entry.gt)
        throw ValidationError("image '" + entry.id + "' has no ground truth");
    return label_map_from(read_tensor(*entry.gt), manifest.ignore_label);
}

WindowInputs load_window_inputs(const FeatureSource& source, const WindowPlan& plan) {
    WindowInputs in;
    auto load = [&](const fs::path& p) {
        const Tensor t = read_tensor(p);
        if (source.layout == FeatureLayout::image)
            return slice_windows(feature_grid_from(t), plan);
        return window_features_from(t);
    };
    in.vlm = load(source.vlm);
    in.vm = load(source.vm);
    if (source.scores)
        in.external = window_scores_from(read_tensor(*source.scores));

    const auto k = static_cast<std::size_t>(plan.size());
    auto check = [&](std::size_t count, Index h, Index w, const char* what) {
        if (count != k)
            throw ValidationError(std::string(what) + ": stored " + std::to_string(count) +
                                  " windows but the plan has " + std::to_string(k));
        if (h != plan.patch_rows() || w != plan.patch_cols())
            throw ValidationError(std::string(what) + ": stored window grid is " + std::to_string(h) + "x" +
                                  std::to_string(w) + ", plan expects " + std::to_string(plan.patch_rows()) +
                                  "x" + std::to_string(plan.patch_cols()));
    };
    check(in.vlm.size(), in.vlm.empty() ? 0 : in.vlm[0].height(), in.vlm.empty() ? 0 : in.vlm[0].width(),
          "VLM features");
    check(in.vm.size(), in.vm.empty() ? 0 : in.vm[0].height(), in.vm.empty() ? 0 : in.vm[0].width(),
          "VM features");
    if (!in.external.empty())
        check(in.external.size(), in.external[0].height(), in.external[0].width(), "initial scores");
    return in;
}

ImageInputs load_image_inputs(const RunManifest& manifest, const ImageEntry& entry, const PipelineConfig& cfg) {
    (void)manifest;
    ImageInputs in;
    in.rgb = load_rgb(entry.rgb);
    const auto [h, w] = working_size(in.rgb.height, in.rgb.width, cfg);
    in.primary = load_window_inputs(entry.primary, plan_windows(h, w, cfg.windows.win, cfg.windows.stride, cfg.patch));
    if (cfg.ensemble) {
        if (!entry.secondary)
            throw ValidationError("image '" + entry.id + "' has no features for the ensemble window setup");
        in.secondary =
            load_window_inputs(*entry.secondary, plan_windows(h, w, cfg.ensemble->win, cfg.ensemble->stride, cfg.patch));
    }
    return in;
}

} // namespace lposs
