#include "lposs/config.hpp"

#include <fstream>

#include "lposs/io.hpp"

namespace lposs {

namespace {

using nlohmann::json;

template <typename T>
T get(const json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw ValidationError("config key '" + key + "': " + e.what());
    }
}

AppearanceKernel parse_appearance(const std::string& s) {
    if (s == "power")
        return AppearanceKernel::power;
    if (s == "exp_one_minus_s")
        return AppearanceKernel::exp_one_minus_s;
    throw ValidationError("unknown appearance_kernel '" + s + "'");
}

SpatialKernel parse_spatial(const std::string& s) {
    if (s == "rbf")
        return SpatialKernel::rbf;
    if (s == "linear")
        return SpatialKernel::linear;
    throw ValidationError("unknown spatial_kernel '" + s + "'");
}

ScaleConvention parse_scale(const std::string& s) {
    if (s == "fixed_point")
        return ScaleConvention::fixed_point;
    if (s == "system")
        return ScaleConvention::system;
    throw ValidationError("unknown scale_convention '" + s + "'");
}

InitialScores parse_initial(const std::string& s) {
    if (s == "vlm_dot")
        return InitialScores::vlm_dot;
    if (s == "dinoiser")
        return InitialScores::dinoiser;
    if (s == "external")
        return InitialScores::external;
    throw ValidationError("unknown initial_scores '" + s + "'");
}

const char* name(AppearanceKernel k) { return k == AppearanceKernel::power ? "power" : "exp_one_minus_s"; }
const char* name(SpatialKernel k) { return k == SpatialKernel::rbf ? "rbf" : "linear"; }
const char* name(ScaleConvention s) { return s == ScaleConvention::fixed_point ? "fixed_point" : "system"; }
const char* name(InitialScores s) {
    switch (s) {
    case InitialScores::vlm_dot: return "vlm_dot";
    case InitialScores::dinoiser: return "dinoiser";
    case InitialScores::external: return "external";
    }
    return "vlm_dot";
}

} // namespace

PipelineConfig apply_config(PipelineConfig cfg, const json& overrides) {
    if (overrides.is_null())
        return cfg;
    if (!overrides.is_object())
        throw ValidationError("config must be a JSON object");
    for (const auto& [key, v] : overrides.items()) {
        if (key == "alpha") cfg.propagation.alpha = get<double>(v, key);
        else if (key == "k") cfg.patch_graph.k = get<Index>(v, key);
        else if (key == "gamma") cfg.patch_graph.gamma = get<double>(v, key);
        else if (key == "sigma") cfg.patch_graph.sigma = get<double>(v, key);
        else if (key == "r") cfg.pixel_graph.r = get<Index>(v, key);
        else if (key == "tau") cfg.pixel_graph.tau = get<double>(v, key);
        else if (key == "win") cfg.windows.win = get<Index>(v, key);
        else if (key == "stride") cfg.windows.stride = get<Index>(v, key);
        else if (key == "short_side") cfg.short_side = get<Index>(v, key);
        else if (key == "patch") cfg.patch = get<Index>(v, key);
        else if (key == "appearance_kernel") cfg.patch_graph.appearance_kernel = parse_appearance(get<std::string>(v, key));
        else if (key == "appearance_bandwidth") cfg.patch_graph.appearance_bandwidth = get<double>(v, key);
        else if (key == "spatial_kernel") cfg.patch_graph.spatial_kernel = parse_spatial(get<std::string>(v, key));
        else if (key == "cg_tol") cfg.propagation.cg_tol = get<double>(v, key);
        else if (key == "cg_max_iter") cfg.propagation.cg_max_iter = get<Index>(v, key);
        else if (key == "iter_tol") cfg.propagation.iter_tol = get<double>(v, key);
        else if (key == "iter_max") cfg.propagation.iter_max = get<Index>(v, key);
        else if (key == "scale_convention") cfg.propagation.scale_convention = parse_scale(get<std::string>(v, key));
        else if (key == "initial_scores") cfg.initial_scores = parse_initial(get<std::string>(v, key));
        else if (key == "dinoiser_normalize_after") cfg.dinoiser_normalize_after = get<bool>(v, key);
        else if (key == "max_pixel_edges") cfg.pixel_graph.max_nonzeros = get<Index>(v, key);
        else if (key == "ensemble") {
            if (v.is_null()) {
                cfg.ensemble.reset();
            } else {
                if (!v.is_object() || !v.contains("win") || !v.contains("stride"))
                    throw ValidationError("ensemble must be {\"win\": .., \"stride\": ..} or null");
                cfg.ensemble = WindowSetup{get<Index>(v.at("win"), "ensemble.win"),
                                           get<Index>(v.at("stride"), "ensemble.stride")};
            }
        } else {
            throw ValidationError("unknown config key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

json to_json(const PipelineConfig& cfg) {
    json j{
        {"alpha", cfg.propagation.alpha},
        {"k", cfg.patch_graph.k},
        {"gamma", cfg.patch_graph.gamma},
        {"sigma", cfg.patch_graph.sigma},
        {"r", cfg.pixel_graph.r},
        {"tau", cfg.pixel_graph.tau},
        {"win", cfg.windows.win},
        {"stride", cfg.windows.stride},
        {"short_side", cfg.short_side},
        {"patch", cfg.patch},
        {"appearance_kernel", name(cfg.patch_graph.appearance_kernel)},
        {"appearance_bandwidth", cfg.patch_graph.appearance_bandwidth},
        {"spatial_kernel", name(cfg.patch_graph.spatial_kernel)},
        {"cg_tol", cfg.propagation.cg_tol},
        {"cg_max_iter", cfg.propagation.cg_max_iter},
        {"iter_tol", cfg.propagation.iter_tol},
        {"iter_max", cfg.propagation.iter_max},
        {"scale_convention", name(cfg.propagation.scale_convention)},
        {"initial_scores", name(cfg.initial_scores)},
        {"dinoiser_normalize_after", cfg.dinoiser_normalize_after},
        {"max_pixel_edges", cfg.pixel_graph.max_nonzeros},
    };
    j["ensemble"] = cfg.ensemble ? json{{"win", cfg.ensemble->win}, {"stride", cfg.ensemble->stride}} : json(nullptr);
    return j;
}

json load_json(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f)
        throw IoError(IoErrorKind::open_failed, path.string());
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

} // namespace lposs
