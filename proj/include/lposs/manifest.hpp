// manifest.hpp
//
// Run manifests: a JSON document listing images and the tensor files that
// hold their inputs. Paths are relative to the manifest's directory.
//
//   {
//     "class_embeddings": "classes.lpt",        // [C, d] f32
//     "class_names": ["cat", "dog"],
//     "ignore_label": 255,                      // optional
//     "config": { ... },                        // optional overrides
//     "images": [{
//       "id": "0001",
//       "rgb": "0001/rgb.lpt",                  // [H, W, 3] u8, or a .png
//       "gt": "0001/gt.lpt",                    // [H, W] i32/u8, optional
//       "vlm": "0001/vlm.lpt", "vm": "0001/vm.lpt",
//       "feature_layout": "windows",            // [K, Ny, Nx, d] or "image": [Hp, Wp, d]
//       "scores": "0001/scores.lpt",            // optional [K, Ny, Nx, C]
//       "ensemble": { "vlm": .., "vm": .., "scores": .., "feature_layout": .. }  // optional
//     }]
//   }

#ifndef LPOSS_MANIFEST_HPP
#define LPOSS_MANIFEST_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lposs/pipeline.hpp"

namespace lposs {

enum class FeatureLayout { windows, image };

struct FeatureSource {
    std::filesystem::path vlm;
    std::filesystem::path vm;
    std::optional<std::filesystem::path> scores;
    FeatureLayout layout = FeatureLayout::windows;
};

struct ImageEntry {
    std::string id;
    std::filesystem::path rgb;
    std::optional<std::filesystem::path> gt;
    FeatureSource primary;
    std::optional<FeatureSource> secondary;
};

struct RunManifest {
    std::filesystem::path base_dir;
    std::filesystem::path class_embeddings;
    std::vector<std::string> class_names;
    std::int32_t ignore_label = kDefaultIgnoreLabel;
    nlohmann::json config = nlohmann::json::object();
    std::vector<ImageEntry> images;

    Index num_classes() const { return static_cast<Index>(class_names.size()); }
};

/// Parses and validates a manifest; every referenced file must exist.
RunManifest load_manifest(const std::filesystem::path& path);

/// Writes `manifest` to `path` with paths made relative to its directory.
void save_manifest(const RunManifest& manifest, const std::filesystem::path& path);

ClassEmbeddings load_class_embeddings(const RunManifest& manifest);

RgbImage load_rgb(const std::filesystem::path& path);
LabelMap load_ground_truth(const RunManifest& manifest, const ImageEntry& entry);

/// Loads the features of one image, cut into the windows of the plan `cfg`
/// implies. Raises ValidationError when the stored windows disagree with it.
ImageInputs load_image_inputs(const RunManifest& manifest, const ImageEntry& entry, const PipelineConfig& cfg);

/// Window features for one setup over an image of size h x w.
WindowInputs load_window_inputs(const FeatureSource& source, const WindowPlan& plan);

} // namespace lposs

#endif // LPOSS_MANIFEST_HPP
