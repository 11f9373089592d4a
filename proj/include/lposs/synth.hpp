// synth.hpp
//
// Deterministic synthetic scenes for desk-scale runs. Every scene is a 64x64
// image with 8x8 patches, 32x32 windows at stride 16 (nine windows), colored
// class regions, two-cluster style VM features and VLM features that prefer
// the true class, except for a chosen set of flipped patches.
//
// Scenarios:
//   halves-64         vertical split at x = 32, 2 classes
//   noisy-flip-10pct  slanted boundary x = 22 + 0.3 y, 2 classes,
//                     round(0.1 * 64) image patches with flipped VLM preference
//   blocks-64         16x16 blocks, 3 classes
//   diagonal-64       x > y is class 1, 2 classes

#ifndef LPOSS_SYNTH_HPP
#define LPOSS_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lposs/manifest.hpp"
#include "lposs/pipeline.hpp"

namespace lposs {

struct SynthScene {
    std::string name;
    std::uint64_t seed = 0;
    RgbImage rgb;
    LabelMap gt;
    LabelMap patch_labels;            // majority label per image patch
    FeatureGrid vlm;                  // image-level patch features
    FeatureGrid vm;
    ClassEmbeddings classes;
    std::vector<Index> flipped;       // row-major image patch indices
    nlohmann::json config;            // pipeline overrides matching the geometry

    WindowPlan plan() const;
    WindowInputs window_inputs() const;
};

const std::vector<std::string>& synth_scenarios();

/// Raises ValidationError for unknown scenario names.
SynthScene make_scene(const std::string& scenario, std::uint64_t seed);

/// Writes the scene's tensors plus manifest.json under `dir`; returns the
/// manifest path.
std::filesystem::path write_scene(const SynthScene& scene, const std::filesystem::path& dir);

} // namespace lposs

#endif // LPOSS_SYNTH_HPP
