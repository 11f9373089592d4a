// config.hpp
//
// JSON form of PipelineConfig. Keys mirror the command-line flags:
//
//   alpha k gamma sigma r tau win stride short_side patch
//   appearance_kernel ("power" | "exp_one_minus_s") appearance_bandwidth
//   spatial_kernel ("rbf" | "linear")
//   cg_tol cg_max_iter iter_tol iter_max
//   scale_convention ("fixed_point" | "system")
//   initial_scores ("vlm_dot" | "dinoiser" | "external") dinoiser_normalize_after
//   ensemble ({"win": .., "stride": ..} | null) max_pixel_edges

#ifndef LPOSS_CONFIG_HPP
#define LPOSS_CONFIG_HPP

#include <filesystem>

#include <json.hpp>

#include "lposs/pipeline.hpp"

namespace lposs {

/// Applies the keys present in `overrides` on top of `base`. Unknown keys and
/// wrongly typed values raise ValidationError.
PipelineConfig apply_config(PipelineConfig base, const nlohmann::json& overrides);

nlohmann::json to_json(const PipelineConfig& cfg);

nlohmann::json load_json(const std::filesystem::path& path);

} // namespace lposs

#endif // LPOSS_CONFIG_HPP
