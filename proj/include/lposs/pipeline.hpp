// pipeline.hpp
//
// End-to-end refinement: VLM patch scoring, joint label propagation over all
// windows' patches (LPOSS), pixel-level propagation over a Lab color graph
// (LPOSS+), the DINOiser-style affinity baseline, and two-setup ensembling.

#ifndef LPOSS_PIPELINE_HPP
#define LPOSS_PIPELINE_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lposs/graph.hpp"
#include "lposs/grid.hpp"
#include "lposs/solver.hpp"
#include "lposs/windows.hpp"

namespace lposs {

/// Class-name text embeddings, one column per class (d x C).
struct ClassEmbeddings {
    Eigen::MatrixXd matrix;
    std::vector<std::string> names;

    Index classes() const noexcept { return matrix.cols(); }
    Index dim() const noexcept { return matrix.rows(); }

    /// True when every column has unit norm within `tol`.
    bool normalized(double tol = 1e-4) const;
};

enum class InitialScores { vlm_dot, dinoiser, external };

struct WindowSetup {
    Index win = 224;
    Index stride = 112;
};

struct PipelineConfig {
    PatchGraphConfig patch_graph;
    PixelGraphConfig pixel_graph;
    PropagationConfig propagation;
    WindowSetup windows;
    Index patch = 16;
    Index short_side = 448; // 0 disables resizing
    std::optional<WindowSetup> ensemble;
    InitialScores initial_scores = InitialScores::vlm_dot;
    bool dinoiser_normalize_after = false;

    void validate() const;
};

/// Per-window model outputs. `vlm` and `vm` are patch grids in plan order;
/// `external` replaces the VLM scores when `InitialScores::external` is used.
struct WindowInputs {
    std::vector<FeatureGrid> vlm;
    std::vector<FeatureGrid> vm;
    std::vector<ScoreGrid> external;
};

/// Y = Z^T F per cell.
ScoreGrid vlm_scores(const FeatureGrid& z_vlm, const ClassEmbeddings& classes);

/// A Y with A = Z_vm Z_vm^T over the cells of one window.
ScoreGrid dinoiser_baseline(const FeatureGrid& z_vm, const ScoreGrid& y_vlm);

/// Variant that l2-normalizes the propagated VLM features before scoring:
/// l2(A Z_vlm) F.
ScoreGrid dinoiser_baseline(const FeatureGrid& z_vm, const FeatureGrid& z_vlm, const ClassEmbeddings& classes);

/// Initial per-window patch scores according to `cfg.initial_scores`.
std::vector<ScoreGrid> initial_window_scores(const WindowInputs& inputs, const ClassEmbeddings& classes,
                                             const PipelineConfig& cfg);

struct LpossResult {
    ScoreMatrix<double> node_scores; // propagated joint-node scores
    ScoreGrid image_scores;          // H x W x C after upsampling and combining
};

LpossResult lposs_detailed(const WindowPlan& plan, const WindowInputs& inputs, const ClassEmbeddings& classes,
                           const PipelineConfig& cfg);

/// Patch-level propagation jointly across all windows, returned at image
/// resolution.
ScoreGrid lposs(const WindowPlan& plan, const WindowInputs& inputs, const ClassEmbeddings& classes,
                const PipelineConfig& cfg);

/// Pixel-level propagation of `image_scores` over the Lab color graph of `rgb`.
ScoreGrid lposs_plus(const ScoreGrid& image_scores, const RgbImage& rgb, const PipelineConfig& cfg);

/// Per-pixel min-shift, then one L1 scale per grid, then the mean of the two.
ScoreGrid ensemble(const ScoreGrid& a, const ScoreGrid& b);

/// Per-cell argmax; ties go to the smallest class id.
LabelMap argmax_labels(const ScoreGrid& scores, std::int32_t ignore_label = kDefaultIgnoreLabel);

struct ImageInputs {
    RgbImage rgb;                          // original resolution
    WindowInputs primary;                  // features for the primary window setup
    std::optional<WindowInputs> secondary; // features for cfg.ensemble, if any
};

struct ImageResult {
    ScoreGrid lposs;      // original resolution
    ScoreGrid lposs_plus; // original resolution
    LabelMap lposs_labels;
    LabelMap lposs_plus_labels;
};

/// LPOSS (ensembled when configured) at the working size.
ScoreGrid propagate_image(const ImageInputs& inputs, const ClassEmbeddings& classes, const PipelineConfig& cfg);

/// LPOSS+ of working-size scores over `rgb` resized to the working size.
ScoreGrid refine_image(const ScoreGrid& working_scores, const RgbImage& rgb, const PipelineConfig& cfg);

/// Resize, plan, LPOSS (optionally ensembled), LPOSS+, then back to the
/// original resolution.
ImageResult run_image(const ImageInputs& inputs, const ClassEmbeddings& classes, const PipelineConfig& cfg);

/// Size of the image the window plans are laid over.
std::pair<Index, Index> working_size(Index h, Index w, const PipelineConfig& cfg);

} // namespace lposs

#endif // LPOSS_PIPELINE_HPP
