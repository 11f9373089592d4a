// windows.hpp
//
// Sliding-window plans over a resized image, assembly of all windows' patches
// into one joint node set, and the per-pixel averaging of window predictions.

#ifndef LPOSS_WINDOWS_HPP
#define LPOSS_WINDOWS_HPP

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lposs/grid.hpp"
#include "lposs/solver.hpp"

namespace lposs {

struct WindowOrigin {
    Index y0 = 0;
    Index x0 = 0;

    friend bool operator==(const WindowOrigin&, const WindowOrigin&) = default;
    friend auto operator<=>(const WindowOrigin&, const WindowOrigin&) = default;
};

struct WindowPlan {
    Index image_h = 0;
    Index image_w = 0;
    Index win_h = 224;
    Index win_w = 224;
    Index stride_h = 112;
    Index stride_w = 112;
    Index patch = 16;
    std::vector<WindowOrigin> windows;

    Index size() const noexcept { return static_cast<Index>(windows.size()); }
    Index patch_rows() const noexcept { return win_h / patch; }
    Index patch_cols() const noexcept { return win_w / patch; }
    Index patches_per_window() const noexcept { return patch_rows() * patch_cols(); }
    Index node_count() const noexcept { return size() * patches_per_window(); }

    /// Joint node index of patch (py, px) in window `w`: window-major, then
    /// row-major inside the window.
    Index node_index(Index w, Index py, Index px) const noexcept {
        return w * patches_per_window() + py * patch_cols() + px;
    }
};

/// Origins 0, stride, 2 stride, ... per axis, the last one clamped to
/// dim - win so that the final window touches the border.
WindowPlan plan_windows(Index image_h, Index image_w, Index win_h, Index win_w, Index stride_h,
                        Index stride_w, Index patch = 16);

inline WindowPlan plan_windows(Index image_h, Index image_w, Index win, Index stride, Index patch = 16) {
    return plan_windows(image_h, image_w, win, win, stride, stride, patch);
}

struct JointNodes {
    RowMatrix<double> features;        // one row per node
    Eigen::MatrixX2d positions;        // (y, x) patch centers in image pixels
    ScoreMatrix<double> scores;        // stacked initial predictions
};

/// Stacks per-window patch grids into joint graph nodes.
JointNodes assemble_joint(const WindowPlan& plan, std::span<const FeatureGrid> per_window_vm,
                          std::span<const ScoreGrid> per_window_scores);

/// Node (y, x) centers only; same ordering as `assemble_joint`.
Eigen::MatrixX2d joint_positions(const WindowPlan& plan);

/// Inverse of the stacking: one patch-resolution score grid per window.
std::vector<ScoreGrid> split_joint(const WindowPlan& plan, const ScoreMatrix<double>& node_scores);

/// Per-pixel mean over every window that contains the pixel. Inputs are
/// win_h x win_w grids in plan order.
ScoreGrid combine_windows(const WindowPlan& plan, std::span<const ScoreGrid> per_window_pixel_scores);

/// Output size that scales min(h, w) to `target`, rounding the long side to
/// the nearest integer.
std::pair<Index, Index> shorter_side_size(Index h, Index w, Index target);

/// Bilinear aspect-preserving resize so that min(H, W) == target.
RgbImage resize_shorter_side(const RgbImage& image, Index target = 448);

RgbImage bilinear_resize(const RgbImage& image, Index out_h, Index out_w);

} // namespace lposs

#endif // LPOSS_WINDOWS_HPP
