#include "lposs/windows.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lposs {

namespace {

std::vector<Index> axis_origins(Index dim, Index win, Index stride) {
    const Index count = std::max<Index>(dim - win + stride - 1, 0) / stride + 1;
    std::vector<Index> origins;
    for (Index i = 0; i < count; ++i) {
        const Index end = std::min(i * stride + win, dim);
        const Index o = std::max<Index>(end - win, 0);
        if (origins.empty() || origins.back() != o)
            origins.push_back(o);
    }
    return origins;
}

} // namespace

WindowPlan plan_windows(Index image_h, Index image_w, Index win_h, Index win_w, Index stride_h,
                        Index stride_w, Index patch) {
    if (win_h < 1 || win_w < 1 || stride_h < 1 || stride_w < 1 || patch < 1)
        throw ValidationError("window, stride and patch sizes must be positive");
    if (win_h % patch != 0 || win_w % patch != 0)
        throw ValidationError("window size must be a multiple of the patch size");
    if (stride_h > win_h || stride_w > win_w)
        throw ValidationError("stride larger than window leaves pixels uncovered");
    if (image_h < win_h || image_w < win_w)
        throw ValidationError("image smaller than window: " + std::to_string(image_h) + "x" +
                              std::to_string(image_w) + " vs " + std::to_string(win_h) + "x" +
                              std::to_string(win_w));

    WindowPlan plan;
    plan.image_h = image_h;
    plan.image_w = image_w;
    plan.win_h = win_h;
    plan.win_w = win_w;
    plan.stride_h = stride_h;
    plan.stride_w = stride_w;
    plan.patch = patch;
    for (Index y0 : axis_origins(image_h, win_h, stride_h))
        for (Index x0 : axis_origins(image_w, win_w, stride_w))
            plan.windows.push_back({y0, x0});
    return plan;
}

Eigen::MatrixX2d joint_positions(const WindowPlan& plan) {
    Eigen::MatrixX2d pos(plan.node_count(), 2);
    const double p = static_cast<double>(plan.patch);
    for (Index w = 0; w < plan.size(); ++w) {
        const auto& o = plan.windows[static_cast<std::size_t>(w)];
        for (Index py = 0; py < plan.patch_rows(); ++py)
            for (Index px = 0; px < plan.patch_cols(); ++px) {
                const Index n = plan.node_index(w, py, px);
                pos(n, 0) = static_cast<double>(o.y0) + (static_cast<double>(py) + 0.5) * p;
                pos(n, 1) = static_cast<double>(o.x0) + (static_cast<double>(px) + 0.5) * p;
            }
    }
    return pos;
}

JointNodes assemble_joint(const WindowPlan& plan, std::span<const FeatureGrid> per_window_vm,
                          std::span<const ScoreGrid> per_window_scores) {
    const auto k = static_cast<std::size_t>(plan.size());
    if (per_window_vm.size() != k || per_window_scores.size() != k)
        throw ValidationError("assemble_joint: expected " + std::to_string(k) + " windows, got " +
                              std::to_string(per_window_vm.size()) + " feature and " +
                              std::to_string(per_window_scores.size()) + " score grids");
    if (k == 0)
        throw ValidationError("assemble_joint: empty window plan");

    const Index np = plan.patches_per_window();
    const Index dim = per_window_vm[0].channels();
    const Index classes = per_window_scores[0].channels();
    JointNodes nodes;
    nodes.features.resize(plan.node_count(), dim);
    nodes.scores.resize(plan.node_count(), classes);
    for (std::size_t w = 0; w < k; ++w) {
        const auto& f = per_window_vm[w];
        const auto& s = per_window_scores[w];
        if (f.height() != plan.patch_rows() || f.width() != plan.patch_cols() || f.channels() != dim)
            throw ValidationError("assemble_joint: feature grid of window " + std::to_string(w) +
                                  " has the wrong shape");
        if (s.height() != plan.patch_rows() || s.width() != plan.patch_cols() || s.channels() != classes)
            throw ValidationError("assemble_joint: score grid of window " + std::to_string(w) +
                                  " has the wrong shape");
        nodes.features.middleRows(static_cast<Index>(w) * np, np) = f.matrix();
        nodes.scores.middleRows(static_cast<Index>(w) * np, np) = s.matrix();
    }
    nodes.positions = joint_positions(plan);
    return nodes;
}

std::vector<ScoreGrid> split_joint(const WindowPlan& plan, const ScoreMatrix<double>& node_scores) {
    if (node_scores.rows() != plan.node_count())
        throw ValidationError("split_joint: node count mismatch");
    const Index np = plan.patches_per_window();
    std::vector<ScoreGrid> out;
    out.reserve(plan.windows.size());
    for (Index w = 0; w < plan.size(); ++w)
        out.emplace_back(plan.patch_rows(), plan.patch_cols(),
                         ScoreGrid::Storage(node_scores.middleRows(w * np, np)));
    return out;
}

ScoreGrid combine_windows(const WindowPlan& plan, std::span<const ScoreGrid> per_window_pixel_scores) {
    if (per_window_pixel_scores.size() != plan.windows.size() || plan.windows.empty())
        throw ValidationError("combine_windows: window count mismatch");
    const Index classes = per_window_pixel_scores[0].channels();

    ScoreGrid sum(plan.image_h, plan.image_w, classes);
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> coverage =
        Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(plan.image_h, plan.image_w);
    for (std::size_t w = 0; w < plan.windows.size(); ++w) {
        const auto& g = per_window_pixel_scores[w];
        if (g.height() != plan.win_h || g.width() != plan.win_w || g.channels() != classes)
            throw ValidationError("combine_windows: window " + std::to_string(w) + " has the wrong shape");
        const auto& o = plan.windows[w];
        for (Index y = 0; y < plan.win_h; ++y)
            for (Index x = 0; x < plan.win_w; ++x) {
                sum.cell(o.y0 + y, o.x0 + x) += g.cell(y, x);
                ++coverage(o.y0 + y, o.x0 + x);
            }
    }
    for (Index y = 0; y < plan.image_h; ++y)
        for (Index x = 0; x < plan.image_w; ++x) {
            if (coverage(y, x) == 0)
                throw ValidationError("combine_windows: pixel not covered by any window");
            sum.cell(y, x) /= static_cast<double>(coverage(y, x));
        }
    return sum;
}

std::pair<Index, Index> shorter_side_size(Index h, Index w, Index target) {
    if (h < 1 || w < 1)
        throw ValidationError("cannot resize an empty image");
    if (target < 1)
        throw ValidationError("shorter-side target must be positive");
    const double scale = static_cast<double>(target) / static_cast<double>(std::min(h, w));
    if (h <= w)
        return {target, static_cast<Index>(std::lround(static_cast<double>(w) * scale))};
    return {static_cast<Index>(std::lround(static_cast<double>(h) * scale)), target};
}

RgbImage bilinear_resize(const RgbImage& image, Index out_h, Index out_w) {
    if (out_h == image.height && out_w == image.width)
        return image;
    FeatureGrid g(image.height, image.width, image.pixels.cast<double>());
    const FeatureGrid r = bilinear_resize(g, out_h, out_w);
    RgbImage out(out_h, out_w);
    out.pixels = r.matrix().array().round().max(0.0).min(255.0).cast<std::uint8_t>().matrix();
    return out;
}

RgbImage resize_shorter_side(const RgbImage& image, Index target) {
    const auto [h, w] = shorter_side_size(image.height, image.width, target);
    return bilinear_resize(image, h, w);
}

} // namespace lposs
