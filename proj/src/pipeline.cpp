#include "lposs/pipeline.hpp"

#include <algorithm>

namespace lposs {

bool ClassEmbeddings::normalized(double tol) const {
    for (Index c = 0; c < matrix.cols(); ++c)
        if (std::abs(matrix.col(c).norm() - 1.0) > tol)
            return false;
    return true;
}

void PipelineConfig::validate() const {
    patch_graph.validate();
    pixel_graph.validate();
    propagation.validate();
    if (patch < 1)
        throw ValidationError("patch size must be >= 1");
    if (short_side < 0)
        throw ValidationError("short side must be >= 0");
    for (const WindowSetup* s : {&windows, ensemble ? &*ensemble : nullptr}) {
        if (s == nullptr)
            continue;
        if (s->win < 1 || s->stride < 1)
            throw ValidationError("window size and stride must be positive");
        if (s->win % patch != 0)
            throw ValidationError("window size must be a multiple of the patch size");
        if (s->stride > s->win)
            throw ValidationError("stride larger than window leaves pixels uncovered");
    }
}

ScoreGrid vlm_scores(const FeatureGrid& z_vlm, const ClassEmbeddings& classes) {
    if (z_vlm.channels() != classes.dim())
        throw ValidationError("vlm_scores: feature dim " + std::to_string(z_vlm.channels()) +
                              " != class embedding dim " + std::to_string(classes.dim()));
    ScoreGrid::Storage y = z_vlm.matrix() * classes.matrix;
    return ScoreGrid(z_vlm.height(), z_vlm.width(), std::move(y));
}

ScoreGrid dinoiser_baseline(const FeatureGrid& z_vm, const ScoreGrid& y_vlm) {
    if (z_vm.height() != y_vlm.height() || z_vm.width() != y_vlm.width())
        throw ValidationError("dinoiser_baseline: feature and score grids differ in size");
    const Eigen::MatrixXd affinity = z_vm.matrix() * z_vm.matrix().transpose();
    ScoreGrid::Storage y = affinity * y_vlm.matrix();
    return ScoreGrid(y_vlm.height(), y_vlm.width(), std::move(y));
}

ScoreGrid dinoiser_baseline(const FeatureGrid& z_vm, const FeatureGrid& z_vlm, const ClassEmbeddings& classes) {
    if (z_vm.height() != z_vlm.height() || z_vm.width() != z_vlm.width())
        throw ValidationError("dinoiser_baseline: VM and VLM grids differ in size");
    const Eigen::MatrixXd affinity = z_vm.matrix() * z_vm.matrix().transpose();
    FeatureGrid propagated(z_vlm.height(), z_vlm.width(), FeatureGrid::Storage(affinity * z_vlm.matrix()));
    return vlm_scores(l2_normalize(propagated), classes);
}

std::vector<ScoreGrid> initial_window_scores(const WindowInputs& inputs, const ClassEmbeddings& classes,
                                             const PipelineConfig& cfg) {
    std::vector<ScoreGrid> out;
    switch (cfg.initial_scores) {
    case InitialScores::external:
        if (inputs.external.empty())
            throw ValidationError("external initial scores requested but none supplied");
        return inputs.external;
    case InitialScores::vlm_dot:
        for (const auto& z : inputs.vlm)
            out.push_back(vlm_scores(z, classes));
        return out;
    case InitialScores::dinoiser:
        if (inputs.vm.size() != inputs.vlm.size())
            throw ValidationError("dinoiser scores need one VM grid per VLM grid");
        for (std::size_t w = 0; w < inputs.vlm.size(); ++w) {
            const FeatureGrid vm = l2_normalize(inputs.vm[w]);
            out.push_back(cfg.dinoiser_normalize_after
                              ? dinoiser_baseline(vm, inputs.vlm[w], classes)
                              : dinoiser_baseline(vm, vlm_scores(inputs.vlm[w], classes)));
        }
        return out;
    }
    return out;
}

LpossResult lposs_detailed(const WindowPlan& plan, const WindowInputs& inputs, const ClassEmbeddings& classes,
                           const PipelineConfig& cfg) {
    cfg.validate();
    const std::vector<ScoreGrid> initial = initial_window_scores(inputs, classes, cfg);

    std::vector<FeatureGrid> vm;
    vm.reserve(inputs.vm.size());
    for (const auto& g : inputs.vm)
        vm.push_back(l2_normalize(g));

    const JointNodes nodes = assemble_joint(plan, vm, initial);
    const SparseAdjacency graph = build_patch_graph(nodes.features, nodes.positions, cfg.patch_graph);
    const NormalizedAdjacency s_hat = symmetric_normalize(graph);

    LpossResult result;
    result.node_scores = lp_solve_cg(s_hat, nodes.scores, cfg.propagation);

    std::vector<ScoreGrid> upsampled;
    upsampled.reserve(plan.windows.size());
    for (const auto& g : split_joint(plan, result.node_scores))
        upsampled.push_back(bilinear_resize(g, plan.win_h, plan.win_w));
    result.image_scores = combine_windows(plan, upsampled);
    return result;
}

ScoreGrid lposs(const WindowPlan& plan, const WindowInputs& inputs, const ClassEmbeddings& classes,
                const PipelineConfig& cfg) {
    return lposs_detailed(plan, inputs, classes, cfg).image_scores;
}

ScoreGrid lposs_plus(const ScoreGrid& image_scores, const RgbImage& rgb, const PipelineConfig& cfg) {
    cfg.validate();
    if (rgb.height != image_scores.height() || rgb.width != image_scores.width())
        throw ValidationError("lposs_plus: image is " + std::to_string(rgb.height) + "x" +
                              std::to_string(rgb.width) + " but scores are " +
                              std::to_string(image_scores.height()) + "x" + std::to_string(image_scores.width()));
    const SparseAdjacency graph = build_pixel_graph(srgb_to_lab(rgb), cfg.pixel_graph);
    const NormalizedAdjacency s_hat = symmetric_normalize(graph);
    const ScoreMatrix<double> y = image_scores.matrix();
    ScoreGrid::Storage refined = lp_solve_cg(s_hat, y, cfg.propagation);
    return ScoreGrid(image_scores.height(), image_scores.width(), std::move(refined));
}

namespace {

ScoreGrid::Storage shift_and_scale(const ScoreGrid::Storage& s) {
    ScoreGrid::Storage out = s.colwise() - s.rowwise().minCoeff();
    const double mass = out.sum() / static_cast<double>(std::max<Index>(out.rows(), 1));
    if (mass > 0)
        out /= mass;
    else
        out.setConstant(1.0 / static_cast<double>(std::max<Index>(out.cols(), 1)));
    return out;
}

} // namespace

ScoreGrid ensemble(const ScoreGrid& a, const ScoreGrid& b) {
    if (a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels())
        throw ValidationError("ensemble: score grids differ in shape");
    if (a.channels() < 1)
        return a;
    ScoreGrid::Storage mean = 0.5 * (shift_and_scale(a.matrix()) + shift_and_scale(b.matrix()));
    return ScoreGrid(a.height(), a.width(), std::move(mean));
}

LabelMap argmax_labels(const ScoreGrid& scores, std::int32_t ignore_label) {
    if (scores.channels() < 1)
        throw ValidationError("argmax_labels needs at least one class");
    LabelMap out(scores.height(), scores.width(), 0, ignore_label);
    const auto& m = scores.matrix();
    for (Index y = 0; y < scores.height(); ++y)
        for (Index x = 0; x < scores.width(); ++x) {
            const Index i = y * scores.width() + x;
            Index best = 0;
            for (Index c = 1; c < m.cols(); ++c)
                if (m(i, c) > m(i, best))
                    best = c;
            out(y, x) = static_cast<std::int32_t>(best);
        }
    return out;
}

std::pair<Index, Index> working_size(Index h, Index w, const PipelineConfig& cfg) {
    if (cfg.short_side == 0)
        return {h, w};
    return shorter_side_size(h, w, cfg.short_side);
}

ScoreGrid propagate_image(const ImageInputs& inputs, const ClassEmbeddings& classes, const PipelineConfig& cfg) {
    cfg.validate();
    const auto [h, w] = working_size(inputs.rgb.height, inputs.rgb.width, cfg);
    const WindowPlan plan = plan_windows(h, w, cfg.windows.win, cfg.windows.stride, cfg.patch);
    ScoreGrid scores = lposs(plan, inputs.primary, classes, cfg);
    if (cfg.ensemble) {
        if (!inputs.secondary)
            throw ValidationError("ensemble configured but no features for the second window setup");
        const WindowPlan plan2 = plan_windows(h, w, cfg.ensemble->win, cfg.ensemble->stride, cfg.patch);
        scores = ensemble(scores, lposs(plan2, *inputs.secondary, classes, cfg));
    }
    return scores;
}

ScoreGrid refine_image(const ScoreGrid& working_scores, const RgbImage& rgb, const PipelineConfig& cfg) {
    const auto [h, w] = working_size(rgb.height, rgb.width, cfg);
    if (working_scores.height() != h || working_scores.width() != w)
        throw ValidationError("scores are " + std::to_string(working_scores.height()) + "x" +
                              std::to_string(working_scores.width()) + ", working size is " + std::to_string(h) +
                              "x" + std::to_string(w));
    return lposs_plus(working_scores, bilinear_resize(rgb, h, w), cfg);
}

ImageResult run_image(const ImageInputs& inputs, const ClassEmbeddings& classes, const PipelineConfig& cfg) {
    const ScoreGrid patch_level = propagate_image(inputs, classes, cfg);
    const ScoreGrid pixel_level = refine_image(patch_level, inputs.rgb, cfg);

    ImageResult result;
    result.lposs = bilinear_resize(patch_level, inputs.rgb.height, inputs.rgb.width);
    result.lposs_plus = bilinear_resize(pixel_level, inputs.rgb.height, inputs.rgb.width);
    result.lposs_labels = argmax_labels(result.lposs);
    result.lposs_plus_labels = argmax_labels(result.lposs_plus);
    return result;
}

} // namespace lposs
