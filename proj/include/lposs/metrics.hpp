// metrics.hpp
#ifndef LPOSS_METRICS_HPP
#define LPOSS_METRICS_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "lposs/grid.hpp"

namespace lposs {

using BoolMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-class IoU (nullopt for classes absent from both prediction and ground
/// truth) and their mean over the remaining classes.
struct IouReport {
    std::vector<std::optional<double>> per_class;
    double mean = 0.0;
};

/// counts(gt, pred) over non-ignore ground-truth pixels. A prediction equal
/// to the ignore label counts as a miss for the ground-truth class.
class ConfusionAccumulator {
public:
    using Counts = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

    explicit ConfusionAccumulator(Index num_classes, std::int32_t ignore_label = kDefaultIgnoreLabel);

    void accumulate(const LabelMap& pred, const LabelMap& gt);
    void merge(const ConfusionAccumulator& other);

    Index num_classes() const noexcept { return counts_.rows(); }
    std::int32_t ignore_label() const noexcept { return ignore_label_; }
    const Counts& counts() const noexcept { return counts_; }
    const Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>& missed() const noexcept { return missed_; }
    std::int64_t total() const { return counts_.sum() + missed_.sum(); }

private:
    Counts counts_;
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> missed_;
    std::int32_t ignore_label_;
};

/// IoU_c = TP / (TP + FP + FN) on the 0-100 scale.
IouReport miou(const ConfusionAccumulator& acc);

struct BoundaryParams {
    double dilation_ratio = 0.02;
    Index min_band = 1;
};

/// max(min_band, round(ratio * image diagonal)).
Index boundary_band_width(Index height, Index width, const BoundaryParams& params);

/// Mask pixels within Chebyshev distance `d` of the complement; pixels outside
/// the image count as complement.
BoolMask mask_boundary(const BoolMask& mask, Index d);

/// Per-class Boundary IoU in [0, 1] for a single image, mean over classes
/// whose banded sets are not both empty.
IouReport boundary_iou(const LabelMap& pred, const LabelMap& gt, Index num_classes,
                       const BoundaryParams& params = {});

/// Dataset-level Boundary IoU: band intersections and unions summed over
/// images per class, reported on the 0-100 scale.
class BoundaryAccumulator {
public:
    explicit BoundaryAccumulator(Index num_classes, BoundaryParams params = {});

    void accumulate(const LabelMap& pred, const LabelMap& gt);
    void merge(const BoundaryAccumulator& other);
    IouReport report() const;

private:
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> intersections_;
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> unions_;
    BoundaryParams params_;
};

struct OracleResult {
    double miou = 0.0;         // 0-100
    double boundary_iou = 0.0; // 0-100
};

/// Ground truth reduced to patch resolution and blown back up, scored as a
/// prediction against the original. `num_classes` <= 0 infers it from gt.
LabelMap patch_resolution_roundtrip(const LabelMap& gt, Index patch);
OracleResult oracle_patch_resolution(const LabelMap& gt, Index patch, Index num_classes = 0,
                                     const BoundaryParams& params = {});

/// Largest non-ignore label + 1.
Index infer_num_classes(const LabelMap& map);

} // namespace lposs

#endif // LPOSS_METRICS_HPP
