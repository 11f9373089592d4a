#include "lposs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lposs {

namespace {

void check_same_size(const LabelMap& pred, const LabelMap& gt) {
    if (pred.height() != gt.height() || pred.width() != gt.width())
        throw ValidationError("prediction is " + std::to_string(pred.height()) + "x" +
                              std::to_string(pred.width()) + " but ground truth is " +
                              std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
}

void check_label(std::int32_t label, Index num_classes, const char* what) {
    if (label < 0 || label >= num_classes)
        throw ValidationError(std::string(what) + " label " + std::to_string(label) + " outside [0, " +
                              std::to_string(num_classes) + ")");
}

IouReport finish(const std::vector<std::optional<double>>& per_class) {
    IouReport r;
    r.per_class = per_class;
    double sum = 0;
    int count = 0;
    for (const auto& v : per_class)
        if (v) {
            sum += *v;
            ++count;
        }
    r.mean = count > 0 ? sum / count : 0.0;
    return r;
}

// Binary erosion by a (2d+1)^2 square with zero padding, done as two 1-D
// sliding minimums over prefix counts of background pixels.
BoolMask erode(const BoolMask& mask, Index d) {
    const Index h = mask.rows(), w = mask.cols();
    BoolMask rows(h, w);
    std::vector<Index> prefix(static_cast<std::size_t>(std::max(h, w) + 1));
    for (Index y = 0; y < h; ++y) {
        prefix[0] = 0;
        for (Index x = 0; x < w; ++x)
            prefix[static_cast<std::size_t>(x + 1)] = prefix[static_cast<std::size_t>(x)] + (mask(y, x) ? 0 : 1);
        for (Index x = 0; x < w; ++x) {
            const bool inside = x - d >= 0 && x + d < w;
            const Index lo = std::max<Index>(x - d, 0), hi = std::min(x + d, w - 1);
            rows(y, x) = inside && prefix[static_cast<std::size_t>(hi + 1)] == prefix[static_cast<std::size_t>(lo)];
        }
    }
    BoolMask out(h, w);
    for (Index x = 0; x < w; ++x) {
        prefix[0] = 0;
        for (Index y = 0; y < h; ++y)
            prefix[static_cast<std::size_t>(y + 1)] = prefix[static_cast<std::size_t>(y)] + (rows(y, x) ? 0 : 1);
        for (Index y = 0; y < h; ++y) {
            const bool inside = y - d >= 0 && y + d < h;
            const Index lo = std::max<Index>(y - d, 0), hi = std::min(y + d, h - 1);
            out(y, x) = inside && prefix[static_cast<std::size_t>(hi + 1)] == prefix[static_cast<std::size_t>(lo)];
        }
    }
    return out;
}

struct BandCounts {
    std::vector<std::int64_t> intersection;
    std::vector<std::int64_t> uni;
};

BandCounts band_counts(const LabelMap& pred, const LabelMap& gt, Index num_classes, const BoundaryParams& params) {
    check_same_size(pred, gt);
    const Index d = boundary_band_width(gt.height(), gt.width(), params);
    const BoolMask valid = (gt.labels().array() != gt.ignore_label());
    BandCounts out{std::vector<std::int64_t>(static_cast<std::size_t>(num_classes), 0),
                   std::vector<std::int64_t>(static_cast<std::size_t>(num_classes), 0)};
    for (Index y = 0; y < gt.height(); ++y)
        for (Index x = 0; x < gt.width(); ++x) {
            if (valid(y, x))
                check_label(gt(y, x), num_classes, "ground-truth");
            if (valid(y, x) && pred(y, x) != pred.ignore_label())
                check_label(pred(y, x), num_classes, "predicted");
        }
    for (Index c = 0; c < num_classes; ++c) {
        const BoolMask g = (gt.labels().array() == static_cast<std::int32_t>(c)) && valid;
        const BoolMask p = (pred.labels().array() == static_cast<std::int32_t>(c)) && valid;
        if (!g.any() && !p.any())
            continue;
        const BoolMask gb = mask_boundary(g, d);
        const BoolMask pb = mask_boundary(p, d);
        out.intersection[static_cast<std::size_t>(c)] = (gb && pb).count();
        out.uni[static_cast<std::size_t>(c)] = (gb || pb).count();
    }
    return out;
}

} // namespace

ConfusionAccumulator::ConfusionAccumulator(Index num_classes, std::int32_t ignore_label)
    : counts_(Counts::Zero(std::max<Index>(num_classes, 0), std::max<Index>(num_classes, 0))),
      missed_(Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>::Zero(std::max<Index>(num_classes, 0))),
      ignore_label_(ignore_label) {
    if (num_classes < 1)
        throw ValidationError("confusion accumulator needs at least one class");
}

void ConfusionAccumulator::accumulate(const LabelMap& pred, const LabelMap& gt) {
    check_same_size(pred, gt);
    const Index n = num_classes();
    // Validate first so a bad map leaves the counts untouched.
    for (Index y = 0; y < gt.height(); ++y)
        for (Index x = 0; x < gt.width(); ++x) {
            if (gt(y, x) == ignore_label_)
                continue;
            check_label(gt(y, x), n, "ground-truth");
            if (pred(y, x) != ignore_label_)
                check_label(pred(y, x), n, "predicted");
        }
    for (Index y = 0; y < gt.height(); ++y)
        for (Index x = 0; x < gt.width(); ++x) {
            if (gt(y, x) == ignore_label_)
                continue;
            if (pred(y, x) == ignore_label_)
                ++missed_(gt(y, x));
            else
                ++counts_(gt(y, x), pred(y, x));
        }
}

void ConfusionAccumulator::merge(const ConfusionAccumulator& other) {
    if (other.num_classes() != num_classes())
        throw ValidationError("cannot merge accumulators with different class counts");
    counts_ += other.counts_;
    missed_ += other.missed_;
}

IouReport miou(const ConfusionAccumulator& acc) {
    if (acc.total() == 0)
        throw ValidationError("mIoU of an empty accumulator");
    const auto& m = acc.counts();
    std::vector<std::optional<double>> per_class(static_cast<std::size_t>(acc.num_classes()));
    for (Index c = 0; c < acc.num_classes(); ++c) {
        const std::int64_t tp = m(c, c);
        const std::int64_t uni = m.row(c).sum() + acc.missed()(c) + m.col(c).sum() - tp;
        if (uni > 0)
            per_class[static_cast<std::size_t>(c)] = 100.0 * static_cast<double>(tp) / static_cast<double>(uni);
    }
    return finish(per_class);
}

Index boundary_band_width(Index height, Index width, const BoundaryParams& params) {
    if (!(params.dilation_ratio > 0))
        throw ValidationError("boundary dilation ratio must be > 0");
    const double diag = std::sqrt(static_cast<double>(height * height + width * width));
    return std::max<Index>(params.min_band, static_cast<Index>(std::lround(params.dilation_ratio * diag)));
}

BoolMask mask_boundary(const BoolMask& mask, Index d) {
    return mask && !erode(mask, d);
}

IouReport boundary_iou(const LabelMap& pred, const LabelMap& gt, Index num_classes, const BoundaryParams& params) {
    const BandCounts counts = band_counts(pred, gt, num_classes, params);
    std::vector<std::optional<double>> per_class(static_cast<std::size_t>(num_classes));
    for (std::size_t c = 0; c < per_class.size(); ++c)
        if (counts.uni[c] > 0)
            per_class[c] = static_cast<double>(counts.intersection[c]) / static_cast<double>(counts.uni[c]);
    return finish(per_class);
}

BoundaryAccumulator::BoundaryAccumulator(Index num_classes, BoundaryParams params)
    : intersections_(Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>::Zero(std::max<Index>(num_classes, 0))),
      unions_(Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>::Zero(std::max<Index>(num_classes, 0))),
      params_(params) {
    if (num_classes < 1)
        throw ValidationError("boundary accumulator needs at least one class");
}

void BoundaryAccumulator::accumulate(const LabelMap& pred, const LabelMap& gt) {
    const BandCounts counts = band_counts(pred, gt, intersections_.size(), params_);
    for (Index c = 0; c < intersections_.size(); ++c) {
        intersections_(c) += counts.intersection[static_cast<std::size_t>(c)];
        unions_(c) += counts.uni[static_cast<std::size_t>(c)];
    }
}

void BoundaryAccumulator::merge(const BoundaryAccumulator& other) {
    if (other.intersections_.size() != intersections_.size())
        throw ValidationError("cannot merge accumulators with different class counts");
    intersections_ += other.intersections_;
    unions_ += other.unions_;
}

IouReport BoundaryAccumulator::report() const {
    std::vector<std::optional<double>> per_class(static_cast<std::size_t>(intersections_.size()));
    for (Index c = 0; c < intersections_.size(); ++c)
        if (unions_(c) > 0)
            per_class[static_cast<std::size_t>(c)] =
                100.0 * static_cast<double>(intersections_(c)) / static_cast<double>(unions_(c));
    return finish(per_class);
}

Index infer_num_classes(const LabelMap& map) {
    std::int32_t top = -1;
    for (Index y = 0; y < map.height(); ++y)
        for (Index x = 0; x < map.width(); ++x)
            if (map(y, x) != map.ignore_label())
                top = std::max(top, map(y, x));
    return std::max<Index>(top + 1, 1);
}

LabelMap patch_resolution_roundtrip(const LabelMap& gt, Index patch) {
    return label_upsample_nearest(label_downsample(gt, patch), gt.height(), gt.width());
}

OracleResult oracle_patch_resolution(const LabelMap& gt, Index patch, Index num_classes,
                                     const BoundaryParams& params) {
    if (num_classes <= 0)
        num_classes = infer_num_classes(gt);
    const LabelMap pred = patch_resolution_roundtrip(gt, patch);
    ConfusionAccumulator acc(num_classes, gt.ignore_label());
    acc.accumulate(pred, gt);
    OracleResult r;
    r.miou = miou(acc).mean;
    r.boundary_iou = 100.0 * boundary_iou(pred, gt, num_classes, params).mean;
    return r;
}

} // namespace lposs
