// grid.hpp
//
// Dense per-cell grids (features, class scores), label maps and RGB rasters,
// plus the resampling helpers shared by the patch and pixel stages.

#ifndef LPOSS_GRID_HPP
#define LPOSS_GRID_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "lposs/error.hpp"

namespace lposs {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureKind {};
struct ScoreKind {};

/// H x W grid with a fixed number of channels per cell. Storage is one row per
/// cell (row-major over cells), so `matrix()` is directly the N x d feature
/// matrix or the N x C score matrix of the graph stages.
template <typename Scalar, typename Kind>
class Grid {
public:
    using Storage = RowMatrix<Scalar>;

    Grid() = default;

    Grid(Index height, Index width, Index channels)
        : height_(height), width_(width), data_(Storage::Zero(height * width, channels)) {
        if (height < 0 || width < 0 || channels < 0)
            throw ValidationError("grid dimensions must be non-negative");
    }

    Grid(Index height, Index width, Storage data)
        : height_(height), width_(width), data_(std::move(data)) {
        if (data_.rows() != height * width)
            throw ValidationError("grid data has " + std::to_string(data_.rows()) +
                                  " cells, expected " + std::to_string(height * width));
    }

    static Grid constant(Index height, Index width, Index channels, Scalar value) {
        return Grid(height, width, Storage::Constant(height * width, channels, value));
    }

    Index height() const noexcept { return height_; }
    Index width() const noexcept { return width_; }
    Index channels() const noexcept { return data_.cols(); }
    Index cells() const noexcept { return data_.rows(); }

    Scalar& operator()(Index y, Index x, Index c) { return data_(y * width_ + x, c); }
    Scalar operator()(Index y, Index x, Index c) const { return data_(y * width_ + x, c); }

    auto cell(Index y, Index x) { return data_.row(y * width_ + x); }
    auto cell(Index y, Index x) const { return data_.row(y * width_ + x); }

    Storage& matrix() noexcept { return data_; }
    const Storage& matrix() const noexcept { return data_; }

    bool all_finite() const { return data_.allFinite(); }

private:
    Index height_ = 0;
    Index width_ = 0;
    Storage data_;
};

template <typename Scalar>
using BasicFeatureGrid = Grid<Scalar, FeatureKind>;
template <typename Scalar>
using BasicScoreGrid = Grid<Scalar, ScoreKind>;

using FeatureGrid = BasicFeatureGrid<double>;
using ScoreGrid = BasicScoreGrid<double>;

inline constexpr std::int32_t kDefaultIgnoreLabel = 255;

/// Integer class id per pixel. `ignore_label` marks unlabeled pixels.
class LabelMap {
public:
    using Storage = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    LabelMap() = default;
    LabelMap(Index height, Index width, std::int32_t fill = 0,
             std::int32_t ignore_label = kDefaultIgnoreLabel)
        : labels_(Storage::Constant(height, width, fill)), ignore_label_(ignore_label) {}
    explicit LabelMap(Storage labels, std::int32_t ignore_label = kDefaultIgnoreLabel)
        : labels_(std::move(labels)), ignore_label_(ignore_label) {}

    Index height() const noexcept { return labels_.rows(); }
    Index width() const noexcept { return labels_.cols(); }
    std::int32_t ignore_label() const noexcept { return ignore_label_; }
    void set_ignore_label(std::int32_t v) noexcept { ignore_label_ = v; }

    std::int32_t& operator()(Index y, Index x) { return labels_(y, x); }
    std::int32_t operator()(Index y, Index x) const { return labels_(y, x); }

    Storage& labels() noexcept { return labels_; }
    const Storage& labels() const noexcept { return labels_; }

    friend bool operator==(const LabelMap& a, const LabelMap& b) {
        return a.ignore_label_ == b.ignore_label_ && a.labels_.rows() == b.labels_.rows() &&
               a.labels_.cols() == b.labels_.cols() && a.labels_ == b.labels_;
    }

private:
    Storage labels_;
    std::int32_t ignore_label_ = kDefaultIgnoreLabel;
};

/// 8-bit sRGB raster, one row per pixel.
struct RgbImage {
    using Storage = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

    Index height = 0;
    Index width = 0;
    Storage pixels;

    RgbImage() = default;
    RgbImage(Index h, Index w) : height(h), width(w), pixels(Storage::Zero(h * w, 3)) {}

    auto at(Index y, Index x) { return pixels.row(y * width + x); }
    auto at(Index y, Index x) const { return pixels.row(y * width + x); }
};

/// Divides every cell vector by its Euclidean norm. Cells whose norm is below
/// 1e-12 are left unchanged.
template <typename Scalar, typename Kind>
Grid<Scalar, Kind> l2_normalize(const Grid<Scalar, Kind>& grid) {
    if (grid.channels() < 1)
        throw ValidationError("l2_normalize requires at least one channel");
    Grid<Scalar, Kind> out = grid;
    auto& m = out.matrix();
    for (Index i = 0; i < m.rows(); ++i) {
        const Scalar norm = m.row(i).norm();
        if (norm >= Scalar(1e-12))
            m.row(i) /= norm;
    }
    return out;
}

namespace detail {

struct LinearTap {
    Index lo;
    Index hi;
    double frac;
};

// Half-pixel-center source coordinate, clamped to the valid range.
inline LinearTap linear_tap(Index dst, Index in_size, Index out_size) {
    double src = (static_cast<double>(dst) + 0.5) * static_cast<double>(in_size) /
                     static_cast<double>(out_size) -
                 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
    const Index lo = static_cast<Index>(std::floor(src));
    const Index hi = std::min(lo + 1, in_size - 1);
    return {lo, hi, src - static_cast<double>(lo)};
}

inline Index nearest_tap(Index dst, Index in_size, Index out_size) {
    const double src =
        (static_cast<double>(dst) + 0.5) * static_cast<double>(in_size) / static_cast<double>(out_size);
    return std::clamp<Index>(static_cast<Index>(std::floor(src)), 0, in_size - 1);
}

} // namespace detail

/// Bilinear resampling with half-pixel centers; channels are interpolated
/// independently.
template <typename Scalar, typename Kind>
Grid<Scalar, Kind> bilinear_resize(const Grid<Scalar, Kind>& grid, Index out_h, Index out_w) {
    if (out_h < 1 || out_w < 1)
        throw ValidationError("bilinear_resize output size must be positive");
    if (grid.height() < 1 || grid.width() < 1)
        throw ValidationError("bilinear_resize input grid is empty");

    Grid<Scalar, Kind> out(out_h, out_w, grid.channels());
    const auto& in = grid.matrix();
    const Index in_w = grid.width();
    for (Index y = 0; y < out_h; ++y) {
        const auto ty = detail::linear_tap(y, grid.height(), out_h);
        const Scalar wy = static_cast<Scalar>(ty.frac);
        for (Index x = 0; x < out_w; ++x) {
            const auto tx = detail::linear_tap(x, in_w, out_w);
            const Scalar wx = static_cast<Scalar>(tx.frac);
            for (Index c = 0; c < grid.channels(); ++c) {
                const Scalar top = std::lerp(in(ty.lo * in_w + tx.lo, c), in(ty.lo * in_w + tx.hi, c), wx);
                const Scalar bottom =
                    std::lerp(in(ty.hi * in_w + tx.lo, c), in(ty.hi * in_w + tx.hi, c), wx);
                out(y, x, c) = std::lerp(top, bottom, wy);
            }
        }
    }
    return out;
}

/// sRGB -> CIELAB (D65), rescaled to (L/100, (a+128)/255, (b+128)/255).
FeatureGrid srgb_to_lab(const RgbImage& image);

/// Majority vote over factor x factor blocks; ignore pixels do not vote, ties
/// go to the smallest label, all-ignore blocks stay ignore.
LabelMap label_downsample(const LabelMap& map, Index factor);

/// Nearest-neighbour resampling with half-pixel centers.
LabelMap label_upsample_nearest(const LabelMap& map, Index out_h, Index out_w);

} // namespace lposs

#endif // LPOSS_GRID_HPP
