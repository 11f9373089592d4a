#include "lposs/graph.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace lposs {

namespace {

// Fixed summation order so that dot(a, b) is bitwise independent of where the
// rows live in memory and of argument order.
double dot_fixed(const double* a, const double* b, Index d) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    Index t = 0;
    for (; t + 4 <= d; t += 4) {
        s0 += a[t] * b[t];
        s1 += a[t + 1] * b[t + 1];
        s2 += a[t + 2] * b[t + 2];
        s3 += a[t + 3] * b[t + 3];
    }
    for (; t < d; ++t)
        s0 += a[t] * b[t];
    return (s0 + s1) + (s2 + s3);
}

} // namespace

void PatchGraphConfig::validate() const {
    if (k < 1)
        throw ValidationError("k must be >= 1");
    if (!(gamma > 0))
        throw ValidationError("gamma must be > 0");
    if (!(sigma > 0))
        throw ValidationError("sigma must be > 0");
    if (!(appearance_bandwidth > 0))
        throw ValidationError("appearance bandwidth must be > 0");
}

void PixelGraphConfig::validate() const {
    if (r < 3 || r % 2 == 0)
        throw ValidationError("pixel neighbourhood r must be odd and >= 3, got " + std::to_string(r));
    if (!(tau > 0))
        throw ValidationError("tau must be > 0");
    if (max_nonzeros < 1)
        throw ValidationError("pixel graph memory budget must be positive");
}

double appearance_affinity(double cosine, const PatchGraphConfig& cfg) {
    switch (cfg.appearance_kernel) {
    case AppearanceKernel::power:
        return std::pow(std::max(cosine, 0.0), cfg.gamma);
    case AppearanceKernel::exp_one_minus_s:
        return std::exp(-(1.0 - std::min(cosine, 1.0)) / cfg.appearance_bandwidth);
    }
    return 0.0;
}

double spatial_affinity(double squared_distance, const PatchGraphConfig& cfg) {
    switch (cfg.spatial_kernel) {
    case SpatialKernel::rbf:
        return std::exp(-squared_distance / cfg.sigma);
    case SpatialKernel::linear:
        return std::max(0.0, 1.0 - squared_distance / cfg.sigma);
    }
    return 0.0;
}

SparseAdjacency build_patch_graph(const Eigen::Ref<const RowMatrix<double>>& features,
                                  const Eigen::Ref<const Eigen::MatrixX2d>& positions,
                                  const PatchGraphConfig& cfg, std::span<const Index> tie_keys) {
    cfg.validate();
    const Index n = features.rows();
    const Index d = features.cols();
    if (positions.rows() != n)
        throw ValidationError("patch graph: positions/features node count mismatch");
    if (n < 2)
        throw ValidationError("patch graph needs at least 2 nodes");
    if (cfg.k >= n)
        throw ValidationError("k too large: k=" + std::to_string(cfg.k) + " but only " +
                              std::to_string(n) + " nodes");
    if (!features.allFinite())
        throw ValidationError("patch graph: non-finite feature value");
    if (!positions.allFinite())
        throw ValidationError("patch graph: non-finite node position");
    if (!tie_keys.empty() && static_cast<Index>(tie_keys.size()) != n)
        throw ValidationError("patch graph: tie key count mismatch");

    // Contiguous copy so rows can be walked with raw pointers.
    const RowMatrix<double> z = features;
    auto key = [&](Index j) { return tie_keys.empty() ? j : tie_keys[static_cast<std::size_t>(j)]; };

    std::vector<Eigen::Triplet<double, int>> triplets;
    triplets.reserve(static_cast<std::size_t>(2 * n * cfg.k));
    std::vector<double> sims(static_cast<std::size_t>(n));
    std::vector<Index> order;
    order.reserve(static_cast<std::size_t>(n));

    for (Index i = 0; i < n; ++i) {
        const double* zi = z.row(i).data();
        for (Index j = 0; j < n; ++j)
            sims[static_cast<std::size_t>(j)] = dot_fixed(zi, z.row(j).data(), d);

        order.clear();
        for (Index j = 0; j < n; ++j)
            if (j != i)
                order.push_back(j);
        const auto by_similarity = [&](Index a, Index b) {
            const double sa = sims[static_cast<std::size_t>(a)];
            const double sb = sims[static_cast<std::size_t>(b)];
            return sa > sb || (sa == sb && key(a) < key(b));
        };
        std::partial_sort(order.begin(), order.begin() + cfg.k, order.end(), by_similarity);

        for (Index t = 0; t < cfg.k; ++t) {
            const Index j = order[static_cast<std::size_t>(t)];
            const double dy = positions(i, 0) - positions(j, 0);
            const double dx = positions(i, 1) - positions(j, 1);
            const double w = appearance_affinity(sims[static_cast<std::size_t>(j)], cfg) *
                             spatial_affinity(dy * dy + dx * dx, cfg);
            if (w > 0) {
                triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), 0.5 * w);
                triplets.emplace_back(static_cast<int>(j), static_cast<int>(i), 0.5 * w);
            }
        }
    }

    SparseRowMatrix<double> w(n, n);
    w.setFromTriplets(triplets.begin(), triplets.end());
    w.prune(0.0, 0.0);
    return SparseAdjacency(std::move(w));
}

SparseAdjacency build_pixel_graph(const FeatureGrid& pixel_features, const PixelGraphConfig& cfg) {
    cfg.validate();
    const Index h = pixel_features.height();
    const Index wd = pixel_features.width();
    const Index n = h * wd;
    const Index half = (cfg.r - 1) / 2;
    if (!pixel_features.all_finite())
        throw ValidationError("pixel graph: non-finite feature value");

    auto span_len = [half](Index p, Index size) {
        return std::min(p + half, size - 1) - std::max<Index>(p - half, 0) + 1;
    };

    Eigen::VectorXi per_row(n);
    Index total = 0;
    for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < wd; ++x) {
            const Index count = span_len(y, h) * span_len(x, wd) - 1;
            per_row(y * wd + x) = static_cast<int>(count);
            total += count;
        }
    if (total > cfg.max_nonzeros)
        throw ValidationError("pixel graph needs " + std::to_string(total) +
                              " non-zeros, over the budget of " + std::to_string(cfg.max_nonzeros));

    const auto& z = pixel_features.matrix();
    SparseRowMatrix<double> w(n, n);
    w.reserve(per_row);
    for (Index y = 0; y < h; ++y) {
        for (Index x = 0; x < wd; ++x) {
            const Index i = y * wd + x;
            for (Index ny = std::max<Index>(y - half, 0); ny <= std::min(y + half, h - 1); ++ny) {
                for (Index nx = std::max<Index>(x - half, 0); nx <= std::min(x + half, wd - 1); ++nx) {
                    const Index j = ny * wd + nx;
                    if (j == i)
                        continue;
                    double dist2 = 0;
                    for (Index c = 0; c < z.cols(); ++c) {
                        const double diff = z(i, c) - z(j, c);
                        dist2 += diff * diff;
                    }
                    w.insert(i, j) = std::exp(-dist2 / cfg.tau);
                }
            }
        }
    }
    return SparseAdjacency(std::move(w));
}

} // namespace lposs
