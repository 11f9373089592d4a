// graph.hpp
//
// Sparse affinity graphs over patches (appearance kNN x spatial kernel) and
// over pixels (color kernel inside an r x r window), and the symmetric degree
// normalization used by label propagation.

#ifndef LPOSS_GRAPH_HPP
#define LPOSS_GRAPH_HPP

#include <cmath>
#include <span>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "lposs/error.hpp"
#include "lposs/grid.hpp"

namespace lposs {

template <typename Scalar>
using SparseRowMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Symmetric, zero-diagonal, non-negative weight matrix with cached weighted
/// degrees. Storage is compressed row.
template <typename Scalar>
class BasicSparseAdjacency {
public:
    BasicSparseAdjacency() = default;

    explicit BasicSparseAdjacency(SparseRowMatrix<Scalar> weights) : weights_(std::move(weights)) {
        if (weights_.rows() != weights_.cols())
            throw ValidationError("adjacency must be square");
        weights_.makeCompressed();
        degrees_ = Vector<Scalar>::Zero(weights_.rows());
        for (Index i = 0; i < weights_.outerSize(); ++i) {
            Scalar sum = 0;
            for (typename SparseRowMatrix<Scalar>::InnerIterator it(weights_, i); it; ++it) {
                if (it.col() == i)
                    throw ValidationError("adjacency has a self-edge at node " + std::to_string(i));
                if (!(it.value() >= 0) || !std::isfinite(it.value()))
                    throw ValidationError("adjacency weights must be finite and non-negative");
                sum += it.value();
            }
            degrees_(i) = sum;
        }
    }

    Index size() const noexcept { return weights_.rows(); }
    Index nonzeros() const noexcept { return weights_.nonZeros(); }

    const SparseRowMatrix<Scalar>& weights() const noexcept { return weights_; }
    const Vector<Scalar>& degrees() const noexcept { return degrees_; }

    std::span<const int> row_offsets() const {
        return {weights_.outerIndexPtr(), static_cast<std::size_t>(weights_.outerSize() + 1)};
    }
    std::span<const int> col_indices() const {
        return {weights_.innerIndexPtr(), static_cast<std::size_t>(weights_.nonZeros())};
    }
    std::span<const Scalar> values() const {
        return {weights_.valuePtr(), static_cast<std::size_t>(weights_.nonZeros())};
    }

    /// Exact structural and numerical symmetry check.
    bool is_symmetric() const {
        const SparseRowMatrix<Scalar> t = weights_.transpose();
        if (t.nonZeros() != weights_.nonZeros())
            return false;
        for (Index i = 0; i < weights_.outerSize(); ++i) {
            typename SparseRowMatrix<Scalar>::InnerIterator a(weights_, i), b(t, i);
            for (; a && b; ++a, ++b)
                if (a.col() != b.col() || a.value() != b.value())
                    return false;
            if (a || b)
                return false;
        }
        return true;
    }

private:
    SparseRowMatrix<Scalar> weights_;
    Vector<Scalar> degrees_;
};

/// D^-1/2 S D^-1/2. Rows and columns of isolated nodes are empty.
template <typename Scalar>
class BasicNormalizedAdjacency {
public:
    BasicNormalizedAdjacency() = default;
    explicit BasicNormalizedAdjacency(SparseRowMatrix<Scalar> m) : matrix_(std::move(m)) {
        matrix_.makeCompressed();
    }

    Index size() const noexcept { return matrix_.rows(); }
    Index nonzeros() const noexcept { return matrix_.nonZeros(); }
    const SparseRowMatrix<Scalar>& matrix() const noexcept { return matrix_; }

private:
    SparseRowMatrix<Scalar> matrix_;
};

using SparseAdjacency = BasicSparseAdjacency<double>;
using NormalizedAdjacency = BasicNormalizedAdjacency<double>;

template <typename Scalar>
BasicNormalizedAdjacency<Scalar> symmetric_normalize(const BasicSparseAdjacency<Scalar>& graph) {
    const auto& w = graph.weights();
    const auto& deg = graph.degrees();
    Vector<Scalar> inv_sqrt(deg.size());
    for (Index i = 0; i < deg.size(); ++i)
        inv_sqrt(i) = deg(i) > 0 ? Scalar(1) / std::sqrt(deg(i)) : Scalar(0);

    SparseRowMatrix<Scalar> out(w.rows(), w.cols());
    Eigen::VectorXi per_row(w.rows());
    for (Index i = 0; i < w.outerSize(); ++i)
        per_row(i) = deg(i) > 0 ? w.outerIndexPtr()[i + 1] - w.outerIndexPtr()[i] : 0;
    out.reserve(per_row);
    for (Index i = 0; i < w.outerSize(); ++i) {
        if (!(deg(i) > 0))
            continue;
        for (typename SparseRowMatrix<Scalar>::InnerIterator it(w, i); it; ++it)
            if (deg(it.col()) > 0)
                out.insert(i, it.col()) = it.value() * inv_sqrt(i) * inv_sqrt(it.col());
    }
    return BasicNormalizedAdjacency<Scalar>(std::move(out));
}

enum class AppearanceKernel {
    power,           // max(cos, 0)^gamma
    exp_one_minus_s, // exp(-(1 - cos) / appearance_bandwidth)
};

enum class SpatialKernel {
    rbf,    // exp(-|dp|^2 / sigma)
    linear, // max(0, 1 - |dp|^2 / sigma)
};

struct PatchGraphConfig {
    Index k = 400;
    double gamma = 3.0;
    double sigma = 100.0; // squared pixels
    AppearanceKernel appearance_kernel = AppearanceKernel::power;
    SpatialKernel spatial_kernel = SpatialKernel::rbf;
    double appearance_bandwidth = 1.0 / 3.0;

    void validate() const;
};

struct PixelGraphConfig {
    Index r = 13;
    double tau = 0.01;
    Index max_nonzeros = 64'000'000;

    void validate() const;
};

double appearance_affinity(double cosine, const PatchGraphConfig& cfg);
double spatial_affinity(double squared_distance, const PatchGraphConfig& cfg);

/// kNN patch graph. `features` holds one l2-normalized row per node and
/// `positions` the (y, x) image coordinates of node centers. For each node the
/// k most cosine-similar other nodes are selected, ties going to the smaller
/// tie key (the node index when `tie_keys` is empty). Directed weights are
/// symmetrized as (w_ij + w_ji) / 2 and zero weights are dropped.
SparseAdjacency build_patch_graph(const Eigen::Ref<const RowMatrix<double>>& features,
                                  const Eigen::Ref<const Eigen::MatrixX2d>& positions,
                                  const PatchGraphConfig& cfg,
                                  std::span<const Index> tie_keys = {});

/// Pixel graph: every pair within the r x r window (self excluded) gets the
/// weight exp(-|z_i - z_j|^2 / tau).
SparseAdjacency build_pixel_graph(const FeatureGrid& pixel_features, const PixelGraphConfig& cfg);

} // namespace lposs

#endif // LPOSS_GRAPH_HPP
