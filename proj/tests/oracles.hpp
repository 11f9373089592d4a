// Brute-force references used by the unit and acceptance tests. Everything
// here is written against dense matrices and plain loops, independently of
// the library code paths it checks.

#ifndef LPOSS_TESTS_ORACLES_HPP
#define LPOSS_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "lposs/graph.hpp"
#include "lposs/grid.hpp"
#include "lposs/metrics.hpp"
#include "lposs/windows.hpp"

namespace oracle {

using lposs::Index;
using Eigen::MatrixXd;

inline MatrixXd dense(const lposs::SparseRowMatrix<double>& m) { return MatrixXd(m); }

inline MatrixXd dense_normalize(const MatrixXd& s) {
    const Eigen::VectorXd d = s.rowwise().sum();
    MatrixXd out = MatrixXd::Zero(s.rows(), s.cols());
    for (Index i = 0; i < s.rows(); ++i)
        for (Index j = 0; j < s.cols(); ++j)
            if (d(i) > 0 && d(j) > 0)
                out(i, j) = s(i, j) / std::sqrt(d(i) * d(j));
    return out;
}

/// (1 - alpha)(I - alpha S_hat)^-1 Y by dense LU.
inline MatrixXd dense_lp(const MatrixXd& s_hat, const MatrixXd& y, double alpha) {
    const MatrixXd l = MatrixXd::Identity(s_hat.rows(), s_hat.cols()) - alpha * s_hat;
    return (1.0 - alpha) * l.partialPivLu().solve(y);
}

inline double smallest_eigenvalue(const MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline double power_iteration_radius(const MatrixXd& m, int iters = 2000) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows()).normalized();
    double lambda = 0.0;
    for (int i = 0; i < iters; ++i) {
        Eigen::VectorXd w = m * v;
        const double n = w.norm();
        if (n == 0.0)
            return 0.0;
        lambda = n;
        v = w / n;
    }
    // m symmetric: |lambda_max| via Rayleigh on m^2 equals lambda above.
    return lambda;
}

/// Random symmetric non-negative weight matrix; every node gets at least one
/// edge when `connected` (a random spanning path plus extra edges).
template <typename Rng>
MatrixXd random_weights(Index n, double density, Rng& rng, bool connected = true) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MatrixXd w = MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            if (u(rng) < density)
                w(i, j) = w(j, i) = 0.05 + u(rng);
    if (connected) {
        std::vector<Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Index{0});
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t k = 1; k < order.size(); ++k) {
            const Index a = order[k - 1], b = order[k];
            if (w(a, b) == 0)
                w(a, b) = w(b, a) = 0.05 + u(rng);
        }
    }
    return w;
}

inline lposs::SparseAdjacency to_adjacency(const MatrixXd& w) {
    return lposs::SparseAdjacency(w.sparseView().cast<double>().eval());
}

inline double appearance(double cos, const lposs::PatchGraphConfig& cfg) {
    if (cfg.appearance_kernel == lposs::AppearanceKernel::power)
        return std::pow(std::max(cos, 0.0), cfg.gamma);
    return std::exp(-(1.0 - cos) / cfg.appearance_bandwidth);
}

inline double spatial(double d2, const lposs::PatchGraphConfig& cfg) {
    if (cfg.spatial_kernel == lposs::SpatialKernel::rbf)
        return std::exp(-d2 / cfg.sigma);
    return std::max(0.0, 1.0 - d2 / cfg.sigma);
}

/// All-pairs weights, kNN masking by (cos desc, key asc), mean symmetrization.
inline MatrixXd brute_patch_graph(const MatrixXd& f, const Eigen::MatrixX2d& pos, const lposs::PatchGraphConfig& cfg,
                                  const std::vector<Index>& keys = {}) {
    const Index n = f.rows();
    MatrixXd cos = f * f.transpose();
    MatrixXd directed = MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        std::vector<Index> cand;
        for (Index j = 0; j < n; ++j)
            if (j != i)
                cand.push_back(j);
        auto key = [&](Index j) { return keys.empty() ? j : keys[static_cast<std::size_t>(j)]; };
        std::sort(cand.begin(), cand.end(), [&](Index a, Index b) {
            if (cos(i, a) != cos(i, b))
                return cos(i, a) > cos(i, b);
            return key(a) < key(b);
        });
        for (Index t = 0; t < cfg.k; ++t) {
            const Index j = cand[static_cast<std::size_t>(t)];
            const double d2 = (pos.row(i) - pos.row(j)).squaredNorm();
            directed(i, j) = appearance(cos(i, j), cfg) * spatial(d2, cfg);
        }
    }
    return 0.5 * (directed + directed.transpose());
}

inline MatrixXd brute_pixel_graph(const lposs::FeatureGrid& g, Index r, double tau) {
    const Index h = g.height(), w = g.width(), n = h * w;
    const Index rad = (r - 1) / 2;
    MatrixXd s = MatrixXd::Zero(n, n);
    for (Index a = 0; a < n; ++a) {
        for (Index b = 0; b < n; ++b) {
            if (a == b)
                continue;
            const Index ya = a / w, xa = a % w, yb = b / w, xb = b % w;
            if (std::abs(ya - yb) > rad || std::abs(xa - xb) > rad)
                continue;
            double d2 = 0;
            for (Index c = 0; c < g.channels(); ++c)
                d2 += (g(ya, xa, c) - g(yb, xb, c)) * (g(ya, xa, c) - g(yb, xb, c));
            s(a, b) = std::exp(-d2 / tau);
        }
    }
    return s;
}

using PixelSet = std::set<std::pair<Index, Index>>;

inline PixelSet class_set(const lposs::LabelMap& m, std::int32_t c, const lposs::LabelMap* valid_from = nullptr) {
    PixelSet s;
    for (Index y = 0; y < m.height(); ++y)
        for (Index x = 0; x < m.width(); ++x)
            if (m(y, x) == c && (!valid_from || (*valid_from)(y, x) != valid_from->ignore_label()))
                s.insert({y, x});
    return s;
}

inline std::size_t intersection_size(const PixelSet& a, const PixelSet& b) {
    std::size_t n = 0;
    for (const auto& p : a)
        n += b.count(p);
    return n;
}

/// Set-based mIoU (0-100) over non-ignore gt pixels.
inline double brute_miou(const lposs::LabelMap& pred, const lposs::LabelMap& gt, Index classes) {
    double sum = 0;
    int present = 0;
    for (Index c = 0; c < classes; ++c) {
        const PixelSet p = class_set(pred, static_cast<std::int32_t>(c), &gt);
        const PixelSet g = class_set(gt, static_cast<std::int32_t>(c));
        const std::size_t inter = intersection_size(p, g);
        const std::size_t uni = p.size() + g.size() - inter;
        if (uni == 0)
            continue;
        sum += static_cast<double>(inter) / static_cast<double>(uni);
        ++present;
    }
    return present ? 100.0 * sum / present : 0.0;
}

/// Mask pixels with some pixel outside the mask, or outside the image, within
/// Chebyshev distance d.
inline PixelSet brute_band(const PixelSet& mask, Index h, Index w, Index d) {
    PixelSet band;
    for (const auto& [y, x] : mask) {
        bool edge = false;
        for (Index dy = -d; dy <= d && !edge; ++dy)
            for (Index dx = -d; dx <= d && !edge; ++dx) {
                const Index yy = y + dy, xx = x + dx;
                if (yy < 0 || xx < 0 || yy >= h || xx >= w || !mask.count({yy, xx}))
                    edge = true;
            }
        if (edge)
            band.insert({y, x});
    }
    return band;
}

/// Per-image Boundary IoU (0-100), mean over classes with a non-empty union.
inline double brute_boundary_iou(const lposs::LabelMap& pred, const lposs::LabelMap& gt, Index classes, Index d,
                                 std::vector<double>* per_class = nullptr) {
    double sum = 0;
    int present = 0;
    for (Index c = 0; c < classes; ++c) {
        const PixelSet p = brute_band(class_set(pred, static_cast<std::int32_t>(c)), pred.height(), pred.width(), d);
        const PixelSet g = brute_band(class_set(gt, static_cast<std::int32_t>(c)), gt.height(), gt.width(), d);
        const std::size_t inter = intersection_size(p, g);
        const std::size_t uni = p.size() + g.size() - inter;
        if (uni == 0)
            continue;
        const double v = static_cast<double>(inter) / static_cast<double>(uni);
        if (per_class)
            per_class->push_back(v);
        sum += v;
        ++present;
    }
    return present ? 100.0 * sum / present : 0.0;
}

/// Rasterized coverage average of window grids.
inline lposs::ScoreGrid brute_combine(const lposs::WindowPlan& plan, const std::vector<lposs::ScoreGrid>& grids) {
    const Index c = grids.front().channels();
    std::vector<std::vector<double>> sum(static_cast<std::size_t>(plan.image_h * plan.image_w),
                                         std::vector<double>(static_cast<std::size_t>(c), 0.0));
    std::vector<int> count(static_cast<std::size_t>(plan.image_h * plan.image_w), 0);
    for (std::size_t k = 0; k < plan.windows.size(); ++k) {
        const auto [y0, x0] = plan.windows[k];
        for (Index y = 0; y < plan.win_h; ++y)
            for (Index x = 0; x < plan.win_w; ++x) {
                const auto idx = static_cast<std::size_t>((y0 + y) * plan.image_w + x0 + x);
                ++count[idx];
                for (Index ch = 0; ch < c; ++ch)
                    sum[idx][static_cast<std::size_t>(ch)] += grids[k](y, x, ch);
            }
    }
    lposs::ScoreGrid out(plan.image_h, plan.image_w, c);
    for (Index y = 0; y < plan.image_h; ++y)
        for (Index x = 0; x < plan.image_w; ++x) {
            const auto idx = static_cast<std::size_t>(y * plan.image_w + x);
            for (Index ch = 0; ch < c; ++ch)
                out(y, x, ch) = sum[idx][static_cast<std::size_t>(ch)] / count[idx];
        }
    return out;
}

} // namespace oracle

#endif
