// solver.hpp
//
// Label propagation on a normalized graph: the damped fixed-point iteration,
// the equivalent (I - alpha S_hat) linear system solved by conjugate gradient,
// and the quadratic criterion that both minimize.

#ifndef LPOSS_SOLVER_HPP
#define LPOSS_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "lposs/error.hpp"
#include "lposs/graph.hpp"

namespace lposs {

template <typename Scalar>
using ScoreMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class ScaleConvention {
    system,      // raw solution of (I - alpha S_hat) Y_hat = Y
    fixed_point, // (1 - alpha) times that, the limit of the iteration
};

struct PropagationConfig {
    double alpha = 0.95;
    double cg_tol = 1e-6;
    Index cg_max_iter = 1000;
    double iter_tol = 1e-8;
    Index iter_max = 10000;
    ScaleConvention scale_convention = ScaleConvention::fixed_point;

    void validate() const {
        if (!(alpha > 0 && alpha < 1))
            throw ValidationError("alpha must lie in (0, 1)");
        if (!(cg_tol > 0) || !(iter_tol > 0))
            throw ValidationError("tolerances must be > 0");
        if (cg_max_iter < 1 || iter_max < 1)
            throw ValidationError("iteration limits must be >= 1");
    }
};

/// Per-column outcome of a conjugate-gradient solve.
template <typename Scalar>
struct CgResult {
    ScoreMatrix<Scalar> solution;
    std::vector<Index> iterations;
    std::vector<Scalar> residuals; // final relative residual |L x - b| / |b|
    // Relative residual of every column after each iteration (frozen columns
    // repeat their final value).
    std::vector<std::vector<Scalar>> history;

    Index max_iterations() const {
        return iterations.empty() ? 0 : *std::max_element(iterations.begin(), iterations.end());
    }
};

namespace detail {

// (I - alpha S_hat) x, column-wise.
template <typename Scalar>
ScoreMatrix<Scalar> apply_system(const BasicNormalizedAdjacency<Scalar>& s_hat, Scalar alpha,
                                 const ScoreMatrix<Scalar>& x) {
    ScoreMatrix<Scalar> out = s_hat.matrix() * x;
    out = x - alpha * out;
    return out;
}

template <typename Scalar>
void check_shapes(const BasicNormalizedAdjacency<Scalar>& s_hat, Index rows) {
    if (s_hat.size() != rows)
        throw ValidationError("graph has " + std::to_string(s_hat.size()) + " nodes but scores have " +
                              std::to_string(rows) + " rows");
}

} // namespace detail

/// Conjugate gradient on (I - alpha S_hat) X = B, each column an independent
/// system. Stops a column once |L x - b| / max(|b|, 1e-30) < tol; recurrence
/// residuals are re-checked against the true residual before a column is
/// accepted, restarting from the current iterate if they drifted apart.
template <typename Scalar>
CgResult<Scalar> conjugate_gradient(const BasicNormalizedAdjacency<Scalar>& s_hat,
                                    const ScoreMatrix<Scalar>& rhs, Scalar alpha, Scalar tol,
                                    Index max_iter) {
    detail::check_shapes(s_hat, rhs.rows());
    const Index cols = rhs.cols();

    CgResult<Scalar> result;
    result.solution = ScoreMatrix<Scalar>::Zero(rhs.rows(), cols);
    result.iterations.assign(static_cast<std::size_t>(cols), 0);
    result.residuals.assign(static_cast<std::size_t>(cols), 0);
    result.history.assign(static_cast<std::size_t>(cols), {});

    Eigen::Array<Scalar, Eigen::Dynamic, 1> scale(cols);
    for (Index c = 0; c < cols; ++c)
        scale(c) = std::max(rhs.col(c).norm(), Scalar(1e-30));

    ScoreMatrix<Scalar>& x = result.solution;
    ScoreMatrix<Scalar> r = rhs;
    ScoreMatrix<Scalar> p = r;
    Eigen::Array<Scalar, Eigen::Dynamic, 1> rs = r.colwise().squaredNorm().transpose();
    std::vector<bool> active(static_cast<std::size_t>(cols), true);

    auto relative = [&](Index c, Scalar squared) { return std::sqrt(squared) / scale(c); };

    Index active_count = 0;
    for (Index c = 0; c < cols; ++c) {
        result.residuals[c] = relative(c, rs(c));
        if (result.residuals[c] < tol)
            active[c] = false;
        else
            ++active_count;
    }

    for (Index it = 0; it < max_iter && active_count > 0; ++it) {
        const ScoreMatrix<Scalar> q = detail::apply_system(s_hat, alpha, p);
        for (Index c = 0; c < cols; ++c) {
            if (!active[c]) {
                result.history[c].push_back(result.residuals[c]);
                continue;
            }
            const Scalar pq = p.col(c).dot(q.col(c));
            const Scalar step = rs(c) / pq;
            x.col(c) += step * p.col(c);
            r.col(c) -= step * q.col(c);
            Scalar rs_new = r.col(c).squaredNorm();
            ++result.iterations[c];

            if (relative(c, rs_new) < tol) {
                // Confirm with the true residual.
                const ScoreMatrix<Scalar> lx = detail::apply_system(s_hat, alpha, ScoreMatrix<Scalar>(x.col(c)));
                const Vector<Scalar> true_r = rhs.col(c) - lx.col(0);
                const Scalar true_rs = true_r.squaredNorm();
                if (relative(c, true_rs) < tol) {
                    result.residuals[c] = relative(c, true_rs);
                    result.history[c].push_back(result.residuals[c]);
                    active[c] = false;
                    --active_count;
                    continue;
                }
                r.col(c) = true_r;
                p.col(c) = true_r;
                rs(c) = true_rs;
                result.residuals[c] = relative(c, true_rs);
                result.history[c].push_back(result.residuals[c]);
                continue;
            }
            p.col(c) = r.col(c) + (rs_new / rs(c)) * p.col(c);
            rs(c) = rs_new;
            result.residuals[c] = relative(c, rs_new);
            result.history[c].push_back(result.residuals[c]);
        }
    }

    if (active_count > 0) {
        Index worst = 0;
        for (Index c = 0; c < cols; ++c)
            if (active[c] && result.residuals[c] > result.residuals[worst])
                worst = c;
        throw ConvergenceError("conjugate gradient did not converge", static_cast<std::size_t>(max_iter),
                               static_cast<double>(result.residuals[worst]));
    }
    return result;
}

/// Label propagation through the linear system, solved by conjugate gradient.
template <typename Scalar>
ScoreMatrix<Scalar> lp_solve_cg(const BasicNormalizedAdjacency<Scalar>& s_hat, const ScoreMatrix<Scalar>& y,
                                const PropagationConfig& cfg) {
    cfg.validate();
    CgResult<Scalar> res = conjugate_gradient(s_hat, y, static_cast<Scalar>(cfg.alpha),
                                              static_cast<Scalar>(cfg.cg_tol), cfg.cg_max_iter);
    if (cfg.scale_convention == ScaleConvention::fixed_point)
        res.solution *= static_cast<Scalar>(1.0 - cfg.alpha);
    return std::move(res.solution);
}

/// Iterates Y_hat <- alpha S_hat Y_hat + (1 - alpha) Y from Y_hat = Y until the
/// largest absolute update drops below `iter_tol`. Returns the fixed point,
/// which is always on the fixed_point scale.
template <typename Scalar>
ScoreMatrix<Scalar> lp_iterate(const BasicNormalizedAdjacency<Scalar>& s_hat, const ScoreMatrix<Scalar>& y,
                               const PropagationConfig& cfg) {
    cfg.validate();
    detail::check_shapes(s_hat, y.rows());
    const Scalar alpha = static_cast<Scalar>(cfg.alpha);
    const ScoreMatrix<Scalar> anchor = (Scalar(1) - alpha) * y;
    ScoreMatrix<Scalar> current = y;
    ScoreMatrix<Scalar> next(y.rows(), y.cols());
    Scalar change = 0;
    for (Index it = 0; it < cfg.iter_max; ++it) {
        next.noalias() = s_hat.matrix() * current;
        next = alpha * next + anchor;
        change = y.size() == 0 ? Scalar(0) : (next - current).cwiseAbs().maxCoeff();
        current.swap(next);
        if (change < static_cast<Scalar>(cfg.iter_tol))
            return current;
    }
    throw ConvergenceError("label propagation iteration did not converge",
                           static_cast<std::size_t>(cfg.iter_max), static_cast<double>(change));
}

/// How the smoothness double sum visits node pairs.
enum class PairSum {
    unordered, // each edge once; the LP fixed point is the exact minimizer
    ordered,   // every (i, j) and (j, i), as the sum is literally written
};

/// (1 - alpha) sum_i |Yh_i - Y_i|^2 + alpha sum_ij S_ij |Yh_i / sqrt(D_ii) - Yh_j / sqrt(D_jj)|^2.
/// Isolated nodes contribute only to the first term.
template <typename Scalar>
Scalar quadratic_criterion(const BasicSparseAdjacency<Scalar>& graph, const ScoreMatrix<Scalar>& y_hat,
                           const ScoreMatrix<Scalar>& y, Scalar alpha, PairSum pairs = PairSum::unordered) {
    if (y_hat.rows() != graph.size() || y.rows() != graph.size() || y.cols() != y_hat.cols())
        throw ValidationError("quadratic_criterion: shape mismatch");
    const Scalar fidelity = (y_hat - y).squaredNorm();

    const auto& deg = graph.degrees();
    Scalar smoothness = 0;
    for (Index i = 0; i < graph.weights().outerSize(); ++i) {
        for (typename SparseRowMatrix<Scalar>::InnerIterator it(graph.weights(), i); it; ++it) {
            const Index j = it.col();
            if (it.value() == 0 || !(deg(i) > 0) || !(deg(j) > 0))
                continue;
            smoothness += it.value() *
                          (y_hat.row(i) / std::sqrt(deg(i)) - y_hat.row(j) / std::sqrt(deg(j))).squaredNorm();
        }
    }
    if (pairs == PairSum::unordered)
        smoothness *= Scalar(0.5);
    return (Scalar(1) - alpha) * fidelity + alpha * smoothness;
}

} // namespace lposs

#endif // LPOSS_SOLVER_HPP
