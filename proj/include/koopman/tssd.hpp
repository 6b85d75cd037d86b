#pragma once

#include <Eigen/Eigenvalues>

#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "koopman/coefficient_basis.hpp"
#include "koopman/dictionary.hpp"
#include "koopman/errors.hpp"
#include "koopman/linalg.hpp"

namespace koopman {

enum class TssdVariant { plain, efficient, monotone };

inline const char* to_string(TssdVariant v) {
    switch (v) {
        case TssdVariant::plain: return "plain";
        case TssdVariant::efficient: return "efficient";
        case TssdVariant::monotone: return "monotone";
    }
    return "unknown";
}

struct TssdConfig {
    double epsilon = 0.0;             // desired invariance proximity, in [0, 1]
    linalg::RankTolerance rank_tol{};
    double eigen_slack = 1e-12;       // added to epsilon when selecting eigenvalues
    int max_iters = 0;                // 0 resolves to N_d (plain/efficient) or N (monotone)
    TssdVariant variant = TssdVariant::efficient;

    void validate() const {
        if (!(epsilon >= 0.0 && epsilon <= 1.0))
            throw ConfigError("tssd: epsilon must lie in [0, 1], got " + std::to_string(epsilon));
        if (eigen_slack < 0.0) throw ConfigError("tssd: eigen_slack must be >= 0");
        if (max_iters < 0) throw ConfigError("tssd: max_iters must be >= 1 (or 0 for automatic)");
    }
};

struct TssdIterationRecord {
    int iter;
    Index dim_V;
    Index dim_E;
    Index dim_C;
    double lambda_max_abs;  // extremal |eigenvalue| of the projection difference
};

enum class TssdTermination { subspace_not_exist, complete };

struct TssdTrace {
    std::vector<TssdIterationRecord> iterations;
    TssdTermination terminated_by = TssdTermination::complete;
    int iters_used = 0;
    double epsilon_effective = 0.0;
    bool epsilon_substituted = false;
};

struct TssdResult {
    CoefficientBasis basis;
    TssdTrace trace;
};

/// Called after each subspace update with the accumulated coefficient matrix;
/// used by tests to check the per-iteration invariants.
using TssdObserver = std::function<void(int iter, const Matrix& c)>;

/// Largest coefficient matrix E such that range(A E) and range(B E) both lie
/// inside range(V). Returns a 0-column matrix when only the zero vector
/// qualifies; otherwise E has orthonormal columns.
///
/// Two kernel computations implement the symmetry: W_A from null([V, A])
/// satisfies range(A W_A) = range(V) \cap range(A); Z_B from null([V, B W_A])
/// then confines the same combinations of B's columns, and E is an
/// orthonormal basis of W_A Z_B.
inline Matrix symmetric_intersection(const Matrix& v, const Matrix& a, const Matrix& b,
                                     const linalg::RankTolerance& tol = {}) {
    if (a.rows() != b.rows() || (v.cols() > 0 && v.rows() != a.rows()))
        throw InputError("symmetric_intersection: row counts differ");
    if (a.cols() != b.cols()) throw InputError("symmetric_intersection: A and B widths differ");
    linalg::require_full_column_rank(v, tol, "symmetric_intersection(V)");
    linalg::require_full_column_rank(a, tol, "symmetric_intersection(A)");
    linalg::require_full_column_rank(b, tol, "symmetric_intersection(B)");

    const Matrix z1 = linalg::null_space_basis(linalg::hcat(v, a), tol);
    if (z1.cols() == 0) return Matrix(a.cols(), 0);
    const Matrix w_a = z1.bottomRows(a.cols());

    const Matrix z2 = linalg::null_space_basis(linalg::hcat(v, b * w_a), tol);
    if (z2.cols() == 0) return Matrix(a.cols(), 0);
    const Matrix z_b = z2.bottomRows(w_a.cols());

    return linalg::range_basis(w_a * z_b, tol);
}

namespace detail {

struct EigenSelection {
    Matrix kept;            // orthonormal eigenvectors with retained eigenvalues
    double lambda_max_abs;  // extremal |eigenvalue| before selection
};

// Eigendirections of the symmetric projection difference with |lambda| within
// the accuracy budget. `drop_single` retains everything except the worst
// offender (the monotone rule).
inline EigenSelection select_small_eigenspace(const Matrix& g, double threshold,
                                              bool drop_single) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("tssd: symmetric eigensolver failed");
    const Vector& lambda = es.eigenvalues();  // ascending
    const Index n = lambda.size();
    EigenSelection sel;
    sel.lambda_max_abs = std::max(std::abs(lambda(0)), std::abs(lambda(n - 1)));
    if (sel.lambda_max_abs <= threshold) {
        sel.kept = es.eigenvectors();
        return sel;
    }
    if (drop_single) {
        const Index worst = std::abs(lambda(0)) >= std::abs(lambda(n - 1)) ? 0 : n - 1;
        Matrix kept(n, n - 1);
        Index out = 0;
        for (Index i = 0; i < n; ++i)
            if (i != worst) kept.col(out++) = es.eigenvectors().col(i);
        sel.kept = std::move(kept);
        return sel;
    }
    std::vector<Index> keep;
    keep.reserve(n);
    for (Index i = 0; i < n; ++i)
        if (std::abs(lambda(i)) <= threshold) keep.push_back(i);
    Matrix kept(n, static_cast<Index>(keep.size()));
    for (Index i = 0; i < kept.cols(); ++i) kept.col(i) = es.eigenvectors().col(keep[i]);
    sel.kept = std::move(kept);
    return sel;
}

// Compressed representation [H^T A, H^T B] for an orthonormal basis H of
// range([A, B]); singular values below the rank cutoff are discarded. The
// tall case never materializes H: the QR of [A, B] already holds H^T [A, B]
// in its triangular factor.
inline Matrix compress_onto_joint_range(const Matrix& a, const Matrix& b,
                                        const linalg::RankTolerance& tol) {
    const Matrix m = linalg::hcat(a, b);
    const double cut = tol.cutoff(m.rows(), m.cols());
    if (linalg::detail::use_qr_prepass(m.rows(), m.cols())) {
        Eigen::HouseholderQR<Matrix> qr(m);
        Matrix r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
        const linalg::detail::SvdFactors svd = linalg::detail::robust_svd(r, true, false);
        const Index h = linalg::detail::rank_from_singular_values(svd.sigma, cut);
        return svd.u.leftCols(h).transpose() * r;
    }
    const linalg::detail::SvdFactors svd = linalg::detail::robust_svd(m, true, false);
    const Index h = linalg::detail::rank_from_singular_values(svd.sigma, cut);
    return svd.u.leftCols(h).transpose() * m;
}

inline Matrix projector_difference_from_bases(const Matrix& qa, const Matrix& qb, Index n) {
    Matrix g = Matrix::Zero(n, n);
    if (qa.cols() > 0) g.noalias() += qa * qa.transpose();
    if (qb.cols() > 0) g.noalias() -= qb * qb.transpose();
    return g;
}

inline TssdResult run_tssd_core(const EvaluatedDictionary& dx, const EvaluatedDictionary& dy,
                                TssdConfig config, bool compressed, bool drop_single,
                                const TssdObserver& observer) {
    config.validate();
    if (dx.rows() != dy.rows() || dx.cols() != dy.cols())
        throw InputError("tssd: evaluated dictionaries differ in shape");
    const Index n_d = dx.cols();
    const linalg::RankTolerance& tol = config.rank_tol;
    linalg::require_full_column_rank(dx, tol, "tssd(D(X))");
    linalg::require_full_column_rank(dy, tol, "tssd(D(Y))");

    TssdTrace trace;
    trace.epsilon_effective = config.epsilon;
    if (config.epsilon == 0.0) {
        trace.epsilon_effective = 1e-12;
        trace.epsilon_substituted = true;
        std::clog << "tssd: epsilon = 0 replaced by 1e-12 to sidestep round-off\n";
    }
    if (n_d == 0) return TssdResult{CoefficientBasis::sentinel(0), std::move(trace)};

    const double threshold = trace.epsilon_effective + config.eigen_slack;
    const int max_iters = config.max_iters > 0
                              ? config.max_iters
                              : static_cast<int>(drop_single ? std::max(dx.rows(), n_d) : n_d);

    Matrix a = dx, b = dy;
    Matrix c = Matrix::Identity(n_d, n_d);
    for (int iter = 1; iter <= max_iters; ++iter) {
        EigenSelection sel;
        Matrix e;
        if (compressed) {
            const Matrix compressed_ab = compress_onto_joint_range(a, b, tol);
            const Matrix at = compressed_ab.leftCols(a.cols());
            const Matrix bt = compressed_ab.rightCols(b.cols());
            const Matrix qa = linalg::range_basis(at, tol);
            const Matrix qb = linalg::range_basis(bt, tol);
            sel = select_small_eigenspace(
                projector_difference_from_bases(qa, qb, compressed_ab.rows()), threshold,
                drop_single);
            e = symmetric_intersection(sel.kept, at, bt, tol);
        } else {
            const Matrix qa = linalg::range_basis(a, tol);
            const Matrix qb = linalg::range_basis(b, tol);
            sel = select_small_eigenspace(projector_difference_from_bases(qa, qb, a.rows()),
                                          threshold, drop_single);
            e = symmetric_intersection(sel.kept, a, b, tol);
        }

        c = c * e;
        a = a * e;
        b = b * e;
        trace.iterations.push_back(
            TssdIterationRecord{iter, sel.kept.cols(), e.cols(), c.cols(), sel.lambda_max_abs});
        trace.iters_used = iter;
        if (observer) observer(iter, c);

        if (e.cols() == 0) {
            trace.terminated_by = TssdTermination::subspace_not_exist;
            return TssdResult{CoefficientBasis{c}, std::move(trace)};
        }
        if (e.rows() <= e.cols()) {
            trace.terminated_by = TssdTermination::complete;
            return TssdResult{CoefficientBasis{c}, std::move(trace)};
        }
    }
    throw std::runtime_error("tssd: exceeded iteration bound of " + std::to_string(max_iters) +
                             " without terminating");
}

}  // namespace detail

/// Tunable Symmetric Subspace Decomposition: prunes the coefficient space
/// until the two data ranges are epsilon-apart. Returns the coefficient basis
/// (orthonormal columns, or the sentinel) plus the per-iteration trace. The
/// eigenproblem runs on the full N x N projection difference.
inline TssdResult tssd(const EvaluatedDictionary& dx, const EvaluatedDictionary& dy,
                       TssdConfig config = {}, const TssdObserver& observer = {}) {
    config.variant = TssdVariant::plain;
    return detail::run_tssd_core(dx, dy, config, /*compressed=*/false, /*drop_single=*/false,
                                 observer);
}

/// Same contract and output span as `tssd`, but the eigen-analysis is carried
/// out on the projection difference compressed onto range([A, B]), whose
/// dimension never exceeds twice the dictionary size. Preferred when the
/// snapshot count dominates the dictionary size.
inline TssdResult tssd_efficient(const EvaluatedDictionary& dx, const EvaluatedDictionary& dy,
                                 TssdConfig config = {}, const TssdObserver& observer = {}) {
    config.variant = TssdVariant::efficient;
    return detail::run_tssd_core(dx, dy, config, /*compressed=*/true, /*drop_single=*/false,
                                 observer);
}

/// Monotone variant: each iteration removes only the eigendirection with the
/// largest eigenvalue magnitude exceeding epsilon, so output spans are nested
/// as epsilon grows (at the cost of more iterations).
inline TssdResult tssd_monotone(const EvaluatedDictionary& dx, const EvaluatedDictionary& dy,
                                TssdConfig config = {}, const TssdObserver& observer = {}) {
    config.variant = TssdVariant::monotone;
    return detail::run_tssd_core(dx, dy, config, /*compressed=*/true, /*drop_single=*/true,
                                 observer);
}

inline TssdResult run_tssd(const EvaluatedDictionary& dx, const EvaluatedDictionary& dy,
                           const TssdConfig& config, const TssdObserver& observer = {}) {
    switch (config.variant) {
        case TssdVariant::plain: return tssd(dx, dy, config, observer);
        case TssdVariant::efficient: return tssd_efficient(dx, dy, config, observer);
        case TssdVariant::monotone: return tssd_monotone(dx, dy, config, observer);
    }
    throw ConfigError("run_tssd: unknown variant");
}

/// Measured invariance proximity of the selected subspace on a snapshot pair:
/// epsilon_apart_measure(DX C, DY C). The certificate of every run is that
/// this does not exceed the requested epsilon on the training pair.
inline double training_measure(const EvaluatedDictionary& dx, const EvaluatedDictionary& dy,
                               const CoefficientBasis& basis,
                               const linalg::RankTolerance& tol = {}) {
    if (basis.is_sentinel()) return 0.0;
    return linalg::epsilon_apart_measure(dx * basis.matrix, dy * basis.matrix, tol);
}

}  // namespace koopman
