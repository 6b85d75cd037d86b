#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

#include "koopman/errors.hpp"

namespace koopman {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace linalg {

/// Relative singular-value cutoff used by every rank decision.
///
/// A singular value sigma_i is treated as zero when
/// sigma_i <= cutoff(rows, cols) * sigma_max. When `relative` is not set the
/// size-scaled default 1e-10 * max(rows, cols) applies; it can be overridden
/// because the null-space calls inside the subspace algorithms are the
/// stability-critical path.
struct RankTolerance {
    double relative = 0.0;         // <= 0 selects the size-scaled default
    double containment = 1e-8;     // threshold for range-containment tests

    static RankTolerance fixed(double rel, double containment_tol = 1e-8) {
        if (!(rel > 0.0 && rel < 1.0))
            throw ConfigError("RankTolerance: relative threshold must lie in (0,1), got " +
                              std::to_string(rel));
        return RankTolerance{rel, containment_tol};
    }

    double cutoff(Index rows, Index cols) const {
        if (relative > 0.0) return relative;
        return 1e-10 * static_cast<double>(std::max(rows, cols));
    }
};

inline void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw InputError(std::string(what) + ": non-finite entries");
}

/// Side-by-side concatenation that tolerates 0-column operands.
inline Matrix hcat(const Matrix& a, const Matrix& b) {
    if (a.cols() == 0) return b;
    if (b.cols() == 0) return a;
    if (a.rows() != b.rows())
        throw InputError("hcat: row counts differ (" + std::to_string(a.rows()) + " vs " +
                         std::to_string(b.rows()) + ")");
    Matrix out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

namespace detail {

inline Index rank_from_singular_values(const Vector& sigma, double cut_rel) {
    if (sigma.size() == 0) return 0;
    const double smax = sigma(0);
    if (!(smax > 0.0)) return 0;
    Index r = 0;
    while (r < sigma.size() && sigma(r) > cut_rel * smax) ++r;
    return r;
}

// Tall matrices are reduced by an unpivoted QR before the SVD; the triangular
// factor carries the same singular values and the kernel is unchanged.
inline bool use_qr_prepass(Index rows, Index cols) {
    return rows > 2 * cols && rows > 32;
}

struct SvdFactors {
    Vector sigma;
    Matrix u;  // empty unless requested
    Matrix v;  // empty unless requested
};

// Eigen 3.4.0's divide-and-conquer SVD can emit NaN factors on some
// deflation-heavy inputs. Every SVD goes through here: the fast solver's
// output is validated and the Jacobi solver (slow but dependable) repeats the
// decomposition when validation fails.
inline SvdFactors robust_svd(const Matrix& m, bool want_u, bool want_full_v) {
    const unsigned options = (want_u ? static_cast<unsigned>(Eigen::ComputeThinU) : 0u) |
                             (want_full_v ? static_cast<unsigned>(Eigen::ComputeFullV) : 0u);
    SvdFactors out;
    {
        Eigen::BDCSVD<Matrix> svd(m, options);
        bool ok = svd.singularValues().allFinite();
        for (Index i = 0; ok && i + 1 < svd.singularValues().size(); ++i)
            ok = svd.singularValues()(i) >= svd.singularValues()(i + 1) &&
                 svd.singularValues()(i + 1) >= 0.0;
        if (ok && want_u) ok = svd.matrixU().allFinite();
        if (ok && want_full_v) ok = svd.matrixV().allFinite();
        if (ok) {
            out.sigma = svd.singularValues();
            if (want_u) out.u = svd.matrixU();
            if (want_full_v) out.v = svd.matrixV();
            return out;
        }
    }
    Eigen::JacobiSVD<Matrix> svd(m, options);
    out.sigma = svd.singularValues();
    if (want_u) out.u = svd.matrixU();
    if (want_full_v) out.v = svd.matrixV();
    return out;
}

}  // namespace detail

/// Singular values of M (descending), using the tall-matrix QR reduction.
inline Vector singular_values(const Matrix& m) {
    if (m.size() == 0) return Vector(0);
    if (detail::use_qr_prepass(m.rows(), m.cols())) {
        Eigen::HouseholderQR<Matrix> qr(m);
        Matrix r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
        return detail::robust_svd(r, false, false).sigma;
    }
    return detail::robust_svd(m, false, false).sigma;
}

/// Largest singular value (spectral norm); 0 for empty matrices.
inline double operator_norm(const Matrix& m) {
    const Vector s = singular_values(m);
    return s.size() == 0 ? 0.0 : s(0);
}

inline Index numerical_rank(const Matrix& m, const RankTolerance& tol = {}) {
    if (m.size() == 0) return 0;
    return detail::rank_from_singular_values(singular_values(m), tol.cutoff(m.rows(), m.cols()));
}

/// Orthonormal basis of range(M). Returns a 0-column matrix when M vanishes.
inline Matrix range_basis(const Matrix& m, const RankTolerance& tol = {}) {
    if (m.cols() == 0) return Matrix(m.rows(), 0);
    require_finite(m, "range_basis");
    const double cut = tol.cutoff(m.rows(), m.cols());
    if (detail::use_qr_prepass(m.rows(), m.cols())) {
        Eigen::HouseholderQR<Matrix> qr(m);
        Matrix r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
        const detail::SvdFactors svd = detail::robust_svd(r, true, false);
        const Index rank = detail::rank_from_singular_values(svd.sigma, cut);
        if (rank == 0) return Matrix(m.rows(), 0);
        Matrix thin_q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
        return thin_q * svd.u.leftCols(rank);
    }
    const detail::SvdFactors svd = detail::robust_svd(m, true, false);
    const Index rank = detail::rank_from_singular_values(svd.sigma, cut);
    if (rank == 0) return Matrix(m.rows(), 0);
    return svd.u.leftCols(rank);
}

/// Orthonormal basis of {v : Mv = 0}; 0 columns when the kernel is trivial.
inline Matrix null_space_basis(const Matrix& m, const RankTolerance& tol = {}) {
    if (m.cols() == 0) return Matrix(0, 0);
    require_finite(m, "null_space_basis");
    const double cut = tol.cutoff(m.rows(), m.cols());
    detail::SvdFactors svd;
    if (detail::use_qr_prepass(m.rows(), m.cols())) {
        Eigen::HouseholderQR<Matrix> qr(m);
        Matrix r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
        svd = detail::robust_svd(r, false, true);
    } else {
        svd = detail::robust_svd(m, false, true);
    }
    const Index rank = detail::rank_from_singular_values(svd.sigma, cut);
    const Index nullity = m.cols() - rank;
    if (nullity == 0) return Matrix(m.cols(), 0);
    return svd.v.rightCols(nullity);
}

/// Orthogonal projection of v onto range(M), via a rank-truncated factorization.
inline Vector projector_apply(const Matrix& m, const Vector& v, const RankTolerance& tol = {}) {
    if (m.rows() != v.size())
        throw InputError("projector_apply: dimension mismatch");
    require_finite(m, "projector_apply");
    const Matrix q = range_basis(m, tol);
    if (q.cols() == 0) return Vector::Zero(v.size());
    return q * (q.transpose() * v);
}

inline void require_full_column_rank(const Matrix& m, const RankTolerance& tol, const char* what) {
    if (m.cols() == 0) return;
    if (numerical_rank(m, tol) != m.cols())
        throw RankPreconditionError(std::string(what) + ": matrix is column-rank deficient (" +
                                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")");
}

/// Null-space factors of [A, B] split by operand.
///
/// The stacked columns [Z_A; Z_B] form an orthonormal basis of null([A, B]);
/// range(A * Z_A) is then range(A) \cap range(B), and Z_A, Z_B each have full
/// column rank.
struct IntersectionFactors {
    Matrix Z_A;
    Matrix Z_B;
};

inline IntersectionFactors subspace_intersection(const Matrix& a, const Matrix& b,
                                                 const RankTolerance& tol = {}) {
    if (a.rows() != b.rows()) throw InputError("subspace_intersection: row counts differ");
    require_full_column_rank(a, tol, "subspace_intersection(A)");
    require_full_column_rank(b, tol, "subspace_intersection(B)");
    const Matrix z = null_space_basis(hcat(a, b), tol);
    return IntersectionFactors{z.topRows(a.cols()), z.bottomRows(b.cols())};
}

/// Smallest eps such that range(A) and range(B) are eps-apart, in [0, 1].
///
/// Equals the largest-magnitude eigenvalue of the projector difference
/// P_A - P_B restricted to range(A) + range(B); computed on an orthonormal
/// basis H of that sum so only a small symmetric eigenproblem is solved.
inline double epsilon_apart_measure(const Matrix& a, const Matrix& b,
                                    const RankTolerance& tol = {}) {
    const Matrix qa = range_basis(a, tol);
    const Matrix qb = range_basis(b, tol);
    if (qa.cols() == 0 && qb.cols() == 0) return 0.0;
    const Matrix h = range_basis(hcat(qa, qb), tol);
    Matrix g = Matrix::Zero(h.cols(), h.cols());
    if (qa.cols() > 0) {
        const Matrix ha = h.transpose() * qa;
        g += ha * ha.transpose();
    }
    if (qb.cols() > 0) {
        const Matrix hb = h.transpose() * qb;
        g -= hb * hb.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    const double lo = std::abs(es.eigenvalues()(0));
    const double hi = std::abs(es.eigenvalues()(es.eigenvalues().size() - 1));
    return std::clamp(std::max(lo, hi), 0.0, 1.0);
}

/// Containment test range(A) \subseteq range(B) via the projection residual
/// ||(I - P_B) A||_2 / ||A||_2 <= containment tolerance.
inline bool range_contained(const Matrix& a, const Matrix& b, const RankTolerance& tol = {}) {
    if (a.cols() == 0) return true;
    const double norm_a = operator_norm(a);
    if (norm_a == 0.0) return true;
    const Matrix qb = range_basis(b, tol);
    Matrix residual = a;
    if (qb.cols() > 0) residual -= qb * (qb.transpose() * a);
    return operator_norm(residual) / norm_a <= tol.containment;
}

}  // namespace linalg
}  // namespace koopman
