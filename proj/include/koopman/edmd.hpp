#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <complex>
#include <stdexcept>
#include <vector>

#include "koopman/dictionary.hpp"
#include "koopman/errors.hpp"
#include "koopman/linalg.hpp"

namespace koopman {

struct LeastSquaresFit {
    Matrix K;         // N_d x N_d
    double residual;  // ||DY - DX K||_F
};

/// Least-squares Koopman matrix K = pinv(D(X)) D(Y), with the pseudo-inverse
/// computed through a rank-truncated SVD so near-degenerate data cannot blow
/// up the fit. Minimizes ||D(Y) - D(X) K||_F.
inline LeastSquaresFit least_squares_koopman(const EvaluatedDictionary& dx,
                                             const EvaluatedDictionary& dy,
                                             const linalg::RankTolerance& tol = {}) {
    if (dx.rows() != dy.rows() || dx.cols() != dy.cols())
        throw InputError("least_squares_koopman: evaluated dictionaries differ in shape");
    if (dx.cols() == 0) return LeastSquaresFit{Matrix(0, 0), 0.0};
    linalg::require_finite(dx, "least_squares_koopman");
    linalg::require_finite(dy, "least_squares_koopman");

    const double cut = tol.cutoff(dx.rows(), dx.cols());
    const auto truncated_pinv_apply = [cut](const Matrix& lhs, const Matrix& rhs) {
        Eigen::JacobiSVD<Matrix> svd(lhs, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Index rank = linalg::detail::rank_from_singular_values(svd.singularValues(), cut);
        Matrix coeffs = svd.matrixU().leftCols(rank).transpose() * rhs;
        for (Index i = 0; i < rank; ++i) coeffs.row(i) /= svd.singularValues()(i);
        return Matrix(svd.matrixV().leftCols(rank) * coeffs);
    };
    Matrix k;
    if (linalg::detail::use_qr_prepass(dx.rows(), dx.cols())) {
        Eigen::HouseholderQR<Matrix> qr(dx);
        Matrix r = qr.matrixQR().topRows(dx.cols()).triangularView<Eigen::Upper>();
        Matrix qt_dy = (qr.householderQ().adjoint() * dy).topRows(dx.cols());
        k = truncated_pinv_apply(r, qt_dy);
    } else {
        k = truncated_pinv_apply(dx, dy);
    }
    const double residual = (dy - dx * k).norm();
    return LeastSquaresFit{std::move(k), residual};
}

inline double residual_frobenius(const EvaluatedDictionary& dx, const EvaluatedDictionary& dy,
                                 const Matrix& k) {
    if (dx.rows() != dy.rows() || dx.cols() != dy.cols() || dx.cols() != k.rows() ||
        dy.cols() != k.cols())
        throw InputError("residual_frobenius: shape mismatch");
    return (dy - dx * k).norm();
}

struct Eigenpair {
    std::complex<double> value;
    Eigen::VectorXcd vector;  // unit norm, largest-magnitude entry real positive
};

/// Eigendecomposition with reproducible output: eigenvectors have unit norm
/// and the largest-magnitude entry made real positive; pairs are sorted by
/// |lambda| descending and complex pairs stored as exact conjugates.
inline std::vector<Eigenpair> eigendecompose(const Matrix& k) {
    std::vector<Eigenpair> pairs;
    if (k.rows() == 0) return pairs;
    Eigen::EigenSolver<Matrix> solver(k);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("eigendecompose: eigensolver failed to converge");
    const Index n = k.rows();
    pairs.reserve(n);
    for (Index i = 0; i < n; ++i) {
        Eigenpair p{solver.eigenvalues()(i), solver.eigenvectors().col(i)};
        p.vector.normalize();
        Index arg_max = 0;
        double best = 0.0;
        for (Index j = 0; j < n; ++j) {
            const double mag = std::abs(p.vector(j));
            if (mag > best) {
                best = mag;
                arg_max = j;
            }
        }
        if (best > 0.0) p.vector *= std::conj(p.vector(arg_max)) / best;
        pairs.push_back(std::move(p));
    }
    std::sort(pairs.begin(), pairs.end(), [](const Eigenpair& a, const Eigenpair& b) {
        const double ma = std::abs(a.value), mb = std::abs(b.value);
        if (ma != mb) return ma > mb;
        if (a.value.real() != b.value.real()) return a.value.real() > b.value.real();
        return a.value.imag() > b.value.imag();
    });
    // enforce exact conjugate storage for complex pairs
    for (std::size_t i = 0; i + 1 < pairs.size(); ++i) {
        if (pairs[i].value.imag() > 0.0 &&
            std::abs(pairs[i + 1].value - std::conj(pairs[i].value)) <
                1e-10 * (1.0 + std::abs(pairs[i].value))) {
            pairs[i + 1].value = std::conj(pairs[i].value);
            pairs[i + 1].vector = pairs[i].vector.conjugate();
            ++i;
        }
    }
    return pairs;
}

/// A fitted Koopman approximation: the dictionary, the matrix acting on
/// coefficient space, and the cached eigendecomposition.
struct KoopmanModel {
    Dictionary dictionary;
    Matrix K;
    double fit_residual = 0.0;
    std::vector<Eigenpair> eigenpairs;
};

inline KoopmanModel edmd_fit(const Dictionary& dict, const EvaluatedDictionary& dx,
                             const EvaluatedDictionary& dy,
                             const linalg::RankTolerance& tol = {}) {
    if (dx.cols() != dict.size())
        throw InputError("edmd_fit: evaluated width does not match dictionary size");
    LeastSquaresFit fit = least_squares_koopman(dx, dy, tol);
    KoopmanModel model{dict, std::move(fit.K), fit.residual, {}};
    model.eigenpairs = eigendecompose(model.K);
    return model;
}

inline KoopmanModel edmd_fit_on_states(const Dictionary& dict, const Matrix& x_states,
                                       const Matrix& y_states,
                                       const linalg::RankTolerance& tol = {}) {
    return edmd_fit(dict, evaluate(dict, x_states), evaluate(dict, y_states), tol);
}

/// Value of the idx-th approximated eigenfunction D(x) v at a state.
inline std::complex<double> eigenfunction_value(const KoopmanModel& model, std::size_t idx,
                                                const Vector& state) {
    if (idx >= model.eigenpairs.size())
        throw std::out_of_range("eigenfunction_value: eigenpair index out of range");
    const Eigen::RowVectorXd row = evaluate_row(model.dictionary, state);
    return (row.cast<std::complex<double>>() * model.eigenpairs[idx].vector)(0);
}

/// Dictionary predictor rollout: row k is D(x0) K^k, k = 0..steps.
inline Matrix predict_dictionary(const KoopmanModel& model, const Vector& x0, int steps) {
    if (steps < 0) throw InputError("predict_dictionary: steps must be >= 0");
    Matrix out(steps + 1, model.K.cols());
    Eigen::RowVectorXd row = evaluate_row(model.dictionary, x0);
    out.row(0) = row;
    for (int k = 1; k <= steps; ++k) {
        row = row * model.K;
        out.row(k) = row;
    }
    return out;
}

/// Predictor for f = D(.) w: value k is D(x0) K^k w; k = 1 is the one-step
/// prediction of f at x0.
inline Eigen::VectorXcd predict_function(const KoopmanModel& model, const Eigen::VectorXcd& w,
                                         const Vector& x0, int steps) {
    if (w.size() != model.K.cols()) throw InputError("predict_function: weight size mismatch");
    if (steps < 0) throw InputError("predict_function: steps must be >= 0");
    Eigen::VectorXcd out(steps + 1);
    Eigen::RowVectorXd row = evaluate_row(model.dictionary, x0);
    out(0) = (row.cast<std::complex<double>>() * w)(0);
    for (int k = 1; k <= steps; ++k) {
        row = row * model.K;
        out(k) = (row.cast<std::complex<double>>() * w)(0);
    }
    return out;
}

/// Relative linear prediction error (percent) of the dictionary at x, given
/// the successor state x_next: 100 * ||D(x_next) - D(x) K|| / ||D(x_next)||.
inline double relative_prediction_error(const Dictionary& dict, const Matrix& k, const Vector& x,
                                        const Vector& x_next) {
    const Eigen::RowVectorXd d_next = evaluate_row(dict, x_next);
    const Eigen::RowVectorXd d_cur = evaluate_row(dict, x);
    const double denom = d_next.norm();
    if (denom == 0.0)
        throw InputError("relative_prediction_error: dictionary vanishes at successor state");
    return 100.0 * (d_next - d_cur * k).norm() / denom;
}

/// Worst-case relative root-mean-square one-step error over all functions in
/// the dictionary span, via the spectral identity: it equals the largest
/// eigenvalue magnitude of the projector difference of the two evaluations.
inline double rrmse_max(const Dictionary& dict, const Matrix& x_states, const Matrix& y_states,
                        const linalg::RankTolerance& tol = {}) {
    if (dict.size() == 0) return 0.0;
    return linalg::epsilon_apart_measure(evaluate(dict, x_states), evaluate(dict, y_states), tol);
}

}  // namespace koopman
