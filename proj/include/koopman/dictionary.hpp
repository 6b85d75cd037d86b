#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "koopman/coefficient_basis.hpp"
#include "koopman/errors.hpp"
#include "koopman/linalg.hpp"

namespace koopman {

/// A dictionary of observables: monomial terms composed with a linear
/// transform. Evaluating at a state x yields the row
///   D(x) = [m_1(x), ..., m_{N_raw}(x)] * transform,
/// so the dictionary has N_d = cols(transform) functions built from N_raw
/// monomials. Keeping monomials + transform (rather than opaque callables)
/// makes dictionaries serializable and runs reproducible.
struct Dictionary {
    int n_vars = 0;
    int max_degree = 0;
    std::vector<std::vector<int>> terms;  // exponent vectors, graded-lex order
    Matrix transform;                     // N_raw x N_d

    Index raw_size() const { return static_cast<Index>(terms.size()); }
    Index size() const { return transform.cols(); }
};

using EvaluatedDictionary = Matrix;  // N x N_d, row i = D(x_i)

namespace detail {

inline void enumerate_terms(int n_vars, int remaining, std::vector<int>& current,
                            std::vector<std::vector<int>>& out) {
    const int var = static_cast<int>(current.size());
    if (var == n_vars - 1) {
        current.push_back(remaining);
        out.push_back(current);
        current.pop_back();
        return;
    }
    for (int e = remaining; e >= 0; --e) {
        current.push_back(e);
        enumerate_terms(n_vars, remaining - e, current, out);
        current.pop_back();
    }
}

}  // namespace detail

/// Number of monomials in n_vars variables with total degree <= max_degree,
/// i.e. C(n_vars + max_degree, max_degree). Throws when it exceeds `cap`.
inline std::uint64_t monomial_count(int n_vars, int max_degree, std::uint64_t cap) {
    std::uint64_t count = 1;
    for (int k = 1; k <= n_vars; ++k) {
        count = count * static_cast<std::uint64_t>(max_degree + k) / static_cast<std::uint64_t>(k);
        if (count > cap)
            throw ConfigError("monomial_dictionary: term count exceeds cap of " +
                              std::to_string(cap));
    }
    return count;
}

/// All monomials of total degree <= max_degree in graded-lexicographic order
/// (degree blocks ascending; within a block exponent vectors descending).
inline Dictionary monomial_dictionary(int n_vars, int max_degree,
                                      std::uint64_t term_cap = 1u << 20) {
    if (n_vars < 1) throw ConfigError("monomial_dictionary: n_vars must be >= 1");
    if (max_degree < 0) throw ConfigError("monomial_dictionary: max_degree must be >= 0");
    const std::uint64_t n_terms = monomial_count(n_vars, max_degree, term_cap);

    Dictionary dict;
    dict.n_vars = n_vars;
    dict.max_degree = max_degree;
    dict.terms.reserve(n_terms);
    std::vector<int> current;
    for (int deg = 0; deg <= max_degree; ++deg)
        detail::enumerate_terms(n_vars, deg, current, dict.terms);
    dict.transform = Matrix::Identity(dict.raw_size(), dict.raw_size());
    return dict;
}

/// Raw monomial matrix: row i holds every term evaluated at state x_i.
inline Matrix evaluate_raw(const Dictionary& dict, const Matrix& states) {
    if (states.cols() != dict.n_vars)
        throw InputError("evaluate: state dimension " + std::to_string(states.cols()) +
                         " does not match dictionary n_vars " + std::to_string(dict.n_vars));
    linalg::require_finite(states, "evaluate");
    const Index n = states.rows();

    // per-variable power columns up to the largest exponent used
    std::vector<int> max_exp(dict.n_vars, 0);
    for (const auto& term : dict.terms)
        for (int j = 0; j < dict.n_vars; ++j) max_exp[j] = std::max(max_exp[j], term[j]);
    std::vector<std::vector<Vector>> powers(dict.n_vars);
    for (int j = 0; j < dict.n_vars; ++j) {
        powers[j].resize(max_exp[j] + 1);
        powers[j][0] = Vector::Ones(n);
        for (int e = 1; e <= max_exp[j]; ++e)
            powers[j][e] = powers[j][e - 1].cwiseProduct(states.col(j));
    }

    Matrix raw(n, dict.raw_size());
    for (Index t = 0; t < dict.raw_size(); ++t) {
        Vector col = Vector::Ones(n);
        for (int j = 0; j < dict.n_vars; ++j) {
            const int e = dict.terms[t][j];
            if (e > 0) col = col.cwiseProduct(powers[j][e]);
        }
        raw.col(t) = col;
    }
    return raw;
}

inline EvaluatedDictionary evaluate(const Dictionary& dict, const Matrix& states) {
    return evaluate_raw(dict, states) * dict.transform;
}

inline Eigen::RowVectorXd evaluate_row(const Dictionary& dict, const Vector& state) {
    return evaluate(dict, Matrix(state.transpose())).row(0);
}

/// Replaces the transform so that the dictionary evaluated on `states` has
/// orthonormal columns. The span of the functions is unchanged. Uses a thin
/// QR of the evaluated matrix; the inverse triangular factor (with a positive
/// diagonal convention for determinism) updates the transform.
inline Dictionary orthonormalize_on_data(const Dictionary& dict, const Matrix& states,
                                         const linalg::RankTolerance& tol = {}) {
    const Matrix evaluated = evaluate(dict, states);
    const Index n_d = evaluated.cols();
    if (evaluated.rows() < n_d)
        throw RankPreconditionError("orthonormalize_on_data: fewer snapshots than functions");
    Eigen::HouseholderQR<Matrix> qr(evaluated);
    Matrix r = qr.matrixQR().topRows(n_d).triangularView<Eigen::Upper>();
    const double diag_max = r.diagonal().cwiseAbs().maxCoeff();
    const double cut = tol.cutoff(evaluated.rows(), n_d);
    for (Index i = 0; i < n_d; ++i)
        if (std::abs(r(i, i)) <= cut * diag_max)
            throw RankPreconditionError(
                "orthonormalize_on_data: evaluated dictionary is column-rank deficient");
    Matrix r_inv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(n_d, n_d));
    for (Index i = 0; i < n_d; ++i)
        if (r(i, i) < 0.0) r_inv.col(i) = -r_inv.col(i);

    Dictionary out = dict;
    out.transform = dict.transform * r_inv;
    return out;
}

/// Restricts the dictionary to the subspace selected by the coefficients C:
/// evaluating the result equals evaluating `dict` and right-multiplying by C.
/// A 0-column C produces the empty dictionary.
inline Dictionary restrict(const Dictionary& dict, const Matrix& coefficients) {
    if (coefficients.rows() != dict.size())
        throw InputError("restrict: coefficient rows " + std::to_string(coefficients.rows()) +
                         " do not match dictionary size " + std::to_string(dict.size()));
    Dictionary out = dict;
    out.transform = dict.transform * coefficients;
    return out;
}

inline Dictionary restrict(const Dictionary& dict, const CoefficientBasis& basis) {
    return restrict(dict, basis.matrix);
}

}  // namespace koopman
