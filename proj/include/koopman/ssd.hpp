#pragma once

#include <string>

#include "koopman/coefficient_basis.hpp"
#include "koopman/dictionary.hpp"
#include "koopman/errors.hpp"
#include "koopman/linalg.hpp"

namespace koopman {

struct SsdStats {
    int iterations = 0;
    bool found_subspace = false;
};

/// Symmetric Subspace Decomposition.
///
/// Iteratively prunes the coefficient space until the two data ranges agree:
/// returns C with range(DX C) = range(DY C), maximal among all such subspaces,
/// or the 0-column sentinel when only the trivial subspace qualifies. The
/// result has orthonormal columns (each pruning factor is re-orthonormalized,
/// which leaves every range unchanged).
inline CoefficientBasis ssd(const EvaluatedDictionary& dx, const EvaluatedDictionary& dy,
                            const linalg::RankTolerance& tol = {}, SsdStats* stats = nullptr) {
    if (dx.rows() != dy.rows() || dx.cols() != dy.cols())
        throw InputError("ssd: evaluated dictionaries differ in shape");
    const Index n_d = dx.cols();
    if (n_d == 0) return CoefficientBasis::sentinel(0);
    linalg::require_full_column_rank(dx, tol, "ssd(D(X))");
    linalg::require_full_column_rank(dy, tol, "ssd(D(Y))");

    Matrix a = dx, b = dy;
    Matrix c = Matrix::Identity(n_d, n_d);
    for (int iter = 1; iter <= n_d; ++iter) {
        if (stats) stats->iterations = iter;
        const Matrix z = linalg::null_space_basis(linalg::hcat(a, b), tol);
        if (z.cols() == 0) return CoefficientBasis::sentinel(n_d);  // basis does not exist
        const Index q = a.cols();
        if (q <= z.cols()) {
            // kernel as large as the current subspace: ranges already equal
            if (stats) stats->found_subspace = true;
            return CoefficientBasis{c};
        }
        const Matrix z_a = linalg::range_basis(z.topRows(q), tol);
        c = c * z_a;
        a = a * z_a;
        b = b * z_a;
    }
    throw std::runtime_error("ssd: did not terminate within N_d iterations");
}

}  // namespace koopman
