#pragma once

#include "koopman/linalg.hpp"

namespace koopman {

/// Selects a subspace of the span of a dictionary: an N_d x q matrix with
/// orthonormal columns. q == 0 is the sentinel meaning "no admissible
/// subspace exists" (the scalar-0 return of the decomposition algorithms).
struct CoefficientBasis {
    Matrix matrix;  // N_d x q; q == 0 encodes the sentinel

    static CoefficientBasis sentinel(Index n_d) { return CoefficientBasis{Matrix(n_d, 0)}; }

    bool is_sentinel() const { return matrix.cols() == 0; }
    Index dim() const { return matrix.cols(); }
    Index ambient_dim() const { return matrix.rows(); }
};

}  // namespace koopman
