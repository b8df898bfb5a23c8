#pragma once

#include <Eigen/Dense>

namespace npiv::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SvdResult {
    Matrix U;                 // n x r, orthonormal columns
    Vector singular_values;   // r, non-increasing
    Matrix Vt;                // r x m, orthonormal rows
};

/// Default relative singular-value cutoff for generalized inverses.
double default_rcond(const Matrix& A);

/// Thin SVD. Throws NumericalError on non-finite input or failed convergence.
SvdResult svd(const Matrix& A);

/// Moore-Penrose pseudo-inverse; singular values below rcond * s_max are dropped.
Matrix pinv(const Matrix& A, double rcond);
Matrix pinv(const Matrix& A);

/// Numerical rank with the same relative cutoff convention as pinv.
int rank(const Matrix& A, double rcond);

/// Orthogonal projector onto col(B): B (B'B)^- B'.
Matrix projection_matrix(const Matrix& B);

/// H with H G H = I on the retained eigenspace of the symmetric PSD matrix G.
/// Throws InputError if G is not symmetric within 1e-8 * ||G||_F.
Matrix sym_inv_sqrt(const Matrix& G, double rcond);

/// Symmetric PSD square root (negative eigenvalues from round-off clipped to 0).
Matrix sym_sqrt(const Matrix& G);

double frobenius_norm(const Matrix& A);

/// Symmetrizes G after checking asymmetry against the tolerance above.
Matrix checked_symmetric(const Matrix& G);

bool all_finite(const Matrix& A);

}  // namespace npiv::linalg
