#include "npiv/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "npiv/error.hpp"

namespace npiv::linalg {

double default_rcond(const Matrix& A) {
    return 1e-12 * static_cast<double>(std::max(A.rows(), A.cols()));
}

bool all_finite(const Matrix& A) { return A.allFinite(); }

SvdResult svd(const Matrix& A) {
    if (A.rows() < 1 || A.cols() < 1) throw InputError("svd: empty matrix");
    if (!A.allFinite()) throw NumericalError("svd: matrix has non-finite entries");
    Eigen::JacobiSVD<Matrix> solver(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (solver.info() != Eigen::Success) throw NumericalError("svd: Jacobi sweeps did not converge");
    SvdResult out;
    out.U = solver.matrixU();
    out.singular_values = solver.singularValues();
    out.Vt = solver.matrixV().transpose();
    return out;
}

Matrix pinv(const Matrix& A, double rcond) {
    if (!(rcond > 0.0 && rcond < 1.0)) throw InputError("pinv: rcond must lie in (0, 1)");
    const SvdResult f = svd(A);
    const Vector& s = f.singular_values;
    Matrix out = Matrix::Zero(A.cols(), A.rows());
    if (s.size() == 0 || s(0) <= 0.0) return out;
    const double cut = rcond * s(0);
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        if (s(k) <= cut) break;
        out.noalias() += (f.Vt.row(k).transpose() / s(k)) * f.U.col(k).transpose();
    }
    return out;
}

Matrix pinv(const Matrix& A) { return pinv(A, default_rcond(A)); }

int rank(const Matrix& A, double rcond) {
    if (A.rows() == 0 || A.cols() == 0) return 0;
    const Vector s = svd(A).singular_values;
    if (s(0) <= 0.0) return 0;
    int r = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k)
        if (s(k) > rcond * s(0)) ++r;
    return r;
}

Matrix projection_matrix(const Matrix& B) {
    if (B.rows() < B.cols()) throw InputError("projection_matrix: need rows >= cols");
    const Matrix gram = B.transpose() * B;
    Matrix P = B * pinv(gram) * B.transpose();
    return 0.5 * (P + P.transpose());
}

Matrix checked_symmetric(const Matrix& G) {
    if (G.rows() != G.cols()) throw InputError("expected a square matrix");
    const double asym = (G - G.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8 * std::max(G.norm(), 1e-300)) throw InputError("matrix is not symmetric");
    return 0.5 * (G + G.transpose());
}

Matrix sym_inv_sqrt(const Matrix& G, double rcond) {
    const Matrix S = checked_symmetric(G);
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    if (es.info() != Eigen::Success) throw NumericalError("sym_inv_sqrt: eigendecomposition failed");
    const Vector& lam = es.eigenvalues();
    const double lmax = lam.maxCoeff();
    Vector d = Vector::Zero(lam.size());
    if (lmax > 0.0)
        for (Eigen::Index k = 0; k < lam.size(); ++k)
            if (lam(k) > rcond * lmax) d(k) = 1.0 / std::sqrt(lam(k));
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Matrix sym_sqrt(const Matrix& G) {
    const Matrix S = checked_symmetric(G);
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    if (es.info() != Eigen::Success) throw NumericalError("sym_sqrt: eigendecomposition failed");
    const Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

double frobenius_norm(const Matrix& A) { return A.norm(); }

}  // namespace npiv::linalg
