#include "npiv/npiv.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "npiv/error.hpp"

namespace npiv {

void Dataset::validate() const {
    const Eigen::Index n = y.size();
    if (n == 0) throw InputError("dataset is empty");
    if (x.rows() != n || w.rows() != n) throw InputError("y, x and w must have the same number of rows");
    if (x.cols() < 1 || w.cols() < 1) throw InputError("need at least one regressor and one instrument");
    if (mu.size() != 0 && mu.size() != n) throw InputError("weight vector has the wrong length");
    if (!y.allFinite() || !x.allFinite() || !w.allFinite() || !mu.allFinite())
        throw InputError("dataset contains non-finite values");
    if (mu.size() != 0 && (mu.array() < 0.0).any()) throw InputError("weights must be non-negative");
}

int per_coordinate_dim(int target, int d, int min_dim) {
    if (d <= 1) return std::max(target, min_dim);
    int k = std::max(1, static_cast<int>(std::floor(std::pow(static_cast<double>(target), 1.0 / d))));
    while (std::pow(static_cast<double>(k), d) < target) ++k;
    return std::max(k, min_dim);
}

Matrix eval_psi(const basis::BasisSpec& tmpl, int jdim, const Matrix& x, Diagnostics* diag) {
    std::vector<basis::BasisSpec> specs;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        basis::BasisSpec s = tmpl.with_dim(jdim);
        if (tmpl.knot_rule == basis::KnotRule::Quantile && s.family == basis::Family::BSpline) {
            const Vector col = x.col(c);
            s = basis::with_quantile_knots(s, std::span<const double>(col.data(), col.size()));
        }
        specs.push_back(std::move(s));
    }
    return basis::tensor_design(specs, x, diag);
}

Vector NpivFit::apply_qpsi(const Vector& r) const {
    return std::sqrt(static_cast<double>(n())) * (psi * (qpsi_factor.transpose() * r));
}

NpivFit fit_unrestricted(const Vector& y, const SieveDesign& design, double rcond) {
    const Matrix& psi = design.psi;
    const Matrix& b = design.b;
    const Eigen::Index n = psi.rows();
    const Eigen::Index J = psi.cols();
    const Eigen::Index K = b.cols();
    if (b.rows() != n || y.size() != n || design.omega.size() != n)
        throw InputError("fit_unrestricted: dimension mismatch between y, Psi, B and weights");
    if (K < J) throw InputError("fit_unrestricted: need K >= J (K=" + std::to_string(K) + ", J=" + std::to_string(J) + ")");
    if (n <= K) throw InputError("fit_unrestricted: need n > K (n=" + std::to_string(n) + ", K=" + std::to_string(K) + ")");

    NpivFit fit;
    const Matrix btb = b.transpose() * b;
    const Matrix btb_inv = rcond > 0 ? linalg::pinv(btb, rcond) : linalg::pinv(btb);
    const Matrix bt_psi = b.transpose() * psi;
    const Matrix coef_b = btb_inv * bt_psi;              // (B'B)^- B'Psi
    const Matrix pb_psi = b * coef_b;                    // P_B Psi
    Matrix gram = bt_psi.transpose() * coef_b;           // Psi' P_B Psi
    gram = 0.5 * (gram + gram.transpose());
    const double rc = rcond > 0 ? rcond : linalg::default_rcond(gram);
    fit.gram_inv = linalg::pinv(gram, rc);
    fit.rank = linalg::rank(gram, rc);
    if (fit.rank < J) {
        std::ostringstream os;
        os << "Psi'P_B Psi has rank " << fit.rank << " < J=" << J << "; generalized inverse used";
        fit.warnings.push_back(os.str());
    }
    if (fit.rank == 0) throw NumericalError("fit_unrestricted: projected sieve gram is zero");
    fit.qpsi_factor = pb_psi * fit.gram_inv;
    fit.beta = fit.qpsi_factor.transpose() * y;
    fit.psi = psi;
    fit.fitted = psi * fit.beta;
    fit.residuals = y - fit.fitted;
    fit.omega = design.omega;
    fit.gram_weighted = psi.transpose() * design.omega.asDiagonal() * psi;
    fit.gram_weighted = 0.5 * (fit.gram_weighted + fit.gram_weighted.transpose());
    return fit;
}

std::vector<int> active_rows(const Matrix& M, const Vector& beta) {
    std::vector<int> out;
    const double bn = beta.norm();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        const double val = M.row(r).dot(beta);
        if (std::fabs(val) <= 1e-8 * (1.0 + bn * M.row(r).norm())) out.push_back(static_cast<int>(r));
    }
    return out;
}

namespace {

// Least squares of t on the rows of A indexed by P (minimum-norm when dependent).
Vector ls_on_rows(const Matrix& A, const std::vector<int>& P, const Vector& t) {
    Matrix AP(A.cols(), static_cast<Eigen::Index>(P.size()));
    for (std::size_t k = 0; k < P.size(); ++k) AP.col(static_cast<Eigen::Index>(k)) = A.row(P[k]).transpose();
    return AP.completeOrthogonalDecomposition().solve(t);
}

}  // namespace

ConeProjection cone_project(const Vector& v, const Matrix& G, const Matrix& M, int max_iter) {
    const Eigen::Index J = v.size();
    if (G.rows() != J || G.cols() != J) throw InputError("cone_project: G must be J x J");
    if (M.cols() != J) throw InputError("cone_project: constraint rows must have J columns");
    if (!v.allFinite() || !G.allFinite() || !M.allFinite()) throw InputError("cone_project: non-finite input");

    ConeProjection out;
    if (M.rows() == 0 || (M * v).maxCoeff() <= 1e-12 * (1.0 + v.norm() * M.rowwise().norm().maxCoeff())) {
        out.beta = v;
        out.active_set = M.rows() ? active_rows(M, v) : std::vector<int>{};
        return out;
    }

    const Matrix Gs = linalg::checked_symmetric(G);
    Eigen::LLT<Matrix> llt(Gs);
    if (llt.info() != Eigen::Success) throw InputError("cone_project: G is not positive definite");
    const Matrix R = llt.matrixU();  // G = R'R
    // z = R beta; constraints M beta = (M R^{-1}) z.
    const Matrix A = R.transpose().triangularView<Eigen::Lower>().solve(M.transpose()).transpose();
    const Vector t = R * v;
    const double scale = 1.0 + t.norm();
    const double tol = 1e-12 * scale;

    // Moreau: t = P_C(t) + P_polar(t), and the polar cone is generated by the rows
    // of A, so P_C(t) = t - A' lambda with lambda the non-negative least squares
    // coefficients of t on those rows (Lawson-Hanson active set).
    const Eigen::Index m = A.rows();
    const int cap = max_iter > 0 ? max_iter : static_cast<int>(30 * (m + J) + 100);
    Vector lambda = Vector::Zero(m);
    std::vector<int> P;
    std::vector<char> in_p(static_cast<std::size_t>(m), 0), blocked(static_cast<std::size_t>(m), 0);
    int it = 0;
    for (; it < cap; ++it) {
        const Vector w = A * (t - A.transpose() * lambda);
        Eigen::Index best = -1;
        double wmax = tol;
        for (Eigen::Index r = 0; r < m; ++r) {
            const auto ru = static_cast<std::size_t>(r);
            if (in_p[ru] || blocked[ru]) continue;
            const double score = w(r) / std::max(A.row(r).norm(), 1e-300);
            if (score > wmax) {
                wmax = score;
                best = r;
            }
        }
        if (best < 0) break;
        P.push_back(static_cast<int>(best));
        in_p[static_cast<std::size_t>(best)] = 1;
        Vector sP = ls_on_rows(A, P, t);
        if (sP(static_cast<Eigen::Index>(P.size()) - 1) <= 0.0) {
            // no progress along the new generator (round-off): skip it until lambda changes
            P.pop_back();
            in_p[static_cast<std::size_t>(best)] = 0;
            blocked[static_cast<std::size_t>(best)] = 1;
            continue;
        }
        while (true) {
            double alpha = 1.0;
            bool any = false;
            for (std::size_t k = 0; k < P.size(); ++k) {
                const double s_k = sP(static_cast<Eigen::Index>(k));
                if (s_k <= 0.0) {
                    const double l_k = lambda(P[k]);
                    alpha = std::min(alpha, l_k / (l_k - s_k));
                    any = true;
                }
            }
            if (!any) break;
            for (std::size_t k = 0; k < P.size(); ++k)
                lambda(P[k]) += alpha * (sP(static_cast<Eigen::Index>(k)) - lambda(P[k]));
            std::vector<int> keep;
            for (int r : P) {
                if (lambda(r) <= 1e-15 * scale) {
                    lambda(r) = 0.0;
                    in_p[static_cast<std::size_t>(r)] = 0;
                } else {
                    keep.push_back(r);
                }
            }
            P.swap(keep);
            if (P.empty()) break;
            sP = ls_on_rows(A, P, t);
        }
        for (std::size_t k = 0; k < P.size(); ++k) lambda(P[k]) = sP(static_cast<Eigen::Index>(k));
        std::fill(blocked.begin(), blocked.end(), 0);
    }
    if (it >= cap) {
        std::ostringstream os;
        os << "cone_project: iteration cap " << cap << " reached (" << P.size() << " generators in use, "
           << m << " constraints, J " << J << ")";
        throw NumericalError(os.str());
    }
    const Vector z = t - A.transpose() * lambda;
    out.beta = R.triangularView<Eigen::Upper>().solve(z);
    out.active_set = active_rows(M, out.beta);
    out.iterations = it;
    return out;
}

RestrictedFit fit_restricted_cone(const NpivFit& fit, const Vector& y, const basis::ConstraintMatrix& M) {
    if (M.rows.cols() != fit.dim()) throw InputError("fit_restricted_cone: constraint matrix and fit disagree on J");
    if (Eigen::LLT<Matrix>(linalg::checked_symmetric(fit.gram_weighted)).info() != Eigen::Success)
        throw NumericalError("fit_restricted_cone: weighted sieve gram Psi' Omega Psi is singular (J=" +
                             std::to_string(fit.dim()) + ")");
    const ConeProjection proj = cone_project(fit.beta, fit.gram_weighted, M.rows);
    RestrictedFit out;
    out.kind = RestrictedFit::Kind::Cone;
    out.beta_r = proj.beta;
    out.fitted_r = fit.psi * proj.beta;
    out.residuals_r = y - out.fitted_r;
    out.active_set = proj.active_set;
    out.model = basis::to_string(M.kind);
    return out;
}

std::string to_string(ParametricModel m) {
    switch (m) {
        case ParametricModel::Linear: return "linear";
        case ParametricModel::Quadratic: return "quadratic";
        case ParametricModel::Custom: return "custom";
    }
    return "?";
}

ParametricModel parametric_model_from_string(const std::string& s) {
    if (s == "linear") return ParametricModel::Linear;
    if (s == "quadratic") return ParametricModel::Quadratic;
    if (s == "custom") return ParametricModel::Custom;
    throw InputError("unknown parametric model '" + s + "'");
}

Matrix parametric_design(ParametricModel model, const Matrix& x, const std::function<Matrix(const Matrix&)>& custom) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    switch (model) {
        case ParametricModel::Linear: {
            Matrix out(n, d + 1);
            out.col(0).setOnes();
            out.rightCols(d) = x;
            return out;
        }
        case ParametricModel::Quadratic: {
            const Eigen::Index p = 1 + d + d * (d + 1) / 2;
            Matrix out(n, p);
            out.col(0).setOnes();
            out.middleCols(1, d) = x;
            Eigen::Index c = 1 + d;
            for (Eigen::Index a = 0; a < d; ++a)
                for (Eigen::Index b = a; b < d; ++b) out.col(c++) = x.col(a).cwiseProduct(x.col(b));
            return out;
        }
        case ParametricModel::Custom: {
            if (!custom) throw InputError("custom parametric model needs a design function");
            Matrix out = custom(x);
            if (out.rows() != n) throw InputError("custom design has the wrong number of rows");
            return out;
        }
    }
    throw InputError("unknown parametric model");
}

RestrictedFit fit_restricted_parametric(const Vector& y, const Matrix& design, const Matrix& b,
                                        const std::string& model_name) {
    if (design.rows() != y.size() || b.rows() != y.size())
        throw InputError("fit_restricted_parametric: dimension mismatch");
    const Matrix btb_inv = linalg::pinv(b.transpose() * b);
    const Matrix bt_x = b.transpose() * design;
    Matrix gram = bt_x.transpose() * btb_inv * bt_x;  // X' P_B X
    gram = 0.5 * (gram + gram.transpose());
    const int r = linalg::rank(gram, linalg::default_rcond(gram) * 1e2);
    if (r < design.cols())
        throw InputError("fit_restricted_parametric: parametric design loses rank after instrument projection (rank " +
                         std::to_string(r) + " < " + std::to_string(design.cols()) + ")");
    RestrictedFit out;
    out.kind = RestrictedFit::Kind::Parametric;
    out.model = model_name;
    out.beta_r = gram.ldlt().solve(bt_x.transpose() * (btb_inv * (b.transpose() * y)));
    out.fitted_r = design * out.beta_r;
    out.residuals_r = y - out.fitted_r;
    return out;
}

}  // namespace npiv
