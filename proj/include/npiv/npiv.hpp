#pragma once

#include <functional>
#include <string>
#include <vector>

#include "npiv/basis.hpp"
#include "npiv/linalg.hpp"

namespace npiv {

using linalg::Matrix;
using linalg::Vector;

/// Observations of (Y, X, W) plus optional per-observation weights mu(X_i).
struct Dataset {
    Vector y;
    Matrix x;   // n x d_x
    Matrix w;   // n x d_w
    Vector mu;  // empty means mu == 1

    Eigen::Index n() const { return y.size(); }
    Vector weights() const { return mu.size() == 0 ? Vector::Ones(y.size()) : mu; }
    /// Throws InputError on inconsistent shapes or non-finite values.
    void validate() const;
};

/// Evaluated sieve matrices for one (J, K) pair.
struct SieveDesign {
    Matrix psi;    // n x J
    Matrix b;      // n x K
    Vector omega;  // diagonal of Omega_mu
};

/// Per-coordinate basis dimension so that the tensor product over d
/// coordinates has at least `target` columns.
int per_coordinate_dim(int target, int d, int min_dim);

/// Psi (tensor over the columns of x) with per-coordinate dimension jdim.
Matrix eval_psi(const basis::BasisSpec& tmpl, int jdim, const Matrix& x, Diagnostics* diag = nullptr);

struct NpivFit {
    Vector beta;
    Vector fitted;
    Vector residuals;
    Matrix psi;
    Vector omega;
    Matrix gram_weighted;  // Psi' Omega Psi
    Matrix gram_inv;       // [Psi' P_B Psi]^-
    /// L = P_B Psi [Psi' P_B Psi]^-, so Q_Psi r = sqrt(n) Psi L' r.
    Matrix qpsi_factor;
    int rank = 0;
    std::vector<std::string> warnings;

    Eigen::Index n() const { return fitted.size(); }
    Eigen::Index dim() const { return beta.size(); }
    /// Q_Psi r, for tests and diagnostics.
    Vector apply_qpsi(const Vector& r) const;
};

/// Unrestricted sieve NPIV (2SLS-on-sieve) fit. Requires K >= J and n > K.
NpivFit fit_unrestricted(const Vector& y, const SieveDesign& design, double rcond = 0.0);

struct RestrictedFit {
    enum class Kind { Cone, Parametric };
    Vector beta_r;
    Vector fitted_r;
    Vector residuals_r;
    std::vector<int> active_set;
    Kind kind = Kind::Cone;
    std::string model;  // parametric model name
};

struct ConeProjection {
    Vector beta;
    std::vector<int> active_set;
    int iterations = 0;
};

/// argmin over {M beta <= 0} of (v - beta)' G (v - beta) by a primal
/// active-set method started at the apex beta = 0.
ConeProjection cone_project(const Vector& v, const Matrix& G, const Matrix& M, int max_iter = 0);

/// Constraint rows counted as active at beta.
std::vector<int> active_rows(const Matrix& M, const Vector& beta);

RestrictedFit fit_restricted_cone(const NpivFit& fit, const Vector& y, const basis::ConstraintMatrix& M);

enum class ParametricModel { Linear, Quadratic, Custom };

std::string to_string(ParametricModel m);
ParametricModel parametric_model_from_string(const std::string& s);

/// Regressor design for a parametric null: (1, x) or (1, x, x^2) per
/// coordinate (plus cross-products for quadratic models in d > 1).
Matrix parametric_design(ParametricModel model, const Matrix& x,
                         const std::function<Matrix(const Matrix&)>& custom = {});

/// 2SLS of y on the parametric design using instruments b.
RestrictedFit fit_restricted_parametric(const Vector& y, const Matrix& design, const Matrix& b,
                                        const std::string& model_name);

}  // namespace npiv
