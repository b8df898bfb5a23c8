#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "npiv/basis.hpp"
#include "npiv/npiv.hpp"

namespace npiv {

/// Null hypothesis: a polyhedral-cone shape restriction or a parametric form.
struct NullSpec {
    enum class Kind { Shape, Parametric };
    Kind kind = Kind::Shape;
    basis::ShapeKind shape = basis::ShapeKind::Decreasing;
    ParametricModel model = ParametricModel::Linear;
    /// For ShapeKind::Custom: constraint rows for a given Psi basis.
    std::function<basis::ConstraintMatrix(const basis::BasisSpec&)> custom_constraints;
    /// For ParametricModel::Custom: regressor design as a function of x.
    std::function<Matrix(const Matrix&)> custom_design;

    static NullSpec shape_null(basis::ShapeKind k);
    static NullSpec parametric_null(ParametricModel m);
    /// decreasing|increasing|convex|concave|linear|quadratic
    static NullSpec from_string(const std::string& s);
    std::string name() const;
    bool is_equality() const { return kind == Kind::Parametric; }
};

enum class GridMode { Dyadic, Explicit };

struct TestConfig {
    basis::BasisSpec psi = basis::BasisSpec::bspline(3, 3);
    basis::BasisSpec b = basis::BasisSpec::bspline(3, 3);
    int kfactor = 4;  // K = kfactor * J
    GridMode grid_mode = GridMode::Dyadic;
    std::vector<int> explicit_grid;
    /// In explicit mode, also drop candidates above the empirical bound.
    bool cap_explicit = false;
    double rcond = 0.0;  // 0 selects linalg::default_rcond
};

struct CandidateGrid {
    GridMode mode = GridMode::Dyadic;
    int j_lower = 0;           // floor(sqrt(ln ln n)) before lifting
    int j_min = 0;             // basis minimum dimension
    int j_max_exponent = 0;
    int hard_cap = 0;
    std::vector<int> raw;      // J_lower * 2^j, j = 0..j_max_exponent
    std::vector<int> J_list;
    int J_max_hat = 0;
    std::vector<std::pair<int, double>> shat;  // (J, s_hat_J) for every J evaluated
    bool fallback = false;
};

struct PerJRecord {
    int J = 0;
    int K = 0;
    double D = 0.0;
    double v = 0.0;
    double shat = 0.0;
    int gamma = 1;
    double eta = 0.0;
    double W = 0.0;
    double p_value = 1.0;
    std::vector<int> active_set;
    Vector beta;
    Vector beta_r;
};

struct TestReport {
    std::string test_kind = "structural";  // or "image_space"
    std::string null_name;
    std::vector<PerJRecord> per_J;
    CandidateGrid grid;
    double alpha = 0.05;
    bool reject = false;
    int J_reported = 0;
    std::vector<int> J_selected_set;
    double p_value = 1.0;
    double p_threshold = 0.05;
    Vector restricted_parametric_beta;  // parametric nulls only
    std::vector<std::string> warnings;

    double max_W() const;
};

/// Minimal singular value of (B'B)^{-1/2} (B'Psi) (Psi'Omega Psi)^{-1/2}.
/// Throws NumericalError naming the gram that is singular.
double compute_shat(const Matrix& psi, const Matrix& b, const Vector& omega, double rcond = 0.0);

/// K(J) for a given d_w (tensor instruments round up per coordinate).
int instrument_dim(int J, int kfactor, int dw, int min_dim);

/// Candidate set of sieve dimensions (random exponential scan).
CandidateGrid build_grid(const Dataset& data, const TestConfig& cfg, Diagnostics* diag = nullptr);

/// The dyadic index formulas without data: J_lower, j_max and raw candidates.
CandidateGrid dyadic_skeleton(Eigen::Index n);

/// Leave-one-out quadratic distance between restricted residuals projected by Q_Psi.
double compute_D(const Vector& restricted_residuals, const NpivFit& fit);

/// Normalizer built from the unrestricted residuals.
double compute_vhat(const NpivFit& fit, const Vector& unrestricted_residuals);

/// max(1, rank of active constraint rows) for shape nulls, J for equality nulls.
int gamma_hat(const basis::ConstraintMatrix* M, const RestrictedFit& restricted, bool equality_null, int J);

/// (q(alpha / grid_size, gamma) - gamma) / sqrt(gamma).
double eta_hat(double alpha, int grid_size, int gamma);

/// Alpha-free per-J statistics; decide() turns them into a report.
struct TestStatistics {
    std::string test_kind = "structural";
    std::string null_name;
    Eigen::Index n = 0;
    CandidateGrid grid;
    std::vector<PerJRecord> per_J;  // eta, W and p_value left unset
    Vector restricted_parametric_beta;
    std::vector<std::string> warnings;
};

TestStatistics compute_statistics(const Dataset& data, const NullSpec& null, const TestConfig& cfg);
TestReport decide(const TestStatistics& stats, double alpha);

TestReport adaptive_test(const Dataset& data, const NullSpec& null, double alpha, const TestConfig& cfg);

/// A conjectured structural function for confidence-set membership.
struct Candidate {
    enum class Kind { Coefficients, Callable, Parametric };
    Kind kind = Kind::Callable;
    basis::BasisSpec spec;                         // Coefficients
    Vector coefficients;                           // Coefficients / Parametric
    ParametricModel model = ParametricModel::Linear;  // Parametric
    std::function<double(double)> fn;              // Callable (scalar x)
    std::string name;

    Vector evaluate(const Matrix& x) const;
};

struct CsResult {
    bool contained = true;
    int binding_J = 0;       // J with the largest ratio n D(h) / (eta v)
    double max_ratio = 0.0;
    std::vector<PerJRecord> per_J;
};

/// Membership of h in the confidence set obtained by inverting the test.
/// For shape nulls the candidate must satisfy the restriction (InputError otherwise).
CsResult cs_contains(const Candidate& h, const Dataset& data, const NullSpec& null, double alpha,
                     const TestConfig& cfg);

/// Image-space test of a parametric null (leave-one-out functional of E[Y - h(X) | W]).
TestStatistics compute_image_space_statistics(const Dataset& data, const NullSpec& null, const TestConfig& cfg);
TestReport image_space_test(const Dataset& data, const NullSpec& null, double alpha, const TestConfig& cfg);

}  // namespace npiv
