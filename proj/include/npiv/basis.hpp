#pragma once

#include <span>
#include <string>
#include <vector>

#include "npiv/linalg.hpp"

namespace npiv {

/// Collects non-fatal warnings (clamped regressors, rank loss, grid fallback).
struct Diagnostics {
    std::vector<std::string> warnings;
    void warn(std::string msg) { warnings.push_back(std::move(msg)); }
};

namespace basis {

using linalg::Matrix;
using linalg::Vector;

enum class Family { BSpline, Cosine, Power };
enum class KnotRule { Equispaced, Quantile };

/// A sieve family of dimension `dim` on [lo, hi]. For B-splines `order` is
/// degree + 1 (quadratic = 3) and dim = order + number of interior knots.
struct BasisSpec {
    Family family = Family::BSpline;
    int order = 3;
    int dim = 3;
    double lo = 0.0;
    double hi = 1.0;
    KnotRule knot_rule = KnotRule::Equispaced;
    std::vector<double> interior_knots;  // filled for KnotRule::Quantile

    static BasisSpec bspline(int order, int dim, double lo = 0.0, double hi = 1.0);
    static BasisSpec cosine(int dim, double lo = 0.0, double hi = 1.0);
    static BasisSpec power(int dim, double lo = 0.0, double hi = 1.0);

    /// Same family and support with a different dimension. Quantile knots
    /// are dropped and must be re-derived from data via with_quantile_knots.
    BasisSpec with_dim(int new_dim) const;

    std::string name() const;
};

int min_dim(const BasisSpec& spec);
void validate(const BasisSpec& spec);

/// Interior knots placed at empirical quantiles of x (B-splines only).
BasisSpec with_quantile_knots(const BasisSpec& spec, std::span<const double> x);

/// Full clamped knot vector (order copies of each boundary).
std::vector<double> knot_vector(const BasisSpec& spec);

/// n x J design; points outside [lo, hi] are clamped and reported in diag.
Matrix eval_design(const BasisSpec& spec, std::span<const double> x, Diagnostics* diag = nullptr);

/// n x J matrix of the `deriv`-th derivative of each basis function.
Matrix eval_derivative(const BasisSpec& spec, std::span<const double> x, int deriv);

enum class ShapeKind { Decreasing, Increasing, Convex, Concave, Custom };

/// Null restriction {beta : rows * beta <= 0}.
struct ConstraintMatrix {
    Matrix rows;
    ShapeKind kind = ShapeKind::Custom;
};

/// Points at which the derivative of the given order is checked. For
/// quadratic splines and first derivatives these are the J-1 knots of the
/// piecewise-linear derivative, so the check is exact over the interval.
std::vector<double> constraint_points(const BasisSpec& spec, int deriv);

ConstraintMatrix deriv_constraints(const BasisSpec& spec, ShapeKind kind);

/// Row-wise tensor product: column index j1 * (J2 * ...) + j2 * (...) + ...
Matrix tensor_design(const std::vector<BasisSpec>& specs, const Matrix& x, Diagnostics* diag = nullptr);

/// Growth constant: sqrt(J) for splines and cosine, J for power series.
double zeta(const BasisSpec& spec);
double zeta(Family family, int dim);

std::string to_string(Family f);
std::string to_string(ShapeKind k);
ShapeKind shape_kind_from_string(const std::string& s);

}  // namespace basis
}  // namespace npiv
