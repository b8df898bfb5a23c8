#include "npiv/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "npiv/error.hpp"

namespace npiv::basis {

namespace {

// Index of the knot interval [t[s], t[s+1]) containing x, with the right
// boundary assigned to the last non-degenerate interval.
int find_span(const std::vector<double>& t, int order, int dim, double x) {
    if (x >= t[dim]) return dim - 1;
    if (x <= t[order - 1]) return order - 1;
    auto it = std::upper_bound(t.begin() + order - 1, t.begin() + dim + 1, x);
    return static_cast<int>(it - t.begin()) - 1;
}

// Non-zero basis functions and their derivatives at x (Piegl & Tiller A2.3).
// ders[k][r] is the k-th derivative of basis function span - degree + r.
std::vector<std::vector<double>> ders_basis(const std::vector<double>& t, int span, int degree, double x, int n) {
    const int p = degree;
    std::vector<std::vector<double>> ndu(p + 1, std::vector<double>(p + 1, 0.0));
    std::vector<double> left(p + 1), right(p + 1);
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double tmp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        ndu[j][j] = saved;
    }
    std::vector<std::vector<double>> ders(n + 1, std::vector<double>(p + 1, 0.0));
    for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];
    std::vector<std::vector<double>> a(2, std::vector<double>(p + 1, 0.0));
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a[0][0] = 1.0;
        for (int k = 1; k <= n; ++k) {
            double d = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = (rk >= -1) ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                d += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::swap(s1, s2);
        }
    }
    int factor = p;
    for (int k = 1; k <= n; ++k) {
        for (int j = 0; j <= p; ++j) ders[k][j] *= factor;
        factor *= (p - k);
    }
    return ders;
}

double clamp_point(const BasisSpec& spec, double x, int& clamped) {
    if (x < spec.lo) { ++clamped; return spec.lo; }
    if (x > spec.hi) { ++clamped; return spec.hi; }
    return x;
}

}  // namespace

BasisSpec BasisSpec::bspline(int order, int dim, double lo, double hi) {
    BasisSpec s;
    s.family = Family::BSpline;
    s.order = order;
    s.dim = dim;
    s.lo = lo;
    s.hi = hi;
    validate(s);
    return s;
}

BasisSpec BasisSpec::cosine(int dim, double lo, double hi) {
    BasisSpec s;
    s.family = Family::Cosine;
    s.order = 0;
    s.dim = dim;
    s.lo = lo;
    s.hi = hi;
    validate(s);
    return s;
}

BasisSpec BasisSpec::power(int dim, double lo, double hi) {
    BasisSpec s;
    s.family = Family::Power;
    s.order = 0;
    s.dim = dim;
    s.lo = lo;
    s.hi = hi;
    validate(s);
    return s;
}

BasisSpec BasisSpec::with_dim(int new_dim) const {
    BasisSpec s = *this;
    s.dim = new_dim;
    s.interior_knots.clear();
    return s;
}

std::string BasisSpec::name() const {
    std::ostringstream os;
    os << to_string(family);
    if (family == Family::BSpline) os << "(order=" << order << ")";
    os << "[J=" << dim << "]";
    return os.str();
}

int min_dim(const BasisSpec& spec) { return spec.family == Family::BSpline ? spec.order : 1; }

void validate(const BasisSpec& spec) {
    if (!(spec.lo < spec.hi) || !std::isfinite(spec.lo) || !std::isfinite(spec.hi))
        throw InputError("basis support must be a finite interval with lo < hi");
    if (spec.family == Family::BSpline && spec.order < 1) throw InputError("B-spline order must be >= 1");
    if (spec.dim < min_dim(spec))
        throw InputError("basis dimension " + std::to_string(spec.dim) + " below minimum " +
                         std::to_string(min_dim(spec)) + " for " + to_string(spec.family));
    if (spec.knot_rule == KnotRule::Quantile && !spec.interior_knots.empty()) {
        if (static_cast<int>(spec.interior_knots.size()) != spec.dim - spec.order)
            throw InputError("interior knot count must equal dim - order");
        double prev = spec.lo;
        for (double k : spec.interior_knots) {
            if (!(k > prev)) throw InputError("interior knots must be strictly increasing inside (lo, hi)");
            prev = k;
        }
        if (!(prev < spec.hi)) throw InputError("interior knots must lie inside (lo, hi)");
    }
}

BasisSpec with_quantile_knots(const BasisSpec& spec, std::span<const double> x) {
    if (spec.family != Family::BSpline) throw InputError("quantile knots apply to B-splines only");
    BasisSpec out = spec;
    out.knot_rule = KnotRule::Quantile;
    out.interior_knots.clear();
    const int m = spec.dim - spec.order;
    if (m == 0) return out;
    std::vector<double> v;
    for (double xi : x)
        if (xi > spec.lo && xi < spec.hi) v.push_back(xi);
    if (v.size() < static_cast<std::size_t>(m)) throw InputError("too few interior points for quantile knots");
    std::sort(v.begin(), v.end());
    for (int k = 1; k <= m; ++k) {
        const double pos = static_cast<double>(k) / (m + 1) * static_cast<double>(v.size() - 1);
        const auto lo_i = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi_i = std::min(lo_i + 1, v.size() - 1);
        const double frac = pos - static_cast<double>(lo_i);
        out.interior_knots.push_back(v[lo_i] * (1.0 - frac) + v[hi_i] * frac);
    }
    validate(out);
    return out;
}

std::vector<double> knot_vector(const BasisSpec& spec) {
    if (spec.family != Family::BSpline) throw InputError("knot_vector: not a B-spline basis");
    const int m = spec.dim - spec.order;
    std::vector<double> t(spec.order, spec.lo);
    if (spec.knot_rule == KnotRule::Quantile && static_cast<int>(spec.interior_knots.size()) == m) {
        t.insert(t.end(), spec.interior_knots.begin(), spec.interior_knots.end());
    } else {
        for (int k = 1; k <= m; ++k) t.push_back(spec.lo + (spec.hi - spec.lo) * k / (m + 1));
    }
    t.insert(t.end(), spec.order, spec.hi);
    return t;
}

namespace {

Matrix eval_impl(const BasisSpec& spec, std::span<const double> x, int deriv, Diagnostics* diag) {
    validate(spec);
    if (deriv < 0) throw InputError("derivative order must be >= 0");
    const auto n = static_cast<Eigen::Index>(x.size());
    Matrix out = Matrix::Zero(n, spec.dim);
    int clamped = 0;
    const double width = spec.hi - spec.lo;
    switch (spec.family) {
        case Family::BSpline: {
            const auto t = knot_vector(spec);
            const int p = spec.order - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!std::isfinite(x[i])) throw InputError("non-finite regressor value");
                const double xi = clamp_point(spec, x[i], clamped);
                const int span = find_span(t, spec.order, spec.dim, xi);
                if (deriv > p) continue;
                const auto d = ders_basis(t, span, p, xi, deriv);
                for (int r = 0; r <= p; ++r) out(i, span - p + r) = d[deriv][r];
            }
            break;
        }
        case Family::Cosine: {
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!std::isfinite(x[i])) throw InputError("non-finite regressor value");
                const double u = (clamp_point(spec, x[i], clamped) - spec.lo) / width;
                out(i, 0) = deriv == 0 ? 1.0 : 0.0;
                for (int j = 1; j < spec.dim; ++j) {
                    const double w = std::numbers::pi * j;
                    // d^k/du^k cos(w u) = w^k cos(w u + k pi / 2)
                    const double val = std::pow(w / width, deriv) * std::cos(w * u + deriv * std::numbers::pi / 2);
                    out(i, j) = std::numbers::sqrt2 * val;
                }
            }
            break;
        }
        case Family::Power: {
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!std::isfinite(x[i])) throw InputError("non-finite regressor value");
                const double xi = clamp_point(spec, x[i], clamped);
                for (int j = deriv; j < spec.dim; ++j) {
                    double coef = 1.0;
                    for (int k = 0; k < deriv; ++k) coef *= (j - k);
                    out(i, j) = coef * std::pow(xi, j - deriv);
                }
            }
            break;
        }
    }
    if (clamped > 0 && diag)
        diag->warn(std::to_string(clamped) + " regressor value(s) outside [" + std::to_string(spec.lo) + ", " +
                   std::to_string(spec.hi) + "] clamped");
    return out;
}

}  // namespace

Matrix eval_design(const BasisSpec& spec, std::span<const double> x, Diagnostics* diag) {
    return eval_impl(spec, x, 0, diag);
}

Matrix eval_derivative(const BasisSpec& spec, std::span<const double> x, int deriv) {
    return eval_impl(spec, x, deriv, nullptr);
}

std::vector<double> constraint_points(const BasisSpec& spec, int deriv) {
    if (spec.family != Family::BSpline) throw InputError("shape constraints require a B-spline basis");
    const auto t = knot_vector(spec);
    const int m = spec.order - deriv;  // order of the derivative spline
    const int count = spec.dim - deriv;
    std::vector<double> pts;
    pts.reserve(count);
    if (m == 1) {
        // piecewise constant: one point per non-degenerate knot interval
        for (std::size_t k = 0; k + 1 < t.size(); ++k)
            if (t[k + 1] > t[k]) pts.push_back(0.5 * (t[k] + t[k + 1]));
        return pts;
    }
    // Greville abscissae of the derivative spline, whose knots are t[deriv .. end - deriv).
    for (int j = 0; j < count; ++j) {
        double s = 0.0;
        for (int k = 1; k <= m - 1; ++k) s += t[deriv + j + k];
        pts.push_back(s / (m - 1));
    }
    return pts;
}

ConstraintMatrix deriv_constraints(const BasisSpec& spec, ShapeKind kind) {
    if (spec.family != Family::BSpline) throw InputError("shape constraints require a B-spline basis");
    int deriv = 0;
    double sign = 1.0;
    switch (kind) {
        case ShapeKind::Decreasing: deriv = 1; sign = 1.0; break;
        case ShapeKind::Increasing: deriv = 1; sign = -1.0; break;
        case ShapeKind::Convex: deriv = 2; sign = -1.0; break;
        case ShapeKind::Concave: deriv = 2; sign = 1.0; break;
        case ShapeKind::Custom: throw InputError("custom constraints are supplied directly, not derived");
    }
    if (spec.order < deriv + 1)
        throw InputError(to_string(kind) + " constraints need B-spline order >= " + std::to_string(deriv + 1));
    const auto pts = constraint_points(spec, deriv);
    Matrix rows = sign * eval_derivative(spec, pts, deriv);
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        const double nrm = rows.row(r).norm();
        if (nrm > 0.0) rows.row(r) /= nrm;
    }
    return ConstraintMatrix{rows, kind};
}

Matrix tensor_design(const std::vector<BasisSpec>& specs, const Matrix& x, Diagnostics* diag) {
    if (specs.empty()) throw InputError("tensor_design: need at least one basis");
    if (static_cast<std::size_t>(x.cols()) != specs.size())
        throw InputError("tensor_design: " + std::to_string(x.cols()) + " coordinates but " +
                         std::to_string(specs.size()) + " bases");
    const Eigen::Index n = x.rows();
    Matrix out = Matrix::Ones(n, 1);
    for (std::size_t d = 0; d < specs.size(); ++d) {
        const Vector col = x.col(static_cast<Eigen::Index>(d));
        const Matrix f = eval_design(specs[d], std::span<const double>(col.data(), col.size()), diag);
        Matrix next(n, out.cols() * f.cols());
        for (Eigen::Index a = 0; a < out.cols(); ++a)
            for (Eigen::Index b = 0; b < f.cols(); ++b) next.col(a * f.cols() + b) = out.col(a).cwiseProduct(f.col(b));
        out = std::move(next);
    }
    return out;
}

double zeta(Family family, int dim) {
    return family == Family::Power ? static_cast<double>(dim) : std::sqrt(static_cast<double>(dim));
}

double zeta(const BasisSpec& spec) { return zeta(spec.family, spec.dim); }

std::string to_string(Family f) {
    switch (f) {
        case Family::BSpline: return "bspline";
        case Family::Cosine: return "cosine";
        case Family::Power: return "power";
    }
    return "?";
}

std::string to_string(ShapeKind k) {
    switch (k) {
        case ShapeKind::Decreasing: return "decreasing";
        case ShapeKind::Increasing: return "increasing";
        case ShapeKind::Convex: return "convex";
        case ShapeKind::Concave: return "concave";
        case ShapeKind::Custom: return "custom";
    }
    return "?";
}

ShapeKind shape_kind_from_string(const std::string& s) {
    if (s == "decreasing") return ShapeKind::Decreasing;
    if (s == "increasing") return ShapeKind::Increasing;
    if (s == "convex") return ShapeKind::Convex;
    if (s == "concave") return ShapeKind::Concave;
    if (s == "custom") return ShapeKind::Custom;
    throw InputError("unknown shape kind '" + s + "'");
}

}  // namespace npiv::basis
