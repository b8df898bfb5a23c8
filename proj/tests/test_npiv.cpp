#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "npiv/basis.hpp"
#include "npiv/dgp.hpp"
#include "npiv/error.hpp"
#include "npiv/npiv.hpp"
#include "oracles.hpp"

using namespace npiv;

namespace {

std::vector<double> col(const Matrix& m, int j) {
    std::vector<double> v(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, j);
    return v;
}

SieveDesign spline_design(const Dataset& d, int J, int K) {
    SieveDesign s;
    s.psi = basis::eval_design(basis::BasisSpec::bspline(3, J), col(d.x, 0));
    s.b = basis::eval_design(basis::BasisSpec::bspline(3, K), col(d.w, 0));
    s.omega = Vector::Ones(d.n());
    return s;
}

Dataset design1(int n, double xi, double c0, std::uint64_t stream) {
    dgp::DesignConfig cfg;
    cfg.n = n;
    cfg.xi = xi;
    cfg.h = dgp::HSpec::mono(c0);
    cfg.seed = 99;
    cfg.stream = stream;
    return dgp::gen_design1(cfg).data;
}

Matrix random_spd(int J, std::mt19937_64& g) {
    std::normal_distribution<double> nd;
    Matrix A(J + 3, J);
    for (int i = 0; i < J + 3; ++i)
        for (int j = 0; j < J; ++j) A(i, j) = nd(g);
    return A.transpose() * A + 0.1 * Matrix::Identity(J, J);
}

Matrix random_matrix(int r, int c, std::mt19937_64& g) {
    std::normal_distribution<double> nd;
    Matrix A(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) A(i, j) = nd(g);
    return A;
}

double gnorm2(const Vector& v, const Matrix& G) { return v.dot(G * v); }

}  // namespace

TEST_CASE("noiseless linear outcome is fitted exactly") {
    std::mt19937_64 g(2);
    std::uniform_real_distribution<double> u(0, 1);
    const int n = 60;
    Vector x(n), w(n), y(n);
    for (int i = 0; i < n; ++i) {
        w(i) = u(g);
        x(i) = 0.5 * w(i) + 0.5 * u(g);
        y(i) = 1.5 - 2.0 * x(i);
    }
    SieveDesign s;
    const std::vector<double> xv(x.data(), x.data() + n), wv(w.data(), w.data() + n);
    s.psi = basis::eval_design(basis::BasisSpec::power(2), xv);
    s.b = basis::eval_design(basis::BasisSpec::power(4), wv);
    s.omega = Vector::Ones(n);
    const NpivFit f = fit_unrestricted(y, s);
    CHECK(f.residuals.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(f.beta(0) == doctest::Approx(1.5).epsilon(1e-8));
    CHECK(f.beta(1) == doctest::Approx(-2.0).epsilon(1e-8));
    CHECK((f.fitted - s.psi * f.beta).norm() == 0.0);
}

TEST_CASE("outcome orthogonal to the projected sieve gives zero coefficients") {
    const Dataset d = design1(200, 0.5, 0.1, 1);
    const SieveDesign s = spline_design(d, 3, 6);
    const Matrix Pb_psi = oracle::projector(s.b) * s.psi;
    std::mt19937_64 g(3);
    Vector y = random_matrix(200, 1, g).col(0);
    y -= Pb_psi * oracle::pinv(Pb_psi) * y;
    const NpivFit f = fit_unrestricted(y, s);
    CHECK(f.beta.norm() < 1e-10 * (1 + y.norm()));
}

TEST_CASE("coefficients match an independent dense two-stage solve") {
    const Dataset d = design1(500, 0.5, 0.01, 4);
    const SieveDesign s = spline_design(d, 3, 6);
    const NpivFit f = fit_unrestricted(d.y, s);
    const Matrix P = oracle::projector(s.b);
    const Matrix lhs = s.psi.transpose() * P * s.psi;
    const Vector rhs = s.psi.transpose() * P * d.y;
    const Vector beta = lhs.ldlt().solve(rhs);
    CHECK((f.beta - beta).norm() <= 1e-8 * (1 + beta.norm()));
    CHECK((lhs * f.beta - rhs).norm() <= 1e-8 * rhs.norm());
    CHECK(f.rank == 3);
}

TEST_CASE("Q_Psi factor matches the explicit n x n matrix") {
    const Dataset d = design1(80, 0.7, 0.1, 5);
    const SieveDesign s = spline_design(d, 4, 8);
    const NpivFit f = fit_unrestricted(d.y, s);
    const Matrix Q = oracle::q_matrix(s.psi, s.b);
    std::mt19937_64 g(8);
    for (int rep = 0; rep < 5; ++rep) {
        const Vector r = random_matrix(80, 1, g).col(0);
        CHECK((f.apply_qpsi(r) - Q * r).norm() <= 1e-9 * (1 + (Q * r).norm()));
    }
}

TEST_CASE("unrestricted fit is equivariant in the outcome scale") {
    const Dataset d = design1(300, 0.5, 0.1, 6);
    const SieveDesign s = spline_design(d, 5, 10);
    const NpivFit f = fit_unrestricted(d.y, s);
    for (double c : {0.1, 3.0, 100.0}) {
        const NpivFit fc = fit_unrestricted(c * d.y, s);
        CHECK((fc.beta - c * f.beta).norm() <= 1e-10 * c * (1 + f.beta.norm()));
    }
}

TEST_CASE("unrestricted fit input checks") {
    const Dataset d = design1(50, 0.5, 0.1, 7);
    SieveDesign s = spline_design(d, 6, 4);
    CHECK_THROWS_AS(fit_unrestricted(d.y, s), InputError);  // K < J
    s = spline_design(d, 3, 50);
    CHECK_THROWS_AS(fit_unrestricted(d.y, s), InputError);  // n <= K
}

TEST_CASE("cone projection closed forms") {
    Matrix G = Matrix::Identity(2, 2);
    Matrix M(1, 2);
    M << 1, 0;
    Vector v(2);
    v << 1, 2;
    auto p = cone_project(v, G, M);
    CHECK(p.beta(0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(p.beta(1) == doctest::Approx(2.0));
    REQUIRE(p.active_set.size() == 1);
    CHECK(p.active_set[0] == 0);

    Vector feas(2);
    feas << -1, 5;
    p = cone_project(feas, G, M);
    CHECK((p.beta - feas).norm() == 0.0);
    CHECK(p.active_set.empty());

    // single violated halfspace in the G-metric
    std::mt19937_64 g(12);
    for (int rep = 0; rep < 50; ++rep) {
        const int J = 2 + rep % 5;
        const Matrix Gr = random_spd(J, g);
        Vector m = random_matrix(J, 1, g).col(0);
        Vector vr = random_matrix(J, 1, g).col(0);
        if (m.dot(vr) <= 0) vr = -vr;
        const Vector Gi_m = Gr.ldlt().solve(m);
        const Vector expect = vr - (m.dot(vr) / m.dot(Gi_m)) * Gi_m;
        const auto pr = cone_project(vr, Gr, m.transpose());
        CHECK((pr.beta - expect).norm() <= 1e-10 * (1 + vr.norm()));
    }
}

TEST_CASE("cone projection agrees with exhaustive and Dykstra oracles") {
    std::mt19937_64 g(21);
    for (int rep = 0; rep < 100; ++rep) {
        const int J = 2 + rep % 5;
        const int m = 1 + rep % (J + 1);
        const Matrix G = random_spd(J, g);
        const Matrix M = random_matrix(m, J, g);
        const Vector v = 2.0 * random_matrix(J, 1, g).col(0);
        const auto p = cone_project(v, G, M);
        const Vector ex = oracle::exhaustive_cone(v, G, M);
        CHECK((p.beta - ex).norm() <= 1e-8 * (1 + v.norm()));
        if (rep % 10 == 0) {
            const Vector dk = oracle::dykstra_cone(v, G, M, 5000);
            CHECK((p.beta - dk).norm() <= 1e-5 * (1 + v.norm()));
        }
    }
}

TEST_CASE("cone projection KKT, Pythagoras and non-expansiveness") {
    std::mt19937_64 g(33);
    for (int rep = 0; rep < 100; ++rep) {
        const int J = 3 + rep % 4;
        const Matrix G = random_spd(J, g);
        const Matrix M = random_matrix(J - 1, J, g);
        const Vector v1 = random_matrix(J, 1, g).col(0);
        const Vector v2 = random_matrix(J, 1, g).col(0);
        const auto p1 = cone_project(v1, G, M);
        const auto p2 = cone_project(v2, G, M);
        const double scale = 1 + v1.norm();
        CHECK((M * p1.beta).maxCoeff() <= 1e-8 * scale);
        const Vector resid = v1 - p1.beta;
        const double cross = resid.dot(G * p1.beta);
        CHECK(std::abs(cross) <= 1e-8 * scale * scale);
        CHECK(gnorm2(v1, G) == doctest::Approx(gnorm2(p1.beta, G) + gnorm2(resid, G) + 2 * cross).epsilon(1e-10));
        // multipliers on the active rows must be non-negative
        if (!p1.active_set.empty()) {
            Matrix Ma(static_cast<Eigen::Index>(p1.active_set.size()), J);
            for (std::size_t k = 0; k < p1.active_set.size(); ++k)
                Ma.row(static_cast<Eigen::Index>(k)) = M.row(p1.active_set[k]);
            const Vector lambda = Ma.transpose().completeOrthogonalDecomposition().solve(G * resid);
            CHECK((Ma.transpose() * lambda - G * resid).norm() <= 1e-8 * scale);
            CHECK(lambda.minCoeff() >= -1e-8 * scale);
        }
        CHECK(std::sqrt(gnorm2(p1.beta - p2.beta, G)) <= std::sqrt(gnorm2(v1 - v2, G)) + 1e-10);
    }
}

TEST_CASE("cone projection rejects non-SPD metrics") {
    Matrix G = Matrix::Identity(2, 2);
    G(1, 1) = -1;
    CHECK_THROWS(cone_project(Vector::Ones(2), G, Matrix::Ones(1, 2)));
}

TEST_CASE("restricted monotone fit") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Dataset d = design1(500, 0.5, 0.01, 40 + s);
        const SieveDesign sd = spline_design(d, 6, 12);
        const NpivFit f = fit_unrestricted(d.y, sd);
        const auto spec = basis::BasisSpec::bspline(3, 6);
        const auto M = basis::deriv_constraints(spec, basis::ShapeKind::Decreasing);
        const RestrictedFit r = fit_restricted_cone(f, d.y, M);
        CHECK(r.kind == RestrictedFit::Kind::Cone);
        CHECK((M.rows * r.beta_r).maxCoeff() <= 1e-8 * (1 + r.beta_r.norm()));
        std::vector<double> grid;
        for (int i = 0; i < 1000; ++i) grid.push_back(i / 999.0);
        CHECK((basis::eval_derivative(spec, grid, 1) * r.beta_r).maxCoeff() <= 1e-10 * (1 + r.beta_r.norm()));
        const Vector gap = f.fitted - r.fitted_r;
        CHECK(std::abs(gap.dot(r.fitted_r)) <= 1e-6 * f.fitted.squaredNorm());
        CHECK((r.residuals_r - (d.y - r.fitted_r)).norm() < 1e-12);
        // optimum of the projection objective
        const double ssr = gap.squaredNorm();
        const auto ex = oracle::exhaustive_cone(f.beta, f.gram_weighted, M.rows);
        CHECK(ssr == doctest::Approx((f.beta - ex).dot(f.gram_weighted * (f.beta - ex))).epsilon(1e-8));
    }
}

TEST_CASE("parametric restricted fits") {
    const Dataset d = design1(500, 0.5, 0.1, 9);
    // exact linear outcome
    Vector yl = 0.3 - 0.2 * d.x.col(0).array();
    Matrix b = basis::eval_design(basis::BasisSpec::bspline(3, 8), col(d.w, 0));
    const Matrix lin = parametric_design(ParametricModel::Linear, d.x);
    auto r = fit_restricted_parametric(yl, lin, b, "linear");
    CHECK(r.residuals_r.cwiseAbs().maxCoeff() < 1e-10);
    CHECK(r.kind == RestrictedFit::Kind::Parametric);
    CHECK(r.active_set.empty());

    // single instrument plus constant: slope is cov(w, y) / cov(w, x)
    Matrix b1(d.n(), 2);
    b1.col(0).setOnes();
    b1.col(1) = d.w.col(0);
    r = fit_restricted_parametric(d.y, lin, b1, "linear");
    const Vector wc = d.w.col(0).array() - d.w.col(0).mean();
    const Vector xc = d.x.col(0).array() - d.x.col(0).mean();
    const Vector yc = d.y.array() - d.y.mean();
    CHECK(r.beta_r(1) == doctest::Approx(wc.dot(yc) / wc.dot(xc)).epsilon(1e-10));

    const Matrix quad = parametric_design(ParametricModel::Quadratic, d.x);
    const Matrix custom = parametric_design(ParametricModel::Custom, d.x, [](const Matrix& x) {
        Matrix m(x.rows(), 3);
        m.col(0).setOnes();
        m.col(1) = x.col(0);
        m.col(2) = x.col(0).cwiseAbs2();
        return m;
    });
    CHECK((quad - custom).norm() == 0.0);
    const auto rq = fit_restricted_parametric(d.y, quad, b, "quadratic");
    const auto rc = fit_restricted_parametric(d.y, custom, b, "custom");
    CHECK((rq.fitted_r - rc.fitted_r).norm() == 0.0);

    Matrix dup(d.n(), 2);
    dup.col(0) = d.x.col(0);
    dup.col(1) = 2.0 * d.x.col(0);
    CHECK_THROWS_AS(fit_restricted_parametric(d.y, dup, b, "custom"), InputError);
}

TEST_CASE("per-coordinate dimension") {
    CHECK(per_coordinate_dim(12, 1, 3) == 12);
    CHECK(per_coordinate_dim(12, 2, 3) == 4);
    CHECK(per_coordinate_dim(4, 2, 3) == 3);
    CHECK(per_coordinate_dim(17, 2, 3) == 5);
}
