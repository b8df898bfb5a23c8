#include "npiv/stat.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "npiv/error.hpp"
#include "npiv/randdist.hpp"

namespace npiv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix eval_instruments(const TestConfig& cfg, int kdim, const Matrix& w, Diagnostics* diag) {
    return eval_psi(cfg.b, kdim, w, diag);
}

int total_dim(int per_coord, Eigen::Index d) {
    int out = 1;
    for (Eigen::Index k = 0; k < d; ++k) out *= per_coord;
    return out;
}

// Sieve matrices for per-coordinate Psi dimension j.
SieveDesign make_design(const Dataset& data, const TestConfig& cfg, int j, int& K, Diagnostics* diag) {
    SieveDesign d;
    d.psi = eval_psi(cfg.psi, j, data.x, diag);
    const int J = static_cast<int>(d.psi.cols());
    const int kdim = per_coordinate_dim(cfg.kfactor * J, static_cast<int>(data.w.cols()), basis::min_dim(cfg.b));
    d.b = eval_instruments(cfg, kdim, data.w, diag);
    K = static_cast<int>(d.b.cols());
    d.omega = data.weights();
    return d;
}

double ratio_stat(double nD, double v) {
    if (v > 0.0) return nD / v;
    if (nD > 0.0) return kInf;
    if (nD < 0.0) return -kInf;
    return 0.0;
}

basis::ConstraintMatrix constraints_for(const NullSpec& null, const basis::BasisSpec& spec) {
    if (null.shape == basis::ShapeKind::Custom) {
        if (!null.custom_constraints) throw InputError("custom shape null needs a constraint generator");
        auto M = null.custom_constraints(spec);
        if (M.rows.cols() != spec.dim) throw InputError("custom constraint rows must have J columns");
        return M;
    }
    return basis::deriv_constraints(spec, null.shape);
}

basis::BasisSpec psi_spec_for(const TestConfig& cfg, int j, const Dataset& data) {
    basis::BasisSpec s = cfg.psi.with_dim(j);
    if (cfg.psi.knot_rule == basis::KnotRule::Quantile && s.family == basis::Family::BSpline) {
        const Vector col = data.x.col(0);
        s = basis::with_quantile_knots(s, std::span<const double>(col.data(), col.size()));
    }
    return s;
}

}  // namespace

NullSpec NullSpec::shape_null(basis::ShapeKind k) {
    NullSpec s;
    s.kind = Kind::Shape;
    s.shape = k;
    return s;
}

NullSpec NullSpec::parametric_null(ParametricModel m) {
    NullSpec s;
    s.kind = Kind::Parametric;
    s.model = m;
    return s;
}

NullSpec NullSpec::from_string(const std::string& s) {
    if (s == "linear" || s == "quadratic") return parametric_null(parametric_model_from_string(s));
    if (s == "decreasing" || s == "increasing" || s == "convex" || s == "concave")
        return shape_null(basis::shape_kind_from_string(s));
    throw InputError("unknown null '" + s + "' (expected decreasing|increasing|convex|concave|linear|quadratic)");
}

std::string NullSpec::name() const {
    return kind == Kind::Shape ? basis::to_string(shape) : to_string(model);
}

double TestReport::max_W() const {
    double m = -kInf;
    for (const auto& r : per_J) m = std::max(m, r.W);
    return m;
}

double compute_shat(const Matrix& psi, const Matrix& b, const Vector& omega, double rcond) {
    if (psi.rows() != b.rows() || omega.size() != psi.rows()) throw InputError("compute_shat: dimension mismatch");
    auto inv_sqrt_checked = [&](const Matrix& g, const char* name) {
        const Matrix s = linalg::checked_symmetric(g);
        Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
        const double lmax = es.eigenvalues().maxCoeff();
        const double rc = rcond > 0 ? rcond : linalg::default_rcond(g);
        if (!(lmax > 0.0) || es.eigenvalues().minCoeff() <= rc * lmax)
            throw NumericalError(std::string("compute_shat: gram ") + name + " is singular");
        return linalg::sym_inv_sqrt(s, rc);
    };
    const Matrix bb = inv_sqrt_checked(b.transpose() * b, "B'B");
    const Matrix gp = inv_sqrt_checked(psi.transpose() * omega.asDiagonal() * psi, "Psi'Omega Psi");
    const Matrix cross = bb * (b.transpose() * psi) * gp;
    const Vector s = linalg::svd(cross).singular_values;
    return s(s.size() - 1);
}

int instrument_dim(int J, int kfactor, int dw, int min_dim) {
    return total_dim(per_coordinate_dim(kfactor * J, dw, min_dim), dw);
}

CandidateGrid dyadic_skeleton(Eigen::Index n) {
    if (n < 20) throw InputError("need at least 20 observations (n=" + std::to_string(n) + ")");
    CandidateGrid g;
    const double nd = static_cast<double>(n);
    g.j_lower = std::max(1, static_cast<int>(std::floor(std::sqrt(std::log(std::log(nd))))));
    g.j_max_exponent = static_cast<int>(std::ceil(std::log2(std::cbrt(nd) / g.j_lower)));
    g.j_max_exponent = std::max(g.j_max_exponent, 0);
    for (int j = 0; j <= g.j_max_exponent; ++j) g.raw.push_back(g.j_lower << j);
    g.hard_cap = g.raw.back();
    return g;
}

CandidateGrid build_grid(const Dataset& data, const TestConfig& cfg, Diagnostics* diag) {
    data.validate();
    const Eigen::Index n = data.n();
    CandidateGrid g = dyadic_skeleton(n);
    g.mode = cfg.grid_mode;
    g.j_min = basis::min_dim(cfg.psi);
    const Eigen::Index dx = data.x.cols();
    const double nd = static_cast<double>(n);

    // Largest per-coordinate J whose instrument dimension still leaves n > K.
    auto feasible = [&](int j) {
        const int J = total_dim(j, dx);
        return nd > instrument_dim(J, cfg.kfactor, static_cast<int>(data.w.cols()), basis::min_dim(cfg.b));
    };

    const int scan_lo = std::max(g.j_lower + 1, g.j_min);
    const int scan_hi = std::max(g.hard_cap, g.j_min);
    g.J_max_hat = 0;
    int last_feasible = 0;
    for (int j = scan_lo; j <= scan_hi; ++j) {
        if (!feasible(j)) break;
        last_feasible = j;
        int K = 0;
        const SieveDesign d = make_design(data, cfg, j, K, nullptr);
        double s = 0.0;
        try {
            s = compute_shat(d.psi, d.b, d.omega, cfg.rcond);
        } catch (const NumericalError&) {
            s = 0.0;
        }
        g.shat.emplace_back(static_cast<int>(d.psi.cols()), s);
        const int J = static_cast<int>(d.psi.cols());
        const double z = basis::zeta(cfg.psi.family, J);
        if (1.5 * z * z * std::sqrt(std::log(static_cast<double>(J)) / nd) >= s) {
            g.J_max_hat = j;
            break;
        }
    }
    if (g.J_max_hat == 0) g.J_max_hat = last_feasible > 0 ? last_feasible : g.j_min;

    std::set<int> chosen;
    if (cfg.grid_mode == GridMode::Dyadic) {
        for (int r : g.raw) {
            const int j = std::max(r, g.j_min);
            if (j <= g.J_max_hat && feasible(j)) chosen.insert(j);
        }
    } else {
        if (cfg.explicit_grid.empty()) throw InputError("explicit grid is empty");
        for (int j : cfg.explicit_grid) {
            if (j < g.j_min) throw InputError("grid value " + std::to_string(j) + " below basis minimum " + std::to_string(g.j_min));
            if (!feasible(j)) throw InputError("grid value " + std::to_string(j) + " leaves too few observations for K = c J");
            if (!cfg.cap_explicit || j <= g.J_max_hat) chosen.insert(j);
        }
    }
    if (chosen.empty()) {
        const int fb = cfg.grid_mode == GridMode::Dyadic ? g.j_min
                                                         : *std::min_element(cfg.explicit_grid.begin(), cfg.explicit_grid.end());
        if (!feasible(fb)) throw InputError("sample too small for the smallest sieve dimension");
        chosen.insert(fb);
        g.fallback = true;
        if (diag) diag->warn("empirical upper bound below every candidate; grid falls back to {" + std::to_string(fb) + "}");
    }
    g.J_list.assign(chosen.begin(), chosen.end());
    return g;
}

double compute_D(const Vector& r, const NpivFit& fit) {
    const Eigen::Index n = fit.n();
    if (r.size() != n) throw InputError("compute_D: residual vector has the wrong length");
    const Matrix& L = fit.qpsi_factor;
    const Matrix& G = fit.gram_weighted;
    const Vector u = L.transpose() * r;
    const double quad = u.dot(G * u);
    const Matrix LG = L * G;
    double diag = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) diag += r(i) * r(i) * LG.row(i).dot(L.row(i));
    return (quad - diag) / static_cast<double>(n - 1);
}

double compute_vhat(const NpivFit& fit, const Vector& u) {
    if (u.size() != fit.n()) throw InputError("compute_vhat: residual vector has the wrong length");
    const Matrix& L = fit.qpsi_factor;
    const Matrix S = L.transpose() * u.cwiseAbs2().asDiagonal() * L;
    const Matrix root = linalg::sym_sqrt(fit.gram_weighted);
    return linalg::frobenius_norm(root * S * root);
}

int gamma_hat(const basis::ConstraintMatrix* M, const RestrictedFit& restricted, bool equality_null, int J) {
    if (equality_null) return J;
    if (!M || restricted.active_set.empty()) return 1;
    Matrix act(static_cast<Eigen::Index>(restricted.active_set.size()), M->rows.cols());
    for (std::size_t k = 0; k < restricted.active_set.size(); ++k)
        act.row(static_cast<Eigen::Index>(k)) = M->rows.row(restricted.active_set[k]);
    return std::max(1, linalg::rank(act, 1e-10));
}

double eta_hat(double alpha, int grid_size, int gamma) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    if (grid_size < 1) throw InputError("grid size must be >= 1");
    if (gamma < 1) throw InputError("gamma must be >= 1");
    const double q = dist::chisq_quantile(alpha / grid_size, gamma);
    return (q - gamma) / std::sqrt(static_cast<double>(gamma));
}

TestStatistics compute_statistics(const Dataset& data, const NullSpec& null, const TestConfig& cfg) {
    Diagnostics diag;
    TestStatistics st;
    st.null_name = null.name();
    st.n = data.n();
    st.grid = build_grid(data, cfg, &diag);
    if (null.kind == NullSpec::Kind::Shape && data.x.cols() != 1)
        throw InputError("shape nulls need a scalar regressor x");

    RestrictedFit parametric;
    if (null.kind == NullSpec::Kind::Parametric) {
        // One restricted fit for all J, with the richest instrument set of the grid.
        int K = 0;
        const SieveDesign d = make_design(data, cfg, st.grid.J_list.back(), K, nullptr);
        const Matrix design = parametric_design(null.model, data.x, null.custom_design);
        parametric = fit_restricted_parametric(data.y, design, d.b, null.name());
        st.restricted_parametric_beta = parametric.beta_r;
    }

    for (int j : st.grid.J_list) {
        PerJRecord rec;
        int K = 0;
        const SieveDesign d = make_design(data, cfg, j, K, &diag);
        rec.J = static_cast<int>(d.psi.cols());
        rec.K = K;
        NpivFit fit;
        try {
            fit = fit_unrestricted(data.y, d, cfg.rcond);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " [J=" + std::to_string(rec.J) + "]");
        }
        for (const auto& w : fit.warnings) diag.warn("J=" + std::to_string(rec.J) + ": " + w);
        rec.beta = fit.beta;
        for (const auto& [jj, s] : st.grid.shat)
            if (jj == rec.J) rec.shat = s;
        if (rec.shat == 0.0) {
            try {
                rec.shat = compute_shat(d.psi, d.b, d.omega, cfg.rcond);
            } catch (const NumericalError&) {
                rec.shat = 0.0;
            }
        }
        if (null.kind == NullSpec::Kind::Shape) {
            const basis::BasisSpec spec = psi_spec_for(cfg, j, data);
            const basis::ConstraintMatrix M = constraints_for(null, spec);
            RestrictedFit rf;
            try {
                rf = fit_restricted_cone(fit, data.y, M);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " [J=" + std::to_string(rec.J) + "]");
            }
            rec.D = compute_D(rf.residuals_r, fit);
            rec.gamma = gamma_hat(&M, rf, false, rec.J);
            rec.active_set = rf.active_set;
            rec.beta_r = rf.beta_r;
        } else {
            rec.D = compute_D(parametric.residuals_r, fit);
            rec.gamma = gamma_hat(nullptr, parametric, true, rec.J);
        }
        rec.v = compute_vhat(fit, fit.residuals);
        st.per_J.push_back(std::move(rec));
    }
    st.warnings = std::move(diag.warnings);
    return st;
}

TestReport decide(const TestStatistics& st, double alpha) {
    if (st.per_J.empty()) throw InputError("decide: no candidate dimensions");
    TestReport rep;
    rep.test_kind = st.test_kind;
    rep.null_name = st.null_name;
    rep.grid = st.grid;
    rep.alpha = alpha;
    rep.restricted_parametric_beta = st.restricted_parametric_beta;
    rep.warnings = st.warnings;
    const int size = static_cast<int>(st.per_J.size());
    rep.p_threshold = alpha / size;
    const double nd = static_cast<double>(st.n);
    rep.p_value = 1.0;
    for (PerJRecord rec : st.per_J) {
        rec.eta = eta_hat(alpha, size, rec.gamma);
        if (!(rec.eta > 0.0))
            throw InputError("critical value is not positive; alpha / #grid = " + std::to_string(alpha / size) +
                             " is too large");
        const double stat = ratio_stat(nd * rec.D, rec.v);
        rec.W = stat / rec.eta;
        const double g = static_cast<double>(rec.gamma);
        const double chi = std::sqrt(g) * stat + g;
        rec.p_value = std::isnan(chi) ? 1.0 : dist::chisq_sf(chi, rec.gamma);
        rep.p_value = std::min(rep.p_value, rec.p_value);
        rep.per_J.push_back(std::move(rec));
    }
    for (const auto& r : rep.per_J)
        if (r.W > 1.0) rep.J_selected_set.push_back(r.J);
    rep.reject = !rep.J_selected_set.empty();
    if (rep.reject) {
        rep.J_reported = rep.J_selected_set.front();
    } else {
        const PerJRecord* best = &rep.per_J.front();
        for (const auto& r : rep.per_J)
            if (r.W > best->W) best = &r;
        rep.J_reported = best->J;
        rep.J_selected_set = {best->J};
    }
    return rep;
}

TestReport adaptive_test(const Dataset& data, const NullSpec& null, double alpha, const TestConfig& cfg) {
    return decide(compute_statistics(data, null, cfg), alpha);
}

Vector Candidate::evaluate(const Matrix& x) const {
    switch (kind) {
        case Kind::Coefficients: {
            Matrix psi;
            if (x.cols() == 1) {
                const Vector col = x.col(0);
                psi = basis::eval_design(spec, std::span<const double>(col.data(), col.size()));
            } else {
                psi = eval_psi(spec, spec.dim, x);
            }
            if (psi.cols() != coefficients.size()) throw InputError("candidate coefficients do not match its basis");
            return psi * coefficients;
        }
        case Kind::Parametric: {
            const Matrix d = parametric_design(model, x);
            if (d.cols() != coefficients.size())
                throw InputError("candidate " + to_string(model) + " needs " + std::to_string(d.cols()) + " coefficients");
            return d * coefficients;
        }
        case Kind::Callable: {
            if (!fn) throw InputError("callable candidate is empty");
            if (x.cols() != 1) throw InputError("callable candidates need a scalar regressor");
            Vector out(x.rows());
            for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = fn(x(i, 0));
            return out;
        }
    }
    throw InputError("unknown candidate kind");
}

namespace {

void check_candidate_shape(const Candidate& h, const NullSpec& null, const TestConfig& cfg) {
    if (null.kind != NullSpec::Kind::Shape) return;
    if (h.kind == Candidate::Kind::Coefficients && h.spec.family == basis::Family::BSpline) {
        const basis::ConstraintMatrix M = constraints_for(null, h.spec);
        const Vector mv = M.rows * h.coefficients;
        if (mv.size() && mv.maxCoeff() > 1e-8 * (1.0 + h.coefficients.norm()))
            throw InputError("candidate violates the " + null.name() + " restriction");
        return;
    }
    if (null.shape == basis::ShapeKind::Custom) return;
    constexpr int kGrid = 1001;
    Matrix grid(kGrid, 1);
    for (int k = 0; k < kGrid; ++k) grid(k, 0) = cfg.psi.lo + (cfg.psi.hi - cfg.psi.lo) * k / (kGrid - 1);
    const Vector v = h.evaluate(grid);
    const double tol = 1e-9 * (1.0 + v.cwiseAbs().maxCoeff());
    bool ok = true;
    for (int k = 0; k + 1 < kGrid && ok; ++k) {
        const double d1 = v(k + 1) - v(k);
        if (null.shape == basis::ShapeKind::Decreasing && d1 > tol) ok = false;
        if (null.shape == basis::ShapeKind::Increasing && d1 < -tol) ok = false;
        if (k + 2 < kGrid) {
            const double d2 = v(k + 2) - 2 * v(k + 1) + v(k);
            if (null.shape == basis::ShapeKind::Convex && d2 < -tol) ok = false;
            if (null.shape == basis::ShapeKind::Concave && d2 > tol) ok = false;
        }
    }
    if (!ok) throw InputError("candidate violates the " + null.name() + " restriction");
}

}  // namespace

CsResult cs_contains(const Candidate& h, const Dataset& data, const NullSpec& null, double alpha, const TestConfig& cfg) {
    check_candidate_shape(h, null, cfg);
    const TestStatistics st = compute_statistics(data, null, cfg);
    const Vector resid = data.y - h.evaluate(data.x);
    const int size = static_cast<int>(st.grid.J_list.size());
    const double nd = static_cast<double>(data.n());
    CsResult out;
    out.max_ratio = -kInf;
    for (std::size_t idx = 0; idx < st.per_J.size(); ++idx) {
        PerJRecord rec = st.per_J[idx];
        int K = 0;
        const SieveDesign d = make_design(data, cfg, st.grid.J_list[idx], K, nullptr);
        const NpivFit fit = fit_unrestricted(data.y, d, cfg.rcond);
        rec.D = compute_D(resid, fit);
        rec.eta = eta_hat(alpha, size, rec.gamma);
        rec.W = ratio_stat(nd * rec.D, rec.v) / rec.eta;
        if (rec.W > out.max_ratio) {
            out.max_ratio = rec.W;
            out.binding_J = rec.J;
        }
        if (rec.W > 1.0) out.contained = false;
        out.per_J.push_back(std::move(rec));
    }
    return out;
}

TestStatistics compute_image_space_statistics(const Dataset& data, const NullSpec& null, const TestConfig& cfg) {
    if (null.kind != NullSpec::Kind::Parametric) throw InputError("the image-space test supports parametric nulls only");
    data.validate();
    Diagnostics diag;
    TestStatistics st;
    st.test_kind = "image_space";
    st.null_name = null.name();
    st.n = data.n();
    const Eigen::Index n = data.n();
    const double nd = static_cast<double>(n);
    const int dw = static_cast<int>(data.w.cols());
    CandidateGrid g = dyadic_skeleton(n);
    g.mode = cfg.grid_mode;
    g.j_min = basis::min_dim(cfg.b);
    const Vector omega = data.weights();

    auto kdim_total = [&](int k) { return total_dim(k, dw); };
    const int scan_lo = std::max(g.j_lower + 1, g.j_min);
    const int scan_hi = std::max(g.hard_cap, g.j_min);
    int last_feasible = 0;
    for (int k = scan_lo; k <= scan_hi; ++k) {
        const int K = kdim_total(k);
        if (nd <= K + 2) break;
        last_feasible = k;
        const Matrix b = eval_instruments(cfg, k, data.w, nullptr);
        Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(b.transpose() * b / nd), Eigen::EigenvaluesOnly);
        const double lmax = es.eigenvalues().maxCoeff();
        const double s = lmax > 0 ? 1.0 / std::sqrt(lmax) : 0.0;
        g.shat.emplace_back(K, s);
        const double z = basis::zeta(cfg.b.family, K);
        if (1.5 * z * z * std::sqrt(std::log(static_cast<double>(K)) / nd) >= s) {
            g.J_max_hat = k;
            break;
        }
    }
    if (g.J_max_hat == 0) g.J_max_hat = last_feasible > 0 ? last_feasible : g.j_min;
    std::set<int> chosen;
    if (cfg.grid_mode == GridMode::Dyadic) {
        for (int r : g.raw) {
            const int k = std::max(r, g.j_min);
            if (k <= g.J_max_hat && nd > kdim_total(k) + 2) chosen.insert(k);
        }
    } else {
        for (int k : cfg.explicit_grid) {
            if (k < g.j_min || nd <= kdim_total(k) + 2) throw InputError("invalid explicit instrument grid value");
            if (!cfg.cap_explicit || k <= g.J_max_hat) chosen.insert(k);
        }
    }
    if (chosen.empty()) {
        if (nd <= kdim_total(g.j_min) + 2) throw InputError("sample too small for the smallest instrument dimension");
        chosen.insert(g.j_min);
        g.fallback = true;
        diag.warn("instrument grid falls back to {" + std::to_string(g.j_min) + "}");
    }
    g.J_list.assign(chosen.begin(), chosen.end());
    st.grid = g;

    const Matrix design = parametric_design(null.model, data.x, null.custom_design);
    const Matrix b_rich = eval_instruments(cfg, g.J_list.back(), data.w, &diag);
    const RestrictedFit rf = fit_restricted_parametric(data.y, design, b_rich, null.name());
    st.restricted_parametric_beta = rf.beta_r;
    const Vector& r = rf.residuals_r;

    for (int k : g.J_list) {
        const Matrix b = eval_instruments(cfg, k, data.w, nullptr);
        const int K = static_cast<int>(b.cols());
        const Matrix btb = b.transpose() * b;
        const Matrix btb_inv = linalg::pinv(btb);
        const Vector btr = b.transpose() * r;
        const Matrix Bi = b * btb_inv;
        double diag_sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) diag_sum += r(i) * r(i) * Bi.row(i).dot(b.row(i));
        PerJRecord rec;
        rec.J = K;
        rec.K = K;
        rec.D = (btr.dot(btb_inv * btr) - diag_sum) / (nd - 1.0);
        const Matrix h = linalg::sym_inv_sqrt(btb, linalg::default_rcond(btb));
        const Matrix mid = b.transpose() * r.cwiseAbs2().asDiagonal() * b;
        rec.v = linalg::frobenius_norm(h * mid * h);
        rec.gamma = K;
        for (const auto& [kk, s] : g.shat)
            if (kk == K) rec.shat = s;
        st.per_J.push_back(std::move(rec));
    }
    st.warnings = std::move(diag.warnings);
    return st;
}

TestReport image_space_test(const Dataset& data, const NullSpec& null, double alpha, const TestConfig& cfg) {
    return decide(compute_image_space_statistics(data, null, cfg), alpha);
}

}  // namespace npiv
