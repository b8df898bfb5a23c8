#include "npiv/dgp.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "npiv/error.hpp"

namespace npiv::dgp {

using dist::std_normal_cdf;

HSpec HSpec::mono(double c0) {
    if (!(c0 > 0.0)) throw InputError("c0 must be positive");
    HSpec h;
    h.family = Family::Mono;
    h.c0 = c0;
    return h;
}

HSpec HSpec::sin(double cA, double cB) {
    HSpec h;
    h.family = Family::Sin;
    h.cA = cA;
    h.cB = cB;
    return h;
}

HSpec HSpec::design2(double cA) {
    HSpec h;
    h.family = Family::Design2;
    h.cA = cA;
    return h;
}

HSpec HSpec::quad(double cA) {
    HSpec h;
    h.family = Family::Quad;
    h.cA = cA;
    return h;
}

double HSpec::operator()(double x) const {
    switch (family) {
        case Family::Mono: return h_mono(c0, x);
        case Family::Sin: return h_sin(cA, cB, x);
        case Family::Design2: return h_design2(cA, x);
        case Family::Quad: return h_quad(cA, x);
    }
    return 0.0;
}

std::string HSpec::describe() const {
    std::ostringstream os;
    os.precision(17);
    switch (family) {
        case Family::Mono: os << "mono(c0=" << c0 << ")"; break;
        case Family::Sin: os << "sin(cA=" << cA << ",cB=" << cB << ")"; break;
        case Family::Design2: os << "design2(cA=" << cA << ")"; break;
        case Family::Quad: os << "quad(cA=" << cA << ")"; break;
    }
    return os.str();
}

double h_mono(double c0, double x) {
    if (!(c0 > 0.0)) throw InputError("c0 must be positive");
    return c0 * (1.0 - 2.0 * std_normal_cdf((x - 0.5) / c0));
}

double h_sin(double cA, double cB, double x) {
    return -x / 5.0 + cA * (x * x + cB * std::sin(2.0 * std::numbers::pi * x));
}

double h_design2(double cA, double x) { return x / 5.0 + x * x + cA * std::sin(2.0 * std::numbers::pi * x); }

double h_quad(double cA, double x) { return -x / 5.0 + cA * x * x; }

double sin_null_boundary(double cB) { return 0.1 / (1.0 + std::numbers::pi * cB); }

namespace {

void check_common(const DesignConfig& cfg) {
    if (cfg.n < 1) throw InputError("sample size must be positive");
    if (!(cfg.xi > 0.0 && cfg.xi < 1.0)) throw InputError("xi must lie in (0, 1)");
}

Vector structural(const HSpec& h, const Vector& x) {
    Vector out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = h(x(i));
    return out;
}

Vector phi(const Vector& z) { return z.unaryExpr([](double v) { return std_normal_cdf(v); }); }

}  // namespace

GeneratedData gen_design1(const DesignConfig& cfg) {
    check_common(cfg);
    Matrix sigma(3, 3);
    sigma << 1.0, cfg.xi, 0.3, cfg.xi, 1.0, 0.0, 0.3, 0.0, 1.0;
    const auto cov = dist::CovarianceSpec::from_matrix(sigma);
    dist::RngStream rng(cfg.seed, cfg.stream);
    const Matrix z = dist::mvn_sample(cov, rng, cfg.n);
    GeneratedData g;
    g.config = cfg;
    g.data.x = phi(z.col(0));
    g.data.w = phi(z.col(1));
    g.data.y = structural(cfg.h, g.data.x.col(0)) + z.col(2);
    return g;
}

GeneratedData gen_design2(const DesignConfig& cfg) {
    check_common(cfg);
    dist::RngStream rng(cfg.seed, cfg.stream);
    const double a = std::sqrt(1.0 - cfg.xi * cfg.xi);
    const double b = std::sqrt(1.0 - 0.09);
    GeneratedData g;
    g.config = cfg;
    g.data.x.resize(cfg.n, 1);
    g.data.w.resize(cfg.n, 1);
    g.data.y.resize(cfg.n);
    for (int i = 0; i < cfg.n; ++i) {
        const double ws = rng.normal();
        const double eps = rng.normal();
        const double nu = rng.normal();
        const double x = std_normal_cdf(cfg.xi * ws + a * eps);
        g.data.x(i, 0) = x;
        g.data.w(i, 0) = std_normal_cdf(ws);
        g.data.y(i) = cfg.h(x) + (0.3 * eps + b * nu) / 2.0;
    }
    return g;
}

GeneratedData gen_multivariate(const DesignConfig& cfg) {
    check_common(cfg);
    Matrix sigma(4, 4);
    sigma << 1.0, cfg.xi, 0.4, 0.3,
             cfg.xi, 1.0, 0.0, 0.0,
             0.4, 0.0, 1.0, 0.0,
             0.3, 0.0, 0.0, 1.0;
    const auto cov = dist::CovarianceSpec::from_matrix(sigma);
    dist::RngStream rng(cfg.seed, cfg.stream);
    const Matrix z = dist::mvn_sample(cov, rng, cfg.n);
    GeneratedData g;
    g.config = cfg;
    g.data.x = phi(z.col(0));
    g.data.w.resize(cfg.n, 2);
    g.data.w.col(0) = phi(z.col(1));
    g.data.w.col(1) = phi(z.col(2));
    g.data.y = structural(cfg.h, g.data.x.col(0)) + z.col(3);
    return g;
}

GeneratedData generate(const DesignConfig& cfg) {
    switch (cfg.design) {
        case Design::I: return gen_design1(cfg);
        case Design::II: return gen_design2(cfg);
        case Design::Multivariate: return gen_multivariate(cfg);
    }
    throw InputError("unknown design");
}

std::string to_string(Design d) {
    switch (d) {
        case Design::I: return "I";
        case Design::II: return "II";
        case Design::Multivariate: return "multivariate";
    }
    return "?";
}

Design design_from_string(const std::string& s) {
    if (s == "I" || s == "1") return Design::I;
    if (s == "II" || s == "2") return Design::II;
    if (s == "multivariate") return Design::Multivariate;
    throw InputError("unknown design '" + s + "' (expected I|II|multivariate)");
}

}  // namespace npiv::dgp
