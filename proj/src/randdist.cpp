#include "npiv/randdist.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "npiv/error.hpp"

namespace npiv::dist {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

double gamma_p_series(double a, double x) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int it = 0; it < 100000; ++it) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-17) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
double gamma_q_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 100000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-17) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

void check_gamma_args(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0) || !std::isfinite(a)) throw InputError("incomplete gamma: need a > 0, x >= 0");
}

double chisq_pdf(double x, int k) {
    if (x <= 0.0) return 0.0;
    const double h = 0.5 * k;
    return std::exp((h - 1.0) * std::log(x) - 0.5 * x - h * std::numbers::ln2 - std::lgamma(h));
}

std::uint64_t splitmix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InputError("std_normal_quantile: p must lie in (0, 1)");
    // Acklam's rational approximation, then Halley refinement against erfc.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    for (int it = 0; it < 2; ++it) {
        // Phi(x) - p, evaluated in the smaller tail.
        const double e = (x < 0.0) ? std_normal_cdf(x) - p : (1.0 - p) - 0.5 * std::erfc(x / kSqrt2);
        const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

double gamma_p(double a, double x) {
    check_gamma_args(a, x);
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_fraction(a, x);
}

double gamma_q(double a, double x) {
    check_gamma_args(a, x);
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_fraction(a, x);
}

double chisq_cdf(double x, int k) {
    if (k < 1) throw InputError("chisq_cdf: degrees of freedom must be >= 1");
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return gamma_p(0.5 * k, 0.5 * x);
}

double chisq_sf(double x, int k) {
    if (k < 1) throw InputError("chisq_sf: degrees of freedom must be >= 1");
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return gamma_q(0.5 * k, 0.5 * x);
}

double chisq_quantile(double a, int k) {
    if (!(a > 0.0 && a < 1.0)) throw InputError("chisq_quantile: a must lie in (0, 1)");
    if (k < 1) throw InputError("chisq_quantile: degrees of freedom must be >= 1");

    // Root of g(x) = tail(x) - target, solved on whichever tail is smaller.
    const bool upper = a < 0.5;
    const double target = upper ? a : 1.0 - a;
    auto g = [&](double x) { return upper ? chisq_sf(x, k) - target : chisq_cdf(x, k) - target; };
    // g is decreasing in x for the upper tail, increasing for the lower.
    const double sign = upper ? -1.0 : 1.0;

    // Wilson-Hilferty start.
    const double z = std_normal_quantile(1.0 - a);
    const double t = 2.0 / (9.0 * k);
    double x = k * std::pow(std::max(1.0 - t + z * std::sqrt(t), 1e-3), 3.0);

    double lo = 0.0;
    double hi = std::max(2.0 * x, 1.0);
    while (sign * g(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e8) throw NumericalError("chisq_quantile: failed to bracket root");
    }
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);

    for (int it = 0; it < 200; ++it) {
        const double gx = g(x);
        if (gx == 0.0) return x;
        if (sign * gx < 0.0) lo = x; else hi = x;
        const double deriv = sign * chisq_pdf(x, k);
        double next = (deriv != 0.0) ? x - gx / deriv : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - x) <= 1e-15 * std::max(1.0, x)) return next;
        x = next;
        if (hi - lo <= 1e-15 * std::max(1.0, hi)) return x;
    }
    return x;
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed),
      stream_id_(stream_id),
      key_(splitmix(master_seed ^ splitmix(stream_id ^ 0x6a09e667f3bcc909ULL))) {}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t out = splitmix(key_ + 0x9e3779b97f4a7c15ULL * counter_);
    ++counter_;
    return out;
}

double RngStream::uniform() {
    // 53 random bits shifted by half an ulp so 0 and 1 are never produced.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_normal_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
}

CovarianceSpec CovarianceSpec::from_matrix(const linalg::Matrix& m) {
    if (m.rows() < 1 || m.rows() != m.cols()) throw InputError("covariance must be a non-empty square matrix");
    if (!m.allFinite()) throw InputError("covariance has non-finite entries");
    const linalg::Matrix s = linalg::checked_symmetric(m);
    Eigen::SelfAdjointEigenSolver<linalg::Matrix> es(s, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, es.eigenvalues().maxCoeff()))
        throw InputError("covariance matrix is not positive semi-definite");
    return CovarianceSpec{static_cast<int>(m.rows()), s};
}

linalg::Matrix mvn_sample(const CovarianceSpec& cov, RngStream& rng, int n) {
    if (n < 0) throw InputError("mvn_sample: negative sample size");
    Eigen::LDLT<linalg::Matrix> ldlt(cov.matrix);
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() < -1e-12).any())
        throw InputError("mvn_sample: covariance is not factorizable");
    // Lower factor L with L L' = cov, including the pivoting.
    const linalg::Vector dsqrt = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    linalg::Matrix L = ldlt.matrixL();
    L = ldlt.transpositionsP().transpose() * (L * dsqrt.asDiagonal());

    linalg::Matrix out(n, cov.dim);
    linalg::Vector z(cov.dim);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < cov.dim; ++j) z(j) = rng.normal();
        out.row(i) = (L * z).transpose();
    }
    return out;
}

}  // namespace npiv::dist
