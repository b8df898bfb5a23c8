#pragma once

#include <cstdint>
#include <limits>

#include "npiv/linalg.hpp"

namespace npiv::dist {

double std_normal_cdf(double x);
double std_normal_pdf(double x);

/// Inverse of std_normal_cdf on (0, 1). Throws InputError outside.
double std_normal_quantile(double p);

/// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double chisq_cdf(double x, int k);
/// Upper tail P(chi2_k > x), computed without cancellation.
double chisq_sf(double x, int k);

/// q(a, k): the 100(1-a)% quantile of chi-square with k degrees of freedom.
double chisq_quantile(double a, int k);

/// Counter-based stream: draw i of stream (seed, id) is a pure function of
/// (seed, id, i), so replication r can be regenerated in isolation.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return next_u64(); }
    std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1).
    double uniform();
    double normal();

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream_id() const { return stream_id_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

struct CovarianceSpec {
    int dim = 0;
    linalg::Matrix matrix;

    /// Validates symmetry and positive semi-definiteness; throws InputError.
    static CovarianceSpec from_matrix(const linalg::Matrix& m);
};

/// n x dim matrix of N(0, cov) draws (one draw per row).
linalg::Matrix mvn_sample(const CovarianceSpec& cov, RngStream& rng, int n);

}  // namespace npiv::dist
