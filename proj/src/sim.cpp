#include "npiv/sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include "npiv/error.hpp"

namespace npiv::sim {

namespace {

struct Outcome {
    bool failed = false;
    std::vector<char> reject;   // per alpha
    std::vector<int> J_hat;     // per alpha
    std::vector<double> max_W;  // per alpha
};

struct CellParams {
    int n;
    double xi;
    double c;
    int kfactor;
};

dgp::HSpec make_h(const ExperimentSpec& spec, double c) {
    using F = dgp::HSpec::Family;
    switch (spec.h_family) {
        case F::Mono: return dgp::HSpec::mono(c);
        case F::Sin: return dgp::HSpec::sin(c, spec.cB);
        case F::Design2: return dgp::HSpec::design2(c);
        case F::Quad: return dgp::HSpec::quad(c);
    }
    throw InputError("unknown structural function family");
}

Outcome one_replication(const ExperimentSpec& spec, const NullSpec& null, const CellParams& p, std::uint64_t seed,
                        std::uint64_t stream) {
    dgp::DesignConfig dc;
    dc.design = spec.design;
    dc.n = p.n;
    dc.xi = p.xi;
    dc.h = make_h(spec, p.c);
    dc.seed = seed;
    dc.stream = stream;
    TestConfig cfg = spec.base;
    cfg.kfactor = p.kfactor;
    Outcome out;
    try {
        const dgp::GeneratedData g = dgp::generate(dc);
        const TestStatistics st = spec.test_kind == TestKind::Structural
                                      ? compute_statistics(g.data, null, cfg)
                                      : compute_image_space_statistics(g.data, null, cfg);
        for (double a : spec.alphas) {
            const TestReport rep = decide(st, a);
            out.reject.push_back(rep.reject ? 1 : 0);
            out.J_hat.push_back(rep.J_reported);
            out.max_W.push_back(rep.max_W());
        }
    } catch (const NumericalError&) {
        out = Outcome{};
        out.failed = true;
    }
    return out;
}

/// Runs reps replications in parallel; results are stored by index so the
/// output does not depend on scheduling.
std::vector<Outcome> run_cell(const ExperimentSpec& spec, const NullSpec& null, const CellParams& p, std::uint64_t seed) {
    std::vector<Outcome> out(static_cast<std::size_t>(spec.replications));
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= spec.replications) return;
            try {
                out[static_cast<std::size_t>(r)] = one_replication(spec, null, p, seed, static_cast<std::uint64_t>(r));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(spec.replications);
            }
        }
    };
    const int jobs = std::max(1, std::min(spec.jobs, spec.replications));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
    return out;
}

int count_failures(const std::vector<Outcome>& outs) {
    return static_cast<int>(std::count_if(outs.begin(), outs.end(), [](const Outcome& o) { return o.failed; }));
}

void check_failures(const std::vector<Outcome>& outs, const CellParams& p) {
    const int f = count_failures(outs);
    if (100 * f > static_cast<int>(outs.size()))
        throw NumericalError("cell n=" + std::to_string(p.n) + " xi=" + std::to_string(p.xi) + " c=" +
                             std::to_string(p.c) + ": " + std::to_string(f) + " of " + std::to_string(outs.size()) +
                             " replications failed");
}

/// Smallest q with empirical CDF(q) >= level.
double empirical_quantile(std::vector<double> v, double level) {
    std::sort(v.begin(), v.end());
    const double pos = std::ceil(level * static_cast<double>(v.size()) - 1e-12);
    const std::size_t idx = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(v.size()))) - 1;
    return v[idx];
}

McSummary run_impl(const ExperimentSpec& spec, bool adjusted) {
    spec.validate();
    const NullSpec null = NullSpec::from_string(spec.null_name);
    McSummary sum;
    sum.spec = spec;
    if (adjusted)
        sum.size_adjustment_rule =
            "critical value = empirical (1-alpha) quantile of max_J W_J from an independent null run at c = " +
            std::to_string(spec.null_boundary()) + " with equal replications";
    std::map<std::tuple<int, double, int>, std::vector<Outcome>> null_runs;
    std::size_t cell_index = 0;
    for (int kf : spec.kfactors)
        for (int n : spec.n_values)
            for (double xi : spec.xi_values)
                for (double c : spec.c_values) {
                    const auto t0 = std::chrono::steady_clock::now();
                    const CellParams p{n, xi, c, kf};
                    const auto outs = run_cell(spec, null, p, spec.master_seed);
                    check_failures(outs, p);
                    const std::vector<Outcome>* nulls = nullptr;
                    if (adjusted) {
                        auto key = std::make_tuple(n, xi, kf);
                        auto it = null_runs.find(key);
                        if (it == null_runs.end()) {
                            const CellParams np{n, xi, spec.null_boundary(), kf};
                            auto nouts = run_cell(spec, null, np, null_run_seed(spec.master_seed));
                            check_failures(nouts, np);
                            it = null_runs.emplace(key, std::move(nouts)).first;
                        }
                        nulls = &it->second;
                    }
                    const double secs =
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                    for (std::size_t ai = 0; ai < spec.alphas.size(); ++ai) {
                        CellRecord rec;
                        rec.n = n;
                        rec.xi = xi;
                        rec.c = c;
                        rec.cB = spec.cB;
                        rec.kfactor = kf;
                        rec.alpha = spec.alphas[ai];
                        rec.failures = count_failures(outs);
                        rec.replications = spec.replications - rec.failures;
                        rec.seconds = secs;
                        double cv = 0.0;
                        if (nulls) {
                            std::vector<double> w;
                            for (const auto& o : *nulls)
                                if (!o.failed) w.push_back(o.max_W[ai]);
                            cv = empirical_quantile(std::move(w), 1.0 - rec.alpha);
                            rec.adjusted_critical_value = cv;
                            rec.null_c = spec.null_boundary();
                        }
                        int rej = 0;
                        double jsum = 0.0;
                        for (std::size_t r = 0; r < outs.size(); ++r) {
                            const Outcome& o = outs[r];
                            if (!o.failed) {
                                const bool reject = nulls ? o.max_W[ai] > cv : o.reject[ai] != 0;
                                rej += reject ? 1 : 0;
                                jsum += o.J_hat[ai];
                            }
                            if (spec.keep_replications) {
                                ReplicationRecord rr;
                                rr.cell = cell_index;
                                rr.seed = spec.master_seed;
                                rr.stream = r;
                                rr.failed = o.failed;
                                if (!o.failed) {
                                    rr.reject = nulls ? o.max_W[ai] > cv : o.reject[ai] != 0;
                                    rr.J_hat = o.J_hat[ai];
                                    rr.max_W = o.max_W[ai];
                                }
                                sum.replications.push_back(rr);
                            }
                        }
                        const double R = std::max(1, rec.replications);
                        rec.rejection_rate = rej / R;
                        rec.se = std::sqrt(rec.rejection_rate * (1.0 - rec.rejection_rate) / R);
                        rec.avg_J_hat = jsum / R;
                        sum.cells.push_back(rec);
                        ++cell_index;
                    }
                }
    return sum;
}

}  // namespace

void ExperimentSpec::validate() const {
    if (replications < 1) throw InputError("replications must be >= 1");
    if (n_values.empty() || xi_values.empty() || c_values.empty() || alphas.empty() || kfactors.empty())
        throw InputError("experiment grids must be non-empty");
    for (int n : n_values)
        if (n < 20) throw InputError("sample sizes must be >= 20");
    for (double xi : xi_values)
        if (!(xi > 0.0 && xi < 1.0)) throw InputError("xi must lie in (0, 1)");
    for (double a : alphas)
        if (!(a > 0.0 && a < 1.0)) throw InputError("alpha must lie in (0, 1)");
    for (int k : kfactors)
        if (k < 1) throw InputError("K factor must be >= 1");
    if (h_family == dgp::HSpec::Family::Mono)
        for (double c : c_values)
            if (!(c > 0.0)) throw InputError("c0 must be positive");
    if (jobs < 1) throw InputError("jobs must be >= 1");
    NullSpec::from_string(null_name);
}

double ExperimentSpec::null_boundary() const {
    if (null_c) return *null_c;
    const NullSpec null = NullSpec::from_string(null_name);
    using F = dgp::HSpec::Family;
    if (null.kind == NullSpec::Kind::Parametric) return 0.0;
    switch (h_family) {
        case F::Sin: return dgp::sin_null_boundary(cB);
        case F::Design2: return 0.184;
        case F::Quad: return 0.0;
        case F::Mono: break;
    }
    throw InputError("size adjustment needs an explicit null parameter for this structural function family");
}

std::uint64_t null_run_seed(std::uint64_t master_seed) { return master_seed ^ 0x6e756c6c72756e00ULL; }

McSummary run_size(const ExperimentSpec& spec) { return run_impl(spec, false); }

McSummary run_power(const ExperimentSpec& spec) { return run_impl(spec, spec.mode == Mode::SizeAdjustedPower); }

McSummary run(const ExperimentSpec& spec) { return spec.mode == Mode::Size ? run_size(spec) : run_power(spec); }

std::string to_string(Mode m) {
    switch (m) {
        case Mode::Size: return "size";
        case Mode::Power: return "power";
        case Mode::SizeAdjustedPower: return "size_adjusted_power";
    }
    return "?";
}

Mode mode_from_string(const std::string& s) {
    if (s == "size") return Mode::Size;
    if (s == "power") return Mode::Power;
    if (s == "size_adjusted_power") return Mode::SizeAdjustedPower;
    throw InputError("unknown mode '" + s + "' (expected size|power|size_adjusted_power)");
}

std::string to_string(TestKind k) { return k == TestKind::Structural ? "structural" : "image_space"; }

TestKind test_kind_from_string(const std::string& s) {
    if (s == "structural") return TestKind::Structural;
    if (s == "image_space") return TestKind::ImageSpace;
    throw InputError("unknown test kind '" + s + "' (expected structural|image_space)");
}

}  // namespace npiv::sim
