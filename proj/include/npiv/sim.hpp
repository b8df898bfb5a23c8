#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "npiv/dgp.hpp"
#include "npiv/stat.hpp"

namespace npiv::sim {

enum class Mode { Size, Power, SizeAdjustedPower };
enum class TestKind { Structural, ImageSpace };

struct ExperimentSpec {
    dgp::Design design = dgp::Design::I;
    dgp::HSpec::Family h_family = dgp::HSpec::Family::Mono;
    std::vector<int> n_values{500};
    std::vector<double> xi_values{0.5};
    /// c0 for the mono family, cA otherwise.
    std::vector<double> c_values{1.0};
    double cB = 0.0;
    std::string null_name = "decreasing";
    TestKind test_kind = TestKind::Structural;
    std::vector<double> alphas{0.05};
    int replications = 1000;
    std::vector<int> kfactors{2};
    TestConfig base;  // basis, grid mode; kfactor is overridden per cell
    std::uint64_t master_seed = 20240601;
    Mode mode = Mode::Size;
    /// Parameter value on the null boundary used for size adjustment;
    /// defaults to a family-specific value (see null_boundary()).
    std::optional<double> null_c;
    int jobs = 1;
    /// Keep one record per replication in the summary.
    bool keep_replications = false;

    void validate() const;
    double null_boundary() const;
};

struct CellRecord {
    int n = 0;
    double xi = 0.0;
    double c = 0.0;
    double cB = 0.0;
    int kfactor = 2;
    double alpha = 0.05;
    double rejection_rate = 0.0;
    double se = 0.0;
    double avg_J_hat = 0.0;
    int replications = 0;
    int failures = 0;
    /// Size-adjusted mode only: empirical null quantile of max_J W_J.
    std::optional<double> adjusted_critical_value;
    std::optional<double> null_c;
    double seconds = 0.0;
};

struct ReplicationRecord {
    std::size_t cell = 0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    bool failed = false;
    bool reject = false;
    int J_hat = 0;
    double max_W = 0.0;
};

struct McSummary {
    ExperimentSpec spec;
    std::vector<CellRecord> cells;
    std::vector<ReplicationRecord> replications;
    std::string size_adjustment_rule;
};

McSummary run_size(const ExperimentSpec& spec);
McSummary run_power(const ExperimentSpec& spec);
/// Dispatch on spec.mode.
McSummary run(const ExperimentSpec& spec);

/// Seed of the independent null run used for size adjustment.
std::uint64_t null_run_seed(std::uint64_t master_seed);

/// Published number for one cell of a reproduced table, if tabulated.
struct ReferenceValue {
    double size = 0.0;
    std::optional<double> avg_J;
};

struct ReproRow {
    std::string label;
    CellRecord ours;
    std::optional<ReferenceValue> reference;
    std::string test_kind = "structural";
};

struct ReproResult {
    std::string table_id;
    std::string title;
    std::vector<ReproRow> rows;
};

struct ReproduceOptions {
    int replications = 1000;
    std::uint64_t seed = 20240601;
    int jobs = 1;
    /// Restrict to these sample sizes (empty = every size in the table).
    std::vector<int> n_values;
};

/// table_id in {T1, T2, F1, F2, supp-C, supp-D}.
ReproResult reproduce(const std::string& table_id, const ReproduceOptions& opts);
std::vector<std::string> table_ids();

/// Tabulated reference values (size, average J) keyed by cell.
std::optional<ReferenceValue> reference_value(const std::string& table_id, const std::string& test_kind, int n,
                                              double c, double xi, int kfactor, double alpha,
                                              const std::string& variant = "");

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);
std::string to_string(TestKind k);
TestKind test_kind_from_string(const std::string& s);

}  // namespace npiv::sim
