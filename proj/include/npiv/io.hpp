#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "npiv/sim.hpp"
#include "npiv/stat.hpp"

namespace npiv::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Reads y, x|x1..xd, w|w1..wd and optional mu columns. Throws InputError
/// naming the offending line on malformed input.
Dataset read_csv(std::istream& in, const std::string& source = "<stdin>");
Dataset read_csv_file(const std::string& path);

/// Resolved settings for `test` and `cs`.
struct RunConfig {
    std::string null_name = "decreasing";
    double alpha = 0.05;
    std::string basis = "bspline2";
    std::string grid = "dyadic";  // or a comma-separated list of J values
    bool cap_grid = false;         // explicit lists only: drop J above the empirical bound
    int kfactor = 4;
    std::uint64_t seed = 0;
    std::string test_kind = "structural";  // or image_space
    double support_lo = 0.0;
    double support_hi = 1.0;
    std::string knots = "equispaced";  // or quantile

    void validate() const;
    TestConfig to_test_config() const;
};

json to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys are an error.
RunConfig run_config_from_json(const json& j);
RunConfig read_run_config_file(const std::string& path);

/// Basis template from a name in {bspline2, bspline3, cosine, power}.
basis::BasisSpec basis_from_name(const std::string& name, double lo = 0.0, double hi = 1.0);
std::vector<int> parse_grid_list(const std::string& s);

json to_json(const TestReport& r, const RunConfig& cfg, Eigen::Index n);
void write_text(std::ostream& os, const TestReport& r);
void write_csv(std::ostream& os, const TestReport& r);

/// Candidate file for `cs`: {"candidates": [...]} with coefficient or parametric entries.
std::vector<Candidate> read_candidates(const json& j, const RunConfig& cfg);
std::vector<Candidate> read_candidates_file(const std::string& path, const RunConfig& cfg);
json to_json(const std::vector<std::pair<Candidate, CsResult>>& results, const RunConfig& cfg, Eigen::Index n);
void write_text(std::ostream& os, const std::vector<std::pair<Candidate, CsResult>>& results);
void write_csv(std::ostream& os, const std::vector<std::pair<Candidate, CsResult>>& results);

json to_json(const sim::ExperimentSpec& s);
sim::ExperimentSpec experiment_spec_from_json(const json& j);
json to_json(const sim::McSummary& s);
void write_csv(std::ostream& os, const sim::McSummary& s);
void write_text(std::ostream& os, const sim::McSummary& s);

json to_json(const sim::ReproResult& r);
void write_csv(std::ostream& os, const sim::ReproResult& r);
void write_text(std::ostream& os, const sim::ReproResult& r);

/// Finite doubles as numbers, non-finite as null.
json number(double v);

}  // namespace npiv::io
